"""Moments of free semicircular families by non-crossing pair partitions.

Scalar mixed moments ``τ(s_{j_1} ... s_{j_q})`` of a free semicircular family
count the non-crossing pairings of ``{1..q}`` that only pair equal letters.
Operator-valued moments replace the count by nested applications of a
covariance map ``η``: pairing the first letter with position ``r`` splits a
word into an inside and an outside part, and

    M(ℓ w) = Σ_{r : w_r = ℓ} η_ℓ(M(inside)) M(outside),    M(∅) = I.

Both recursions are memoized over subword intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, SizeLimitError

__all__ = [
    "CovarianceMap",
    "NCPolynomial",
    "catalan",
    "enumerate_nc_pairings",
    "is_non_crossing",
    "semicircular_word_moment",
    "opval_word_moment",
    "xfree_moment",
    "polynomial_moment",
    "polynomial_norm_estimate",
    "s_j_covariance",
    "PAIRING_MAX_LENGTH",
    "OPVAL_MAX_LENGTH",
    "MAX_EXPANDED_WORDS",
]

PAIRING_MAX_LENGTH = 16
OPVAL_MAX_LENGTH = 12
MAX_EXPANDED_WORDS = 10**6


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def is_non_crossing(pairs) -> bool:
    """True when no two pairs ``{a, c}``, ``{b, d}`` satisfy ``a < b < c < d``."""
    spans = [tuple(sorted(p)) for p in pairs]
    for a, c in spans:
        for b, d in spans:
            if a < b < c < d:
                return False
    return True


def enumerate_nc_pairings(q: int):
    """All non-crossing pairings of ``{1..q}`` as sorted tuples of pairs.

    Odd ``q`` has none and returns an empty list; ``q = 0`` has the empty pairing.
    """
    q = int(q)
    if q < 0:
        raise InvalidArgumentError(f"q must be nonnegative, got {q}")
    if q > PAIRING_MAX_LENGTH:
        raise SizeLimitError(f"q={q} exceeds pairing cap {PAIRING_MAX_LENGTH}")
    if q % 2:
        return []
    return [tuple(sorted(p)) for p in _nc_pairings(1, q)]


@lru_cache(maxsize=None)
def _nc_pairings(lo, hi):
    if lo > hi:
        return ((),)
    out = []
    # lo pairs with r; the inside (lo, r) and outside (r, hi] must both have even length
    for r in range(lo + 1, hi + 1, 2):
        for inner in _nc_pairings(lo + 1, r - 1):
            for outer in _nc_pairings(r + 1, hi):
                out.append(((lo, r),) + inner + outer)
    return tuple(out)


def _as_word(word) -> tuple[int, ...]:
    word = tuple(int(x) for x in word)
    if any(x < 1 for x in word):
        raise InvalidArgumentError(f"letters are 1-based positive integers, got {word}")
    return word


def semicircular_word_moment(word) -> int:
    """``τ(s_{w_1} ... s_{w_q})`` for free standard semicircular ``s_1, s_2, ...``."""
    w = _as_word(word)
    if len(w) % 2:
        return 0
    return _scalar_moment(w)


@lru_cache(maxsize=65536)
def _scalar_moment(w):
    if not w:
        return 1
    head, rest = w[0], w[1:]
    total = 0
    for r in range(0, len(rest), 2):
        if rest[r] == head:
            inner = _scalar_moment(rest[:r])
            if inner:
                total += inner * _scalar_moment(rest[r + 1 :])
    return total


@dataclass(frozen=True, eq=False)
class CovarianceMap:
    """Completely positive map ``η(M) = Σ_j K_j M K_j`` with Hermitian ``K_j``."""

    coeffs: np.ndarray
    _eta_identity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        K = np.asarray(self.coeffs, dtype=complex)
        if K.ndim == 2:
            K = K[None]
        if K.ndim != 3 or K.shape[1] != K.shape[2] or K.shape[0] == 0:
            raise InvalidArgumentError(f"coefficients must be a stack of square matrices, got {K.shape}")
        if np.max(np.abs(K - np.conj(np.swapaxes(K, 1, 2)))) > 1e-12 * max(1.0, np.max(np.abs(K))):
            raise InvalidArgumentError("covariance coefficients must be Hermitian")
        K.flags.writeable = False
        object.__setattr__(self, "coeffs", K)
        eye = self(np.eye(K.shape[1]))
        eye.flags.writeable = False
        object.__setattr__(self, "_eta_identity", eye)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def eta_identity(self):
        return self._eta_identity

    def __call__(self, M):
        return np.einsum("jab,bc,jcd->ad", self.coeffs, np.asarray(M), self.coeffs)


def opval_word_moment(word, eta: Mapping[int, CovarianceMap]):
    """Matrix-valued moment of the word in operator-valued semicircular elements.

    ``eta`` maps each letter to its covariance; all maps share one dimension
    ``p`` and the result is ``p × p``. Its normalized trace is
    ``(tr ⊗ τ)`` of the word.
    """
    w = _as_word(word)
    if len(w) > OPVAL_MAX_LENGTH:
        raise SizeLimitError(f"word length {len(w)} exceeds cap {OPVAL_MAX_LENGTH}")
    missing = set(w) - set(eta)
    if missing:
        raise InvalidArgumentError(f"no covariance map for letters {sorted(missing)}")
    dims = {eta[x].dim for x in set(w)} or {next(iter(eta.values())).dim}
    if len(dims) != 1:
        raise InvalidArgumentError(f"covariance maps have different dimensions {sorted(dims)}")
    p = dims.pop()
    eye = np.eye(p, dtype=complex)
    memo = {}

    def M(lo, hi):
        # moment of w[lo:hi]
        if lo >= hi:
            return eye
        if (hi - lo) % 2:
            return np.zeros((p, p), dtype=complex)
        key = (lo, hi)
        if key not in memo:
            head = w[lo]
            acc = np.zeros((p, p), dtype=complex)
            for r in range(lo + 1, hi, 2):
                if w[r] == head:
                    acc += eta[head](M(lo + 1, r)) @ M(r + 1, hi)
            memo[key] = acc
        return memo[key]

    return M(0, len(w))


def _normalized_trace(M):
    return complex(np.trace(M)) / M.shape[0]


def xfree_moment(coeffs, p) -> float:
    """``(tr ⊗ τ)(X_free^p)`` for ``X_free = Σ_i B_i ⊗ s_i`` with free semicircular ``s_i``.

    Uses the single covariance ``η(M) = Σ_i B_i M B_i`` on the constant word.
    """
    p = int(p)
    if p < 0:
        raise InvalidArgumentError(f"p must be nonnegative, got {p}")
    if p > OPVAL_MAX_LENGTH:
        raise SizeLimitError(f"moment order {p} exceeds cap {OPVAL_MAX_LENGTH}")
    eta = CovarianceMap(np.asarray(coeffs, dtype=complex))
    return _normalized_trace(opval_word_moment((1,) * p, {1: eta})).real


def s_j_covariance(J, N=2, m=None):
    """Covariance of ``S_J ⊗̃_J I``: the basis of ``M_{N^{|J|}}`` scaled by ``N^{-|J|/2}``.

    With ``m=None`` (or ``m == |J|``) this is the bare ``S_J``; otherwise the
    basis elements are embedded on legs ``J`` of ``(C^N)^{⊗m}``.
    """
    from .gue_ensemble import hermitian_basis
    from .tensor_core import LegSubset, embed_legs

    if not isinstance(J, LegSubset):
        legs = tuple(sorted(int(a) for a in J))
        J = LegSubset(m if m is not None else max(legs), legs)
    n = N ** len(J)
    scale = n**-0.5
    coeffs = [scale * embed_legs(A, J, N) for A in hermitian_basis(n)]
    return CovarianceMap(np.array(coeffs))


def _canonical_terms(items):
    acc = {}
    for c, w in items:
        w = _as_word(w)
        acc[w] = acc.get(w, 0) + complex(c)
    return tuple((c, w) for w, c in sorted(acc.items()) if c != 0)


class NCPolynomial:
    """Finite complex combination of words in self-adjoint letters ``x_1, x_2, ...``.

    >>> x1, x2 = NCPolynomial.variable(1), NCPolynomial.variable(2)
    >>> ((x1 + x2) ** 2).degree
    2
    """

    def __init__(self, terms: Sequence[tuple[complex, Sequence[int]]] = ()):
        self.terms = _canonical_terms(terms)

    @classmethod
    def variable(cls, i):
        return cls([(1, (i,))])

    @classmethod
    def constant(cls, c):
        return cls([(c, ())])

    @property
    def degree(self) -> int:
        return max((len(w) for _, w in self.terms), default=0)

    @property
    def letters(self):
        return sorted({x for _, w in self.terms for x in w})

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"NCPolynomial({list(self.terms)!r})"

    def __eq__(self, other):
        return isinstance(other, NCPolynomial) and self.terms == other.terms

    def __add__(self, other):
        other = other if isinstance(other, NCPolynomial) else NCPolynomial.constant(other)
        return NCPolynomial(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return NCPolynomial([(-c, w) for c, w in self.terms])

    def __sub__(self, other):
        return self + (-other if isinstance(other, NCPolynomial) else -complex(other))

    def __mul__(self, other):
        if not isinstance(other, NCPolynomial):
            return NCPolynomial([(complex(other) * c, w) for c, w in self.terms])
        n = len(self.terms) * len(other.terms)
        if n > MAX_EXPANDED_WORDS:
            raise SizeLimitError(f"product expands to {n} words (cap {MAX_EXPANDED_WORDS})")
        return NCPolynomial([(a * b, u + v) for a, u in self.terms for b, v in other.terms])

    def __rmul__(self, other):
        return self * other

    def __pow__(self, n):
        out = NCPolynomial.constant(1)
        for _ in range(int(n)):
            out = out * self
        return out

    def adjoint(self):
        """``P*``: conjugate coefficients and reverse words."""
        return NCPolynomial([(np.conj(c), w[::-1]) for c, w in self.terms])

    def is_self_adjoint(self, tol=1e-12) -> bool:
        diff = self - self.adjoint()
        return all(abs(c) <= tol for c, _ in diff.terms)

    def evaluate(self, matrices):
        """``P(X_1, ..., X_k)`` for square matrices; letter ``i`` is ``matrices[i-1]``."""
        mats = [np.asarray(X) for X in matrices]
        if not mats:
            raise InvalidArgumentError("need at least one matrix")
        n = mats[0].shape[0]
        if any(X.shape != (n, n) for X in mats):
            raise InvalidArgumentError("all matrices must be square of one size")
        if self.letters and self.letters[-1] > len(mats):
            raise InvalidArgumentError(f"polynomial uses letter {self.letters[-1]}, got {len(mats)} matrices")
        out = np.zeros((n, n), dtype=complex)
        cache = {(): np.eye(n, dtype=complex)}
        for c, w in self.terms:
            # words are sorted, so every proper prefix of w is usually already cached
            for cut in range(len(w), -1, -1):
                if w[:cut] in cache:
                    break
            prod = cache[w[:cut]]
            for j in range(cut, len(w)):
                prod = prod @ mats[w[j] - 1]
                cache[w[: j + 1]] = prod
            out += c * prod
        return out

    def to_json(self):
        return [{"coeff": [float(np.real(c)), float(np.imag(c))], "word": list(w)} for c, w in self.terms]

    @classmethod
    def from_json(cls, items):
        terms = []
        for item in items:
            c = item["coeff"]
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            terms.append((c, tuple(item["word"])))
        return cls(terms)


def polynomial_moment(P: NCPolynomial) -> complex:
    """``τ(P(s_1, ..., s_k))`` for a free standard semicircular family."""
    if len(P) > MAX_EXPANDED_WORDS:
        raise SizeLimitError(f"{len(P)} words exceed cap {MAX_EXPANDED_WORDS}")
    return complex(sum(c * semicircular_word_moment(w) for c, w in P.terms))


def polynomial_norm_estimate(P: NCPolynomial, r: int) -> float:
    """``τ((P*P)^{r/2})^{1/r}``, a lower bound for ``‖P(s_1, ..., s_k)‖`` increasing in ``r``."""
    r = int(r)
    if r < 2 or r % 2:
        raise InvalidArgumentError(f"r must be a positive even integer, got {r}")
    Q = P.adjoint() * P
    acc = NCPolynomial.constant(1)
    for _ in range(r // 2):
        acc = acc * Q
        if len(acc) > MAX_EXPANDED_WORDS:
            raise SizeLimitError(f"expansion reached {len(acc)} words (cap {MAX_EXPANDED_WORDS})")
    value = polynomial_moment(acc).real
    return max(value, 0.0) ** (1.0 / r)

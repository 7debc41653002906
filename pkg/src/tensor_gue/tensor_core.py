"""Leg-permutation calculus on ``(C^N)^{⊗m}``.

Indices of ``C^{N^m}`` are mixed-radix numbers with leg 1 as the most
significant digit, which is the layout produced by ``numpy.kron``. Leg
permutations are stored as index maps (:class:`IndexPermutation`) and applied
by relabelling; no dense permutation matrix is ever formed.

Permutations of ``[m]`` are passed as 1-based sequences: ``sigma[l - 1]`` is
``sigma(l)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "LegSubset",
    "IndexPermutation",
    "as_hermitian",
    "leg_index_permutation",
    "conjugate_legs",
    "leg_placement",
    "tilde_otimes",
    "embed_legs",
    "vectorize",
    "vectorization_permutation",
    "matrix_cauchy_schwarz_gap",
]

HERMITIAN_TOL = 1e-12


def as_hermitian(A, tol=HERMITIAN_TOL, name="matrix"):
    """Validate ``A`` as a finite Hermitian matrix and return it as complex128.

    The tolerance is relative to ``max(1, max|A_ij|)``. The returned matrix is
    exactly Hermitian (symmetrized, diagonal made real).
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidArgumentError(f"{name} must be a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.conj().T)) > tol * scale:
        raise InvalidArgumentError(f"{name} is not Hermitian within {tol:g}")
    return 0.5 * (A + A.conj().T)


def _check_square(X, n, name="X"):
    X = np.asarray(X)
    if X.shape != (n, n):
        raise InvalidArgumentError(f"{name} must have shape ({n}, {n}), got {X.shape}")
    return X


def _check_sigma(sigma, m):
    sigma = tuple(int(s) for s in sigma)
    if len(sigma) != m or sorted(sigma) != list(range(1, m + 1)):
        raise InvalidArgumentError(f"sigma={sigma} is not a permutation of 1..{m}")
    return sigma


def _check_dims(N, m):
    if int(N) < 1 or int(m) < 1:
        raise InvalidArgumentError(f"need N >= 1 and m >= 1, got N={N}, m={m}")
    return int(N), int(m)


@dataclass(frozen=True)
class LegSubset:
    """An ascending, nonempty subset ``J`` of ``{1, ..., m}``."""

    m: int
    legs: tuple[int, ...]

    def __post_init__(self):
        legs = tuple(int(a) for a in self.legs)
        object.__setattr__(self, "legs", legs)
        if self.m < 1:
            raise InvalidArgumentError(f"m must be positive, got {self.m}")
        if not legs:
            raise InvalidArgumentError("leg subset must be nonempty")
        if any(b <= a for a, b in zip(legs, legs[1:])):
            raise InvalidArgumentError(f"legs must be strictly increasing, got {legs}")
        if legs[0] < 1 or legs[-1] > self.m:
            raise InvalidArgumentError(f"legs must lie in [1, {self.m}], got {legs}")

    @classmethod
    def of(cls, legs: Sequence[int], m: int) -> "LegSubset":
        """Build from any iterable of legs; duplicates are rejected, order is normalized."""
        legs = [int(a) for a in legs]
        if len(set(legs)) != len(legs):
            raise InvalidArgumentError(f"duplicate legs in {legs}")
        return cls(m, tuple(sorted(legs)))

    def __len__(self):
        return len(self.legs)

    @property
    def complement(self) -> tuple[int, ...]:
        return tuple(a for a in range(1, self.m + 1) if a not in self.legs)


@dataclass(frozen=True, eq=False)
class IndexPermutation:
    """A bijection of ``{0, ..., size-1}`` acting on basis vectors: ``e_i -> e_{map[i]}``."""

    map: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.map, dtype=np.int64)
        if perm.ndim != 1 or perm.size == 0:
            raise InvalidArgumentError("index map must be a nonempty 1-d array")
        inv = np.full(perm.size, -1, dtype=np.int64)
        if perm.min() < 0 or perm.max() >= perm.size:
            raise InvalidArgumentError("index map is not a bijection")
        inv[perm] = np.arange(perm.size)
        if np.any(inv < 0):
            raise InvalidArgumentError("index map is not a bijection")
        perm.flags.writeable = False
        inv.flags.writeable = False
        object.__setattr__(self, "map", perm)
        object.__setattr__(self, "_inv", inv)

    @property
    def size(self) -> int:
        return self.map.size

    def inverse(self) -> "IndexPermutation":
        return IndexPermutation(self._inv)

    def compose(self, other: "IndexPermutation") -> "IndexPermutation":
        """``self ∘ other``: apply ``other`` first."""
        if other.size != self.size:
            raise InvalidArgumentError("cannot compose permutations of different sizes")
        return IndexPermutation(self.map[other.map])

    def apply(self, v):
        """Apply the permutation matrix to ``v`` along its first axis."""
        v = np.asarray(v)
        if v.shape[0] != self.size:
            raise InvalidArgumentError(f"vector length {v.shape[0]} != {self.size}")
        return v[self._inv]

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.size)))

    def to_dense(self):
        """Dense permutation matrix; only for small sizes in tests."""
        P = np.zeros((self.size, self.size))
        P[self.map, np.arange(self.size)] = 1.0
        return P

    def __eq__(self, other):
        return isinstance(other, IndexPermutation) and np.array_equal(self.map, other.map)

    __hash__ = None


def _digits(n_values, N, n_digits):
    """Mixed-radix digits, most significant first, shape ``(n_digits, n_values)``."""
    idx = np.arange(n_values)
    out = np.empty((n_digits, n_values), dtype=np.int64)
    for pos in range(n_digits - 1, -1, -1):
        out[pos] = idx % N
        idx = idx // N
    return out


def _leg_weights(N, m):
    return N ** np.arange(m - 1, -1, -1, dtype=np.int64)


def leg_index_permutation(sigma, N, m) -> IndexPermutation:
    """Index map of ``A_sigma: x_1⊗...⊗x_m -> x_{sigma(1)}⊗...⊗x_{sigma(m)}``.

    On basis vectors the output digit at leg ``l`` is the input digit at leg
    ``sigma(l)``.
    """
    N, m = _check_dims(N, m)
    sigma = _check_sigma(sigma, m)
    digits = _digits(N**m, N, m)
    out_digits = digits[np.asarray(sigma) - 1]
    return IndexPermutation(_leg_weights(N, m) @ out_digits)


def conjugate_legs(X, sigma, N, m):
    """``L_sigma(X) = A_sigma X A_sigma^{-1}``, by relabelling tensor axes.

    For ``X = X_1 ⊗ ... ⊗ X_m`` the result is ``X_{sigma(1)} ⊗ ... ⊗ X_{sigma(m)}``.
    """
    N, m = _check_dims(N, m)
    sigma = _check_sigma(sigma, m)
    n = N**m
    X = _check_square(X, n)
    src = [s - 1 for s in sigma]
    axes = src + [m + s for s in src]
    return X.reshape((N,) * (2 * m)).transpose(axes).reshape(n, n)


def leg_placement(J: LegSubset):
    """The permutation ``sigma_J`` with ``L_{sigma_J}(X ⊗ Y) = X ⊗̃_J Y``.

    ``X ⊗ Y`` carries the factors of ``X`` at legs ``1..|J|``; the result must
    carry factor ``l`` at leg ``a_l`` and the factors of ``Y`` at the
    complement in ascending order. Since ``L_sigma`` moves factor ``sigma(p)``
    to leg ``p``, this is ``sigma_J(a_l) = l``.
    """
    order = list(J.legs) + list(J.complement)
    sigma = [0] * J.m
    for factor, leg in enumerate(order, start=1):
        sigma[leg - 1] = factor
    return tuple(sigma)


def tilde_otimes(X, Y, J: LegSubset, N):
    """``X ⊗̃_J Y``: ``X`` acts on the legs in ``J``, ``Y`` on the remaining legs."""
    N = int(N)
    m, k = J.m, len(J)
    X = _check_square(X, N**k, "X")
    Y = _check_square(Y, N ** (m - k), "Y")
    return conjugate_legs(np.kron(X, Y), leg_placement(J), N, m)


def _placement_index(J: LegSubset, N):
    """``pos[x, c]``: global index whose J-digits encode ``x`` and complement digits ``c``."""
    m, k = J.m, len(J)
    w = _leg_weights(N, m)
    j_idx = w[np.asarray(J.legs) - 1] @ _digits(N**k, N, k)
    c_legs = np.asarray(J.complement, dtype=np.int64) - 1
    c_idx = w[c_legs] @ _digits(N ** (m - k), N, m - k)
    return j_idx[:, None] + c_idx[None, :]


def embed_legs(X, J: LegSubset, N):
    """``X ⊗̃_J I_N^{⊗(m-|J|)}`` by direct index placement.

    Entry ``(r, c)`` of the result is ``X[r_J, c_J]`` when ``r`` and ``c``
    agree on the complement legs and zero otherwise.
    """
    N = int(N)
    m, k = J.m, len(J)
    X = _check_square(X, N**k, "X")
    pos = _placement_index(J, N).T  # (complement, J)
    out = np.zeros((N**m, N**m), dtype=np.result_type(X.dtype, np.float64))
    out[pos[:, :, None], pos[:, None, :]] = X[None, :, :]
    return out


def vectorize(X):
    """Row-major ``iota``: concatenate the rows of ``X``."""
    return np.ravel(np.asarray(X), order="C")


def vectorization_permutation(J: LegSubset, N) -> IndexPermutation:
    """Permutation ``U`` with ``iota(X ⊗̃_J Y) = U (iota(X) ⊗ iota(Y))``.

    The map is built entrywise: entry ``((x_r, x_c), (y_r, y_c))`` of
    ``iota(X) ⊗ iota(Y)`` is ``X[x_r, x_c] Y[y_r, y_c]``, which sits at row
    ``pos[x_r, y_r]`` and column ``pos[x_c, y_c]`` of the product.
    """
    N = int(N)
    pos = _placement_index(J, N)
    n = N**J.m
    dst = pos[:, None, :, None] * n + pos[None, :, None, :]
    return IndexPermutation(dst.reshape(-1))


def matrix_cauchy_schwarz_gap(E_list, F_list):
    """``‖ΣE_iE_i*‖ ‖ΣF_i*F_i‖ - ‖ΣE_iF_i‖²``, nonnegative up to roundoff."""
    E = np.asarray(E_list, dtype=complex)
    F = np.asarray(F_list, dtype=complex)
    if E.ndim != 3 or E.shape != F.shape or E.shape[1] != E.shape[2] or len(E) == 0:
        raise InvalidArgumentError(
            f"need equal-length lists of equal square matrices, got {E.shape} and {F.shape}"
        )
    EE = np.einsum("kij,klj->il", E, E.conj())
    FF = np.einsum("kji,kjl->il", F.conj(), F)
    EF = np.einsum("kij,kjl->il", E, F)
    return float(
        np.linalg.norm(EE, 2) * np.linalg.norm(FF, 2) - np.linalg.norm(EF, 2) ** 2
    )

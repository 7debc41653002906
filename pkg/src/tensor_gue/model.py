"""The tensor-GUE model ``X_N = Σ_i B_i ⊗ (X_{J_i} ⊗̃_{J_i} I)`` and its control parameters.

Each term ``i`` carries an independent GUE ``X_{J_i}`` of size ``N^{|J_i|}``
acting on the legs ``J_i`` of ``(C^N)^{⊗m}`` and a Hermitian ``d × d``
coefficient ``B_i``. Every leg subset must satisfy ``|J_i| > m/2``.

The parameters follow the Gaussian-series notation ``X = Σ_t g_t C_t``:

* ``sigma² = ‖Σ_t C_t²‖``,
* ``v² = ‖Σ_t ι(C_t) ι(C_t)*‖``,
* ``u² = sigma · v``.

For this model ``sigma² = ‖Σ_i B_i²‖ = Γ`` and ``v² ≤ N^{-α} Θ``; both
routes are available so that they can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError, ModelAssumptionError, SizeLimitError
from .gue_ensemble import hermitian_basis, sample_gue
from .rng import derive_seed
from .tensor_core import LegSubset, as_hermitian, embed_legs, vectorize

__all__ = [
    "TensorGueModel",
    "ControlParams",
    "build_model",
    "sample_terms",
    "sample_X_N",
    "gamma_param",
    "theta_param",
    "sigma_param_exact",
    "sigma_param_closed",
    "v_param_exact",
    "v_param_bound",
    "control_params",
    "band_scale",
    "band_epsilon",
    "inclusion_rate",
    "polynomial_rate",
    "SIGMA_EXACT_MAX_DIM",
    "V_EXACT_MAX_DIM",
]

SIGMA_EXACT_MAX_DIM = 4096
V_EXACT_MAX_DIM = 64


@dataclass(frozen=True, eq=False)
class TensorGueModel:
    N: int
    m: int
    legs: tuple[LegSubset, ...]
    coeffs: tuple[np.ndarray, ...]

    @property
    def k(self) -> int:
        return len(self.legs)

    @property
    def d(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def dim(self) -> int:
        """Size ``d N^m`` of ``X_N``."""
        return self.d * self.N**self.m

    @property
    def alpha(self) -> int:
        return min(2 * len(J) - self.m for J in self.legs)

    @property
    def terms(self):
        return list(zip(self.legs, self.coeffs))

    def with_N(self, N) -> "TensorGueModel":
        return build_model(N, self.m, self.d, self.terms)


def build_model(N, m, d, terms) -> TensorGueModel:
    """Validate and build a model.

    Parameters
    ----------
    N, m, d : int
        Site dimension (``N ≥ 2``), number of legs and coefficient size.
    terms : sequence of (legs, B)
        ``legs`` is a :class:`LegSubset` or an iterable of 1-based legs;
        ``B`` is a Hermitian ``d × d`` matrix.
    """
    N, m, d = int(N), int(m), int(d)
    if N < 2:
        raise InvalidArgumentError(f"site dimension N must be at least 2, got {N}")
    if m < 1 or d < 1:
        raise InvalidArgumentError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    terms = list(terms)
    if not terms:
        raise InvalidArgumentError("model needs at least one term")
    legs, coeffs = [], []
    for i, (J, B) in enumerate(terms):
        if not isinstance(J, LegSubset):
            J = LegSubset.of(J, m)
        elif J.m != m:
            raise InvalidArgumentError(f"term {i}: leg subset built for m={J.m}, model has m={m}")
        if 2 * len(J) <= m:
            raise ModelAssumptionError(f"term {i}: |J|={len(J)} does not exceed m/2={m / 2}")
        B = as_hermitian(np.atleast_2d(B), name=f"B_{i + 1}")
        if B.shape != (d, d):
            raise InvalidArgumentError(f"term {i}: B has shape {B.shape}, expected ({d}, {d})")
        B.flags.writeable = False
        legs.append(J)
        coeffs.append(B)
    return TensorGueModel(N, m, tuple(legs), tuple(coeffs))


def sample_terms(model: TensorGueModel, seed):
    """The embedded GUEs ``X_{J_i} ⊗̃_{J_i} I``, one ``N^m × N^m`` matrix per term.

    Term ``i`` (0-based) is drawn with seed ``derive_seed(seed, i)``.
    """
    return [
        embed_legs(sample_gue(model.N ** len(J), derive_seed(seed, i)).matrix, J, model.N)
        for i, J in enumerate(model.legs)
    ]


def sample_X_N(model: TensorGueModel, seed):
    """One realization of ``X_N``, a Hermitian matrix of size ``d N^m``."""
    H = sample_terms(model, seed)
    X = np.zeros((model.dim, model.dim), dtype=complex)
    for B, Hi in zip(model.coeffs, H):
        X += np.kron(B, Hi)
    return X


def gamma_param(model: TensorGueModel) -> float:
    """Least admissible ``Γ = ‖Σ_i B_i²‖``."""
    S = sum(B @ B for B in model.coeffs)
    return float(np.max(np.abs(np.linalg.eigvalsh(S))))


def theta_param(model: TensorGueModel) -> float:
    """Least admissible ``Θ = Σ_i ‖ι(B_i) ι(B_i)*‖``.

    Each summand is rank one, so it equals ``‖B_i‖_F²``; both are computed and
    required to agree.
    """
    via_frob = sum(float(np.sum(np.abs(B) ** 2)) for B in model.coeffs)
    via_outer = 0.0
    for B in model.coeffs:
        b = vectorize(B)
        via_outer += float(np.linalg.norm(np.outer(b, b.conj()), 2))
    if not math.isclose(via_frob, via_outer, rel_tol=1e-10, abs_tol=1e-12):
        raise ArithmeticError(f"rank-one norm mismatch: {via_frob} vs {via_outer}")
    return via_frob


def _coefficient_matrices(model: TensorGueModel):
    """Yield the ``C_t = N^{-|J_i|/2} B_i ⊗ (A_{i,j} ⊗̃ I)`` of the Gaussian series."""
    N = model.N
    for J, B in model.terms:
        n = N ** len(J)
        scale = n**-0.5
        for A in hermitian_basis(n):
            yield scale * np.kron(B, embed_legs(A, J, N))


def sigma_param_exact(model: TensorGueModel) -> float:
    """``sigma`` from the full Gaussian series ``‖Σ_t C_t²‖^{1/2}``."""
    if model.dim > SIGMA_EXACT_MAX_DIM:
        raise SizeLimitError(f"dim {model.dim} exceeds exact-sigma cap {SIGMA_EXACT_MAX_DIM}")
    S = np.zeros((model.dim, model.dim), dtype=complex)
    for C in _coefficient_matrices(model):
        S += C @ C
    return float(np.sqrt(np.max(np.abs(np.linalg.eigvalsh(0.5 * (S + S.conj().T))))))


def sigma_param_closed(model: TensorGueModel) -> float:
    return math.sqrt(gamma_param(model))


def v_param_exact(model: TensorGueModel) -> float:
    """``v = ‖Σ_t ι(C_t) ι(C_t)*‖^{1/2}`` via the smaller of the two Gram matrices.

    With ``V`` the matrix whose rows are ``ι(C_t)``, the covariance is
    ``V^T conj(V)`` and shares its nonzero spectrum with ``conj(V) V^T``.
    """
    if model.dim > V_EXACT_MAX_DIM:
        raise SizeLimitError(f"dim {model.dim} exceeds exact-v cap {V_EXACT_MAX_DIM}")
    V = np.array([vectorize(C) for C in _coefficient_matrices(model)])
    G = V.conj() @ V.T if V.shape[0] <= V.shape[1] else V.T @ V.conj()
    top = np.linalg.eigvalsh(0.5 * (G + G.conj().T))[-1]
    return float(np.sqrt(max(top, 0.0)))


def v_param_bound(model: TensorGueModel) -> float:
    """``N^{-α/2} Θ^{1/2}``."""
    return model.N ** (-model.alpha / 2) * math.sqrt(theta_param(model))


@dataclass(frozen=True)
class ControlParams:
    alpha: int
    gamma: float
    theta: float
    sigma: float
    v: float
    u: float
    v_is_exact: bool


def control_params(model: TensorGueModel, exact=None) -> ControlParams:
    """All control parameters of ``model``.

    ``sigma`` always uses the closed form. ``v`` is exact when ``exact`` is
    true, or when ``exact`` is None and the model is within the exact-v cap;
    otherwise it is the upper bound.
    """
    if exact is None:
        exact = model.dim <= V_EXACT_MAX_DIM
    sigma = sigma_param_closed(model)
    v = v_param_exact(model) if exact else v_param_bound(model)
    return ControlParams(
        alpha=model.alpha,
        gamma=gamma_param(model),
        theta=theta_param(model),
        sigma=sigma,
        v=v,
        u=math.sqrt(sigma * v),
        v_is_exact=bool(exact),
    )


def band_scale(model: TensorGueModel, gamma=None, theta=None) -> float:
    """``N^{-α/4} Γ^{1/4} Θ^{1/4}``, with the least admissible ``Γ, Θ`` by default."""
    gamma = gamma_param(model) if gamma is None else float(gamma)
    theta = theta_param(model) if theta is None else float(theta)
    return model.N ** (-model.alpha / 4) * (gamma * theta) ** 0.25


def band_epsilon(model: TensorGueModel, t, C, gamma=None, theta=None) -> float:
    """Half-width ``C N^{-α/4} Γ^{1/4} Θ^{1/4} (ln^{3/4}(d N^m) + t)`` of the inclusion band."""
    if t < 0:
        raise InvalidArgumentError(f"t must be nonnegative, got {t}")
    if C <= 0:
        raise InvalidArgumentError(f"C must be positive, got {C}")
    return C * band_scale(model, gamma, theta) * (math.log(model.dim) ** 0.75 + t)


def inclusion_rate(model: TensorGueModel, gamma=None, theta=None) -> float:
    """``N^{-α} Γ Θ ln³(d N^m)``; almost-sure inclusion needs this to vanish as N grows."""
    return band_scale(model, gamma, theta) ** 4 * math.log(model.dim) ** 3


def polynomial_rate(model: TensorGueModel) -> float:
    """``N^{-α} m³ ln³ N``, the growth condition for polynomial norm convergence."""
    return model.N ** (-model.alpha) * model.m**3 * math.log(model.N) ** 3


def random_model(rng, N=2, m_choices: Sequence[int] = (1, 2, 3), d_max=3, k_max=3):
    """A random valid model for tests and self-checks."""
    m = int(rng.choice(m_choices))
    d = int(rng.integers(1, d_max + 1))
    k = int(rng.integers(1, k_max + 1))
    terms = []
    for _ in range(k):
        size = int(rng.integers(m // 2 + 1, m + 1))
        J = sorted(rng.choice(np.arange(1, m + 1), size=size, replace=False).tolist())
        G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        terms.append((J, (G + G.conj().T) / 2))
    return build_model(N, m, d, terms)

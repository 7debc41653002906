"""Spectra of sampled matrices and the spectral density of ``X_free``.

The free limit ``X_free = Σ_i B_i ⊗ s_i`` is an operator-valued semicircular
element with covariance ``η(M) = Σ_i B_i M B_i``. Its ``M_d``-valued Cauchy
transform solves the matrix Dyson equation

    G(z) = (z I - η(G(z)))^{-1},    Im z > 0,

on the branch with ``Im G(z) ≺ 0``, and the density is recovered by
Stieltjes inversion ``ρ(x) = -(1/π) Im tr̄ G(x + iδ)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, InvalidArgumentError, SizeLimitError
from .tensor_core import as_hermitian

__all__ = [
    "Spectrum",
    "SpectralDensity",
    "hermitian_spectrum",
    "operator_norm",
    "mde_solve",
    "semicircle_cauchy",
    "free_spectral_density",
    "inclusion_excess",
    "MAX_EIG_DIM",
]

MAX_EIG_DIM = 8192


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray

    def __len__(self):
        return self.eigenvalues.size

    @property
    def norm(self) -> float:
        return float(max(abs(self.eigenvalues[0]), abs(self.eigenvalues[-1])))


def hermitian_spectrum(A, tol=1e-12) -> Spectrum:
    """Sorted eigenvalues of a Hermitian matrix (LAPACK ``heevd`` through numpy)."""
    A = np.asarray(A)
    if A.ndim == 2 and A.shape[0] > MAX_EIG_DIM:
        raise SizeLimitError(f"dimension {A.shape[0]} exceeds eigensolver cap {MAX_EIG_DIM}")
    A = as_hermitian(A, tol=tol)
    ev = np.linalg.eigvalsh(A)
    ev.flags.writeable = False
    return Spectrum(ev)


def operator_norm(A, tol=1e-12) -> float:
    return hermitian_spectrum(A, tol).norm


def _eta(coeffs, M):
    return np.einsum("iab,bc,icd->ad", coeffs, M, coeffs)


def _as_coeff_stack(coeffs):
    B = np.asarray(coeffs, dtype=complex)
    if B.ndim == 2:
        B = B[None]
    if B.ndim != 3 or B.shape[1] != B.shape[2] or B.shape[0] == 0:
        raise InvalidArgumentError(f"coefficients must be a stack of square matrices, got {B.shape}")
    for i, b in enumerate(B):
        as_hermitian(b, name=f"B_{i + 1}")
    return B


def _residual(coeffs, G, z):
    d = G.shape[0]
    F = np.linalg.inv(z * np.eye(d) - _eta(coeffs, G))
    return F, float(np.linalg.norm(G - F))


def _im_part_ok(G, slack):
    im = (G - G.conj().T) / 2j
    return np.linalg.eigvalsh(im)[-1] <= slack


def _newton_step(coeffs, G, z):
    """Newton update for ``Φ(G) = G (zI - η(G)) - I``, which is complex-linearizable."""
    d = G.shape[0]
    W = z * np.eye(d) - _eta(coeffs, G)
    phi = G @ W - np.eye(d)
    jac = np.empty((d * d, d * d), dtype=complex)
    for col in range(d * d):
        H = np.zeros((d, d), dtype=complex)
        H.flat[col] = 1.0
        jac[:, col] = (H @ W - G @ _eta(coeffs, H)).ravel()
    try:
        step = np.linalg.solve(jac, -phi.ravel())
    except np.linalg.LinAlgError:
        return None
    return G + step.reshape(d, d)


def _continuation_start(B, z, max_iter, newton):
    d = B.shape[1]
    G = np.eye(d, dtype=complex) / complex(z.real, max(1.0, z.imag))
    eta = 1.0
    while eta > 10 * z.imag:
        eta /= 4.0
        G = mde_solve(B, complex(z.real, eta), tol=1e-9, max_iter=max_iter, G0=G, newton=newton)
    return G


def mde_solve(coeffs, z, tol=1e-12, max_iter=20000, G0=None, newton=True, full_output=False):
    """Solve ``G = (zI - η(G))^{-1}`` for ``Im z > 0``.

    The iteration is a damped fixed point ``G ← (1-λ)G + λ(zI - η(G))^{-1}``
    whose step ``λ`` halves whenever the residual grows. When ``newton`` is
    set, each iteration first tries a Newton step on ``G(zI - η(G)) = I`` and
    keeps it only if it lowers the residual and stays on the ``Im G ≺ 0``
    branch. Near the real axis the fixed-point map contracts only by
    ``1 - O(Im z)`` per step, so the Newton correction is what makes small
    smoothing affordable.

    Parameters
    ----------
    coeffs : array_like, shape (k, d, d)
        Hermitian ``B_i``.
    z : complex
        Spectral parameter with ``Im z > 0``.
    tol : float
        Target for ``‖G - (zI - η(G))^{-1}‖_F``.
    G0 : array_like, optional
        Starting point, e.g. the solution at a neighbouring ``z``. Without one,
        the solve starts from ``z^{-1} I`` at ``Re z + i`` and follows a
        geometric ladder of imaginary parts down to ``Im z``.
    full_output : bool
        Also return ``(residual, iterations)``.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` iterations.
    """
    z = complex(z)
    if not z.imag > 0:
        raise InvalidArgumentError(f"need Im z > 0, got {z}")
    if tol < 1e-14:
        raise InvalidArgumentError(f"tol must be at least 1e-14, got {tol}")
    B = _as_coeff_stack(coeffs)
    d = B.shape[1]
    if G0 is None:
        G = _continuation_start(B, z, max_iter, newton)
    else:
        G = np.array(G0, dtype=complex)
        if G.shape != (d, d):
            raise InvalidArgumentError(f"G0 must be {d}x{d}")
        if not _im_part_ok(G, 0.0):
            G = _continuation_start(B, z, max_iter, newton)
    F, res = _residual(B, G, z)
    lam = 1.0
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        if newton:
            Gn = _newton_step(B, G, z)
            if Gn is not None and np.all(np.isfinite(Gn)) and _im_part_ok(Gn, tol):
                Fn, rn = _residual(B, Gn, z)
                if rn < res:
                    G, F, res = Gn, Fn, rn
                    continue
        Gd = (1.0 - lam) * G + lam * F
        Fd, rd = _residual(B, Gd, z)
        if rd > res and lam > 1.0 / 1024:
            lam *= 0.5
            continue
        G, F, res = Gd, Fd, rd
        lam = min(1.0, 1.25 * lam)
    else:
        it = max_iter
    if res > tol:
        raise ConvergenceError(
            f"matrix Dyson iteration at z={z} stopped with residual {res:.3e} > {tol:.1e}",
            residual=res,
            iterations=it,
        )
    if full_output:
        return G, res, it
    return G


def semicircle_cauchy(z):
    """``(z - √(z-2) √(z+2)) / 2``: the standard semicircle solution of ``G = 1/(z - G)``.

    The product of principal roots selects the branch with ``G(z) ~ 1/z`` and
    ``Im G < 0`` on the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    return (z - np.sqrt(z - 2) * np.sqrt(z + 2)) / 2


@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Grid-sampled density of ``X_free`` with its numerically detected support."""

    grid: np.ndarray
    values: np.ndarray
    smoothing: float
    support: tuple[tuple[float, float], ...]
    support_threshold: float
    solver: dict = field(default_factory=dict)

    @property
    def grid_step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def moment(self, p: int) -> float:
        return float(np.trapezoid(self.grid**p * self.values, self.grid))

    @property
    def edge(self) -> float:
        """``max |x|`` over the support, the numerical ``‖X_free‖``."""
        return max(max(abs(lo), abs(hi)) for lo, hi in self.support)

    def to_json(self) -> dict:
        return {
            "support": [[lo, hi] for lo, hi in self.support],
            "smoothing": self.smoothing,
            "support_threshold": self.support_threshold,
            "grid": {"x_min": float(self.grid[0]), "x_max": float(self.grid[-1]),
                     "step": self.grid_step, "points": int(self.grid.size)},
            "integral": self.integral(),
            "solver": dict(self.solver),
        }

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "rho"])
            for x, r in zip(self.grid, self.values):
                writer.writerow([repr(float(x)), repr(float(r))])


def _support_intervals(grid, values, threshold):
    above = values > threshold
    intervals = []
    i, n = 0, grid.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        lo = grid[i] if i == 0 else _crossing(grid[i - 1], grid[i], values[i - 1], values[i], threshold)
        hi = grid[j] if j == n - 1 else _crossing(grid[j], grid[j + 1], values[j], values[j + 1], threshold)
        intervals.append((float(lo), float(hi)))
        i = j + 1
    return tuple(intervals)


def _crossing(x0, x1, y0, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def free_spectral_density(
    coeffs,
    x_range=None,
    grid_step=1e-2,
    smoothing=1e-3,
    support_threshold=1e-3,
    tol=1e-10,
    max_iter=20000,
) -> SpectralDensity:
    """Density ``ρ(x) = -(1/π) Im tr̄ G(x + i·smoothing)`` on a uniform grid.

    The default range is ``±1.1 · 2‖Σ B_i²‖^{1/2}``, which contains the
    support of ``X_free``. The grid is swept left to right and each solve is
    warm-started from its neighbour. The support is the union of maximal runs
    where ``ρ > support_threshold``, with endpoints linearly interpolated to
    the threshold crossing.
    """
    if not 1e-6 <= smoothing <= 1e-1:
        raise InvalidArgumentError(f"smoothing must lie in [1e-6, 1e-1], got {smoothing}")
    if grid_step <= 0:
        raise InvalidArgumentError(f"grid_step must be positive, got {grid_step}")
    B = _as_coeff_stack(coeffs)
    d = B.shape[1]
    if x_range is None:
        radius = 2.0 * math.sqrt(np.max(np.abs(np.linalg.eigvalsh(np.einsum("iab,ibc->ac", B, B)))))
        half = max(int(math.ceil(1.1 * radius / grid_step)), 10)
        # symmetric about 0 so that ρ(x) and ρ(-x) sit on grid points
        grid = grid_step * np.arange(-half, half + 1, dtype=float)
    else:
        lo, hi = float(x_range[0]), float(x_range[1])
        if not hi > lo:
            raise InvalidArgumentError(f"empty range {x_range}")
        n = int(math.floor((hi - lo) / grid_step + 1e-9)) + 1
        grid = lo + grid_step * np.arange(n)
    n = grid.size
    values = np.empty(n)
    G = None
    max_res, total_it = 0.0, 0
    for i, x in enumerate(grid):
        z = complex(x, smoothing)
        try:
            G, res, it = mde_solve(B, z, tol=tol, max_iter=max_iter, G0=G, full_output=True)
        except ConvergenceError:
            G, res, it = mde_solve(B, z, tol=tol, max_iter=max_iter, full_output=True)
        max_res, total_it = max(max_res, res), total_it + it
        values[i] = max(-np.trace(G).imag / (math.pi * d), 0.0)
    grid.flags.writeable = False
    values.flags.writeable = False
    return SpectralDensity(
        grid=grid,
        values=values,
        smoothing=float(smoothing),
        support=_support_intervals(grid, values, support_threshold),
        support_threshold=float(support_threshold),
        solver={"method": "damped fixed point + guarded Newton", "tol": tol,
                "max_residual": max_res, "iterations": total_it},
    )


def inclusion_excess(spectrum, support) -> float:
    """Largest distance from an eigenvalue to the union of the support intervals."""
    support = [(float(a), float(b)) for a, b in support]
    if not support:
        raise InvalidArgumentError("support must contain at least one interval")
    if any(b < a for a, b in support):
        raise InvalidArgumentError(f"malformed intervals {support}")
    ev = np.asarray(spectrum.eigenvalues if isinstance(spectrum, Spectrum) else spectrum, dtype=float)
    lo = np.array([a for a, _ in support])
    hi = np.array([b for _, b in support])
    dist = np.maximum(lo[None, :] - ev[:, None], 0.0) + np.maximum(ev[:, None] - hi[None, :], 0.0)
    return float(dist.min(axis=1).max()) if ev.size else 0.0

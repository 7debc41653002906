"""The Hermitian matrix basis and GUE sampling through it.

A GUE matrix of size ``n`` is assembled as ``n^{-1/2} Σ_j g_j A_j`` where the
``g_j`` are i.i.d. real standard Gaussians and ``A_j`` runs over the
orthonormal Hermitian basis below, giving ``E[X] = 0`` and ``E[X²] = I_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .rng import make_generator

__all__ = [
    "HermitianBasis",
    "GueSample",
    "hermitian_basis",
    "basis_labels",
    "assemble",
    "sample_gue",
    "decompose",
]


def _upper_pairs(n):
    r, s = np.triu_indices(n, k=1)
    return r, s


def basis_labels(n):
    """Labels of the basis elements in order: ``("diag", l, l)``, ``("sym", r, s)``, ``("anti", r, s)``.

    Indices are 0-based.
    """
    r, s = _upper_pairs(n)
    labels = [("diag", l, l) for l in range(n)]
    labels += [("sym", int(a), int(b)) for a, b in zip(r, s)]
    labels += [("anti", int(a), int(b)) for a, b in zip(r, s)]
    return labels


@dataclass(frozen=True, eq=False)
class HermitianBasis:
    """The ``n²`` Hermitian unit-norm matrices, stacked as an ``(n², n, n)`` array.

    Order: diagonal units ``E_ll``; then ``(e_r e_s* + e_s e_r*)/√2`` for
    ``r < s``; then ``(i/√2)(e_r e_s* - e_s e_r*)`` for ``r < s``; pairs in
    lexicographic order.
    """

    n: int
    matrices: np.ndarray

    def __len__(self):
        return self.matrices.shape[0]

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, j):
        return self.matrices[j]


def hermitian_basis(n) -> HermitianBasis:
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    r, s = _upper_pairs(n)
    p = r.size
    A = np.zeros((n * n, n, n), dtype=complex)
    A[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    h = 1.0 / np.sqrt(2.0)
    sym = n + np.arange(p)
    anti = n + p + np.arange(p)
    A[sym, r, s] = h
    A[sym, s, r] = h
    A[anti, r, s] = 1j * h
    A[anti, s, r] = -1j * h
    A.flags.writeable = False
    return HermitianBasis(n, A)


def assemble(coefficients, n):
    """``Σ_j c_j A_j`` for real coefficients in basis order, without forming the basis."""
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (n * n,):
        raise InvalidArgumentError(f"need {n * n} coefficients, got shape {c.shape}")
    r, s = _upper_pairs(n)
    p = r.size
    X = np.zeros((n, n), dtype=complex)
    X[np.arange(n), np.arange(n)] = c[:n]
    upper = (c[n : n + p] + 1j * c[n + p :]) / np.sqrt(2.0)
    X[r, s] = upper
    X[s, r] = upper.conj()
    return X


@dataclass(frozen=True, eq=False)
class GueSample:
    """One GUE draw together with the Gaussian coefficients that built it."""

    n: int
    coefficients: np.ndarray
    matrix: np.ndarray
    seed: int


def sample_gue(n, seed) -> GueSample:
    """Draw an ``n × n`` GUE matrix normalized so that ``E[X²] = I``.

    Parameters
    ----------
    n : int
        Matrix size.
    seed : int
        Unsigned 64-bit seed for :func:`tensor_gue.rng.make_generator`; the
        ``n²`` coefficients are the first ``n²`` standard normals of that
        stream, in basis order.
    """
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be positive, got {n}")
    g = make_generator(seed).standard_normal(n * n)
    X = assemble(g, n) / np.sqrt(n)
    g.flags.writeable = False
    X.flags.writeable = False
    return GueSample(n=n, coefficients=g, matrix=X, seed=int(seed))


def decompose(X, basis: HermitianBasis | None = None):
    """Frobenius coordinates ``⟨A_j, X⟩ = tr(A_j X)`` in the basis.

    With ``basis=None`` the coordinates are read off the entries directly,
    which is what the sampler inverts; passing a basis uses it explicitly.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise InvalidArgumentError(f"X must be square, got shape {X.shape}")
    n = X.shape[0]
    if basis is not None:
        if basis.n != n:
            raise InvalidArgumentError(f"basis has n={basis.n} but X is {n}x{n}")
        return np.real(np.einsum("jab,ba->j", basis.matrices, X))
    r, s = _upper_pairs(n)
    root2 = np.sqrt(2.0)
    # tr(E_rs^sym X) = (X_sr + X_rs)/√2 and tr(E_rs^anti X) = i(X_sr - X_rs)/√2
    return np.concatenate(
        [
            np.real(np.diagonal(X)),
            np.real(X[s, r] + X[r, s]) / root2,
            np.real(1j * (X[s, r] - X[r, s])) / root2,
        ]
    )

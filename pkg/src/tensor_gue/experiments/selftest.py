"""Exact algebraic identity suites, one verdict line each.

All suites use fixed seeds, so two runs of the same build give identical
reports. ``corrupt`` names suites whose inputs are deliberately damaged (the
negative control); currently only ``"basis"``, which rescales the Hermitian
basis by 1.01.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..free_probability import catalan, enumerate_nc_pairings, opval_word_moment, s_j_covariance, semicircular_word_moment
from ..gue_ensemble import hermitian_basis
from ..model import random_model, sigma_param_closed, sigma_param_exact, v_param_bound, v_param_exact
from ..spectral import mde_solve, semicircle_cauchy
from ..tensor_core import LegSubset, embed_legs, tilde_otimes, vectorization_permutation, vectorize

__all__ = ["SuiteResult", "SUITES", "run_selftest", "format_report"]

CORRUPTIBLE = ("basis",)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _rand_herm(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (G + G.conj().T) / 2


def _basis(n, corrupt):
    A = hermitian_basis(n).matrices
    return A * 1.01 if "basis" in corrupt else A


def _majority_subsets(m):
    for size in range(m // 2 + 1, m + 1):
        for legs in itertools.combinations(range(1, m + 1), size):
            yield LegSubset.of(legs, m)


def suite_basis(corrupt):
    err = 0.0
    for n in (2, 3, 4, 8):
        A = _basis(n, corrupt)
        gram = np.einsum("aij,bji->ab", A, A)
        err = max(err, np.max(np.abs(gram - np.eye(n * n))))
    return err < 1e-12, f"max orthonormality error {err:.2e}"


def suite_leg_product(corrupt):
    rng = np.random.default_rng(1)
    err = 0.0
    for N, m in itertools.product((2, 3), (2, 3)):
        for J in _majority_subsets(m):
            nx, ny = N ** len(J), N ** (m - len(J))
            X1, X2 = _rand_herm(rng, nx), _rand_herm(rng, nx)
            Y1, Y2 = _rand_herm(rng, ny), _rand_herm(rng, ny)
            a, b = rng.standard_normal(2)
            lhs = tilde_otimes(a * X1 + b * X2, Y1, J, N)
            rhs = a * tilde_otimes(X1, Y1, J, N) + b * tilde_otimes(X2, Y1, J, N)
            err = max(err, np.max(np.abs(lhs - rhs)))
            prod = tilde_otimes(X1, Y1, J, N) @ tilde_otimes(X2, Y2, J, N)
            err = max(err, np.max(np.abs(prod - tilde_otimes(X1 @ X2, Y1 @ Y2, J, N))))
            # two independent placement routes must agree
            err = max(err, np.max(np.abs(tilde_otimes(X1, np.eye(ny), J, N) - embed_legs(X1, J, N))))
    return err < 1e-10, f"max error {err:.2e}"


def suite_vec_shuffle(corrupt):
    rng = np.random.default_rng(2)
    err = 0.0
    for N, m in ((2, 2), (2, 3), (3, 2), (3, 3)):
        for J in _majority_subsets(m):
            nx, ny = N ** len(J), N ** (m - len(J))
            X, Y = _rand_herm(rng, nx), _rand_herm(rng, ny)
            U = vectorization_permutation(J, N)
            lhs = vectorize(tilde_otimes(X, Y, J, N))
            err = max(err, np.max(np.abs(lhs - U.apply(np.kron(vectorize(X), vectorize(Y))))))
    return err < 1e-10, f"max error {err:.2e}"


def suite_sigma_identity(corrupt):
    err = 0.0
    for n in (2, 3, 4, 8):
        A = _basis(n, corrupt)
        err = max(err, np.max(np.abs(np.einsum("aij,ajk->ik", A, A) - n * np.eye(n))))
    return err < 1e-12, f"max |Σ A_j² - nI| {err:.2e}"


def suite_v_identity(corrupt):
    err = 0.0
    for n in (2, 3, 4, 8):
        vecs = np.array([vectorize(a) for a in _basis(n, corrupt)])
        err = max(err, np.max(np.abs(vecs.T @ vecs.conj() - np.eye(n * n))))
    return err < 1e-12, f"max |Σ ι(A_j)ι(A_j)* - I| {err:.2e}"


def suite_sigma_equality(corrupt):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        model = random_model(rng)
        closed = sigma_param_closed(model)
        worst = max(worst, abs(sigma_param_exact(model) - closed) / max(closed, 1e-300))
    return worst < 1e-10, f"max relative gap {worst:.2e}"


def suite_v_bound(corrupt):
    rng = np.random.default_rng(3)
    worst = -math.inf
    for _ in range(20):
        model = random_model(rng)
        worst = max(worst, v_param_exact(model) - v_param_bound(model))
    return worst <= 1e-12, f"max (v_exact - v_bound) {worst:.2e}"


def suite_catalan(corrupt):
    counts = [len(enumerate_nc_pairings(q)) for q in (2, 4, 6, 8, 10)]
    moments = [semicircular_word_moment((1,) * (2 * p)) for p in range(7)]
    ok = counts == [1, 2, 5, 14, 42] and moments == [catalan(p) for p in range(7)]
    ok = ok and semicircular_word_moment((1, 2, 1, 2)) == 0 == semicircular_word_moment((1, 2) * 3)
    return ok, f"pairings {counts}"


def suite_opval_trace(corrupt):
    err = 0.0
    cases = [({1: (1,), 2: (1,)}, None), ({1: (1, 2), 2: (1, 2)}, None), ({1: (1, 2), 2: (2, 3)}, 3)]
    for legs, m in cases:
        eta = {x: s_j_covariance(J, N=2, m=m) for x, J in legs.items()}
        p = eta[1].dim
        for q in range(7):
            for w in itertools.product((1, 2), repeat=q):
                tr = np.trace(opval_word_moment(w, eta)) / p
                err = max(err, abs(tr - semicircular_word_moment(w)))
    return err < 1e-12, f"max error {err:.2e}"


def suite_mde_semicircle(corrupt):
    err = 0.0
    for x in np.linspace(-3, 3, 50):
        z = complex(x, 1e-3)
        err = max(err, abs(mde_solve([[[1.0]]], z)[0, 0] - semicircle_cauchy(z)))
    return err < 1e-8, f"max |G - G_closed| {err:.2e}"


SUITES = {
    "basis": suite_basis,
    "leg-product": suite_leg_product,
    "vec-shuffle": suite_vec_shuffle,
    "sigma-identity": suite_sigma_identity,
    "v-identity": suite_v_identity,
    "sigma-equality": suite_sigma_equality,
    "v-bound": suite_v_bound,
    "catalan": suite_catalan,
    "opval-trace": suite_opval_trace,
    "mde-semicircle": suite_mde_semicircle,
}


def run_selftest(corrupt=()) -> list[SuiteResult]:
    corrupt = tuple(corrupt)
    unknown = set(corrupt) - set(CORRUPTIBLE)
    if unknown:
        raise ValueError(f"unknown corruption targets {sorted(unknown)}")
    out = []
    for name, fn in SUITES.items():
        try:
            ok, detail = fn(corrupt)
        except Exception as exc:  # a crash is a failed suite, not a crashed report
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail))
    return out


def format_report(results) -> str:
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}" for r in results]
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} suites passed")
    return "\n".join(lines)

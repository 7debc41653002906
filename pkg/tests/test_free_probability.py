import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensor_gue.errors import InvalidArgumentError, SizeLimitError
from tensor_gue.free_probability import (
    CovarianceMap,
    NCPolynomial,
    catalan,
    enumerate_nc_pairings,
    is_non_crossing,
    opval_word_moment,
    polynomial_moment,
    polynomial_norm_estimate,
    s_j_covariance,
    semicircular_word_moment,
    xfree_moment,
)
from tensor_gue.gue_ensemble import hermitian_basis

x1, x2 = NCPolynomial.variable(1), NCPolynomial.variable(2)


def all_matchings(items):
    """Every perfect matching of ``items``, by brute force."""
    items = list(items)
    if not items:
        yield ()
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1 :]
        for m in all_matchings(rest):
            yield ((a, items[i]),) + m


def brute_nc_pairings(q):
    return [tuple(sorted(m)) for m in all_matchings(range(1, q + 1)) if is_non_crossing(m)]


def brute_word_moment(word):
    q = len(word)
    if q % 2:
        return 0
    return sum(
        all(word[a - 1] == word[b - 1] for a, b in p) for p in brute_nc_pairings(q)
    )


def nested_eta_value(pairing, word, eta, p):
    """Evaluate one explicit non-crossing pairing by nesting η from the inside out."""
    partner = {}
    for a, b in pairing:
        partner[a], partner[b] = b, a

    def val(lo, hi):
        if lo > hi:
            return np.eye(p, dtype=complex)
        r = partner[lo]
        return eta[word[lo - 1]](val(lo + 1, r - 1)) @ val(r + 1, hi)

    return val(1, len(word))


def brute_opval(word, eta, p):
    total = np.zeros((p, p), dtype=complex)
    if len(word) % 2:
        return total
    for pairing in brute_nc_pairings(len(word)):
        if all(word[a - 1] == word[b - 1] for a, b in pairing):
            total += nested_eta_value(pairing, word, eta, p)
    return total


def words(max_len, letters=(1, 2)):
    for q in range(max_len + 1):
        yield from itertools.product(letters, repeat=q)


def random_cov(rng, p, count):
    G = rng.standard_normal((count, p, p)) + 1j * rng.standard_normal((count, p, p))
    return CovarianceMap((G + np.conj(np.swapaxes(G, 1, 2))) / 2)


class TestPairings:
    @pytest.mark.parametrize("q,count", [(0, 1), (2, 1), (4, 2), (6, 5), (8, 14), (10, 42), (12, 132)])
    def test_catalan_counts(self, q, count):
        pairings = enumerate_nc_pairings(q)
        assert len(pairings) == count == catalan(q // 2)
        assert len(set(pairings)) == count
        assert all(is_non_crossing(p) for p in pairings)

    def test_q4_explicit(self):
        assert sorted(enumerate_nc_pairings(4)) == [((1, 2), (3, 4)), ((1, 4), (2, 3))]

    @pytest.mark.parametrize("q", [2, 4, 6, 8, 10])
    def test_matches_brute_force(self, q):
        assert sorted(enumerate_nc_pairings(q)) == sorted(brute_nc_pairings(q))

    def test_odd_is_empty(self):
        assert enumerate_nc_pairings(5) == []

    def test_caps(self):
        assert len(enumerate_nc_pairings(16)) == 1430
        with pytest.raises(SizeLimitError):
            enumerate_nc_pairings(18)


class TestScalarMoments:
    @pytest.mark.parametrize("word,value", [((1, 1, 1, 1), 2), ((1, 2, 1, 2), 0), ((1, 1, 2, 2), 1), ((1, 2, 2, 1), 1), ((), 1), ((1,), 0)])
    def test_examples(self, word, value):
        assert semicircular_word_moment(word) == value

    @pytest.mark.parametrize("p", range(0, 7))
    def test_constant_word_is_catalan(self, p):
        assert semicircular_word_moment((1,) * (2 * p)) == math.comb(2 * p, p) // (p + 1)

    def test_semicircle_integral(self):
        # τ(s^k) = (1/2π) ∫_{-2}^{2} t^k √(4 - t²) dt, by Gauss-Chebyshev (second kind)
        n = 64
        i = np.arange(1, n + 1)
        theta = i * np.pi / (n + 1)
        w = np.pi / (n + 1) * np.sin(theta) ** 2
        t = 2 * np.cos(theta)
        for k in range(0, 13):
            integral = 4 / (2 * np.pi) * np.sum(w * t**k)
            assert integral == pytest.approx(semicircular_word_moment((1,) * k), abs=1e-9)

    def test_alternating_words_vanish(self):
        assert semicircular_word_moment((1, 2, 1, 2)) == 0
        assert semicircular_word_moment((1, 2, 1, 2, 1, 2)) == 0

    def test_all_short_words_match_brute_force(self):
        for w in words(8, letters=(1, 2, 3)):
            assert semicircular_word_moment(w) == brute_word_moment(w), w

    def test_rejects_bad_letter(self):
        with pytest.raises(InvalidArgumentError):
            semicircular_word_moment((0, 0))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(1, 3), min_size=0, max_size=12), st.integers(0, 11))
    def test_trace_property_rotation_and_reversal(self, word, shift):
        w = tuple(word)
        value = semicircular_word_moment(w)
        if w:
            s = shift % len(w)
            assert semicircular_word_moment(w[s:] + w[:s]) == value
        assert semicircular_word_moment(w[::-1]) == value
        relabel = {1: 3, 2: 1, 3: 2}
        assert semicircular_word_moment(tuple(relabel[x] for x in w)) == value

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 4))
    def test_freeness_null_pattern(self, reps):
        assert semicircular_word_moment((1, 2) * (reps + 1)) == 0


class TestOperatorValued:
    def test_scalar_reduction(self):
        eta = {1: CovarianceMap([[[1.0]]])}
        for q in range(0, 7):
            M = opval_word_moment((1,) * (2 * q), eta)
            assert M.shape == (1, 1)
            assert M[0, 0] == pytest.approx(catalan(q), abs=1e-12)

    def test_variance_two(self):
        eta = {1: CovarianceMap([[[math.sqrt(2)]]])}
        assert opval_word_moment((1, 1, 1, 1), eta)[0, 0].real == pytest.approx(8.0, abs=1e-12)

    def test_matches_nested_pairing_oracle(self):
        rng = np.random.default_rng(0)
        eta = {1: random_cov(rng, 3, 2), 2: random_cov(rng, 3, 1)}
        for w in words(8):
            np.testing.assert_allclose(opval_word_moment(w, eta), brute_opval(w, eta, 3), atol=1e-9)

    def test_covariance_map_action(self):
        rng = np.random.default_rng(1)
        eta = random_cov(rng, 3, 4)
        M = rng.standard_normal((3, 3))
        expected = sum(K @ M @ K for K in eta.coeffs)
        np.testing.assert_allclose(eta(M), expected, atol=1e-12)
        np.testing.assert_allclose(eta.eta_identity, sum(K @ K for K in eta.coeffs), atol=1e-12)
        H = M + M.T
        out = eta(H)
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    def test_rejects_non_hermitian_coeffs(self):
        with pytest.raises(InvalidArgumentError):
            CovarianceMap([[[0.0, 1.0], [0.0, 0.0]]])

    def test_caps_and_missing_letters(self):
        eta = {1: CovarianceMap([[[1.0]]])}
        with pytest.raises(SizeLimitError):
            opval_word_moment((1,) * 14, eta)
        with pytest.raises(InvalidArgumentError):
            opval_word_moment((1, 2), eta)


OPVAL_TRACE_CASES = [
    # (letter -> leg subset, m); m=None means the bare S_J on its own legs
    ({1: (1,), 2: (1,)}, None),
    ({1: (1, 2), 2: (1, 2)}, None),
    ({1: (1,), 2: (2,)}, 2),
    ({1: (1, 2), 2: (1,)}, 2),
    ({1: (1, 2), 2: (2, 3)}, 3),
    ({1: (1, 3), 2: (1, 2, 3)}, 3),
]


class TestOperatorValuedTrace:
    @pytest.mark.parametrize("legs,m", OPVAL_TRACE_CASES)
    def test_normalized_traces_match_scalar_moments(self, legs, m):
        eta = {x: s_j_covariance(J, N=2, m=m) for x, J in legs.items()}
        p = eta[1].dim
        for w in words(6):
            tr = np.trace(opval_word_moment(w, eta)) / p
            assert abs(tr - semicircular_word_moment(w)) < 1e-12, w

    def test_sj_covariance_is_normalized(self):
        eta = s_j_covariance((1, 2), N=2)
        np.testing.assert_allclose(eta.eta_identity, np.eye(4), atol=1e-14)
        A = hermitian_basis(4).matrices
        np.testing.assert_allclose(eta.coeffs, A / 2, atol=0)


class TestXfree:
    def test_unit(self):
        assert xfree_moment([[[1.0]]], 4) == pytest.approx(2.0)

    def test_variance_two(self):
        coeffs = [[[1.0]], [[1.0]]]
        assert xfree_moment(coeffs, 2) == pytest.approx(2.0)
        assert xfree_moment(coeffs, 4) == pytest.approx(8.0)

    def test_odd_vanish(self):
        rng = np.random.default_rng(2)
        coeffs = random_cov(rng, 3, 2).coeffs
        for p in (1, 3, 5, 7):
            assert xfree_moment(coeffs, p) == 0.0

    def test_scalar_coefficients(self):
        rng = np.random.default_rng(3)
        b = rng.standard_normal(3)
        coeffs = b[:, None, None]
        for p in range(0, 13):
            direct = (np.sum(b**2)) ** (p / 2) * semicircular_word_moment((1,) * p)
            assert xfree_moment(coeffs, p) == pytest.approx(direct, rel=1e-12, abs=1e-12)

    def test_commuting_diagonal_coefficients(self):
        # diagonal B_i decouple: entry l is a semicircular of variance Σ_i b_il²
        rng = np.random.default_rng(4)
        D = rng.standard_normal((2, 3))
        coeffs = np.array([np.diag(row) for row in D])
        var = np.sum(D**2, axis=0)
        for p in (2, 4, 6, 8):
            expected = np.mean(var ** (p / 2)) * catalan(p // 2)
            assert xfree_moment(coeffs, p) == pytest.approx(expected, rel=1e-12)

    def test_matches_word_expansion(self):
        # X_free^p = Σ over words of B_{w_1}...B_{w_p} ⊗ s_{w_1}...s_{w_p}; check via the oracle
        rng = np.random.default_rng(5)
        cov = random_cov(rng, 2, 2)
        eta = {1: cov}
        for p in (2, 4, 6):
            expected = np.trace(brute_opval((1,) * p, eta, 2)).real / 2
            assert xfree_moment(cov.coeffs, p) == pytest.approx(expected, rel=1e-10)

    def test_cap(self):
        with pytest.raises(SizeLimitError):
            xfree_moment([[[1.0]]], 14)


class TestPolynomials:
    def test_algebra(self):
        P = (x1 + x2) ** 2
        assert P == x1 * x1 + x1 * x2 + x2 * x1 + x2 * x2
        assert P.degree == 2
        assert (P - P).terms == ()
        assert (2 * x1).adjoint() == 2 * x1
        assert ((1j * x1 * x2).adjoint()) == (-1j) * x2 * x1
        assert (x1 * x2 + x2 * x1).is_self_adjoint()
        assert not (x1 * x2).is_self_adjoint()

    def test_moment_examples(self):
        assert polynomial_moment(x1 * x1) == 1
        assert polynomial_moment(x1 * x2 * x1 * x2) == 0
        assert polynomial_moment((x1 + x2) ** 4) == 8
        assert polynomial_moment(NCPolynomial.constant(3.5)) == 3.5

    def test_evaluate(self):
        rng = np.random.default_rng(6)
        A, B = rng.standard_normal((2, 3, 3))
        P = 2 * x1 * x2 - 1j * x2 * x2 * x1 + 0.5
        expected = 2 * A @ B - 1j * B @ B @ A + 0.5 * np.eye(3)
        np.testing.assert_allclose(P.evaluate([A, B]), expected, atol=1e-12)
        with pytest.raises(InvalidArgumentError):
            P.evaluate([A])

    def test_json_round_trip(self):
        P = (1 + 2j) * x1 * x2 + 3 * x2
        assert NCPolynomial.from_json(P.to_json()) == P

    def test_norm_estimate_examples(self):
        assert polynomial_norm_estimate(x1, 12) == pytest.approx(132 ** (1 / 12), rel=1e-14)
        assert polynomial_norm_estimate(x1, 12) == pytest.approx(1.50215, abs=1e-5)
        assert polynomial_norm_estimate(x1 + x2, 12) == pytest.approx(math.sqrt(2) * 132 ** (1 / 12), rel=1e-12)
        assert polynomial_norm_estimate(x1 + x2, 12) == pytest.approx(2.1244, abs=1e-4)

    @pytest.mark.parametrize("P", [x1, x1 + x2, x1 * x2 + x2 * x1, x1 * x1 - 2 * x2, 1j * x1 * x2])
    def test_norm_estimate_monotone(self, P):
        vals = [polynomial_norm_estimate(P, r) for r in (2, 4, 8, 12)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_norm_estimate_below_true_norm(self):
        # ‖x1 + x2‖ = 2√2 and ‖x1‖ = 2
        assert polynomial_norm_estimate(x1, 16) < 2
        assert polynomial_norm_estimate(x1 + x2, 16) < 2 * math.sqrt(2)

    def test_zero_polynomial(self):
        assert polynomial_norm_estimate(0 * x1, 4) == 0.0

    def test_norm_estimate_rejects_odd(self):
        with pytest.raises(InvalidArgumentError):
            polynomial_norm_estimate(x1, 3)

    def test_expansion_cap(self):
        big = sum((NCPolynomial.variable(i) for i in range(1, 41)), NCPolynomial())
        with pytest.raises(SizeLimitError):
            polynomial_norm_estimate(big, 8)

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_symmetric
from strategies import polys, words
from tracepop.algebra import (
    MixedCoefficientError,
    TraceMonomial,
    TracePoly,
    canonical_cyclic,
    evaluate,
    format_poly,
    involution,
    monomial,
    tracial_degree,
    universal_trace,
)
from tracepop.examples import bell_bilocal, bell_covariance, toy_minimizer

T = TracePoly.tr
x = TracePoly.var


def brute_canonical(w):
    w = tuple(w)
    if not w:
        return w
    cands = []
    for v in (w, w[::-1]):
        cands += [v[i:] + v[:i] for i in range(len(v))]
    return min(cands, key=lambda u: (len(u), u))


class TestCanonicalCyclic:
    def test_rotation_of_length_two(self):
        assert canonical_cyclic((1, 0)) == (0, 1)

    def test_distinct_classes_of_length_four(self):
        assert canonical_cyclic((1, 0, 2, 3)) != canonical_cyclic((0, 1, 2, 3))

    def test_all_orderings_of_three_letters_are_one_class(self):
        classes = {canonical_cyclic(p) for p in itertools.permutations(range(3))}
        assert len(classes) == 1

    @pytest.mark.parametrize("length", range(0, 7))
    def test_matches_brute_force(self, length):
        for w in itertools.product(range(3), repeat=length):
            assert canonical_cyclic(w) == brute_canonical(w)

    @given(words(4, 0, 8))
    def test_idempotent_and_invariant(self, w):
        c = canonical_cyclic(w)
        assert canonical_cyclic(c) == c
        assert canonical_cyclic(w[::-1]) == c
        if w:
            assert canonical_cyclic(w[1:] + w[:1]) == c


class TestInvolution:
    def test_displayed_example(self):
        # x1 x2 x1^2 - Tr(x2)Tr(x1x2)Tr(x1^2x2) x2 x1
        coef = T((1,)) * T((0, 1)) * T((0, 0, 1))
        f = TracePoly.word((0, 1, 0, 0)) - coef * TracePoly.word((1, 0))
        expected = TracePoly.word((0, 0, 1, 0)) - coef * TracePoly.word((0, 1))
        assert involution(f) == expected

    @given(polys(pure=True))
    def test_fixes_pure(self, a):
        assert involution(a) == a

    @given(polys())
    def test_is_an_involution(self, f):
        assert involution(involution(f)) == f

    @given(polys(max_terms=3), polys(max_terms=3))
    def test_anti_automorphism(self, f, g):
        assert involution(f * g) == involution(g) * involution(f)


class TestUniversalTrace:
    def test_displayed_example(self):
        coef = T((1,)) * T((0, 1)) * T((0, 0, 1))
        f = TracePoly.word((0, 1, 0, 0)) - coef * TracePoly.word((1, 0))
        expected = T((0, 0, 0, 1)) - T((1,)) * T((0, 1)) ** 2 * T((0, 0, 1))
        assert universal_trace(f) == expected

    def test_of_one(self):
        assert universal_trace(TracePoly.constant(1)) == TracePoly.constant(1)

    @given(polys(max_terms=3), polys(max_terms=3))
    def test_tracial_property(self, f, g):
        assert universal_trace(f * g) == universal_trace(g * f)

    @given(polys())
    def test_star_invariant_and_idempotent(self, f):
        tf = universal_trace(f)
        assert tf.is_pure
        assert universal_trace(involution(f)) == tf
        assert universal_trace(tf) == tf


class TestRing:
    @given(polys())
    def test_zero_is_neutral(self, f):
        assert f + TracePoly() == f
        assert not (f - f)

    def test_trace_factor_commutes(self):
        m = T((0,)) * x(1) * x(0)
        assert m == TracePoly({monomial([(0,)], (1, 0)): 1})

    @given(polys(max_terms=3), polys(max_terms=3), polys(max_terms=3))
    def test_distributive_and_associative(self, f, g, h):
        assert (f + g) * h == f * h + g * h
        assert (f * g) * h == f * (g * h)

    def test_no_zero_coefficients_stored(self):
        f = x(0) - x(0) + T((1,)) * 0
        assert f.terms == {}

    def test_mixing_rationals_and_floats_raises(self):
        with pytest.raises(MixedCoefficientError):
            _ = TracePoly.constant(Fraction(1, 3)) + TracePoly.constant(0.5)
        # integers mix freely with either domain
        assert (TracePoly.constant(2) + 0.5).constant_term() == 2.5

    def test_explicit_conversion(self):
        f = Fraction(1, 3) * x(0)
        assert f.to_float().terms[next(iter(f.terms))] == pytest.approx(1 / 3)
        assert f.to_float().to_exact(100) == f


class TestDegree:
    def test_small(self):
        assert tracial_degree(T((0,)) * x(0)) == 2

    def test_covariance_objective(self):
        assert tracial_degree(bell_covariance().objective) == 2
        # product terms Tr(x)Tr(y) have degree 2; the objective is quadratic

    def test_bilocal_objective(self):
        spec = bell_bilocal()
        assert tracial_degree(spec.objective) == 8
        assert spec.n == 8


class TestEvaluate:
    def test_toy_projections_give_minus_one_over_32(self):
        a = T((0, 1, 2)) + T((0, 1)) * T((2,))
        assert evaluate(a, toy_minimizer()) == pytest.approx(-1 / 32, abs=1e-14)

    def test_zero_tuple_gives_constant_term(self):
        f = 3 + T((0, 1)) + 2 * T((0,)) * T((1,))
        Z = [np.zeros((3, 3))] * 2
        assert evaluate(f, Z) == 3

    def test_non_pure_returns_matrix(self):
        A = [np.diag([1.0, 2.0])]
        np.testing.assert_allclose(evaluate(T((0,)) * x(0), A), np.diag([1.5, 3.0]))

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            evaluate(x(0) * x(1), [np.eye(2)])
        with pytest.raises(ValueError):
            evaluate(x(0), [np.array([[0.0, 1.0], [0.0, 0.0]])])
        with pytest.raises(ValueError):
            evaluate(x(0) * x(1), [np.eye(2), np.eye(3)])

    @given(polys(max_terms=3), polys(max_terms=3), st.integers(0, 2**31 - 1), st.integers(1, 4))
    def test_star_homomorphism(self, f, g, seed, k):
        rng = np.random.default_rng(seed)
        A = [random_symmetric(rng, k, 0.7) for _ in range(3)]

        def val(p):
            v = evaluate(p.to_float() if p.is_exact else p, A)
            return float(v) * np.eye(k) if p.is_pure else np.asarray(v, dtype=float)

        Ef, Eg = val(f), val(g)
        np.testing.assert_allclose(val(f + g), Ef + Eg, atol=1e-10)
        np.testing.assert_allclose(val(f * g), Ef @ Eg, atol=1e-10)
        np.testing.assert_allclose(val(involution(f)), Ef.T, atol=1e-10)
        assert float(evaluate(universal_trace(f).to_float(), A)) == pytest.approx(np.trace(Ef) / k, abs=1e-10)

    @given(polys(max_terms=3), polys(max_terms=3), st.integers(0, 2**31 - 1))
    def test_exact_arithmetic_homomorphism(self, f, g, seed):
        rng = np.random.default_rng(seed)
        k = 2
        A = []
        for _ in range(3):
            M = np.empty((k, k), dtype=object)
            for i in range(k):
                for j in range(i, k):
                    M[i, j] = M[j, i] = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
            A.append(M)

        def val(p):
            v = evaluate(p, A)
            if p.is_pure:
                return [[v if i == j else 0 for j in range(k)] for i in range(k)]
            return v.tolist()

        got = val(f * g)
        Ef, Eg = np.array(val(f), dtype=object), np.array(val(g), dtype=object)
        assert got == (Ef @ Eg).tolist()
        assert evaluate(universal_trace(f), A) == sum(Ef[i, i] for i in range(k)) / k


class TestFormatting:
    def test_examples(self):
        assert format_poly(T((0, 1, 2)) + T((0, 1)) * T((2,))) == "tr(x3)*tr(x1*x2) + tr(x1*x2*x3)"
        assert format_poly(Fraction(1, 3) * x(0) * x(0) - 2) == "-2 + 1/3*x1^2"
        assert format_poly(TracePoly()) == "0"
        assert format_poly(T((0,)) ** 2, ["a"]) == "tr(a)^2"

    def test_monomial_is_hashable_key(self):
        m = TraceMonomial(((0,),), (1,))
        assert {m: 1}[monomial([(0,)], (1,))] == 1

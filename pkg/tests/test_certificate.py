import copy
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_projection
from tracepop.algebra import ONE, TraceMonomial, TracePoly, evaluate
from tracepop.certificate import (
    BOUNDED,
    EQUALITY_TERM,
    TRACE_SQUARE,
    Certificate,
    CertificateError,
    CertificateTerm,
    DegreeExplosionError,
    dumps_certificate,
    exact_psd_repair,
    extract_certificate,
    loads_certificate,
    read_certificate,
    univariate_split,
    verify_certificate,
    write_certificate,
)
from tracepop.examples import toy
from tracepop.relaxation import Constraint, ProblemSpec, build_relaxation, solve_relaxation
from tracepop.sdp.core import NUMERICAL_FAILURE

T = TracePoly.tr
x = TracePoly.var
X1 = TraceMonomial((), (0,))
X2 = TraceMonomial((), (1,))


def solve_spec(spec, d, **kw):
    r = solve_relaxation(build_relaxation(spec, d, **kw))
    return r, extract_certificate(r.relaxation, r.result)


class TestExtraction:
    def test_trace_square_objective(self):
        spec = ProblemSpec(1, T((0, 0)), [], 1).validate()
        r, cert = solve_spec(spec, 1)
        assert cert.m == pytest.approx(0, abs=1e-7)
        rep = verify_certificate(cert)
        assert rep.residual <= 1e-8
        (hank,) = [t for t in cert.terms if t.tag == TRACE_SQUARE]
        # the Gram weight sits on x1 in the basis (1, x1, tr(x1))
        G = hank.gram_array()
        i = hank.basis.index(X1)
        assert G[i, i] == pytest.approx(1, abs=1e-6)

    def test_analytic_instance_uses_boundedness(self):
        spec = ProblemSpec(1, T((0,)), [], 1).validate()
        r, cert = solve_spec(spec, 1)
        assert cert.bound == pytest.approx(-1, abs=1e-6)
        bnd = [t for t in cert.terms if t.tag == BOUNDED]
        assert bnd and max(np.abs(t.gram_array()).max() for t in bnd) > 1e-3
        assert verify_certificate(cert).residual <= 1e-9

    @pytest.mark.parametrize("d", [2, 3])
    def test_toy(self, solved, d):
        r = solved("toy", d)
        cert = extract_certificate(r.relaxation, r.result)
        assert cert.bound == pytest.approx(r.bound)
        assert verify_certificate(cert).residual <= 1e-6
        if d == 3:
            assert cert.bound == pytest.approx(-1 / 32, abs=1e-6)

    def test_general_equality_terms(self):
        s = T((0,)) - TracePoly.constant(Fraction(1, 2))
        spec = ProblemSpec(1, T((0, 0)), [Constraint("equality", poly=s)], 1).validate()
        r, cert = solve_spec(spec, 1)
        assert cert.bound == pytest.approx(0.25, abs=1e-6)
        assert any(t.tag == EQUALITY_TERM for t in cert.terms)
        assert verify_certificate(cert).residual <= 1e-7

    def test_rejects_non_optimal(self, solved):
        r = solved("toy", 2)
        bad = copy.copy(r.result)
        bad.status = NUMERICAL_FAILURE
        with pytest.raises(CertificateError):
            extract_certificate(r.relaxation, bad)

    def test_rejects_indefinite_gram(self, solved):
        r = solved("toy", 2)
        bad = copy.copy(r.result)
        bad.X = [X - 1e-3 * np.eye(len(X)) for X in r.result.X]
        with pytest.raises(CertificateError, match="indefinite"):
            extract_certificate(r.relaxation, bad)

    def test_clips_tiny_negative_eigenvalues(self, solved):
        r = solved("toy", 2)
        bad = copy.copy(r.result)
        bad.X = [X - 1e-6 * np.eye(len(X)) for X in r.result.X]
        cert = extract_certificate(r.relaxation, bad)
        assert np.linalg.eigvalsh(cert.terms[0].gram_array())[0] >= -1e-12


class TestVerification:
    def hand_built(self, gram):
        return Certificate(2, 1, 1, 0, "min", ["x1", "x2"], {}, T((0, 0)) + 2 * T((0, 1)) + T((1, 1)),
                           [CertificateTerm(TRACE_SQUARE, TracePoly.constant(1), [X1, X2], gram)])

    def test_hand_built_identity(self):
        cert = self.hand_built([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]])
        rep = verify_certificate(cert, exact=True)
        assert rep.residual == 0 and rep.exact
        assert verify_certificate(self.hand_built(np.ones((2, 2)))).residual == 0.0

    def test_symbolic_expansion_agrees(self):
        cert = self.hand_built([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]])
        assert cert.terms[0].polynomial() == cert.objective

    def test_corrupted_coefficient_located(self):
        cert = self.hand_built([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(2)]])
        rep = verify_certificate(cert, exact=True)
        assert rep.residual == 1
        assert rep.worst == TraceMonomial(((1, 1),), ())
        assert "tr(x2^2)" in rep.describe(cert.names)

    def test_wrong_target(self):
        cert = self.hand_built(np.ones((2, 2)))
        assert verify_certificate(cert, a=T((0, 0))).residual == pytest.approx(2)

    def test_mutated_toy_certificate_fails(self, solved):
        r = solved("toy", 2)
        cert = extract_certificate(r.relaxation, r.result)
        bad = copy.deepcopy(cert)
        bad.terms[0].gram[3, 3] += 1e-3
        assert verify_certificate(bad).residual >= 1e-3 - 1e-9
        bad = copy.deepcopy(cert)
        bad.m = cert.m + 1e-4
        rep = verify_certificate(bad)
        assert rep.residual >= 1e-4 - 1e-9 and rep.worst == ONE

    def test_exact_residual_shrinks(self, solved):
        r = solved("toy", 2)
        cert = extract_certificate(r.relaxation, r.result)
        coarse = verify_certificate(cert, exact=True, max_denominator=10**3)
        fine = verify_certificate(cert, exact=True, max_denominator=10**6)
        assert isinstance(fine.residual, Fraction)
        assert fine.residual < coarse.residual
        assert float(fine.residual) <= 1e-6

    def test_validate_rejects_malformed(self):
        with pytest.raises(CertificateError):
            self.hand_built(np.array([[1.0, 2.0], [0.0, 1.0]])).validate()
        cert = self.hand_built(np.ones((2, 2)))
        cert.terms[0].tag = "magic"
        with pytest.raises(CertificateError):
            cert.validate()
        cert = self.hand_built(np.ones((3, 3)))
        with pytest.raises(CertificateError):
            cert.validate()


class TestExactRepair:
    def test_psd_input_untouched(self):
        G = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]]
        out, dropped = exact_psd_repair(G)
        assert out == G and dropped == 0

    def test_slightly_indefinite_repaired(self):
        G = [[Fraction(1), Fraction(1)], [Fraction(1), Fraction(999, 1000)]]
        out, dropped = exact_psd_repair(G)
        assert dropped == Fraction(1, 1000)
        assert out[1][1] == 1  # rank-one completion


class TestProofFiles:
    def test_round_trip_preserves_residual(self, solved, tmp_path):
        r = solved("toy", 2)
        cert = extract_certificate(r.relaxation, r.result)
        path = tmp_path / "cert.txt"
        write_certificate(cert, path)
        back = read_certificate(path)
        assert back.m == cert.m and len(back.terms) == len(cert.terms)
        assert verify_certificate(back).residual == pytest.approx(verify_certificate(cert).residual, abs=1e-15)
        assert dumps_certificate(back) == path.read_text()

    def test_exact_round_trip(self):
        cert = TestVerification().hand_built([[Fraction(1), Fraction(1, 3)], [Fraction(1, 3), Fraction(1)]])
        text = dumps_certificate(cert)
        assert text.startswith("tracepop-certificate 1")
        back = loads_certificate(text)
        assert back.terms[0].gram[0][1] == Fraction(1, 3)

    def test_garbage_rejected(self):
        with pytest.raises(CertificateError):
            loads_certificate("not a certificate\n")


class TestUnivariateSplit:
    def test_eps_one(self):
        s = univariate_split(1)
        assert s.n == 1
        assert s.s2 == [Fraction(1, 2), -1, Fraction(1, 2)]
        assert s.s1 == [Fraction(1, 2), 0, Fraction(1, 2)]

    @pytest.mark.parametrize("eps", [1, Fraction(1, 2), 0.1])
    def test_properties(self, eps):
        s = univariate_split(eps)
        assert s.identity_holds()
        assert sum(s.s2) == 0  # s2(1) = 0 exactly
        rng = np.random.default_rng(0)
        t = rng.uniform(-10, 10, 1000)
        assert np.all(s.eval_s1(t) > 0)
        u = rng.uniform(0, 1, 1000)
        assert np.all(float(s.eps) / 2 - s.eval_s2(u) >= -1e-12)
        sq = s.eval_squares(t)
        np.testing.assert_allclose(sq, s.eval_s1(t), rtol=1e-6)

    def test_float_eps_is_read_exactly(self):
        assert univariate_split(0.1).eps == Fraction(1, 10)
        assert univariate_split(0.1).n == 10
        with pytest.raises(ValueError):
            univariate_split(0)

    def test_apply_to_projection(self):
        s = univariate_split(1)
        got = s.apply("s2", x(0), {0: "projection"})
        # (1/2)(p - 1)^2 = (1/2)(1 - p) when p^2 = p
        assert got == Fraction(1, 2) - Fraction(1, 2) * x(0)


def projection_spec(n=1):
    return ProblemSpec(n, TracePoly(), [Constraint("projection", var=j) for j in range(n)], 1).validate()


class TestOperatorPositivity:
    def test_identity(self):
        from tracepop.certificate import verify_operator_positivity

        v = verify_operator_positivity(TracePoly.constant(1), projection_spec(), 1, eps=1)
        assert v.positive

    def test_projection_is_positive(self):
        from tracepop.certificate import verify_operator_positivity

        v = verify_operator_positivity(x(0), projection_spec(), 2)
        assert v.positive
        assert v.bound == pytest.approx(0.25, abs=1e-6)

    def test_negated_projection_inconclusive(self):
        from tracepop.certificate import verify_operator_positivity

        v = verify_operator_positivity(-x(0), projection_spec(), 2)
        assert not v.positive and v.bound < 0

    def test_degree_guard(self):
        from tracepop.certificate import verify_operator_positivity

        with pytest.raises(DegreeExplosionError):
            verify_operator_positivity(x(0) * x(1) + x(1) * x(0), ProblemSpec(2, TracePoly(), [], 1), 2, eps=0.1)

    def test_trace_check_is_not_operator_positivity(self):
        """The trace-level test passes for x1 - 1/10 although X1 = 0 makes it negative.

        Only the weaker eigenvalue floor follows from a positive verdict.
        """
        from tracepop.certificate import verify_operator_positivity

        a = x(0) - Fraction(1, 10)
        v = verify_operator_positivity(a, projection_spec(), 2)
        assert v.positive
        assert evaluate(a, [np.zeros((1, 1))])[0, 0] == pytest.approx(-0.1)
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(1, 6))
            A = random_projection(rng, k)
            lo = np.linalg.eigvalsh(np.asarray(evaluate(a.to_float(), [A]), float))[0]
            assert lo >= v.eigenvalue_floor(k) - 1e-12

    def test_falsification_harness(self):
        """Positive verdicts never coexist with a sampled negative trace bound."""
        from tracepop.certificate import verify_operator_positivity

        rng = np.random.default_rng(1)
        for a in (x(0), TracePoly.constant(1), x(0) + x(1) + x(0) * x(1) + x(1) * x(0) + 1):
            spec = projection_spec(2)
            try:
                v = verify_operator_positivity(a, spec, 2)
            except DegreeExplosionError:
                continue
            if not v.positive:
                continue
            for _ in range(50):
                k = int(rng.integers(1, 5))
                A = [random_projection(rng, k) for _ in range(2)]
                val = float(v.eps) - evaluate(v.trace_s2.to_float(), A)
                assert val >= -1e-9
                V = evaluate(a.to_float(), A)
                lo = float(V) if a.is_pure else np.linalg.eigvalsh(np.asarray(V, float))[0]
                assert lo >= v.eigenvalue_floor(k) - 1e-9

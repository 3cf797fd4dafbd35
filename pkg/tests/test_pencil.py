import numpy as np
import pytest
from numpy.testing import assert_allclose

from cfmatrix.confrac import (
    ContinuedFraction,
    Polynomial,
    approximant,
    builder_exp,
    builder_sqrt1p,
    contract,
    eval_backward,
)
from cfmatrix.errors import (
    InvalidScaling,
    IrregularPencil,
    LengthTooShort,
    MultiplePoleDetected,
    NotACFraction,
    ShapeViolation,
    SingularAtZ,
)
from cfmatrix.linalg import dense_eigenvalues, polynomial_roots
from cfmatrix.pencil import (
    PolyTridiag,
    Tridiag,
    TridiagPencil,
    entry11_inverse,
    eval_pencil,
    finite_poles,
    minors,
    pencil_from_cfraction,
    pencil_from_contracted,
    pencil_from_longdiv,
    pfe,
    scale_pencil,
)


def check_matches_cf(pencil, cf, n, zs):
    """entry11_inverse == 1/g_n at the given points (eval_backward oracle)."""
    for z in zs:
        g = eval_backward(cf, n, z)
        got = entry11_inverse(pencil, z)
        assert abs(got - 1.0 / g) <= 1e-11 * abs(1.0 / g)


class TestPencilFromCFraction:
    def test_exp_n2_matrices(self):
        p = pencil_from_cfraction(builder_exp(2))
        assert_allclose(p.t0.todense(), [[1, 1, 0], [0, 1, 1], [0, 0, 1]])
        T1 = p.t1.todense()
        assert_allclose(T1[1, 0], 1.0)
        assert_allclose(T1[2, 1], -0.5)
        assert np.count_nonzero(T1) == 2

    def test_degenerate_zero_c(self):
        cf = ContinuedFraction(
            [Polynomial([2.0]), Polynomial([1.0])], [Polynomial([0.0])]
        )
        p = pencil_from_cfraction(cf)
        assert np.count_nonzero(p.t1.todense()) == 0
        assert entry11_inverse(p, 3.7) == pytest.approx(0.5)

    def test_entry11_matches_inverse_approximant(self):
        cf = builder_exp(6)
        p = pencil_from_cfraction(cf)
        rng = np.random.default_rng(0)
        check_matches_cf(p, cf, 6, rng.uniform(-1, 1, size=10))

    def test_rejects_non_cfraction(self):
        cf = ContinuedFraction(
            [Polynomial([1.0]), Polynomial([1.0, 2.0])], [Polynomial([1.0])]
        )
        with pytest.raises(NotACFraction):
            pencil_from_cfraction(cf)

    def test_eq8_identities(self):
        # beta_i == b_i and -alpha_i * gamma_i == c_i as polynomial identities
        cf = builder_sqrt1p(5)
        poly = pencil_from_cfraction(cf).as_poly()
        for i in range(6):
            assert poly.beta(i) == cf.b[i]
        for i in range(1, 6):
            assert -(poly.alpha(i) * poly.gamma(i)) == cf.c[i - 1]


class TestPencilFromContracted:
    def test_exp_n1_matrices(self):
        p = pencil_from_contracted(builder_exp(2))
        assert_allclose(p.t0.todense(), [[1, -1], [0, 1]])
        assert_allclose(p.t1.todense(), [[0, 0], [-1, 0.5]])

    def test_determinant_matches_hand_value(self):
        p = pencil_from_contracted(builder_exp(2))
        for z in (-0.5, 0.0, 2.0):
            assert minors(p, z)[-1] == pytest.approx(1 + z / 2)

    def test_entry11_matches_even_approximants(self):
        cf = builder_exp(12)
        p = pencil_from_contracted(cf)
        rng = np.random.default_rng(1)
        check_matches_cf(p, cf, 12, rng.uniform(-1, 1, size=10))

    def test_too_short(self):
        with pytest.raises(LengthTooShort):
            pencil_from_contracted(builder_exp(1))

    def test_eq8_identities_against_contract(self):
        cf = builder_exp(10)
        cfc = contract(cf)
        poly = pencil_from_contracted(cf).as_poly()
        for i in range(len(cfc) + 1):
            assert poly.beta(i) == cfc.b[i]
        for i in range(1, len(cfc) + 1):
            prod = -(poly.alpha(i) * poly.gamma(i))
            ref = cfc.c[i - 1]
            n = max(len(prod.coef), len(ref.coef))
            a = np.zeros(n)
            a[: len(prod.coef)] = prod.coef
            b = np.zeros(n)
            b[: len(ref.coef)] = ref.coef
            assert_allclose(a, b, atol=1e-15)


class TestPencilFromLongdiv:
    def test_displayed_matrices(self):
        # b = (z, z): constant parts 0, linear parts -1 under b(z) = b0 - b1 z
        cf = ContinuedFraction(
            [Polynomial([0.0, 1.0]), Polynomial([0.0, 1.0])], [Polynomial([1.0])]
        )
        p = pencil_from_longdiv(cf)
        assert_allclose(p.t0.todense(), [[0, -1], [1, 0]])
        assert_allclose(p.t1.todense(), -np.eye(2))

    def test_symmetrized_is_symmetric(self):
        cf = ContinuedFraction(
            [Polynomial([1.0, 2.0]), Polynomial([-1.0, 1.0]), Polynomial([0.5, -3.0])],
            [Polynomial([1.0]), Polynomial([1.0])],
        )
        p = pencil_from_longdiv(cf, symmetric=True)
        assert p.t0.is_symmetric() and p.t1.is_symmetric()

    def test_symmetrization_preserves_values(self):
        cf = ContinuedFraction(
            [Polynomial([1.0, 2.0]), Polynomial([-1.0, 1.0]), Polynomial([0.5, -3.0])],
            [Polynomial([1.0]), Polynomial([1.0])],
        )
        plain = pencil_from_longdiv(cf)
        sym = pencil_from_longdiv(cf, symmetric=True)
        rng = np.random.default_rng(2)
        for z in rng.uniform(-1, 1, size=8):
            try:
                a = entry11_inverse(plain, z)
                b = entry11_inverse(sym, z)
            except SingularAtZ:
                continue
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_longdiv_pencil_matches_cf(self):
        cf = ContinuedFraction(
            [Polynomial([1.0, 2.0]), Polynomial([-1.0, 1.0]), Polynomial([0.5, -3.0])],
            [Polynomial([1.0]), Polynomial([1.0])],
        )
        p = pencil_from_longdiv(cf)
        rng = np.random.default_rng(3)
        zs = [z for z in rng.uniform(-1, 1, size=12)][:8]
        for z in zs:
            try:
                g = eval_backward(cf, 2, z)
                got = entry11_inverse(p, z)
            except Exception:
                continue
            assert abs(got - 1.0 / g) <= 1e-10 * abs(1.0 / g)

    def test_shape_violations(self):
        bad_c = ContinuedFraction(
            [Polynomial([1.0]), Polynomial([1.0])], [Polynomial([2.0])]
        )
        with pytest.raises(ShapeViolation):
            pencil_from_longdiv(bad_c)
        bad_b = ContinuedFraction(
            [Polynomial([1.0, 0.0, 1.0]), Polynomial([1.0])], [Polynomial([1.0])]
        )
        with pytest.raises(ShapeViolation):
            pencil_from_longdiv(bad_b)


class TestEvalAndMinors:
    def test_eval_at_zero_is_t0(self):
        p = pencil_from_contracted(builder_exp(8))
        assert_allclose(eval_pencil(p, 0.0).todense(), p.t0.todense())

    def test_eval_linear_sum(self):
        p = pencil_from_contracted(builder_exp(8))
        assert_allclose(
            eval_pencil(p, 1.0).todense(), p.t0.todense() - p.t1.todense()
        )

    def test_eval_singular_point(self):
        p = pencil_from_contracted(builder_exp(2))
        M = eval_pencil(p, -2.0).todense()
        assert_allclose(M, [[1, -1], [-2, 2]])
        assert abs(np.linalg.det(M)) < 1e-14

    def test_minors_diagonal_pencil(self):
        t0 = Tridiag(np.zeros(2), [2.0, 3.0, 4.0], np.zeros(2))
        p = TridiagPencil(t0, Tridiag.zeros(3))
        assert_allclose(minors(p, 0.7), [1.0, 2.0, 6.0, 24.0])

    def test_minors_exp_contracted_at_zero(self):
        assert_allclose(minors(pencil_from_contracted(builder_exp(2)), 0.0), [1, 1, 1])

    def test_last_minor_is_approximant_numerator(self):
        cf = builder_exp(7)
        p = pencil_from_cfraction(cf)
        g = approximant(cf, 7)
        rng = np.random.default_rng(4)
        for z in rng.uniform(-1.5, 1.5, size=10):
            assert minors(p, z)[-1] == pytest.approx(g.numerator(z), rel=1e-11, abs=1e-13)


class TestEntry11:
    def test_two_by_two_closed_form(self):
        # entries (b0, g1; a1, b1) with -a1*g1 = c1: inverse (1,1) entry is
        # b1/(b0*b1 + c1) = 1/g_1
        t0 = Tridiag([3.0], [2.0, 5.0], [-4.0])
        p = TridiagPencil(t0, Tridiag.zeros(2))
        c1 = -3.0 * -4.0
        assert entry11_inverse(p, 0.0) == pytest.approx(5.0 / (2.0 * 5.0 + c1))

    def test_exp_contracted_at_zero(self):
        assert entry11_inverse(pencil_from_contracted(builder_exp(2)), 0.0) == pytest.approx(1.0)

    def test_singular_at_z(self):
        with pytest.raises(SingularAtZ):
            entry11_inverse(pencil_from_contracted(builder_exp(2)), -2.0)


class TestPoles:
    def test_exp_contracted_n1(self):
        tau, ninf = finite_poles(pencil_from_contracted(builder_exp(2)))
        assert_allclose(tau, [-2.0 + 0j], atol=1e-14)
        assert ninf == 1

    def test_diagonal_pencil(self):
        t0 = Tridiag(np.zeros(2), [1.0, 2.0, 3.0], np.zeros(2))
        p = TridiagPencil(t0, Tridiag.identity(3))
        tau, ninf = finite_poles(p)
        assert_allclose(sorted(tau.real), [1.0, 2.0, 3.0], atol=1e-12)
        assert_allclose(tau.imag, 0, atol=1e-12)
        assert ninf == 0

    def test_finite_plus_infinite_count(self):
        for n in (2, 5, 9):
            p = pencil_from_contracted(builder_exp(2 * n))
            tau, ninf = finite_poles(p)
            assert len(tau) + ninf == n + 1

    def test_against_approximant_denominator_roots(self):
        # independent oracle: companion roots of the numerator polynomial of
        # g_{2n} (the denominator of r = 1/g)
        n = 8
        cf = builder_exp(2 * n)
        p = pencil_from_contracted(cf)
        tau, _ = finite_poles(p)
        g = approximant(cf, 2 * n)
        ref = polynomial_roots(g.numerator.coef)
        got = sorted(tau, key=lambda t: (round(t.real, 6), round(t.imag, 6)))
        ref = sorted(ref, key=lambda t: (round(t.real, 6), round(t.imag, 6)))
        for a, b in zip(got, ref):
            assert abs(a - b) <= 1e-8 * max(1.0, abs(b))

    def test_irregular_pencil(self):
        p = TridiagPencil(Tridiag.zeros(3), Tridiag.zeros(3))
        with pytest.raises(IrregularPencil):
            finite_poles(p)

    def test_rutishauser_zero_property(self):
        # For T(z) = T0 - zI, every eigenvalue of T0 is a zero of the
        # continued fraction built from its entries: d_n(lambda) ~ 0.
        rng = np.random.default_rng(8)
        for _ in range(10):
            n1 = int(rng.integers(2, 7))
            t0 = Tridiag(
                rng.uniform(-2, 2, n1 - 1), rng.uniform(-2, 2, n1), rng.uniform(-2, 2, n1 - 1)
            )
            p = TridiagPencil(t0, Tridiag.identity(n1))
            lams = dense_eigenvalues(t0.todense())
            for lam in lams:
                d = minors(p, lam)
                scale = max(abs(x) for x in d)
                assert abs(d[-1]) <= 1e-9 * max(scale, 1.0)


class TestPfe:
    def test_exp_contracted_n1_exact(self):
        e = pfe(pencil_from_contracted(builder_exp(2)))
        assert_allclose(e.poles, [-2.0 + 0j], atol=1e-12)
        assert_allclose(e.weights, [-4.0 + 0j], atol=1e-12)
        assert e.constant == pytest.approx(-1.0, abs=1e-12)

    def test_trivial_resolvent(self):
        p = TridiagPencil(
            Tridiag(np.zeros(0), [3.5], np.zeros(0)), Tridiag.identity(1)
        )
        e = pfe(p)
        assert_allclose(e.poles, [3.5])
        assert_allclose(e.weights, [1.0])
        assert e.constant == 0.0

    @pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
    def test_reconstruction_exp(self, n):
        p = pencil_from_contracted(builder_exp(2 * n))
        e = pfe(p)
        rng = np.random.default_rng(n)
        zs = np.exp(2j * np.pi * rng.uniform(size=20))
        for z in zs:
            direct = entry11_inverse(p, z)
            rec = e(z)
            assert abs(rec - direct) <= 1e-10 * abs(direct)

    def test_reconstruction_invsqrt(self):
        p = pencil_from_contracted(builder_sqrt1p(20))
        e = pfe(p)
        rng = np.random.default_rng(0)
        zs = 0.5 * np.exp(2j * np.pi * rng.uniform(size=20))
        for z in zs:
            direct = entry11_inverse(p, z)
            assert abs(e(z) - direct) <= 1e-10 * abs(direct)

    def test_pole_weight_count_matches(self):
        p = pencil_from_contracted(builder_exp(12))
        e = pfe(p)
        tau, ninf = finite_poles(p)
        assert_allclose(e.poles, tau)
        assert len(e.poles) + ninf == p.n_plus_1

    def test_multiple_pole_detected(self):
        # (1-z)^2 determinant: T0 = I, T1 = I on 2x2 diag pencil
        p = TridiagPencil(Tridiag.identity(2), Tridiag.identity(2))
        with pytest.raises(MultiplePoleDetected):
            pfe(p)


class TestScalePencil:
    def test_identity(self):
        p = pencil_from_contracted(builder_exp(6))
        q = scale_pencil(p, np.ones(p.n_plus_1))
        assert_allclose(q.t0.todense(), p.t0.todense())
        assert_allclose(q.t1.todense(), p.t1.todense())

    def test_entry11_invariant(self):
        p = pencil_from_contracted(builder_exp(8))
        rng = np.random.default_rng(5)
        d = np.r_[1.0, rng.choice([-2.0, 0.5, 1.5, 3.0], size=p.n_plus_1 - 1)]
        q = scale_pencil(p, d)
        for z in rng.uniform(-1, 1, size=10):
            assert entry11_inverse(q, z) == pytest.approx(
                entry11_inverse(p, z), rel=1e-12
            )

    def test_poles_invariant(self):
        p = pencil_from_contracted(builder_exp(8))
        rng = np.random.default_rng(6)
        d = np.r_[1.0, rng.choice([-1.0, 0.5, 2.0], size=p.n_plus_1 - 1)]
        q = scale_pencil(p, d)
        ta, _ = finite_poles(p)
        tb, _ = finite_poles(q)
        ta = sorted(ta, key=lambda t: (round(t.real, 8), round(t.imag, 8)))
        tb = sorted(tb, key=lambda t: (round(t.real, 8), round(t.imag, 8)))
        for a, b in zip(ta, tb):
            assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    def test_invalid_scalings(self):
        p = pencil_from_contracted(builder_exp(4))
        with pytest.raises(InvalidScaling):
            scale_pencil(p, np.r_[2.0, np.ones(p.n_plus_1 - 1)])
        with pytest.raises(InvalidScaling):
            scale_pencil(p, np.r_[1.0, 0.0, np.ones(p.n_plus_1 - 2)])


class TestTextExport:
    def test_roundtrip(self):
        from cfmatrix.pencil import pencil_from_text, pencil_to_text

        p = pencil_from_contracted(builder_exp(6))
        q = pencil_from_text(pencil_to_text(p))
        assert_allclose(q.t0.todense(), p.t0.todense())
        assert_allclose(q.t1.todense(), p.t1.todense())

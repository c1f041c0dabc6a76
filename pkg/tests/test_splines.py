import numpy as np
import pytest

from gebvisc.splines import (KnotVector, NurbsCurve, arclength_derivatives,
                             basis_eval, basis_matrices, greville,
                             interpolate_curve, interpolate_function,
                             line_curve, to_arclength)


def spivak_point(s):
    """Piecewise-defined test curve with a flat (zero-curvature) point at s=0."""
    if s == 0.0:
        return np.zeros(3)
    bump = np.exp(-1.0 / s ** 2)
    if s < 0.0:
        return np.array([s, 0.0, bump])
    return np.array([s, bump, 0.0])


def spiral_point(t):
    return np.array([t * np.sin(t), t * np.cos(t), 0.0])


class TestKnotVector:
    def test_validation(self):
        with pytest.raises(ValueError):
            KnotVector(2, [0, 0, 0, 0.5, 0.4, 1, 1, 1])  # decreasing
        with pytest.raises(ValueError):
            KnotVector(2, [0, 0, 0.5, 1, 1])  # not clamped
        with pytest.raises(ValueError):
            KnotVector(2, [0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1])  # multiplicity 3 > p

    def test_counts(self):
        kv = KnotVector.open_uniform(4, 13)
        assert kv.n == 13
        assert len(kv.knots) == 13 + 4 + 1


class TestBasis:
    def test_linear_hats(self):
        kv = KnotVector(1, [0.0, 0.0, 1.0, 1.0])
        first, ders = basis_eval(kv, 0.3)
        assert first == 0
        np.testing.assert_allclose(ders[0], [0.7, 0.3])

    def test_partition_of_unity_and_zero_sum_derivatives(self):
        rng = np.random.default_rng(21)
        for p, n in [(2, 5), (3, 9), (4, 7), (6, 20), (8, 25)]:
            kv = KnotVector.open_uniform(p, n)
            for u in rng.uniform(0.0, 1.0, size=1000):
                _, ders = basis_eval(kv, u, 2)
                assert abs(ders[0].sum() - 1.0) < 1e-14
                assert abs(ders[1].sum()) < 1e-9
                assert abs(ders[2].sum()) < 1e-6

    def test_first_derivative_vs_finite_difference(self):
        rng = np.random.default_rng(22)
        kv = KnotVector(2, [0, 0, 0, *np.sort(rng.uniform(0.1, 0.9, 3)), 1, 1, 1])
        h = 1e-6
        us = rng.uniform(0.01, 0.99, 50)
        B1 = basis_matrices(kv, us, 1)[1]
        Bp = basis_matrices(kv, us + h, 0)[0]
        Bm = basis_matrices(kv, us - h, 0)[0]
        assert np.abs((Bp - Bm) / (2 * h) - B1).max() < 1e-6

    def test_deriv_order_exceeding_degree_rejected(self):
        kv = KnotVector.open_uniform(2, 6)
        with pytest.raises(ValueError):
            basis_eval(kv, 0.5, 3)

    def test_outside_domain_rejected(self):
        kv = KnotVector.open_uniform(2, 6)
        with pytest.raises(ValueError):
            basis_eval(kv, 1.5)


class TestGreville:
    def test_reference_values(self):
        kv = KnotVector(2, [0, 0, 0, 0.5, 1, 1, 1])
        np.testing.assert_allclose(greville(kv), [0.0, 0.25, 0.75, 1.0])

    def test_linear(self):
        kv = KnotVector(1, [0, 0, 1, 1])
        np.testing.assert_allclose(greville(kv), [0.0, 1.0])

    def test_count_matches_basis_count(self):
        kv = KnotVector.open_uniform(4, 17)
        g = greville(kv)
        assert len(g) == kv.n == 17
        assert g[0] == 0.0 and g[-1] == 1.0
        assert np.all(np.diff(g) > 0)

    def test_abscissae_in_basis_support(self):
        kv = KnotVector.open_uniform(3, 11)
        for i, u in enumerate(greville(kv)):
            assert kv.knots[i] <= u <= kv.knots[i + kv.degree + 1]


class TestCurve:
    def test_straight_segment_midpoint(self):
        c = NurbsCurve(KnotVector(1, [0, 0, 1, 1]),
                       [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        np.testing.assert_allclose(c.eval(0.5)[0], [1.0, 0.0, 0.0])

    def test_rational_circle_arc(self):
        # quarter circle of radius 1 as a quadratic rational segment
        kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
        c = NurbsCurve(kv, [[1, 0, 0], [1, 1, 0], [0, 1, 0]],
                       weights=[1.0, np.sqrt(0.5), 1.0])
        for u in np.linspace(0.0, 1.0, 50):
            r = np.linalg.norm(c.eval(u)[0])
            assert abs(r - 1.0) < 1e-12

    def test_derivatives_vs_finite_difference(self):
        rng = np.random.default_rng(23)
        kv = KnotVector.open_uniform(4, 9)
        c = NurbsCurve(kv, rng.normal(size=(9, 3)),
                       weights=rng.uniform(0.5, 2.0, size=9))
        h = 1e-6
        for u in rng.uniform(0.01, 0.99, 20):
            d = c.eval(u, 2)
            fd1 = (c.eval(u + h)[0] - c.eval(u - h)[0]) / (2 * h)
            fd2 = (c.eval(u + h)[0] - 2 * d[0] + c.eval(u - h)[0]) / h ** 2
            assert np.abs(d[1] - fd1).max() < 1e-6
            assert np.abs(d[2] - fd2).max() < 1e-3


class TestArcLength:
    def test_straight_segment_jacobian(self):
        L = 3.5
        c = line_curve([0, 0, 0], [L, 0, 0], degree=3, n=8)
        for u in np.linspace(0, 1, 11):
            J, J_u = arclength_derivatives(c, u)
            assert abs(J - L) < 1e-12
            assert abs(J_u) < 1e-9
        assert abs(c.arc_length() - L) < 1e-12

    def test_chain_rule_on_segment(self):
        L = 3.5
        c = line_curve([0, 0, 0], [L, 0, 0], degree=2, n=6)
        J, J_u = arclength_derivatives(c, 0.4)
        f_s, f_ss = to_arclength(np.array([1.0]), np.array([0.0]), J, J_u)
        np.testing.assert_allclose(f_s, [1.0 / L])
        np.testing.assert_allclose(f_ss, [0.0], atol=1e-12)

    def test_spiral_second_derivative_conversion(self):
        # c(t) = [t sin t, t cos t, 0]; analytic arc-length derivatives
        t0, t1 = 2 * np.pi, 6 * np.pi
        c = interpolate_function(lambda u: spiral_point(t0 + (t1 - t0) * u),
                                 degree=6, n=200)
        for u in np.linspace(0.05, 0.95, 40):
            t = t0 + (t1 - t0) * u
            d = c.eval(u, 2)
            J, J_u = arclength_derivatives(c, u)
            c_s, c_ss = to_arclength(d[1], d[2], J, J_u)
            sig = np.hypot(1.0, t)
            dc = np.array([np.sin(t) + t * np.cos(t),
                           np.cos(t) - t * np.sin(t), 0.0])
            d2c = np.array([2 * np.cos(t) - t * np.sin(t),
                            -2 * np.sin(t) - t * np.cos(t), 0.0])
            exact_s = dc / sig
            exact_ss = (d2c * sig - dc * (t / sig)) / sig ** 3
            assert np.abs(c_s - exact_s).max() < 1e-7
            assert np.abs(c_ss - exact_ss).max() < 1e-5


class TestInterpolation:
    def test_two_point_linear(self):
        kv = KnotVector(1, [0, 0, 1, 1])
        c = interpolate_curve([0.0, 1.0], [[0, 0, 0], [1, 2, 3]], kv)
        np.testing.assert_allclose(c.eval(0.5)[0], [0.5, 1.0, 1.5])

    def test_cubic_polynomial_reproduction(self):
        def poly(u):
            return np.array([u ** 3 - u, 2 * u ** 2 + 0.5, 3 * u ** 3])
        c = interpolate_function(poly, degree=3, n=12)
        for u in np.linspace(0, 1, 101):
            assert np.abs(c.eval(u)[0] - poly(u)).max() < 1e-10

    def test_projector_property(self):
        rng = np.random.default_rng(24)
        kv = KnotVector.open_uniform(4, 10)
        orig = NurbsCurve(kv, rng.normal(size=(10, 3)))
        g = greville(kv)
        again = interpolate_curve(g, np.array([orig.eval(u)[0] for u in g]), kv)
        np.testing.assert_allclose(again.points, orig.points, atol=1e-10)

    def test_spivak_interpolation_error(self):
        # single global interpolant of the piecewise curve; the flat point at
        # s = 0 is inside the domain and must not degrade the fit beyond 1e-6
        def fn(u):
            return spivak_point(-2.0 + 5.0 * u)
        c = interpolate_function(fn, degree=6, n=150)
        us = np.linspace(0.0, 1.0, 3001)
        err = max(np.abs(c.eval(u)[0] - fn(u)).max() for u in us)
        assert err < 1e-6

    def test_wrong_parameters_rejected(self):
        kv = KnotVector.open_uniform(2, 5)
        with pytest.raises(ValueError):
            interpolate_curve(np.linspace(0, 1, 5), np.zeros((5, 3)), kv)

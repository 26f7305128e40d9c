import math

import numpy as np
import pytest

from zograd.core import DomainError, OracleQuery, RngStream, interval
from zograd.estimators import (
    EstimatorOracle,
    ExactGradientOracle,
    RDSA,
    SF,
    SPSA,
    SURFACE,
    UncontrolledNoise,
    additive_controlled,
    envelope_for,
    one_point_estimate,
    scheme_moments,
    smoothed_eval,
    smoothing_estimate,
    two_point_estimate,
)
from zograd.harness.probes import bias_slope, probe_bias_variance, variance_slope
from zograd.testbed import exp_one_d, kinked_quadratic, quadratic, softabs

RNG = lambda i: RngStream(77, i).generator()


def flat(offset=0.0):
    return quadratic([0.0], [0.0], offset=offset)


class TestSchemes:
    @pytest.mark.parametrize("scheme", [SPSA, RDSA, SF, SURFACE])
    def test_weight_direction_outer_product_is_identity(self, scheme):
        d, m = 3, 1_000_000
        u = scheme.sample_u(d, RNG(1), m)
        v = scheme.v_of(u)
        for i in range(d):
            for j in range(d):
                prod = v[:, i] * u[:, j]
                se = prod.std() / math.sqrt(m) + 1e-12
                target = 1.0 if i == j else 0.0
                assert abs(prod.mean() - target) <= 5 * se, (scheme.kind, i, j)

    @pytest.mark.parametrize("scheme", [SPSA, RDSA, SF])
    def test_weights_centered(self, scheme):
        u = scheme.sample_u(2, RNG(2), 1_000_000)
        v = scheme.v_of(u)
        se = np.std(v, axis=0) / 1000.0
        assert np.all(np.abs(v.mean(axis=0)) <= 5 * se)

    def test_spsa_moments_are_exact_ones(self):
        m = scheme_moments(SPSA, 1)
        for key in ("v_u2", "v2", "v_u3", "v2_u4"):
            assert m[key] == pytest.approx(1.0)

    def test_moment_cache_reproducible(self):
        a = scheme_moments(SF, 2)
        b = scheme_moments(SF, 2)
        assert a is b

    def test_vicinity_bounds(self):
        assert SPSA.u_bound(5) == 1.0  # max norm
        assert SURFACE.u_bound(5) == 1.0  # euclidean sphere
        assert RDSA.u_bound(4) == 2.0
        assert SF.u_bound(1) == math.inf


class TestOnePoint:
    def test_zero_function_gives_zero(self):
        o = EstimatorOracle(flat(), SPSA, UncontrolledNoise(0.0), "one_point")
        g = o.sample_gradients(np.array([0.2]), 0.3, 64, RNG(3))
        np.testing.assert_array_equal(g, np.zeros((64, 1)))

    def test_constant_function_mean_zero(self):
        o = EstimatorOracle(flat(offset=2.5), SPSA, UncontrolledNoise(0.0), "one_point")
        res = probe_bias_variance(o, np.array([0.1]), 0.2, 20_000, RNG(4))
        assert res.bias_est <= 5 * res.bias_se + 1e-12

    def test_quadratic_bias_within_envelope(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SF, UncontrolledNoise(0.0), "one_point")
        res = probe_bias_variance(o, np.array([0.0]), 0.1, 50_000, RNG(5), antithetic=True)
        assert res.bias_est <= o.envelope.c1_value(0.1) + 5 * res.bias_se

    def test_named_operation_guards(self):
        f = quadratic([1.0])
        one = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "one_point")
        two = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "two_point")
        q = OracleQuery(np.array([0.0]), 0.2)
        assert one_point_estimate(one, q, RNG(6)).y[0] in (0.2, -0.2)
        with pytest.raises(DomainError):
            one_point_estimate(two, q, RNG(6))
        with pytest.raises(DomainError):
            two_point_estimate(one, q, RNG(6))


class TestTwoPoint:
    def test_linear_function_exact(self):
        f = quadratic([0.0], [1.7])
        o = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "two_point")
        g = o.sample_gradients(np.array([0.1]), 0.25, 16, RNG(7))
        np.testing.assert_allclose(g, 1.7, rtol=1e-12)

    def test_even_function_at_center(self):
        f = quadratic([1.0])
        for scheme in (SPSA, SF):
            o = EstimatorOracle(f, scheme, UncontrolledNoise(0.0), "two_point")
            g = o.sample_gradients(np.zeros(1), 0.3, 16, RNG(8))
            np.testing.assert_allclose(g, 0.0, atol=1e-14)

    def test_controlled_noise_cancels(self):
        f = quadratic([1.0], [-2.0], interval(0.0, 1.0), offset=1.5)
        noise = additive_controlled(f, sigma=5.0)  # slope 0: purely common
        x, delta, u, v = 0.4, 0.2, 1.0, 1.0
        def estimate(psi):
            zp = noise.observe_scalar(x + delta * u, psi)
            zm = noise.observe_scalar(x - delta * u, psi)
            return (zp - zm) * v / (2 * delta)
        # cancellation is exact in exact arithmetic; floats keep ulp residue
        # of the common offset, so the estimate is psi-independent to ~1e-14
        base = estimate(0.0)
        for psi in (-3.0, 0.7, 123.0):
            assert estimate(psi) == pytest.approx(base, abs=1e-11)

    def test_state_scaled_residual_has_constant_variance(self):
        f = quadratic([1.0], [-2.0], interval(0.0, 1.0), offset=1.5)
        o = EstimatorOracle(f, SPSA, additive_controlled(f, 2.0, slope=1.0), "two_point")
        assert o.envelope.q == 0.0
        for delta in (0.5, 0.05):
            res = probe_bias_variance(o, np.array([0.5]), delta, 50_000, RNG(9))
            assert res.var_est == pytest.approx(4.0, rel=0.05)

    def test_surface_two_point_rejected(self):
        with pytest.raises(DomainError):
            EstimatorOracle(quadratic([1.0]), SURFACE, UncontrolledNoise(0.0), "two_point")

    def test_controlled_one_point_rejected(self):
        f = quadratic([1.0])
        with pytest.raises(DomainError):
            EstimatorOracle(f, SPSA, additive_controlled(f, 1.0), "one_point")


class TestSmoothing:
    def test_constant_function_mean_zero(self):
        o = EstimatorOracle(flat(offset=3.0), SURFACE, UncontrolledNoise(0.0), "one_point")
        res = probe_bias_variance(o, np.array([0.0]), 0.5, 20_000, RNG(10))
        assert res.bias_est <= 5 * res.bias_se + 1e-12

    def test_smoothed_eval_linear_identity(self):
        f = quadratic([0.0], [2.0])
        val = smoothed_eval(f, np.array([0.4]), 0.5, 200_000, RNG(11))
        assert val == pytest.approx(f.value_at(np.array([0.4])), abs=5e-3)

    def test_smoothed_eval_quadratic_shift(self):
        # averaging x^2/2 over [x - d, x + d] lifts the value by d^2/6
        f = quadratic([1.0])
        x = np.array([0.2])
        val = smoothed_eval(f, x, 0.3, 400_000, RNG(12))
        assert val - f.value_at(x) == pytest.approx(0.015, abs=4e-4)

    def test_smoothed_eval_vanishing_tolerance(self):
        f = quadratic([1.0])
        val = smoothed_eval(f, np.array([0.3]), 1e-3, 100_000, RNG(13))
        assert abs(val - f.value_at(np.array([0.3]))) <= 1e-6

    def test_unbiased_for_smoothed_surrogate(self):
        # E[G] matches the finite-difference slope of the smoothed value
        f = quadratic([1.0])
        o = EstimatorOracle(f, SURFACE, UncontrolledNoise(0.0), "one_point")
        x, delta = 0.3, 0.1
        res = probe_bias_variance(o, np.array([x]), delta, 100_000, RNG(14), antithetic=True)
        g_mean = o.sample_gradients(np.array([x]), delta, 100_000, RNG(15), antithetic=True).mean()
        h = 1e-3
        fd = (
            smoothed_eval(f, np.array([x + h]), delta, 400_000, RNG(16))
            - smoothed_eval(f, np.array([x - h]), delta, 400_000, RNG(16))
        ) / (2 * h)
        # the smoothed surrogate of a quadratic has the same slope: 0.3
        assert fd == pytest.approx(x, abs=5e-3)
        assert g_mean == pytest.approx(fd, abs=5 * res.bias_se + 5e-3)

    def test_smoothing_guard(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "one_point")
        with pytest.raises(DomainError):
            smoothing_estimate(o, OracleQuery(np.array([0.0]), 0.1), RNG(17))

    def test_smoothed_eval_rejects_zero_samples(self):
        with pytest.raises(DomainError):
            smoothed_eval(quadratic([1.0]), np.array([0.0]), 0.1, 0, RNG(18))


class TestEnvelopeTable:
    def test_cell_exponents(self):
        f = quadratic([1.0])
        fe = exp_one_d()
        u = UncontrolledNoise(1.0)
        c = additive_controlled(f, 1.0)
        assert (envelope_for("convex_smooth", u, "one_point", SPSA, f).p,
                envelope_for("convex_smooth", u, "one_point", SPSA, f).q) == (1.0, 2.0)
        assert (envelope_for("c3", u, "two_point", SPSA, fe).p,
                envelope_for("c3", u, "two_point", SPSA, fe).q) == (2.0, 2.0)
        ctrl = envelope_for("convex_smooth", c, "two_point", SPSA, f)
        assert (ctrl.p, ctrl.q) == (1.0, 0.0)
        smooth = envelope_for("convex_smooth", u, "one_point", SURFACE, f)
        assert (smooth.p, smooth.q) == (2.0, 2.0)
        assert smooth.oracle_type == "type_II"

    def test_surface_constant_uses_ball_average(self):
        f = quadratic([1.0])
        env = envelope_for("convex_smooth", UncontrolledNoise(0.0), "one_point", SURFACE, f)
        assert env.c1 == pytest.approx(f.smoothness / 2.0 / 3.0)  # E w^2 = 1/3 in 1-d

    def test_unsupported_cells(self):
        f = quadratic([1.0])
        with pytest.raises(DomainError):
            envelope_for("convex_smooth", additive_controlled(f, 1.0), "one_point", SPSA, f)
        with pytest.raises(DomainError):
            # the kinked family carries no third-derivative bound
            envelope_for("c3", UncontrolledNoise(1.0), "one_point", SPSA, kinked_quadratic())
        with pytest.raises(DomainError):
            envelope_for("weird", UncontrolledNoise(1.0), "one_point", SPSA, f)

    def test_c3_quadratic_has_zero_bias_coefficient(self):
        # quadratics carry B3 = 0, so the C^3 cell envelope collapses on them
        f = quadratic([1.0])
        env = envelope_for("c3", UncontrolledNoise(1.0), "two_point", SPSA, f)
        assert env.c1 == 0.0


class TestEnvelopeInvariants:
    DELTAS = (0.5, 0.2, 0.1, 0.05)

    def cells(self):
        fq = quadratic([1.0], [-2.0], interval(0.0, 1.0), offset=1.5)
        fe = exp_one_d()
        fk = kinked_quadratic()
        return [
            (EstimatorOracle(fk, SF, UncontrolledNoise(1.0), "one_point"), (0.0, 0.4, -0.3)),
            (EstimatorOracle(fq, SURFACE, UncontrolledNoise(1.0), "one_point"), (0.25, 0.6, 0.9)),
            (EstimatorOracle(fe, SPSA, UncontrolledNoise(1.0), "two_point", function_class="c3"), (0.0, 0.4, -0.5)),
            (EstimatorOracle(fe, SF, UncontrolledNoise(1.0), "two_point"), (0.0, 0.4, -0.5)),
            (EstimatorOracle(fq, SPSA, additive_controlled(fq, 1.0, slope=1.0), "two_point"), (0.25, 0.6, 0.9)),
        ]

    def test_bias_and_variance_inside_envelope(self):
        for idx, (oracle, xs) in enumerate(self.cells()):
            env = oracle.envelope
            for j, delta in enumerate(self.DELTAS):
                for k, x in enumerate(xs):
                    rng = RngStream(31, (idx << 12) | (j << 6) | k).generator()
                    res = probe_bias_variance(oracle, np.array([x]), delta, 100_000, rng)
                    assert res.bias_est <= env.c1_value(delta) + 5 * res.bias_se, (
                        oracle.scheme.kind, oracle.feedback, delta, x)
                    assert res.var_est <= 1.05 * env.c2_value(delta) + 5 * res.var_se, (
                        oracle.scheme.kind, oracle.feedback, delta, x)

    def test_bias_slopes_match_exponents(self):
        fk = kinked_quadratic()
        fe = exp_one_d()
        cells = [
            (EstimatorOracle(fk, SF, UncontrolledNoise(0.0), "one_point"), 1.0, 100_000),
            (EstimatorOracle(fe, SPSA, UncontrolledNoise(0.0), "two_point", function_class="c3"), 2.0, 5_000),
            (EstimatorOracle(fe, SURFACE, UncontrolledNoise(0.0), "one_point"), 2.0, 5_000),
        ]
        for idx, (oracle, p, reps) in enumerate(cells):
            slope, _ = bias_slope(oracle, np.array([0.0]), self.DELTAS, reps, RngStream(32, idx).generator())
            assert abs(slope - p) <= 0.2, (oracle.scheme.kind, slope)

    def test_variance_slopes_match_exponents(self):
        fk = kinked_quadratic()
        fe = exp_one_d()
        cells = [
            EstimatorOracle(fk, SF, UncontrolledNoise(1.0), "one_point"),
            EstimatorOracle(fe, SPSA, UncontrolledNoise(1.0), "two_point", function_class="c3"),
            EstimatorOracle(fe, SURFACE, UncontrolledNoise(1.0), "one_point"),
        ]
        for idx, oracle in enumerate(cells):
            slope, _ = variance_slope(oracle, np.array([0.0]), self.DELTAS, 60_000, RngStream(33, idx).generator())
            assert abs(slope + 2.0) <= 0.2, (oracle.scheme.kind, slope)


class TestVicinityAndDeterminism:
    def test_sf_reports_query_point(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SF, UncontrolledNoise(0.0), "one_point")
        r = o.query(np.array([0.2]), 0.1, RNG(20))
        np.testing.assert_array_equal(r.y, [0.2])

    def test_spsa_reports_probe_arm(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "one_point")
        r = o.query(np.array([0.2]), 0.1, RNG(21))
        assert abs(r.y[0] - 0.2) == pytest.approx(0.1)

    def test_out_of_domain_query_rejected(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SPSA, UncontrolledNoise(0.0), "one_point")
        with pytest.raises(DomainError):
            o.query(np.array([5.0]), 0.1, RNG(22))

    def test_all_oracles_unbiased_in_y(self):
        f = quadratic([1.0])
        oracles = [
            EstimatorOracle(f, s, UncontrolledNoise(0.0), "one_point") for s in (SPSA, SF, SURFACE)
        ] + [ExactGradientOracle(f)]
        assert all(o.unbiased for o in oracles)

    def test_equal_streams_equal_samples(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SF, UncontrolledNoise(1.0), "two_point")
        a = o.sample_gradients(np.array([0.1]), 0.2, 500, RngStream(9, 4).generator())
        b = o.sample_gradients(np.array([0.1]), 0.2, 500, RngStream(9, 4).generator())
        np.testing.assert_array_equal(a, b)

    def test_stepper_matches_da_dim_path(self):
        f = quadratic([1.0])
        o = EstimatorOracle(f, SPSA, UncontrolledNoise(1.0), "two_point")
        step = o.make_stepper(8, 0.2, RngStream(10, 0).generator())
        g, y = step(0, 0.3)
        assert isinstance(g, float)
        assert abs(y - 0.3) == pytest.approx(0.2)

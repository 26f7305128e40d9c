import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zograd.core import (
    Ball,
    Box,
    DomainError,
    EUCLIDEAN,
    MAX_NORM,
    Norm,
    OracleEnvelope,
    OracleQuery,
    RngStream,
    checked_response,
    dual_norm,
    envelope_check,
    interval,
    project,
)

finite_vectors = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=6
)


class TestNorms:
    def test_euclidean_dual_is_euclidean(self):
        assert dual_norm(EUCLIDEAN, np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_max_dual_is_one(self):
        assert dual_norm(MAX_NORM, np.array([1.0, -2.0, 3.0])) == pytest.approx(6.0)

    def test_zero_vector(self):
        for norm in (EUCLIDEAN, MAX_NORM):
            assert dual_norm(norm, np.zeros(3)) == 0.0

    @given(finite_vectors)
    def test_dual_of_dual_is_identity(self, xs):
        x = np.array(xs)
        for norm in (EUCLIDEAN, MAX_NORM, Norm("one")):
            assert norm.dual().dual().kind == norm.kind
            assert norm.dual().dual().value(x) == norm.value(x)

    @given(finite_vectors, finite_vectors)
    def test_holder_inequality(self, gs, xs):
        d = min(len(gs), len(xs))
        g, x = np.array(gs[:d]), np.array(xs[:d])
        for norm in (EUCLIDEAN, MAX_NORM):
            lhs = abs(float(np.dot(g, x)))
            assert lhs <= norm.dual_value(g) * norm.value(x) * (1 + 1e-9) + 1e-9

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            Norm("manhattan-ish")


class TestBodies:
    def test_box_clamp(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(project(box, np.array([0.5, 2.0])), [0.5, 1.0])

    def test_ball_radial_scaling(self):
        ball = Ball(np.zeros(2), 1.0)
        np.testing.assert_allclose(project(ball, np.array([3.0, 4.0])), [0.6, 0.8])

    def test_interior_point_fixed(self):
        box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
        np.testing.assert_allclose(project(box, np.zeros(2)), [0.0, 0.0])

    def test_empty_interior_rejected(self):
        with pytest.raises(DomainError):
            Box(np.array([0.0]), np.array([0.0]))
        with pytest.raises(DomainError):
            Ball(np.zeros(2), 0.0)

    @given(
        st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=2, max_size=2),
        st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=2, max_size=2),
    )
    @settings(max_examples=250)
    def test_projection_nonexpansive(self, xs, ys):
        x, y = np.array(xs), np.array(ys)
        for body in (Box(np.array([-1.0, -0.5]), np.array([0.7, 1.0])), Ball(np.zeros(2), 1.3)):
            px, py = project(body, x), project(body, y)
            assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12
            np.testing.assert_allclose(project(body, px), px, atol=1e-12)

    def test_projection_nonexpansive_bulk(self):
        rng = RngStream(99, 0).generator()
        bodies = (Box(np.array([-1.0, -0.5]), np.array([0.7, 1.0])), Ball(np.ones(3), 0.8))
        for body in bodies:
            x = rng.normal(scale=4.0, size=(1000, body.dim))
            y = rng.normal(scale=4.0, size=(1000, body.dim))
            for xi, yi in zip(x, y):
                assert np.linalg.norm(project(body, xi) - project(body, yi)) <= np.linalg.norm(
                    xi - yi
                ) + 1e-12


class TestQueryResponse:
    def test_delta_out_of_range(self):
        for delta in (0.0, -0.1, 1.5):
            with pytest.raises(DomainError):
                OracleQuery(np.array([0.0]), delta)

    def test_response_vicinity_enforced(self):
        q = OracleQuery(np.array([0.0]), 0.1)
        checked_response(np.array([1.0]), np.array([0.1]), q)
        with pytest.raises(DomainError):
            checked_response(np.array([1.0]), np.array([0.2]), q)

    def test_response_vicinity_max_norm(self):
        q = OracleQuery(np.array([0.0, 0.0]), 0.5)
        # l-inf ball allows corners that the Euclidean ball rejects
        y = np.array([0.5, 0.5])
        checked_response(np.zeros(2), y, q, MAX_NORM)
        with pytest.raises(DomainError):
            checked_response(np.zeros(2), y, q, EUCLIDEAN)


class TestEnvelope:
    def test_substitution(self):
        env = OracleEnvelope(c1=1.0, p=2.0, c2=1.0, q=2.0)
        assert envelope_check(env, 0.1) == (pytest.approx(0.01), pytest.approx(100.0))

    def test_unbiased_constant_variance(self):
        env = OracleEnvelope(c1=0.0, p=1.0, c2=1.0, q=0.0)
        assert envelope_check(env, 0.5) == (0.0, 1.0)

    def test_delta_one_boundary(self):
        env = OracleEnvelope(c1=2.0, p=1.0, c2=3.0, q=2.0)
        assert envelope_check(env, 1.0) == (2.0, 3.0)

    def test_delta_out_of_range(self):
        env = OracleEnvelope(c1=1.0, p=1.0, c2=1.0, q=1.0)
        for delta in (0.0, 1.2, -0.5):
            with pytest.raises(DomainError):
                envelope_check(env, delta)

    @given(st.floats(min_value=1e-3, max_value=1.0), st.floats(min_value=1e-3, max_value=1.0))
    def test_monotone(self, d1, d2):
        env = OracleEnvelope(c1=1.3, p=1.7, c2=0.8, q=2.2)
        lo, hi = min(d1, d2), max(d1, d2)
        assert env.c1_value(lo) <= env.c1_value(hi) + 1e-15
        assert env.c2_value(lo) >= env.c2_value(hi) - 1e-15


class TestRngStream:
    def test_equal_streams_equal_draws(self):
        a = RngStream(1234, 7).generator().standard_normal(100)
        b = RngStream(1234, 7).generator().standard_normal(100)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(1234, 7).generator().standard_normal(100)
        b = RngStream(1234, 8).generator().standard_normal(100)
        assert not np.array_equal(a, b)

    def test_interval_helper(self):
        box = interval(-1.0, 1.0)
        assert box.dim == 1
        assert box.center[0] == 0.0

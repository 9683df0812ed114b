"""Product manifold over K SPD components plus Euclidean weight logits."""

import numpy as np
import pytest

from conftest import random_spd, random_sym
from riemmix import spd
from riemmix.errors import RetractionFailure
from riemmix.product import (
    make_params,
    make_tangent,
    product_metric,
    product_norm,
    product_retract,
    product_transport,
    t_axpy,
    t_scale,
    zero_tangent,
)


def random_point(rng, k, dim):
    return make_params([random_spd(rng, dim) for _ in range(k)],
                       rng.standard_normal(k - 1))


def random_tangent(rng, k, dim):
    return make_tangent([random_sym(rng, dim) for _ in range(k)],
                        rng.standard_normal(k - 1))


class TestMetric:
    def test_zero_tangents(self, rng):
        p = random_point(rng, 3, 3)
        z = zero_tangent(p)
        assert product_metric(p, z, z) == 0.0

    def test_single_component_matches_spd(self, rng):
        s = random_spd(rng, 3)
        xi, eta = random_sym(rng, 3), random_sym(rng, 3)
        p = make_params([s])
        a = make_tangent([xi], np.zeros(0))
        b = make_tangent([eta], np.zeros(0))
        assert product_metric(p, a, b) == pytest.approx(
            spd.metric(s, xi, eta), rel=1e-12)

    def test_sum_of_scalar_metrics(self):
        p = make_params([np.eye(2), np.eye(2)], [0.0])
        xi = make_tangent([np.eye(2) / np.sqrt(2), np.eye(2) / np.sqrt(2)], [1.0])
        # each SPD factor contributes trace(I * (I/sqrt2)^2) = 1, logits add 1
        assert product_metric(p, xi, xi) == pytest.approx(3.0)

    def test_bilinear(self, rng):
        p = random_point(rng, 2, 3)
        a, b, c = (random_tangent(rng, 2, 3) for _ in range(3))
        lhs = product_metric(p, t_axpy(2.0, a, t_scale(b, -0.5)), c)
        rhs = 2.0 * product_metric(p, a, c) - 0.5 * product_metric(p, b, c)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_positive_definite(self, rng):
        p = random_point(rng, 2, 3)
        xi = random_tangent(rng, 2, 3)
        assert product_metric(p, xi, xi) > 0.0

    def test_shape_mismatch(self, rng):
        p = random_point(rng, 2, 3)
        xi = random_tangent(rng, 3, 3)
        with pytest.raises(ValueError):
            product_metric(p, xi, xi)


class TestRetract:
    def test_zero_is_identity(self, rng):
        p = random_point(rng, 3, 3)
        out = product_retract(p, zero_tangent(p))
        for a, b in zip(out.components, p.components):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(out.logits, p.logits)

    def test_factorwise_exp(self, rng):
        p = random_point(rng, 3, 3)
        xi = random_tangent(rng, 3, 3)
        out = product_retract(p, xi, kind="exp")
        for s, v, o in zip(p.components, xi.components, out.components):
            np.testing.assert_allclose(o, spd.exp_map(s, v), rtol=1e-10)
        np.testing.assert_allclose(out.logits, p.logits + xi.logit_dirs)

    def test_euclidean_kind(self, rng):
        p = random_point(rng, 2, 3)
        xi = t_scale(random_tangent(rng, 2, 3), 0.01)
        out = product_retract(p, xi, kind="euclidean")
        for s, v, o in zip(p.components, xi.components, out.components):
            np.testing.assert_allclose(o, s + v, rtol=1e-12)

    def test_failure_tags_component(self):
        p = make_params([np.eye(2), np.eye(2)], [0.0])
        xi = make_tangent([np.zeros((2, 2)), -2.0 * np.eye(2)], [0.0])
        with pytest.raises(RetractionFailure) as exc_info:
            product_retract(p, xi, kind="euclidean")
        assert exc_info.value.component == 1

    def test_unknown_kind(self, rng):
        p = random_point(rng, 1, 2)
        with pytest.raises(ValueError):
            product_retract(p, zero_tangent(p), kind="qr")


class TestTransport:
    def test_same_point_identity(self, rng):
        p = random_point(rng, 2, 3)
        xi = random_tangent(rng, 2, 3)
        out = product_transport(p, p, xi)
        for a, b in zip(out.components, xi.components):
            np.testing.assert_allclose(a, b, atol=1e-10)
        np.testing.assert_array_equal(out.logit_dirs, xi.logit_dirs)

    def test_isometry(self, rng):
        for _ in range(10):
            p = random_point(rng, 2, 3)
            q = random_point(rng, 2, 3)
            xi = random_tangent(rng, 2, 3)
            eta = random_tangent(rng, 2, 3)
            before = product_metric(p, xi, eta)
            after = product_metric(q, product_transport(p, q, xi),
                                   product_transport(p, q, eta))
            assert after == pytest.approx(before, rel=1e-10, abs=1e-12)

    def test_logits_unchanged(self, rng):
        p, q = random_point(rng, 3, 2), random_point(rng, 3, 2)
        xi = random_tangent(rng, 3, 2)
        out = product_transport(p, q, xi)
        np.testing.assert_array_equal(out.logit_dirs, xi.logit_dirs)


class TestConstructors:
    def test_default_logits(self, rng):
        p = make_params([random_spd(rng, 2) for _ in range(3)])
        assert p.logits.shape == (2,)
        np.testing.assert_array_equal(p.logits, np.zeros(2))

    def test_empty_components_rejected(self):
        with pytest.raises(ValueError):
            make_params([])

    def test_mixed_dims_rejected(self, rng):
        with pytest.raises(ValueError):
            make_params([random_spd(rng, 2), random_spd(rng, 3)])

    def test_norm_consistent(self, rng):
        p = random_point(rng, 2, 3)
        xi = random_tangent(rng, 2, 3)
        assert product_norm(p, xi) == pytest.approx(
            np.sqrt(product_metric(p, xi, xi)))

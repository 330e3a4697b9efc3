"""Differentiation engine checks: hand calculus, finite differences, linearity."""

import math

import numpy as np
import pytest

from eigenpower import autodiff as ad
from eigenpower.errors import ShapeError


def tiny_net_exprs(n_hidden=4, d=1):
    """A one-hidden-layer tanh network as (output expr, n_params, layout)."""
    w1o, b1o = 0, n_hidden * d
    w2o, b2o = b1o + n_hidden, b1o + n_hidden + n_hidden
    n_params = b2o + 1
    x = ad.inputs(d)
    h = ad.tanh(ad.affine_slot(x, w1o, b1o, n_hidden))
    out = ad.affine_slot(h, w2o, b2o, 1)
    return x, out, n_params


def fd_gradient(loss_value, theta, eps=1e-6):
    """Central finite differences of a scalar function of the parameters."""
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = eps
        g[i] = (loss_value(theta + e) - loss_value(theta - e)) / (2 * eps)
    return g


class TestEvaluate:
    def test_identity_coordinate(self):
        x = ad.inputs(1)
        assert ad.evaluate(ad.take(x, 0), [0.3]) == 0.3

    def test_tanh_at_origin(self):
        x = ad.inputs(1)
        assert ad.evaluate(ad.tanh(ad.take(x, 0)), [0.0]) == 0.0

    def test_two_layer_net_matches_hand_forward(self):
        # fixed weights, hand-computed matrix arithmetic
        W1 = np.array([[0.5, -0.25], [1.0, 0.75]])
        b1 = np.array([0.1, -0.2])
        W2 = np.array([[2.0, -1.0]])
        b2 = np.array([0.3])
        x = ad.inputs(2)
        out = ad.affine(ad.tanh(ad.affine(x, W1, b1)), W2, b2)
        pt = np.array([0.7, -0.4])
        expected = float((np.tanh(W1 @ pt + b1)) @ W2[0] + b2[0])
        assert ad.evaluate(out, pt) == pytest.approx(expected, rel=1e-15)

    def test_dimension_mismatch_raises(self):
        x = ad.inputs(2)
        with pytest.raises(ShapeError):
            ad.evaluate(ad.take(x, 0), [0.1, 0.2, 0.3])


class TestSpatialJet:
    def test_square_polynomial(self):
        x = ad.inputs(1)
        jet = ad.spatial_jet(ad.square(ad.take(x, 0)), [1.5])
        assert jet.value == pytest.approx(2.25)
        assert jet.gradient[0] == pytest.approx(3.0)
        assert jet.laplacian == pytest.approx(2.0)

    def test_product_of_sines_2d_against_finite_differences(self):
        x = ad.inputs(2)
        u = ad.sin(ad.scale(ad.take(x, 0), math.pi)) * ad.sin(ad.scale(ad.take(x, 1), math.pi))
        pt = np.array([0.25, 0.25])
        jet = ad.spatial_jet(u, pt)
        assert jet.laplacian == pytest.approx(-2 * math.pi ** 2 * jet.value, rel=1e-9)

        def val(p):
            return ad.evaluate(u, p)

        h = 1e-4
        lap_fd = sum(
            (val(pt + h * e) - 2 * val(pt) + val(pt - h * e)) / h ** 2
            for e in np.eye(2))
        assert jet.laplacian == pytest.approx(lap_fd, abs=5e-6)

    def test_constant_function(self):
        jet = ad.spatial_jet(ad.const(1.0), [0.4, 0.2, 0.9])
        assert jet.value == 1.0
        np.testing.assert_array_equal(jet.gradient, np.zeros(3))
        assert jet.laplacian == 0.0

    def test_linearity(self):
        x = ad.inputs(1)
        u = ad.sin(ad.take(x, 0))
        v = ad.square(ad.take(x, 0))
        combo = ad.scale(u, 2.5) + ad.scale(v, -1.25)
        pt = [0.8]
        ju, jv, jc = (ad.spatial_jet(e, pt) for e in (u, v, combo))
        assert jc.value == pytest.approx(2.5 * ju.value - 1.25 * jv.value, rel=1e-15)
        assert jc.gradient[0] == pytest.approx(2.5 * ju.gradient[0] - 1.25 * jv.gradient[0], rel=1e-15)
        assert jc.laplacian == pytest.approx(2.5 * ju.laplacian - 1.25 * jv.laplacian, rel=1e-15)

    @pytest.mark.parametrize("d", [1, 2, 5, 10])
    def test_laplacian_of_sine_product(self, d):
        # Laplacian of prod sin(pi x_i) is -d pi^2 times the value
        x = ad.inputs(d)
        u = None
        for i in range(d):
            s = ad.sin(ad.scale(ad.take(x, i), math.pi))
            u = s if u is None else u * s
        rng = np.random.default_rng(42 + d)
        pts = rng.uniform(0.05, 0.95, size=(1000, d))
        sess = ad.Session([u], pts)
        sess.request_jet(u)
        sess.forward()
        vals, _, laps = sess.jet(u)
        expected = -d * math.pi ** 2 * vals
        mask = np.abs(expected) > 1e-8
        rel = np.abs(laps[mask] - expected[mask]) / np.abs(expected[mask])
        assert rel.max() < 1e-6

    def test_exp_jet(self):
        x = ad.inputs(1)
        jet = ad.spatial_jet(ad.exp(ad.take(x, 0)), [0.7])
        e = math.exp(0.7)
        assert jet.value == pytest.approx(e, rel=1e-15)
        assert jet.gradient[0] == pytest.approx(e, rel=1e-15)
        assert jet.laplacian == pytest.approx(e, rel=1e-15)

    def test_sqrt_jet(self):
        x = ad.inputs(1)
        jet = ad.spatial_jet(ad.sqrt(ad.take(x, 0)), [4.0])
        assert jet.value == pytest.approx(2.0)
        assert jet.gradient[0] == pytest.approx(0.25)
        assert jet.laplacian == pytest.approx(-1.0 / 32.0)

    def test_quotient_rule(self):
        # u / v jets against hand calculus for u = sin(x), v = 1 + x^2
        x = ad.inputs(1)
        xi = ad.take(x, 0)
        q = ad.sin(xi) / (1.0 + ad.square(xi))
        t = 0.6
        jet = ad.spatial_jet(q, [t])
        f = math.sin(t) / (1 + t * t)
        fp = (math.cos(t) * (1 + t * t) - math.sin(t) * 2 * t) / (1 + t * t) ** 2
        assert jet.value == pytest.approx(f, rel=1e-14)
        assert jet.gradient[0] == pytest.approx(fp, rel=1e-12)
        # second derivative via central differences as the independent check
        h = 1e-5
        def val(p):
            return ad.evaluate(q, [p])
        lap_fd = (val(t + h) - 2 * val(t) + val(t - h)) / h ** 2
        assert jet.laplacian == pytest.approx(lap_fd, abs=1e-5)


class TestParamGradient:
    def test_square_of_parameter(self):
        theta = ad.param(0, 1)
        scalar = ad.mean(ad.square(theta))
        grad = ad.param_gradient(scalar, np.array([3.0]))
        np.testing.assert_allclose(grad, [6.0])

    def test_parameter_independent_scalar(self):
        x = ad.inputs(1)
        scalar = ad.mean(ad.square(ad.take(x, 0)))
        grad = ad.param_gradient(scalar, np.array([1.0, 2.0]),
                                 points=np.array([[0.3], [0.7]]))
        np.testing.assert_array_equal(grad, np.zeros(2))

    def test_non_scalar_root_rejected(self):
        x = ad.inputs(1)
        with pytest.raises(ShapeError):
            ad.param_gradient(ad.take(x, 0), np.zeros(1), points=np.zeros((3, 1)))

    def test_laplacian_loss_matches_finite_differences(self):
        _, out, n_params = tiny_net_exprs()
        loss = ad.mean(ad.square(ad.laplacian(out)))
        rng = np.random.default_rng(0)
        theta = rng.normal(0, 0.6, n_params)
        pts = rng.random((10, 1))

        def loss_value(t):
            sess = ad.Session([loss], pts)
            sess.forward(t)
            return float(sess.value(loss)[0, 0])

        grad = ad.param_gradient(loss, theta, points=pts)
        grad_fd = fd_gradient(loss_value, theta)
        denom = np.maximum(np.abs(grad_fd), 1e-8)
        assert np.max(np.abs(grad - grad_fd) / denom) < 1e-4

    def test_two_hidden_layers_ten_units_laplacian_loss(self):
        # deeper case: 2 hidden layers of 10 units, loss with Laplacian terms
        d, nh = 2, 10
        offs = {}
        off = 0
        for name, (no, ni) in (("w1", (nh, d)), ("b1", (nh, 0)),
                               ("w2", (nh, nh)), ("b2", (nh, 0)),
                               ("w3", (1, nh)), ("b3", (1, 0))):
            offs[name] = off
            off += no * ni if ni else no
        x = ad.inputs(d)
        h1 = ad.tanh(ad.affine_slot(x, offs["w1"], offs["b1"], nh))
        h2 = ad.tanh(ad.affine_slot(h1, offs["w2"], offs["b2"], nh))
        out = ad.affine_slot(h2, offs["w3"], offs["b3"], 1)
        loss = ad.mean(ad.square(ad.laplacian(out)) + ad.square(out))
        rng = np.random.default_rng(12)
        theta = rng.normal(0, 0.4, off)
        pts = rng.random((8, d))

        def loss_value(t):
            sess = ad.Session([loss], pts)
            sess.forward(t)
            return float(sess.value(loss)[0, 0])

        grad = ad.param_gradient(loss, theta, points=pts)
        grad_fd = fd_gradient(loss_value, theta)
        denom = np.maximum(np.abs(grad_fd), 1e-8)
        assert np.max(np.abs(grad - grad_fd) / denom) < 1e-4

    def test_norm_inside_loss_matches_finite_differences(self):
        # gradient flows through a batch-aggregated norm in the denominator
        _, out, n_params = tiny_net_exprs(n_hidden=5, d=2)
        lu = -1.0 * ad.laplacian(out)
        loss = ad.mean(ad.square(lu * ad.recip(ad.rms(lu)) - ad.data("t")))
        rng = np.random.default_rng(1)
        theta = rng.normal(0, 0.5, n_params)
        pts = rng.random((12, 2))
        target = rng.normal(size=(12, 1))

        def loss_value(t):
            sess = ad.Session([loss], pts)
            sess.forward(t, {"t": target})
            return float(sess.value(loss)[0, 0])

        sess = ad.Session([loss], pts)
        sess.forward(theta, {"t": target})
        grad = sess.backward({loss: np.ones((1, 1))})
        grad_fd = fd_gradient(loss_value, theta)
        denom = np.maximum(np.abs(grad_fd), 1e-8)
        assert np.max(np.abs(grad - grad_fd) / denom) < 1e-4


class TestDeterminism:
    def test_repeated_evaluation_bit_identical(self):
        _, out, n_params = tiny_net_exprs(n_hidden=6, d=2)
        loss = ad.mean(ad.square(ad.laplacian(out)))
        rng = np.random.default_rng(3)
        theta = rng.normal(size=n_params)
        pts = rng.random((64, 2))
        sess = ad.Session([loss], pts)
        sess.forward(theta)
        first_val = float(sess.value(loss)[0, 0])
        first_grad = sess.backward({loss: np.ones((1, 1))})
        for _ in range(3):
            sess.forward(theta)
            assert float(sess.value(loss)[0, 0]) == first_val
            np.testing.assert_array_equal(sess.backward({loss: np.ones((1, 1))}),
                                          first_grad)

    def test_fresh_session_matches_reused_session(self):
        _, out, n_params = tiny_net_exprs(n_hidden=3, d=1)
        loss = ad.mean(ad.square(out))
        theta = np.random.default_rng(9).normal(size=n_params)
        pts = np.random.default_rng(10).random((32, 1))
        reused = ad.Session([loss], pts)
        reused.forward(theta)
        reused.forward(theta)
        fresh = ad.Session([loss], pts)
        fresh.forward(theta)
        assert float(reused.value(loss)[0, 0]) == float(fresh.value(loss)[0, 0])


class TestGraphRules:
    def test_third_order_extraction_rejected(self):
        x = ad.inputs(1)
        u = ad.square(ad.take(x, 0))
        with pytest.raises(ShapeError):
            ad.laplacian(ad.laplacian(u))

    def test_width_mismatch_rejected(self):
        a = ad.inputs(3)
        b = ad.inputs(3)
        with pytest.raises(ShapeError):
            _ = ad.stack([a]) + ad.take(b, 0) * ad.stack([b, b])

    def test_missing_binding_rejected(self):
        loss = ad.mean(ad.square(ad.data("absent")))
        sess = ad.Session([loss], np.zeros((4, 1)))
        with pytest.raises(ShapeError):
            sess.forward(np.zeros(0))

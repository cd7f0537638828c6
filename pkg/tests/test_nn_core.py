import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tactile_servo import nn_core
from tactile_servo.nn_core import Mlp, MlpSpec, RmsProp

SHAPES = {
    "encoder": MlpSpec.tanh_net([19, 19, 12, 6, 3], bn_hidden=True),
    "decoder": MlpSpec.tanh_net([3, 6, 12, 19, 19], bn_hidden=True),
    "nl_dynamics": MlpSpec.tanh_net([9, 15, 3]),
    "ll_params": MlpSpec.tanh_net([3, 8, 15, 23, 30]),
}


def _loss(net, x, R, training):
    y, _ = net.forward(x, training=training, update_stats=False)
    return np.sum(R * y) + 0.5 * np.sum(y**2)


def _rel_err(a, b):
    # gradients that vanish identically (bias before BN) fall back to an absolute floor
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-3)


def _check_grads(net, x, training, h=1e-5):
    y, cache = net.forward(x, training=training, update_stats=False)
    R = np.random.default_rng(1).normal(size=y.shape)
    grads, gin = net.backward(cache, R + y)
    for p, g in zip(net.params, grads):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            fp = _loss(net, x, R, training)
            p[idx] = old - h
            fm = _loss(net, x, R, training)
            p[idx] = old
            num[idx] = (fp - fm) / (2 * h)
        assert _rel_err(g, num) <= 1e-4
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = _loss(net, x, R, training)
        x[idx] = old - h
        fm = _loss(net, x, R, training)
        x[idx] = old
        num[idx] = (fp - fm) / (2 * h)
    assert _rel_err(gin, num) <= 1e-4


def _randomise_bn(net, rng):
    for l in range(net.spec.n_layers):
        if net.spec.batch_norm[l]:
            net.gamma[l] = rng.uniform(0.5, 1.5, net.gamma[l].shape)
            net.beta[l] = rng.normal(0, 0.3, net.beta[l].shape)
            net.run_mean[l] = rng.normal(0, 0.3, net.run_mean[l].shape)
            net.run_var[l] = rng.uniform(0.5, 2.0, net.run_var[l].shape)


@pytest.mark.parametrize("name", SHAPES)
@pytest.mark.parametrize("training", [True, False])
def test_gradient_check_artifact_shapes(name, training):
    rng = np.random.default_rng(0)
    net = Mlp(SHAPES[name], rng)
    _randomise_bn(net, rng)
    x = rng.normal(size=(6, SHAPES[name].widths[0]))
    _check_grads(net, x, training)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.lists(st.integers(1, 6), min_size=2, max_size=4), st.booleans())
def test_gradient_check_random_nets(seed, widths, bn):
    rng = np.random.default_rng(seed)
    net = Mlp(MlpSpec.tanh_net(widths, bn_hidden=bn), rng)
    _randomise_bn(net, rng)
    _check_grads(net, rng.normal(size=(5, widths[0])), training=False)


def test_zero_net_outputs_zero():
    net = Mlp(MlpSpec((4, 5, 2), ("tanh", "tanh"), (False, False)))
    for W in net.W:
        W[:] = 0
    np.testing.assert_array_equal(net.predict(np.ones((3, 4))), 0.0)


def test_identity_linear_layer():
    net = Mlp(MlpSpec((3, 3), ("linear",), (False,)))
    net.W[0] = np.eye(3)
    x = np.random.default_rng(0).normal(size=(4, 3))
    y, c = net.forward(x)
    np.testing.assert_array_equal(y, x)
    up = np.arange(12.0).reshape(4, 3)
    _, gin = net.backward(c, up)
    np.testing.assert_array_equal(gin, up)


def test_constant_loss_has_zero_gradient():
    net = Mlp(SHAPES["encoder"])
    _, c = net.forward(np.ones((4, 19)))
    grads, gin = net.backward(c, np.zeros((4, 3)))
    assert all(np.all(g == 0) for g in grads) and np.all(gin == 0)


def test_width_mismatch():
    with pytest.raises(ValueError):
        Mlp(SHAPES["encoder"]).forward(np.ones((2, 5)))


def test_stale_cache_rejected():
    net = Mlp(SHAPES["nl_dynamics"])
    _, c = net.forward(np.ones((2, 9)))
    net.touch()
    with pytest.raises(RuntimeError):
        net.backward(c, np.ones((2, 3)))


def test_inference_independent_of_batch():
    rng = np.random.default_rng(2)
    net = Mlp(SHAPES["encoder"], rng).eval()
    _randomise_bn(net, rng)
    x = rng.normal(size=(10, 19))
    full = net.predict(x)
    # BLAS may round a single row differently from a block
    np.testing.assert_allclose(net.predict(x[3:4]), full[3:4], rtol=0, atol=1e-13)
    np.testing.assert_allclose(net.predict(x[::-1])[::-1], full, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(net.predict(x), full)


def test_batchnorm_training_statistics():
    rng = np.random.default_rng(3)
    net = Mlp(SHAPES["encoder"], rng)
    _randomise_bn(net, rng)
    _, c = net.forward(rng.normal(size=(64, 19)), training=True)
    for l in range(3):
        u = c.u[l]
        np.testing.assert_allclose(u.mean(0), net.beta[l], atol=1e-6)
        var = net.gamma[l] ** 2 * c.a[l].var(0) / (c.a[l].var(0) + nn_core.BN_EPS)
        np.testing.assert_allclose(u.var(0), var, atol=1e-6)
        np.testing.assert_allclose(u.var(0), net.gamma[l] ** 2, rtol=1e-3)


def test_running_stats_stay_positive():
    rng = np.random.default_rng(4)
    net = Mlp(SHAPES["encoder"], rng)
    for _ in range(20):
        net.forward(rng.normal(size=(8, 19)), training=True)
    assert all(np.all(v > 0) for v in net.run_var if v is not None)


# -- input Jacobians ------------------------------------------------------


def _fd_jacobian(net, x, h=1e-6):
    J = np.zeros((net.spec.widths[-1], len(x)))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = h
        J[:, j] = (net.predict((x + e)[None])[0] - net.predict((x - e)[None])[0]) / (2 * h)
    return J


def test_jacobian_of_linear_layer():
    net = Mlp(MlpSpec((4, 2), ("linear",), (False,))).eval()
    np.testing.assert_array_equal(net.input_jacobian(np.ones(4)), net.W[0].T)


def test_jacobian_scalar_tanh_at_zero():
    net = Mlp(MlpSpec((1, 1), ("tanh",), (False,))).eval()
    net.W[0][:] = 0.7
    assert net.input_jacobian(np.zeros(1))[0, 0] == pytest.approx(0.7, abs=1e-15)


@pytest.mark.parametrize("name", SHAPES)
def test_jacobian_matches_finite_differences(name):
    rng = np.random.default_rng(5)
    net = Mlp(SHAPES[name], rng).eval()
    _randomise_bn(net, rng)
    x = rng.normal(size=SHAPES[name].widths[0])
    assert _rel_err(net.input_jacobian(x), _fd_jacobian(net, x)) <= 1e-4


def test_jacobian_rejects_training_mode():
    with pytest.raises(RuntimeError):
        Mlp(SHAPES["nl_dynamics"]).input_jacobian(np.zeros(9))


@pytest.mark.parametrize("name", ["nl_dynamics", "ll_params", "encoder"])
def test_jacobian_backward_matches_finite_differences(name):
    rng = np.random.default_rng(6)
    net = Mlp(SHAPES[name], rng).eval()
    _randomise_bn(net, rng)
    x = rng.normal(size=(3, SHAPES[name].widths[0]))
    RJ = rng.normal(size=(3, SHAPES[name].widths[-1], SHAPES[name].widths[0]))
    Ro = rng.normal(size=(3, SHAPES[name].widths[-1]))

    def loss():
        J, out, _ = net.jacobian(x)
        return np.sum(RJ * J) + 0.5 * np.sum(J**2) + np.sum(Ro * out)

    J, out, c = net.jacobian(x)
    grads, gin = net.jacobian_backward(c, RJ + J, Ro)
    h = 1e-5
    for p, g in zip(net.params, grads):
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            fp = loss()
            p[idx] = old - h
            fm = loss()
            p[idx] = old
            num[idx] = (fp - fm) / (2 * h)
        assert _rel_err(g, num) <= 1e-4
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = loss()
        x[idx] = old - h
        fm = loss()
        x[idx] = old
        num[idx] = (fp - fm) / (2 * h)
    assert _rel_err(gin, num) <= 1e-4


# -- RMSProp --------------------------------------------------------------


def test_rmsprop_zero_gradient():
    p = [np.array([1.0, -2.0])]
    nn_core.rmsprop_step(p, [np.zeros(2)], RmsProp())
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_rmsprop_first_step_closed_form():
    g = 0.37
    p = [np.array([0.0])]
    opt = RmsProp(lr=1e-3, rho=0.9, eps=1e-8)
    opt.step(p, [np.array([g])])
    assert p[0][0] == pytest.approx(-1e-3 * g / np.sqrt(0.1 * g * g + 1e-8), rel=1e-14)
    assert opt.acc[0][0] >= 0


def test_rmsprop_quadratic_bowl():
    rng = np.random.default_rng(7)
    # steady-state RMSProp steps are about lr, so the residual is ~ dim * (lr / 2)^2
    x = [rng.uniform(-1, 1, 2)]
    scale = np.ones(2)
    opt = RmsProp(lr=1e-3)
    for _ in range(5000):
        opt.step(x, [2 * scale * x[0]])
    assert np.sum(scale * x[0] ** 2) <= 1e-6


def test_rmsprop_shape_mismatch():
    with pytest.raises(ValueError):
        RmsProp().step([np.zeros(2)], [np.zeros(3)])


# -- checkpoints ----------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    nets = [Mlp(SHAPES[k], rng) for k in ("encoder", "decoder")]
    for n in nets:
        _randomise_bn(n, rng)
    nn_core.save_checkpoint(tmp_path / "m.ckpt", nets, extra=[1.5, 2.5])
    back, extra = nn_core.load_checkpoint(tmp_path / "m.ckpt")
    np.testing.assert_array_equal(extra, [1.5, 2.5])
    x = rng.normal(size=(4, 19))
    np.testing.assert_array_equal(back[0].predict(x), nets[0].eval().predict(x))
    assert back[1].spec == nets[1].spec


def test_checkpoint_rejects_garbage(tmp_path):
    (tmp_path / "bad").write_bytes(b"nope" + bytes(20))
    with pytest.raises(ValueError):
        nn_core.load_checkpoint(tmp_path / "bad")

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import LAYER_KIND_CYCLE, max_relative_error, random_tiny_net
from irissr.nn import (BatchNorm2D, Conv2D, Dense, LeakyReLU, Network, NonFiniteError, PReLU, ReLU,
                       ResidualAdd, SGDConfig, Sigmoid, bce_loss, bce_with_logits, load_network,
                       mse_loss, pixel_shuffle, pixel_unshuffle, save_network, sgd_step)


def test_identity_1x1_conv():
    conv = Conv2D(1, 1, 1)
    conv.params["weight"][:] = 1.0
    net = Network([conv])
    x = np.random.default_rng(0).random((2, 1, 5, 4)).astype(np.float32)
    np.testing.assert_array_equal(net.forward(x), x)


def test_all_ones_3x3_conv_on_ones():
    conv = Conv2D(1, 1, 3)
    conv.params["weight"][:] = 1.0
    out = Network([conv]).forward(np.ones((1, 1, 3, 3), np.float32))
    assert out.shape == (1, 1, 1, 1)
    assert out[0, 0, 0, 0] == 9.0


def test_relu_definition():
    x = np.array([-1.0, 0.0, 2.0], np.float32).reshape(1, 1, 1, 3)
    np.testing.assert_array_equal(ReLU().forward(x, False).ravel(), [0.0, 0.0, 2.0])


def test_weight_grad_of_1x1_conv_is_input_sum():
    net = Network([Conv2D(1, 1, 1)]).init(3)
    x = np.random.default_rng(1).random((2, 1, 4, 4)).astype(np.float32)
    y = net.forward(x, train=True)
    net.backward(np.ones_like(y))
    assert net.layers[0].grads["weight"].item() == pytest.approx(float(x.sum()), rel=1e-5)
    assert net.layers[0].grads["bias"].item() == pytest.approx(x.size)


def test_zero_upstream_gives_zero_grads():
    net = Network([Conv2D(1, 4, 3, padding=1), BatchNorm2D(4), PReLU(4), Conv2D(4, 1, 3)]).init(0)
    x = np.random.default_rng(2).random((2, 1, 6, 6)).astype(np.float32)
    y = net.forward(x, train=True)
    gx = net.backward(np.zeros_like(y))
    assert gx.shape == x.shape
    for _, layer in enumerate(net.layers):
        for g in layer.grads.values():
            assert not np.any(g)


def test_backward_without_forward_raises():
    net = Network([Conv2D(1, 1, 3)]).init(0)
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((1, 1, 1, 1), np.float32))
    net.forward(np.zeros((1, 1, 3, 3), np.float32), train=False)
    with pytest.raises(RuntimeError):
        net.backward(np.zeros((1, 1, 1, 1), np.float32))


@pytest.mark.parametrize("kind", LAYER_KIND_CYCLE)
def test_finite_difference_agreement(kind):
    rng = np.random.default_rng(100 + LAYER_KIND_CYCLE.index(kind))
    for _ in range(3):
        net, x, w = random_tiny_net(rng, kind)
        assert max_relative_error(net, x, w) < 1e-3


def test_construction_rejects_incompatible_channels():
    with pytest.raises(ValueError):
        Network([Conv2D(1, 4, 3), Conv2D(3, 1, 3)])
    with pytest.raises(ValueError):
        Network([Conv2D(1, 4, 3), ResidualAdd(0)])
    with pytest.raises(ValueError):
        from irissr.nn import PixelShuffle
        Network([Conv2D(1, 6, 3), PixelShuffle(2)])


def test_forward_shape_mismatch():
    net = Network([Conv2D(2, 1, 3)], in_channels=2).init(0)
    with pytest.raises(ValueError):
        net.forward(np.zeros((1, 1, 5, 5), np.float32))


def test_nonfinite_activation_raises():
    net = Network([Conv2D(1, 1, 1)]).init(0)
    net.layers[0].params["weight"][:] = np.inf
    with pytest.raises(NonFiniteError):
        net.forward(np.ones((1, 1, 2, 2), np.float32))


def test_infer_mode_is_pure():
    net = Network([Conv2D(1, 4, 3, padding=1), BatchNorm2D(4), LeakyReLU(), Conv2D(4, 1, 3)]).init(5)
    x = np.random.default_rng(3).random((3, 1, 8, 8)).astype(np.float32)
    net.forward(x, train=True)  # moves running statistics away from their init
    a = net.forward(x)
    b = net.forward(x)
    assert a.tobytes() == b.tobytes()


def test_batch_norm_modes():
    bn = BatchNorm2D(2)
    x = np.random.default_rng(4).normal(3.0, 2.0, (8, 2, 5, 5))
    y = bn.forward(x, True)
    np.testing.assert_allclose(y.mean(axis=(0, 2, 3)), 0.0, atol=1e-6)
    np.testing.assert_allclose(y.var(axis=(0, 2, 3)), 1.0, atol=1e-4)
    # running stats moved 10% of the way towards the batch statistics
    np.testing.assert_allclose(bn.buffers["running_mean"], 0.1 * x.mean(axis=(0, 2, 3)), rtol=1e-5)
    y_inf = bn.forward(x, False)
    assert not np.allclose(y_inf, y)


@settings(max_examples=60, deadline=None)
@given(size=st.integers(1, 12), k=st.integers(1, 5), stride=st.integers(1, 3), pad=st.integers(0, 2))
def test_conv_output_size(size, k, stride, pad):
    if size + 2 * pad < k:
        return
    conv = Conv2D(1, 2, k, stride=stride, padding=pad)
    out = conv.forward(np.zeros((1, 1, size, size), np.float32), False)
    expected = (size + 2 * pad - k) // stride + 1
    assert out.shape == (1, 2, expected, expected) == (1, 2, conv.output_size(size), conv.output_size(size))


@settings(max_examples=40, deadline=None)
@given(r=st.integers(1, 3), c=st.integers(1, 3), h=st.integers(1, 4), w=st.integers(1, 4),
       seed=st.integers(0, 1000))
def test_pixel_shuffle_roundtrip(r, c, h, w, seed):
    x = np.random.default_rng(seed).random((2, c * r * r, h, w))
    y = pixel_shuffle(x, r)
    assert y.shape == (2, c, h * r, w * r)
    np.testing.assert_array_equal(pixel_unshuffle(y, r), x)


def test_pixel_shuffle_layout():
    x = np.arange(4.0).reshape(1, 4, 1, 1)
    np.testing.assert_array_equal(pixel_shuffle(x, 2)[0, 0], [[0.0, 1.0], [2.0, 3.0]])


# --- losses ----------------------------------------------------------------

def test_mse_examples():
    loss, grad = mse_loss(np.ones(3), np.ones(3))
    assert loss == 0.0 and not grad.any()
    loss, grad = mse_loss(np.array([1.0]), np.array([0.0]))
    assert loss == 1.0 and grad[0] == 2.0
    loss, _ = mse_loss(np.array([1.0, 3.0]), np.array([0.0, 1.0]))
    assert loss == 2.5
    with pytest.raises(ValueError):
        mse_loss(np.ones(2), np.ones(3))


def test_bce_examples():
    assert bce_loss(np.array([0.5]), [1])[0] == pytest.approx(np.log(2), abs=1e-12)
    assert bce_loss(np.array([0.5]), [0])[0] == pytest.approx(0.6931, abs=1e-4)
    assert bce_loss(np.array([1.0]), [1])[0] == pytest.approx(0.0, abs=1e-6)
    assert bce_loss(np.array([1.0]), [0])[0] == pytest.approx(-np.log(1e-7), rel=1e-6)
    assert bce_loss(np.array([1.0]), [0])[0] == pytest.approx(16.12, abs=0.01)
    with pytest.raises(ValueError):
        bce_loss(np.array([0.5]), [2])


def test_bce_gradients_match_finite_differences():
    rng = np.random.default_rng(0)
    p = rng.uniform(0.1, 0.9, 6)
    y = rng.integers(0, 2, 6)
    _, g = bce_loss(p, y)
    eps = 1e-6
    for i in range(6):
        d = np.zeros(6)
        d[i] = eps
        num = (bce_loss(p + d, y)[0] - bce_loss(p - d, y)[0]) / (2 * eps)
        assert g[i] == pytest.approx(num, rel=1e-5)
    z = rng.normal(size=6)
    _, gz = bce_with_logits(z, y)
    sig = 1 / (1 + np.exp(-z))
    assert bce_with_logits(z, y)[0] == pytest.approx(bce_loss(sig, y)[0], rel=1e-9)
    np.testing.assert_allclose(gz, (sig - y) / 6)


# --- optimiser -------------------------------------------------------------

def _scalar_net(w0):
    net = Network([Conv2D(1, 1, 1)])
    net.layers[0].params["weight"][:] = w0
    return net


def _set_grad(net, g):
    net.layers[0].grads["weight"] = np.full((1, 1, 1, 1), g, np.float32)
    net.layers[0].grads["bias"] = np.zeros(1, np.float32)


def test_sgd_plain_step():
    net = _scalar_net(1.0)
    _set_grad(net, 1.0)
    sgd_step(net, SGDConfig(learning_rate=0.1, momentum=0.0))
    assert net.layers[0].params["weight"].item() == pytest.approx(0.9)
    assert net.layers[0].grads["weight"] is None


def test_sgd_momentum_two_steps():
    net = _scalar_net(1.0)
    cfg = SGDConfig(learning_rate=0.1, momentum=0.9)
    for _ in range(2):
        _set_grad(net, 1.0)
        sgd_step(net, cfg)
    assert net.layers[0].params["weight"].item() == pytest.approx(0.71, abs=1e-6)


def test_sgd_zero_grad_and_empty():
    net = _scalar_net(0.5)
    _set_grad(net, 0.0)
    sgd_step(net, SGDConfig(learning_rate=0.1))
    assert net.layers[0].params["weight"].item() == 0.5
    with pytest.raises(RuntimeError):
        sgd_step(net, SGDConfig(learning_rate=0.1))


def test_sgd_clip_and_decay():
    net = _scalar_net(2.0)
    _set_grad(net, 10.0)
    sgd_step(net, SGDConfig(learning_rate=0.1, momentum=0.0, grad_clip=1.0))
    assert net.layers[0].params["weight"].item() == pytest.approx(1.9)
    _set_grad(net, 0.0)
    sgd_step(net, SGDConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.5))
    assert net.layers[0].params["weight"].item() == pytest.approx(1.9 - 0.1 * 0.5 * 1.9, rel=1e-6)


def test_sgd_config_validation():
    with pytest.raises(ValueError):
        SGDConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        SGDConfig(momentum=1.0)


def _overfit(seed, steps=500):
    rng = np.random.default_rng(seed)
    x = rng.random((1, 1, 6, 6)).astype(np.float32)
    t = rng.random((1, 1, 4, 4)).astype(np.float32)
    net = Network([Conv2D(1, 8, 3), ReLU(), Conv2D(8, 1, 1)]).init(seed)
    cfg = SGDConfig(learning_rate=0.05, momentum=0.9)
    losses = []
    for _ in range(steps):
        y = net.forward(x, train=True)
        loss, g = mse_loss(y, t)
        losses.append(loss)
        net.backward(g)
        sgd_step(net, cfg)
    return net, losses


def test_overfit_single_pair():
    _, losses = _overfit(0)
    assert losses[-1] < losses[0] / 100


def test_seeded_training_reproducible():
    a, _ = _overfit(7, steps=30)
    b, _ = _overfit(7, steps=30)
    for (_, _, pa), (_, _, pb) in zip(a.parameters(), b.parameters()):
        assert pa.tobytes() == pb.tobytes()


def test_network_roundtrip(tmp_path):
    net = Network([Conv2D(1, 4, 3, padding=1), BatchNorm2D(4), PReLU(4), Conv2D(4, 4, 3, stride=2),
                   LeakyReLU(0.2), Dense(4 * 4 * 4, 1), Sigmoid()]).init(11)
    x = np.random.default_rng(0).random((2, 1, 9, 9)).astype(np.float32)
    net.forward(x, train=True)
    path = tmp_path / "net.bin"
    save_network(path, net)
    back = load_network(path)
    assert back.forward(x).tobytes() == net.forward(x).tobytes()
    raw = path.read_bytes()
    assert raw[:8] == b"IRSRMDL\0"

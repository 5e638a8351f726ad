import numpy as np
import pytest

from hsicd.autodiff import numerical_grad
from hsicd.model import ConfigError, ModelConfig, ModelParams, Network, expected_shapes
from hsicd.preprocess import build_graph
from hsicd.qec import loss


def toy(seed=0, h=4, w=4, c=4):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0.1, 1, (h, w, c))
    x2 = x1 + rng.normal(0, 0.2, (h, w, c))
    gt = (rng.random((h, w)) < 0.4).astype(int)
    gt[0, 0], gt[0, 1] = 0, 1
    labels = np.repeat(np.repeat(np.arange(4).reshape(2, 2), h // 2, 0), w // 2, 1)
    return x1, x2, gt, build_graph(labels)


def small_config(**kw):
    return ModelConfig(4, 4, 4, **{"features": 4, "qfl_groups": 2, **kw})


@pytest.mark.parametrize("use_qfl,use_qec", [(True, True), (False, True), (True, False), (False, False)])
def test_forward_shapes_and_distributions(use_qfl, use_qec):
    x1, x2, _, graph = toy()
    net = Network(ModelParams.init(small_config(use_qfl=use_qfl, use_qec=use_qec), np.random.default_rng(0)))
    out = net.forward(x1, x2, graph)
    assert out["M"].shape == (4, 4, 2)
    assert np.allclose(out["M"].data.sum(axis=-1), 1)
    if not use_qec:
        assert out["M"] is out["M_FCL"]


def test_full_chain_gradients_match_finite_differences():
    x1, x2, gt, graph = toy()
    params = ModelParams.init(small_config(), np.random.default_rng(1))
    net = Network(params)
    mask = np.ones((4, 4), bool)

    def total():
        out = net.forward(x1, x2, graph, training=True)
        return loss(out["M"], out["M_QNN"], out["M_FCL"], gt, mask).total

    params.zero_grad()
    total().backward()
    analytic = params.grads()
    arrays = params.arrays()
    names = sorted(arrays)
    numeric = numerical_grad(lambda: total().data, [arrays[n] for n in names], step=1e-5)
    worst = {}
    for name, num in zip(names, numeric):
        a = analytic[name]
        scale = max(np.abs(a).max(), np.abs(num).max(), 1e-8)
        worst[name] = np.abs(a - num).max() / scale
    bad = {n: e for n, e in worst.items() if e >= 1e-3}
    assert not bad, bad
    # every trainable tensor takes part in the loss
    assert all(np.abs(analytic[n]).max() > 0 for n in names)


def test_identical_images():
    x1, _, _, graph = toy()
    net = Network(ModelParams.init(small_config(), np.random.default_rng(2)))
    out = net.forward(x1, x1.copy(), graph)
    assert np.all(out["X_diff"].data == 0)
    assert np.all(out["Z"] == 0)
    assert np.all(out["X_fea"].data == 0)
    assert np.all(np.isfinite(out["M"].data))


def test_swapping_dates():
    x1, x2, _, graph = toy()
    net = Network(ModelParams.init(small_config(), np.random.default_rng(3)))
    a = net.forward(x1, x2, graph)
    b = net.forward(x2, x1, graph)
    assert np.allclose(a["Z"], b["Z"])
    assert np.allclose(a["X_diff"].data, -b["X_diff"].data)


def test_qfl_ablation_contributes_nothing():
    x1, x2, gt, graph = toy()
    params = ModelParams.init(small_config(use_qfl=False), np.random.default_rng(4))
    net = Network(params)
    out = net.forward(x1, x2, graph)
    ref = ModelParams.init(small_config(use_qfl=False), np.random.default_rng(4))
    for name in ("qfl.conv_in.kernel", "qfl.quantum", "qfl.conv_out.bias"):
        ref[name].data[...] += 1.0
    assert np.array_equal(Network(ref).forward(x1, x2, graph)["X_fea"].data, out["X_fea"].data)
    params.zero_grad()
    loss(out["M"], out["M_QNN"], out["M_FCL"], gt, np.ones((4, 4), bool)).total.backward()
    grads = params.grads()
    for name in grads:
        if name.startswith("qfl."):
            assert np.all(grads[name] == 0)


def test_inconsistent_widths_fail_at_build():
    cfg = small_config()
    arrays = ModelParams.init(cfg, np.random.default_rng(5)).arrays()
    arrays["ff2.kernel"] = np.zeros((3, 3, 5, 4))
    with pytest.raises(ConfigError, match="ff2.kernel"):
        ModelParams(cfg, arrays)
    del arrays["ff2.kernel"]
    with pytest.raises(ConfigError, match="missing"):
        ModelParams(cfg, arrays)


@pytest.mark.parametrize("kw", [{"features": 5}, {"qubits": 5}, {"topology": "star"}, {"eta": 0}])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        ModelParams.init(small_config(**kw), np.random.default_rng(0))


def test_input_size_mismatch():
    x1, x2, _, graph = toy()
    net = Network(ModelParams.init(small_config(), np.random.default_rng(6)))
    with pytest.raises(ConfigError):
        net.forward(x1[:, :, :3], x2[:, :, :3], graph)


def test_channel_chain_ends_in_two_classes():
    shapes = expected_shapes(ModelConfig(8, 8, 16))
    assert shapes["dr.kernel"] == (16, 64)
    assert shapes["ff1.kernel"] == (3, 3, 193, 64)
    assert shapes["qec.fcl3.kernel"] == (4, 2)
    assert shapes["qfl.quantum"] == (1, 18)

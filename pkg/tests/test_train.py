import json

import numpy as np
import pytest

from hsicd.metrics import ConfusionCounts, chance_agreement, metrics
from hsicd.synth import SyntheticSpec, synth_generate
from hsicd.train import Adam, TrainConfig, TrainingDiverged, monte_carlo, sample_labels, train


def brute_counts(pred, gt):
    tp = fp = tn = fn = 0
    for p, g in zip(np.ravel(pred), np.ravel(gt)):
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    return tp, fp, tn, fn


def test_worked_metric_example():
    m = metrics(ConfusionCounts(TP=40, FP=5, TN=50, FN=5))
    assert m["OA"] == pytest.approx(0.90)
    assert m["Pe"] == pytest.approx(0.505)
    assert m["kappa"] == pytest.approx(0.79798, abs=1e-5)
    assert m["Pr"] == m["Re"] == m["F1"] == pytest.approx(8 / 9)


def test_perfect_and_degenerate_predictions():
    assert metrics(ConfusionCounts(10, 0, 10, 0))["kappa"] == 1.0
    m = metrics(ConfusionCounts(TP=0, FP=0, TN=50, FN=50))
    assert m["kappa"] == pytest.approx(0.0)
    assert "Pr" in m["undefined"] and m["F1"] == 0.0
    m = metrics(ConfusionCounts(0, 0, 7, 0))
    assert m["kappa"] == 0.0 and "kappa" in m["undefined"]
    with pytest.raises(ValueError):
        metrics(ConfusionCounts(0, 0, 0, 0))
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


def test_metrics_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        shape = tuple(rng.integers(1, 12, 2))
        pred = rng.random(shape) < rng.random()
        gt = rng.random(shape) < rng.random()
        c = ConfusionCounts.from_maps(pred, gt)
        assert (c.TP, c.FP, c.TN, c.FN) == brute_counts(pred, gt)
        m = metrics(c)
        assert m["kappa"] <= m["OA"] + 1e-15
        if m["Pr"] and m["Re"]:
            assert min(m["Pr"], m["Re"]) - 1e-15 <= m["F1"] <= max(m["Pr"], m["Re"]) + 1e-15


def test_chance_agreement_formula():
    c = ConfusionCounts(3, 2, 4, 1)
    n = 10
    expect = ((3 + 2) * (3 + 1) + (1 + 4) * (2 + 4)) / n ** 2
    assert chance_agreement(c) == pytest.approx(expect)


def test_sampling_example():
    gt = np.zeros((100, 100), dtype=int)
    gt[:30] = 1
    train_mask, val_mask = sample_labels(gt, rate=0.01, seed=3)
    assert not np.any(train_mask & val_mask)
    sampled = train_mask | val_mask
    assert gt[sampled].sum() == 50 and (1 - gt[sampled]).sum() == 50
    assert train_mask.sum() == 90 and val_mask.sum() == 10
    assert gt[train_mask].sum() == 45


def test_sampling_caps_at_class_size(caplog):
    gt = np.zeros((20, 20), dtype=int)
    gt[0, :3] = 1
    train_mask, val_mask = sample_labels(gt, rate=0.05, seed=0)
    assert gt[train_mask | val_mask].sum() == 3
    assert "only 3 changed" in caplog.text


def test_sampling_needs_both_classes():
    with pytest.raises(ValueError):
        sample_labels(np.zeros((5, 5)), 0.5)


def test_learning_rate_schedule():
    cfg = TrainConfig()
    assert cfg.lr_at(0) == 0.005
    assert cfg.lr_at(19) == 0.005
    assert cfg.lr_at(40) == pytest.approx(0.00405)


def test_adam_zero_gradient_leaves_params():
    p = {"w": np.array([1.0, -2.0])}
    opt = Adam()
    for _ in range(3):
        opt.step(p, {"w": np.zeros(2)}, 0.1)
    assert np.array_equal(p["w"], [1.0, -2.0])


def test_adam_on_quadratic():
    p = {"x": np.array([1.0])}
    opt = Adam()
    prev = 1.0
    for _ in range(100):
        opt.step(p, {"x": 2 * p["x"]}, 0.005)
        assert abs(p["x"][0]) < prev
        prev = abs(p["x"][0])


def test_adam_first_step_is_lr_times_sign():
    p = {"x": np.array([0.5, 0.5])}
    Adam().step(p, {"x": np.array([3.0, -0.01])}, 0.1)
    assert np.allclose(p["x"], [0.4, 0.6], atol=1e-6)


def test_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"max_epochs": 3, "use_qec": False}))
    cfg = TrainConfig.from_json(path)
    assert cfg.max_epochs == 3 and not cfg.use_qec
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"learning_rate": 0.1})
    with pytest.raises(ValueError):
        TrainConfig(lr0=-1).validate()


@pytest.fixture(scope="module")
def tiny_scene():
    return synth_generate(SyntheticSpec(height=20, width=20, bands=6, n_blobs=2, coverage=0.15, seed=1))


def tiny_config(**kw):
    base = dict(max_epochs=4, sample_rate=0.1, s=10, features=8, qfl_groups=2, seed=0)
    return TrainConfig(**{**base, **kw})


def test_training_is_deterministic(tiny_scene):
    a = train(*tiny_scene, tiny_config())
    b = train(*tiny_scene, tiny_config())
    assert a.history == b.history
    for name, arr in a.params.arrays().items():
        assert np.array_equal(arr, b.params.arrays()[name])
    assert len(a.history) == 4
    assert 0 <= a.best_epoch < 4


@pytest.mark.parametrize("use_qfl,use_qec", [(True, True), (False, True), (True, False), (False, False)])
def test_all_ablations_train(tiny_scene, use_qfl, use_qec):
    res = train(*tiny_scene, tiny_config(max_epochs=2, use_qfl=use_qfl, use_qec=use_qec))
    assert set(res.test_metrics) >= {"OA", "kappa", "F1", "Pr", "Re"}
    assert all(np.isfinite(r["loss"]) for r in res.history)


def test_divergence_is_reported(tiny_scene, monkeypatch):
    import hsicd.train as tr
    from hsicd.autodiff import Tensor
    from hsicd.qec import LossTerms

    def nan_loss(*args, **kwargs):
        t = Tensor(np.array(np.nan))
        return LossTerms(t, t, t)

    monkeypatch.setattr(tr, "loss", nan_loss)
    with pytest.raises(TrainingDiverged, match="epoch 0"):
        train(*tiny_scene, tiny_config(max_epochs=1))


def test_monte_carlo_summary(tiny_scene):
    runs, summary = monte_carlo(*tiny_scene, tiny_config(max_epochs=2), seeds=[0, 1])
    assert len(runs) == 2
    kappas = [r["kappa"] for r in runs]
    assert summary["kappa"][0] == pytest.approx(np.mean(kappas))
    assert summary["kappa"][1] == pytest.approx(np.std(kappas))

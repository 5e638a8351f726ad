import csv
import json

import numpy as np
import pytest

from hsicd import io
from hsicd.cli import main
from hsicd.quantum import QuantumLayerParams, block_unitary


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    prefix = str(d / "s")
    assert main(["synth", "--out", prefix, "--height", "20", "--width", "20", "--bands", "6",
                 "--coverage", "0.15", "--seed", "1"]) == 0
    cfg = d / "cfg.json"
    cfg.write_text(json.dumps({"max_epochs": 3, "sample_rate": 0.1, "s": 10, "features": 8, "qfl_groups": 2}))
    return {"x1": prefix + "_x1.hsi", "x2": prefix + "_x2.hsi", "gt": prefix + "_gt.pgm", "cfg": str(cfg), "dir": d}


def run_train(scene, out, seed=0):
    return main(["train", "--x1", scene["x1"], "--x2", scene["x2"], "--gt", scene["gt"],
                 "--config", scene["cfg"], "--out", str(out), "--seed", str(seed)])


def test_train_detect_eval(scene, tmp_path):
    model = tmp_path / "m.bin"
    assert run_train(scene, model) == 0
    assert (tmp_path / "m.bin.history.csv").exists()
    out_map = tmp_path / "p.pgm"
    assert main(["detect", "--model", str(model), "--x1", scene["x1"], "--x2", scene["x2"],
                 "--out-map", str(out_map)]) == 0
    first = out_map.read_bytes()
    assert main(["detect", "--model", str(model), "--x1", scene["x1"], "--x2", scene["x2"],
                 "--out-map", str(out_map)]) == 0
    assert out_map.read_bytes() == first
    assert io.load_mask(out_map).shape == (20, 20)
    overlay = tmp_path / "o.pgm"
    assert main(["detect", "--model", str(model), "--x1", scene["x1"], "--x2", scene["x2"],
                 "--out-map", str(overlay), "--gt", scene["gt"]]) == 0
    assert set(np.unique(io.load_pgm(overlay))) <= {0, 85, 170, 255}
    assert main(["eval", "--map", str(out_map), "--gt", scene["gt"], "--out-csv", str(tmp_path / "e.csv")]) == 0


def test_train_is_byte_reproducible(scene, tmp_path):
    assert run_train(scene, tmp_path / "a.bin") == 0
    assert run_train(scene, tmp_path / "b.bin") == 0
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert (tmp_path / "a.bin.history.csv").read_bytes() == (tmp_path / "b.bin.history.csv").read_bytes()
    assert run_train(scene, tmp_path / "c.bin", seed=1) == 0
    assert (tmp_path / "c.bin").read_bytes() != (tmp_path / "a.bin").read_bytes()


def test_eval_identical_maps(scene, tmp_path):
    out = tmp_path / "e.csv"
    assert main(["eval", "--map", scene["gt"], "--gt", scene["gt"], "--out-csv", str(out)]) == 0
    row = next(csv.DictReader(out.open()))
    assert float(row["OA"]) == 1.0 and float(row["kappa"]) == 1.0


def test_preprocess_outputs(scene, tmp_path):
    prefix = str(tmp_path / "pp")
    assert main(["preprocess", "--x1", scene["x1"], "--x2", scene["x2"], "--gt", scene["gt"],
                 "--config", scene["cfg"], "--out", prefix]) == 0
    g = io.load_graph(prefix + "_graph.bin")
    assert np.array_equal(io.load_pgm(prefix + "_labels.pgm"), g.labels)
    assert io.load_cube(prefix + "_sam.hsi").shape == (20, 20, 1)


def test_circuit_dump(tmp_path, capsys):
    vec = np.linspace(0, 3, 18)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(vec.tolist()))
    assert main(["circuit-dump", "--params", str(path)]) == 0
    rows = capsys.readouterr().out.strip().split("\n")
    assert len(rows) == 16
    vals = np.array([[float(v) for v in r.split()] for r in rows])
    assert vals.shape == (16, 32)
    u = vals[:, 0::2] + 1j * vals[:, 1::2]
    assert np.array_equal(u, block_unitary(QuantumLayerParams.from_vector(vec, 4)))


def test_errors_are_machine_readable(scene, tmp_path, capsys):
    assert main(["eval", "--map", str(tmp_path / "none.pgm"), "--gt", scene["gt"],
                 "--out-csv", str(tmp_path / "e.csv")]) == 2
    assert capsys.readouterr().err.startswith("error: missing-file:")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--x1", scene["x1"], "--x2", scene["x2"], "--gt", scene["gt"],
                 "--config", str(bad), "--out", str(tmp_path / "m.bin")]) == 2
    assert capsys.readouterr().err.startswith("error: bad-config:")
    bad.write_text(json.dumps({"epochs": 3}))
    assert main(["train", "--x1", scene["x1"], "--x2", scene["x2"], "--gt", scene["gt"],
                 "--config", str(bad), "--out", str(tmp_path / "m.bin")]) == 2
    assert "unknown config keys" in capsys.readouterr().err
    broken = tmp_path / "broken.hsi"
    broken.write_bytes(b"HSIC")
    assert main(["detect", "--model", str(tmp_path / "x"), "--x1", str(broken), "--x2", str(broken),
                 "--out-map", str(tmp_path / "o.pgm")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code != 0

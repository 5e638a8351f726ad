"""Command-line interface: ``hsicd <command> ...``.

Failures print one line ``error: <kind>: <message>`` on stderr and exit
non-zero (2 for usage/input problems, 3 for training divergence).
"""
import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import io
from .autodiff import BatchNormState
from .metrics import ConfusionCounts, metrics
from .model import ModelConfig, ModelParams, Network
from .preprocess import lda_project, sam_map
from .quantum import QuantumLayerParams, block_unitary
from .synth import SyntheticSpec, synth_generate
from .train import HISTORY_FIELDS, TrainConfig, TrainingDiverged, build_graph_from_axis, predict, prepare, train

logger = logging.getLogger("hsicd")

METRIC_FIELDS = ("OA", "kappa", "F1", "Pr", "Re", "Pe", "TP", "FP", "TN", "FN")


class UsageError(Exception):
    pass


# -- checkpoint (de)serialisation ---------------------------------------------

def checkpoint_payload(result):
    """Arrays and metadata describing a trained model and its preprocessing."""
    arrays = dict(result.params.arrays())
    for key, st in result.params.bn.items():
        arrays[f"bn.{key}.mean"] = st.mean
        arrays[f"bn.{key}.var"] = st.var
    arrays["lda.w"] = result.prepared.lda_w
    meta = {
        "train_config": result.config.to_dict(),
        "model_config": result.params.config.to_dict(),
        "lda_offset": float(result.prepared.lda_offset),
        "best_epoch": int(result.best_epoch),
        "bn_momentum": {k: st.momentum for k, st in result.params.bn.items()},
        "bn_eps": {k: st.eps for k, st in result.params.bn.items()},
    }
    return arrays, meta


def restore(arrays, meta):
    """Inverse of ``checkpoint_payload``: ``(ModelParams, lda_w, lda_offset, s)``."""
    arrays = dict(arrays)
    cfg = ModelConfig(**meta["model_config"])
    bn = {}
    for key in ("ff1", "ff2"):
        bn[key] = BatchNormState(
            arrays.pop(f"bn.{key}.mean"), arrays.pop(f"bn.{key}.var"),
            meta["bn_momentum"][key], meta["bn_eps"][key],
        )
    lda_w = arrays.pop("lda.w")
    params = ModelParams(cfg, arrays, bn)
    return params, lda_w, meta["lda_offset"], meta["train_config"]["s"]


# -- commands -----------------------------------------------------------------

def cmd_synth(args):
    spec = SyntheticSpec(
        height=args.height, width=args.width, bands=args.bands, endmembers=args.endmembers,
        n_blobs=args.blobs, coverage=args.coverage, noise_sigma=args.noise, seed=args.seed,
    )
    x1, x2, gt = synth_generate(spec)
    io.save_cube(f"{args.out}_x1.hsi", x1)
    io.save_cube(f"{args.out}_x2.hsi", x2)
    io.save_mask(f"{args.out}_gt.pgm", gt)
    print(f"wrote {args.out}_x1.hsi {args.out}_x2.hsi {args.out}_gt.pgm")


def _load_pair(args):
    x1 = io.load_cube(args.x1).astype(float)
    x2 = io.load_cube(args.x2).astype(float)
    if x1.shape != x2.shape:
        raise UsageError(f"cube shapes differ: {x1.shape} vs {x2.shape}")
    return x1, x2


def _load_gt(path, shape):
    gt = io.load_mask(path)
    if gt.shape != shape:
        raise UsageError(f"ground truth is {gt.shape}, cubes are {shape}")
    return gt


def _config(args):
    cfg = TrainConfig.from_json(args.config) if args.config else TrainConfig()
    if getattr(args, "seed", None) is not None:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def cmd_preprocess(args):
    x1, x2 = _load_pair(args)
    gt = _load_gt(args.gt, x1.shape[:2])
    cfg = _config(args)
    prep = prepare(x1, x2, gt, cfg)
    io.save_pgm(f"{args.out}_labels.pgm", prep.graph.labels, maxval=65535)
    io.save_graph(f"{args.out}_graph.bin", prep.graph)
    z = sam_map(x1, x2)
    io.save_cube(f"{args.out}_sam.hsi", z[..., None])
    proj, _ = lda_project(np.concatenate([x1, x2], -1), gt, prep.train_mask)
    io.save_cube(f"{args.out}_lda.hsi", proj)
    print(f"K={prep.graph.K} superpixels; wrote {args.out}_labels.pgm {args.out}_graph.bin")


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for row in history:
            w.writerow([row["epoch"]] + [repr(float(row[k])) for k in HISTORY_FIELDS[1:]])


def cmd_train(args):
    x1, x2 = _load_pair(args)
    gt = _load_gt(args.gt, x1.shape[:2])
    cfg = _config(args)

    def progress(row):
        logger.info("epoch %d loss %.5f val F1 %.4f", row["epoch"], row["loss"], row["val_F1"])

    result = train(x1, x2, gt, cfg, progress=progress if args.verbose else None)
    arrays, meta = checkpoint_payload(result)
    io.save_model(args.out, arrays, meta)
    write_history(args.history or f"{args.out}.history.csv", result.history)
    m = result.test_metrics
    print(f"best epoch {result.best_epoch}; test OA {m['OA']:.4f} kappa {m['kappa']:.4f} F1 {m['F1']:.4f}")


def cmd_detect(args):
    arrays, meta = io.load_model(args.model)
    params, lda_w, lda_offset, s = restore(arrays, meta)
    x1, x2 = _load_pair(args)
    cfg = params.config
    if x1.shape != (cfg.height, cfg.width, cfg.bands):
        raise UsageError(f"model expects {cfg.height}x{cfg.width}x{cfg.bands} cubes, got {x1.shape}")
    graph = build_graph_from_axis(x1, x2, lda_w, lda_offset, s)
    _, pred = predict(Network(params), x1, x2, graph)
    if args.gt:
        io.save_pgm(args.out_map, io.overlay_map(pred, _load_gt(args.gt, pred.shape)), 255)
    else:
        io.save_mask(args.out_map, pred)
    print(f"changed pixels: {int(pred.sum())} of {pred.size}")


def cmd_eval(args):
    pred = io.load_mask(args.map)
    gt = _load_gt(args.gt, pred.shape)
    counts = ConfusionCounts.from_maps(pred, gt)
    m = metrics(counts)
    row = {**m, "TP": counts.TP, "FP": counts.FP, "TN": counts.TN, "FN": counts.FN}
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_FIELDS)
        w.writerow([row[k] for k in METRIC_FIELDS])
    print(" ".join(f"{k}={row[k]}" for k in METRIC_FIELDS[:5]))


def cmd_circuit_dump(args):
    size = QuantumLayerParams.size(args.qubits, args.eta, args.topology)
    if args.params:
        with open(args.params) as fh:
            vec = np.asarray(json.load(fh), dtype=float)
    else:
        vec = np.random.default_rng(args.seed).uniform(0, 2 * np.pi, size)
    if vec.shape != (size,):
        raise UsageError(f"expected {size} angles, got {vec.shape}")
    u = block_unitary(QuantumLayerParams.from_vector(vec, args.qubits, args.eta, args.topology))
    out = sys.stdout
    for row in u:
        out.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) + "\n")


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="hsicd", description="Hybrid graph/quantum hyperspectral change detection.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic bitemporal scene")
    s.add_argument("--out", required=True, help="output prefix")
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--bands", type=int, default=16)
    s.add_argument("--endmembers", type=int, default=4)
    s.add_argument("--blobs", type=int, default=3)
    s.add_argument("--coverage", type=float, default=0.08)
    s.add_argument("--noise", type=float, default=0.005)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("preprocess", cmd_preprocess, "export SAM, LDA projection and the superpixel graph"),
        ("train", cmd_train, "train a model and write a checkpoint"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--x1", required=True)
        s.add_argument("--x2", required=True)
        s.add_argument("--gt", required=True)
        s.add_argument("--config", help="JSON file with TrainConfig fields")
        s.add_argument("--out", required=True)
        s.add_argument("--seed", type=int)
        s.set_defaults(func=func)
    s.add_argument("--history", help="metric CSV path (default: <out>.history.csv)")

    s = sub.add_parser("detect", help="predict a change map with a trained model")
    s.add_argument("--model", required=True)
    s.add_argument("--x1", required=True)
    s.add_argument("--x2", required=True)
    s.add_argument("--out-map", required=True)
    s.add_argument("--gt", help="write the TP/TN/FP/FN overlay instead of the binary map")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("eval", help="score a change map against ground truth")
    s.add_argument("--map", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out-csv", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("circuit-dump", help="print the block unitary, one row per line as re/im pairs")
    s.add_argument("--qubits", type=int, default=4)
    s.add_argument("--eta", type=int, default=1)
    s.add_argument("--topology", choices=("chain", "ring"), default="chain")
    s.add_argument("--params", help="JSON list of angles; random from --seed when omitted")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_circuit_dump)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except TrainingDiverged as exc:
        print(f"error: diverged: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: missing-file: {exc.filename}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: bad-config: {exc}", file=sys.stderr)
        return 2
    except (UsageError, io.FormatError, ValueError, TypeError) as exc:
        kind = "format" if isinstance(exc, io.FormatError) else "usage"
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

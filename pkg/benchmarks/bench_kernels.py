"""Compare the compiled circuit kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--pixels 16384] [--repeat 5]

Times a batched forward pass and a vector-Jacobian product for one
circuit instance per pixel group, checks both backends agree, and prints
a small table. Exits non-zero if the outputs disagree beyond 1e-12.
"""
import argparse
import sys
import time

import numpy as np

from hsicd.quantum import QueenCircuit, available


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=16384, help="circuit instances per batch")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--eta", type=int, default=1)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    backends = ["python"] + (["cython"] if available() else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the Python fallback only")
    feats = rng.normal(size=(args.pixels, 4))
    results = {}
    for name in backends:
        circ = QueenCircuit(4, args.eta, backend=name)
        params = rng.uniform(0, 2 * np.pi, (1, circ.n_params)) if not results else results["python"][3]
        g = np.ones((args.pixels, circ.n_out))
        out = circ.forward(feats, params)
        grads = circ.vjp(feats, params, g)
        fwd = best_of(lambda: circ.forward(feats, params), args.repeat)
        bwd = best_of(lambda: circ.vjp(feats, params, g), args.repeat)
        results[name] = (fwd, bwd, (out, grads), params)

    print(f"{'backend':<8} {'forward s':>10} {'vjp s':>10} {'instances/s (fwd)':>18}")
    for name, (fwd, bwd, _, _) in results.items():
        print(f"{name:<8} {fwd:>10.4f} {bwd:>10.4f} {args.pixels / fwd:>18.0f}")
    if "cython" in results:
        py, cy = results["python"], results["cython"]
        print(f"speed-up: forward x{py[0] / cy[0]:.1f}, vjp x{py[1] / cy[1]:.1f}")
        out_p, (gf_p, gp_p) = py[2]
        out_c, (gf_c, gp_c) = cy[2]
        err = max(np.abs(out_p - out_c).max(), np.abs(gf_p - gf_c).max(),
                  np.abs(gp_p - gp_c).max() / max(1.0, np.abs(gp_p).max()))
        print(f"max deviation between backends: {err:.2e}")
        if err > 1e-12:
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

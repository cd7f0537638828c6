"""Time the compiled kernels against the interpreted path (TACTILE_SERVO_NO_JIT=1).

Each path runs in its own subprocess because the toggle is read at import.
Outputs of both paths are checked to agree before timings are reported.

    python benchmarks/bench_kernels.py [--repeat 3] [--nodes 600]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _cases(nodes):
    from tactile_servo import geodesy, kernels

    rng = np.random.default_rng(0)
    v = rng.normal(size=(nodes, 3))
    pts = 0.008 * v / np.linalg.norm(v, axis=1, keepdims=True)
    g = geodesy.knn_graph(pts, 18)
    dense = geodesy.dense_weights(geodesy.knn_graph(pts[:150], 18))
    twists = rng.normal(0, 0.1, size=(20000, 6))
    xq, rq = rng.uniform(0, 0.008, 20000), rng.uniform(0, 0.008, 20000)
    return {
        "all_pairs_dijkstra": lambda: kernels.all_pairs_dijkstra(g.indptr, g.indices, g.weights),
        "floyd_warshall(150)": lambda: kernels.floyd_warshall(dense),
        "integrate_base_twists": lambda: kernels.integrate_base_twists(np.eye(3), np.zeros(3), twists, 0.01)[1],
        "nearest_cap_param": lambda: kernels.nearest_cap_param(xq, rq, 0.008, 0.008, 3.0),
    }


def worker(repeat, nodes):
    from tactile_servo._jit import HAVE_NUMBA

    out = {"jit": HAVE_NUMBA, "cases": {}}
    for name, fn in _cases(nodes).items():
        t0 = time.perf_counter()
        res = fn()  # first call includes compilation (or cache load)
        first = time.perf_counter() - t0
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out["cases"][name] = {"first": first, "best": min(times), "checksum": float(np.sum(res[np.isfinite(res)]))}
    print(json.dumps(out))


def run_path(no_jit, repeat, nodes):
    env = dict(os.environ, TACTILE_SERVO_NO_JIT="1" if no_jit else "0")
    cmd = [sys.executable, __file__, "--worker", "--repeat", str(repeat), "--nodes", str(nodes)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--nodes", type=int, default=600, help="points in the all-pairs Dijkstra graph")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        worker(args.repeat, args.nodes)
        return
    jit = run_path(False, args.repeat, args.nodes)
    py = run_path(True, args.repeat, args.nodes)
    if not jit["jit"]:
        print("numba not available: both paths are interpreted")
    print(f"{'kernel':<24}{'jit first (s)':>15}{'jit best (s)':>14}{'python (s)':>12}{'speedup':>10}")
    for name, j in jit["cases"].items():
        p = py["cases"][name]
        if not np.isclose(j["checksum"], p["checksum"], rtol=1e-9):
            raise SystemExit(f"{name}: paths disagree ({j['checksum']} vs {p['checksum']})")
        print(f"{name:<24}{j['first']:>15.4f}{j['best']:>14.5f}{p['best']:>12.4f}{p['best'] / j['best']:>9.1f}x")


if __name__ == "__main__":
    main()

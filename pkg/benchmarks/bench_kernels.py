"""Compare the numba and numpy kernel backends.

Times each hot kernel directly, then one full training epoch per backend in a
fresh interpreter (the backend is fixed at import time).

    python3 benchmarks/bench_kernels.py --nodes 2708 --features 1433
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from longae.kernels import _numba, _numpy

EPOCH_SNIPPET = """
import json, time
import numpy as np
from longae import BACKEND, TrainConfig, Trainer, build_adjacency
from longae.graph import FeatureMatrix
n, f, seed = {n}, {f}, {seed}
rng = np.random.default_rng(seed)
k = 4 * n
src, dst = rng.integers(0, n, k), rng.integers(0, n, k)
keep = src != dst
adj = build_adjacency(np.stack([src[keep], dst[keep]], axis=1), n)
feats = FeatureMatrix((rng.random((n, f)) < 0.01).astype(float)) if f else None
tr = Trainer(adj, feats, TrainConfig(task="lp", use_features=bool(f), epochs=1, seed=seed))
tr.epoch()
t0 = time.perf_counter()
tr.epoch()
print(json.dumps({{"backend": BACKEND, "epoch_s": time.perf_counter() - t0}}))
"""


def bench_kernels(rows, cols, repeat):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((rows, cols)).astype(np.float32)
    dy = rng.standard_normal((rows, cols)).astype(np.float32)
    t = (rng.random((rows, cols)) < 0.05).astype(np.float32)
    m = (rng.random((rows, cols)) < 0.9).astype(np.float32)
    y, inv = _numpy.mvn_forward(x, 1e-8)

    def adam(mod):
        p = rng.standard_normal((cols, 256)).astype(np.float32)
        g, mm, vv = np.ones_like(p), np.zeros_like(p), np.zeros_like(p)
        return lambda: mod.adam_update(p, g, mm, vv, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001)

    cases = {
        "mvn_forward": lambda mod: (lambda: mod.mvn_forward(x, 1e-8)),
        "mvn_backward": lambda mod: (lambda: mod.mvn_backward(dy, y, inv)),
        "masked_bce_rows": lambda mod: (lambda: mod.masked_bce_rows(t, x, m, 0.9, 16.1)),
        "adam_update": adam,
    }
    out = {}
    for name, make in cases.items():
        row = {}
        for label, mod in (("numpy", _numpy), ("numba", _numba)):
            fn = make(mod)
            fn()  # compile / warm up
            row[label] = min(timeit.repeat(fn, number=1, repeat=repeat))
        out[name] = row
    return out


def bench_epoch(n, f, seed):
    out = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, LONGAE_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET.format(n=n, f=f, seed=seed)],
                              env=env, capture_output=True, text=True, check=True)
        out[backend] = json.loads(proc.stdout.strip().splitlines()[-1])["epoch_s"]
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=4141)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--features", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-epoch", action="store_true")
    args = p.parse_args(argv)

    print(f"{'kernel':<18}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, row in bench_kernels(args.rows, args.cols, args.repeat).items():
        print(f"{name:<18}{row['numpy'] * 1e3:>10.3f}{row['numba'] * 1e3:>10.3f}"
              f"{row['numpy'] / row['numba']:>8.2f}x")
    if not args.skip_epoch:
        ep = bench_epoch(args.nodes, args.features, args.seed)
        print(f"epoch N={args.nodes} F={args.features}: numpy {ep['numpy']:.3f}s  "
              f"numba {ep['numba']:.3f}s  ({ep['numpy'] / ep['numba']:.2f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())

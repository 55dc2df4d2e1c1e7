"""Compare the numba and numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat 20]

Each kernel is timed on the same inputs under both backends after one
warm-up call (so numba compile time is excluded), and the outputs are
checked against each other. The end-to-end haystack run is timed in a
subprocess per backend, since the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from longctx import _kernels

HAYSTACK_SNIPPET = """
import time
from longctx import extension as ext, _kernels
from longctx.attention import HaystackConfig, MRoPE, haystack_curve
from longctx.rotary import make_basis
emb = MRoPE(ext.extend("mropepp", make_basis(64, 1e4), 4.0, 64))
cfg = HaystackConfig(1, 16, 64, trials=200, seed=0, embedding=emb)
haystack_curve([4], cfg)  # warm-up
t = time.perf_counter()
haystack_curve([1, 2, 4, 8, 16, 32, 64, 128], cfg)
print(_kernels.BACKEND, time.perf_counter() - t)
"""


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not _kernels.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    x = rng.standard_normal((4096, 128))
    phase = rng.uniform(0, 1e4, (4096, 64))
    n_items, per, d = 128, 16, 64
    keys = rng.standard_normal((n_items * per, d))
    q = rng.standard_normal(d)
    pos = rng.integers(0, 600, (n_items * per, 3))
    seg = np.repeat(np.arange(3), [8, 12, 12])
    owner = np.repeat(np.arange(n_items), per)
    angles = 1e4 ** (-np.arange(32) / 32)

    cases = {
        "rotate_pairs (4096 x 128)": (
            lambda: _kernels.rotate_pairs_numpy(x, phase),
            lambda: _kernels.rotate_pairs_numba(x, phase),
        ),
        "pooled_scores (2048 tok x 64)": (
            lambda: _kernels.pooled_scores_numpy(q, keys, pos, angles, seg, owner, n_items),
            lambda: _kernels.pooled_scores_numba(q, keys, pos, angles, seg, owner, n_items),
        ),
    }
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, (np_fn, nb_fn) in cases.items():
        diff = float(np.max(np.abs(np_fn() - nb_fn())))
        t_np, t_nb = best_of(np_fn, args.repeat), best_of(nb_fn, args.repeat)
        print(f"{name:32s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.2f} {diff:10.1e}")

    print("\nend-to-end haystack curve (8 item counts x 200 trials):")
    for flag in ("1", "0"):
        env = dict(os.environ, LONGCTX_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", HAYSTACK_SNIPPET], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:6s} {float(out[1]):.3f} s")


if __name__ == "__main__":
    main()

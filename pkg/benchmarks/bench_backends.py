"""Side-by-side timing of the numba and pure-NumPy kernel backends.

Runs the hot kernels (LSTM forward/backward, DTW table fill, order-stable
matmul) on matched random inputs across a range of sequence lengths and
prints the median wall time per call for each backend plus the speedup.

Usage: python benchmarks/bench_backends.py [--t-list 8,16,32,64] [--reps 50]
"""

import argparse
import statistics
import time

import numpy as np

from tapseq import kernels


def median_time(fn, args, reps):
    fn(*args)  # warm any lazy compilation
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_length(t, reps, rng, tables):
    d_in, hidden = 32, 32
    x = rng.standard_normal((t, d_in))
    wx = rng.standard_normal((4 * hidden, d_in)) * 0.1
    wh = rng.standard_normal((4 * hidden, hidden)) * 0.1
    b = rng.standard_normal(4 * hidden) * 0.1
    cost = rng.random((t, t))
    w = rng.standard_normal((64, 128))
    m = rng.standard_normal((128, t * t))

    rows = []
    for name, ktab in tables.items():
        hs, cs, gates = ktab["lstm_forward"](x, wx, wh, b)
        rows.append((name, {
            "lstm_forward": median_time(ktab["lstm_forward"], (x, wx, wh, b), reps),
            "lstm_backward": median_time(
                ktab["lstm_backward"], (np.ones_like(hs), x, wx, wh, hs, cs, gates), reps),
            "dtw_table": median_time(ktab["dtw_table"], (cost,), reps),
            "matmul": median_time(ktab["matmul"], (w, m), reps),
        }))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-list", default="8,16,32,64")
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tables = {"numpy": kernels.load_kernels("numpy")}
    try:
        tables["numba"] = kernels.load_kernels("numba")
    except ImportError:
        print("numba unavailable; timing the NumPy backend only")

    rng = np.random.default_rng(args.seed)
    kernel_names = ["lstm_forward", "lstm_backward", "dtw_table", "matmul"]
    print(f"{'T':>4} {'kernel':<14} " +
          " ".join(f"{n + ' (ms)':>12}" for n in tables) +
          ("  speedup" if len(tables) == 2 else ""))
    for t in (int(v) for v in args.t_list.replace(",", " ").split()):
        rows = dict(bench_length(t, args.reps, rng, tables))
        for kn in kernel_names:
            cells = [rows[b][kn] for b in tables]
            line = f"{t:>4} {kn:<14} " + " ".join(f"{c * 1e3:>12.4f}" for c in cells)
            if len(cells) == 2:
                line += f"  {cells[0] / cells[1]:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()

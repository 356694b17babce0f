#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure numpy fallback.

Run: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from fastslow._kernels import _compiled, fields, pure


def bench(label, fn, args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    opts = ap.parse_args()
    if _compiled is None:
        raise SystemExit("compiled backend is not built; nothing to compare")

    scale = 10 if opts.quick else 1
    lorenz = fields.lorenz_field(fields.lorenz_params())
    trig = fields.trig_field(fields.trig_params(aX=-1.0, bS=1.0))
    y_ref = np.array([[13.93, 20.06, 26.87]])

    cases = []

    n = 1_000_000 // scale
    rec = np.array([0, n], dtype=np.int64)
    cases.append(("frozen Lorenz RK4, 1 path x %.0e steps" % n,
                  (lorenz, [0.0], y_ref, 0.0, n, 1e-4, rec, 1, 0, False),
                  "frozen_batch"))

    n = 800
    members = 20_000 // scale
    y0 = np.tile([[0.2]], (members, 1))
    rec = np.arange(0, n + 1, 10, dtype=np.int64)
    cases.append(("frozen heat EM, %d replicas x %d steps" % (members, n),
                  (trig, [0.0], y0, 1.0, n, 1e-3, rec, 2, 0, False),
                  "frozen_batch"))

    n = 50_000 // scale
    members = 64
    x0 = np.zeros((members, 1))
    y0 = np.tile(y_ref, (members, 1))
    rec = np.array([0, n], dtype=np.int64)
    cases.append(("coupled Lorenz RK4, %d members x %.0e steps" % (members, n),
                  (lorenz, x0, y0, 0.2, 0.0, n, 4e-5, rec, 3, 0),
                  "coupled_batch"))

    n = 10_000 // scale
    cases.append(("shift pair Lorenz, 4 amps x %.0e steps" % n,
                  (lorenz, [0.0], y_ref[0], np.logspace(-3, -1, 4), n, 1e-4, 4,
                   [0, 1]),
                  "shift_sup_batch"))

    print(f"{'case':54s} {'compiled':>10s} {'pure':>10s} {'speedup':>8s}")
    for label, args, fname in cases:
        tc = bench(label, getattr(_compiled, fname), args)
        tp = bench(label, getattr(pure, fname), args, repeat=1)
        print(f"{label:54s} {tc:9.3f}s {tp:9.3f}s {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()

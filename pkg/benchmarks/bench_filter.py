"""Time the Gaussian filter on each available backend.

Usage::

    python benchmarks/bench_filter.py [--sigma 9] [--sizes 256 1024 2448x3264] [--workers 1 4]

Each size is WIDTHxHEIGHT or a single number for a square. Three-channel
float64 input; the best of ``--repeat`` runs is reported, together with the
speed-up of the compiled backend over the numpy one and a bit-identity check.
"""
import argparse
import time

import numpy as np

from difforensics import AnalysisParams, FloatImage, build_kernel, spatial_filter
from difforensics._backend import available_backends


def parse_size(text):
    w, _, h = text.lower().partition("x")
    return int(w), int(h or w)


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sigma", type=float, default=9.0)
    ap.add_argument("--sizes", nargs="+", default=["256", "1024", "2448x3264"])
    ap.add_argument("--workers", nargs="+", type=int, default=[1, 4])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    kernel = build_kernel(AnalysisParams(sigma=args.sigma))
    backends = available_backends()
    rng = np.random.default_rng(0)
    print(f"sigma={args.sigma:g} radius={kernel.radius} backends={','.join(backends)}")
    print(f"{'size':>11} {'workers':>7} " + " ".join(f"{b + ' s':>10}" for b in backends)
          + ("    speedup  identical" if len(backends) > 1 else ""))
    for size in args.sizes:
        w, h = parse_size(size)
        img = FloatImage(rng.random((h, w, 3)))
        for workers in args.workers:
            times, outs = [], []
            for be in backends:
                t, out = best_time(lambda: spatial_filter(img, kernel, workers, be), args.repeat)
                times.append(t)
                outs.append(out.data)
            row = f"{w:>5}x{h:<5} {workers:>7} " + " ".join(f"{t:>10.3f}" for t in times)
            if len(backends) > 1:
                same = all(np.array_equal(outs[0], o) for o in outs[1:])
                row += f"  {times[backends.index('python')] / times[0]:>8.2f}x  {same}"
            print(row, flush=True)


if __name__ == "__main__":
    main()

"""Compare the compiled and numpy density kernels.

    python3 benchmarks/bench_kernels.py [--points N] [--repeat R]

Prints per-kernel timings for both backends, the speedup and the largest
relative difference between their outputs, then an end-to-end timing of
the disk acceptance computation under each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from curvatura import kernels
from curvatura.engine import ComputeRequest, compute_intrinsic_volumes
from curvatura.field import eval_jet, parse
from curvatura.geometry import Domain


def _jets(n, count, seed=0):
    rng = np.random.default_rng(seed)
    terms = "+".join(f"sin({c:.3f}*x{i + 1}+{d:.3f})" for i, (c, d) in
                     enumerate(rng.uniform(0.5, 2.0, size=(n, 2))))
    expr = parse(terms + "+" + "*".join(f"x{i + 1}" for i in range(n)), n)
    return eval_jet(expr, rng.uniform(-1, 1, size=(count, n)), order=3)


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = [b for b in ("compiled", "python") if b in kernels.BACKENDS]
    if "compiled" not in backends:
        print("compiled backend not built; only the numpy backend is timed")
    print(f"{'kernel':<28}{'n':>3}" + "".join(f"{b + ' [s]':>16}" for b in backends)
          + f"{'speedup':>10}{'max rel diff':>15}")
    for n in (2, 3):
        jet = _jets(n, args.points)
        cases = [(f"divergence k={k}", lambda k=k: kernels.divergence_density(
                     jet.value, jet.grad, jet.hess, jet.third, 0.1, k)) for k in range(1, n + 1)]
        cases += [(f"boundary k={k}", lambda k=k: kernels.boundary_density(jet.grad, jet.hess, k))
                  for k in range(2, n + 1)]
        cases += [(f"nodal {name}", lambda v=v: kernels.nodal_density(jet.value, jet.grad, jet.hess, v))
                  for name, v in (("algebraic", kernels.ALGEBRAIC), ("arctan", kernels.ARCTAN),
                                  ("tanh", kernels.TANH), ("lipschitz", kernels.LIPSCHITZ))]
        for label, fn in cases:
            times, outs = [], []
            for b in backends:
                kernels.use_backend(b)
                t, out = _best(fn, args.repeat)
                times.append(t)
                outs.append(out)
            row = f"{label:<28}{n:>3}" + "".join(f"{t:>16.4f}" for t in times)
            if len(times) == 2:
                diff = np.max(np.abs(outs[0] - outs[1]) / np.maximum(np.abs(outs[1]), 1e-300))
                row += f"{times[1] / times[0]:>10.1f}{diff:>15.1e}"
            print(row)

    print()
    req = ComputeRequest(parse("x^2+y^2-1", 2), Domain.box([-2, -2], [2, 2]), 0.0, (0, 1, 2), "volume", 1024)
    for b in backends:
        kernels.use_backend(b)
        t, rep = _best(lambda: compute_intrinsic_volumes(req), 1)
        vals = ", ".join(f"{r.value:.6f}" for r in rep.results)
        print(f"disk res 1024, {b:<9}: {t:6.2f} s  ({vals})")
    kernels.use_backend(backends[0])


if __name__ == "__main__":
    main()

"""Time the compiled kernels against their plain-Python implementations.

    python benchmarks/bench_kernels.py [--walks N] [--length L] [--repeat R]

Both versions get identical inputs, and their outputs have to agree before
any timing is printed. Set ANTRW_DISABLE_NUMBA=1 to see the fallback alone.
"""

import argparse
import time

import numpy as np

from antrw import kernels
from antrw._accel import NUMBA_ENABLED, python_impl
from antrw.graph import generate


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def batch_case(spec, walks, length):
    """Many short fresh walks, the shape of every census experiment."""
    g = generate(spec)
    u = np.random.default_rng(1).random((walks, length))

    def call(kernel):
        def go():
            traj = np.zeros((walks, length + 1), dtype=np.int64)
            done = kernel(g.indptr, g.indices, g.slot_edge, g.slot_sign, g.num_edges,
                          g.origin if g.coords is not None else 0, 1.0, u, traj)
            return done, traj
        return go

    return call(kernels.walk_batch), call(python_impl(kernels.walk_batch)), walks * length


def trap_case(spec, walks, length):
    """Walks run until certified trapping (the trap_census inner loop)."""
    g = generate(spec)
    rng = np.random.default_rng(2)
    us = [rng.random(length) for _ in range(walks)]
    no_stop = np.zeros(g.num_vertices, dtype=np.bool_)
    empty = np.empty(0, dtype=np.int64)

    def call(kernel):
        def go():
            out = []
            for u in us:
                field = np.zeros(g.num_edges, dtype=np.int64)
                traj = np.empty(length + 1, dtype=np.int64)
                last = np.empty(g.num_vertices, dtype=np.int64)
                res = kernel(g.indptr, g.indices, g.slot_edge, g.slot_sign, field, 0, 1.0, u,
                             traj, last, no_stop, 1e-6, g.max_degree(), empty, empty)
                out.append((tuple(res), traj[:res[0] + 1].tolist()))
            return out
        return go

    fast, slow = call(kernels.walk), call(python_impl(kernels.walk))
    return fast, slow, None


def zline_case(walks, length):
    u = np.random.default_rng(3).random(walks * length)
    return ((lambda: kernels.zline_final(1.0, u)),
            (lambda: python_impl(kernels.zline_final)(1.0, u)), walks * length)


def _same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=200)
    ap.add_argument("--length", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba disabled: both columns time the Python implementation")
    cases = [(f"batch {s}", *batch_case(s, args.walks, args.length))
             for s in ("cycle:3", "torus:3x3", "zdball:2,9")]
    cases += [(f"trap {s}", *trap_case(s, args.walks // 4, 10 * args.length))
              for s in ("cycle:3", "complete:4")]
    cases.append(("zline", *zline_case(args.walks, args.length)))
    print(f"{'kernel':<22}{'steps':>10}{'numba s':>12}{'python s':>12}{'speedup':>10}")
    for name, fast, slow, steps in cases:
        fast()  # compile
        t_fast, out_fast = _best(fast, args.repeat)
        t_slow, out_slow = _best(slow, 1)
        if not _same(out_fast, out_slow):
            raise SystemExit(f"{name}: compiled and Python outputs differ")
        if steps is None:
            steps = sum(res[0] for res, _ in out_fast)
        print(f"{name:<22}{steps:>10}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}")


if __name__ == "__main__":
    main()

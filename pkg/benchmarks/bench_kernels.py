"""Compiled vs pure-Python kernel timings on real solver workloads.

Usage: python benchmarks/bench_kernels.py [--reps N] [--problems fef,ef,efk]

For each problem a batch of random scenes is turned into null-space bases,
then the two hot kernels (generator instantiation and template
Gauss-Jordan) are timed on both backends over the same inputs.  Outputs
are compared so a speedup is never reported for a kernel that disagrees.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from elimpose import kernels
from elimpose.solvers import compiled_problem, nullspace_parametrize
from elimpose.synth import random_scene


def _inputs(pid: str, count: int):
    cp = compiled_problem(pid)
    Ns = [nullspace_parametrize(pid, random_scene(pid, seed=s).correspondences).N for s in range(count)]
    return cp, Ns


def _time(fn, args_list, reps: int) -> float:
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        for a in args_list:
            fn(*a)
        best = min(best, time.perf_counter() - t0)
    return best / len(args_list)


def _action_block(A: np.ndarray, piv: np.ndarray, tpl) -> np.ndarray:
    """Rows whose pivot is a reducible column, restricted to the basis columns."""
    ne, nr = tpl.n_excessive, tpl.n_reducible
    rows = [r for r, c in enumerate(piv) if ne <= c < ne + nr]
    return A[rows, ne + nr :]


def bench(pid: str, reps: int = 5, count: int = 50) -> list:
    cp, Ns = _inputs(pid, count)
    impls = kernels.backends()
    rows = []
    coeffs = [cp.instantiate(N, impls["python"]) for N in Ns]
    Cs = [cp.fill(c) for c in coeffs]
    ref_inst = coeffs
    tpl = cp.template

    def reduced(impl, C):
        A = C.copy()
        piv = impl.gauss_jordan(A, 1e-12)
        return _action_block(A, piv, tpl)

    ref_gj = [reduced(impls["python"], C) for C in Cs]
    for name, impl in impls.items():
        t_inst = _time(lambda N: cp.instantiate(N, impl), [(N,) for N in Ns], reps)
        t_gj = _time(lambda C: impl.gauss_jordan(C.copy(), 1e-12), [(C,) for C in Cs], reps)
        err_inst = max(np.max(np.abs(cp.instantiate(N, impl) - r)) for N, r in zip(Ns, ref_inst))
        err_gj = 0.0
        for C, r in zip(Cs, ref_gj):
            B = reduced(impl, C)
            err_gj = max(err_gj, float(np.max(np.abs(B - r)) / max(1.0, np.max(np.abs(r)))))
        rows.append((pid, name, t_inst, t_gj, err_inst, err_gj))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--problems", default="fef,ef,efk")
    args = ap.parse_args(argv)
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(kernels.backends())}")
    print(f"{'problem':8} {'backend':9} {'instantiate us':>15} {'gauss_jordan us':>16} {'max diff':>11}")
    for pid in args.problems.split(","):
        rows = bench(pid.strip(), args.reps, args.count)
        base = {r[1]: r for r in rows}
        for p, name, ti, tg, ei, eg in rows:
            print(f"{p:8} {name:9} {ti * 1e6:15.1f} {tg * 1e6:16.1f} {max(ei, eg):11.2e}")
        if "compiled" in base:
            py, c = base["python"], base["compiled"]
            print(f"{'':8} {'speedup':9} {py[2] / c[2]:14.1f}x {py[3] / c[3]:15.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

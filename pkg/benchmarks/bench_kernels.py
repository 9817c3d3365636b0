"""Compiled kernels vs the pure-numpy fallback.

Each mode runs in its own interpreter because the JIT switch is read at
import time::

    python3 benchmarks/bench_kernels.py            # both modes, side by side
    python3 benchmarks/bench_kernels.py --worker   # current mode only (JSON)
"""
import json
import os
import subprocess
import sys
import time

import numpy as np


def _best(fn, repeat):
    fn()  # warm-up (compilation or cache load)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def worker():
    from pareto_flow import SolverConfig, builtin_problem, run_mog
    from pareto_flow import kernels
    from pareto_flow._jit import JIT_ENABLED
    from pareto_flow.convex_core import SubdifferentialSet, min_norm_packed, pack_groups

    rng = np.random.default_rng(0)
    dim = 8
    centers = rng.standard_normal((3, dim)) * 3
    groups = [[(SubdifferentialSet.box(c - 0.5, c + 0.5), 1.0)]
              for c in centers]
    packed = pack_groups(groups, dim, None)
    P2 = builtin_problem("example1")
    packed2 = pack_groups([[(b, 1.0)] for b in P2.subdifferentials(np.array([3.0, 2.0]))], 2, None)
    cfg = SolverConfig(h=1e-3, t_max=5.0)

    cases = {
        "wolfe_min_norm (3 boxes, d=8)": (lambda: min_norm_packed(packed), 20),
        "subgradient_powered (1e4 iters)": (
            lambda: kernels.subgradient_powered(*packed2.arrays, packed2.gens, 2.0, 0.1, 10_000), 5),
        "angular_argmin (1e5 angles)": (
            lambda: kernels.angular_argmin(*packed2.arrays, packed2.gens, 100_000), 5),
        "run_mog example1 (5000 steps)": (lambda: run_mog(P2, [3.0, 2.0], cfg), 3),
    }
    out = {"jit": JIT_ENABLED}
    for name, (fn, rep) in cases.items():
        out[name] = _best(fn, rep)
    print(json.dumps(out))


def _run(disable):
    env = dict(os.environ)
    if disable:
        env["PARETO_FLOW_DISABLE_JIT"] = "1"
    else:
        env.pop("PARETO_FLOW_DISABLE_JIT", None)
    res = subprocess.run([sys.executable, __file__, "--worker"], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    jit, py = _run(False), _run(True)
    print(f"{'case':36s} {'numba [s]':>12s} {'numpy [s]':>12s} {'speedup':>9s}")
    for k in jit:
        if k == "jit":
            continue
        print(f"{k:36s} {jit[k]:12.4g} {py[k]:12.4g} {py[k] / jit[k]:9.1f}")
    if not jit["jit"]:
        print("note: numba unavailable, both columns ran the fallback")


if __name__ == "__main__":
    if "--worker" in sys.argv:
        worker()
    else:
        main()

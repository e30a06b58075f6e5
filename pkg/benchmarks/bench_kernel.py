"""Compare the compiled and pure-Python Monte Carlo kernels.

Both backends sample the same compiled round graph from the same seed, so
besides timing them this script checks that their outputs agree exactly.

    python3 benchmarks/bench_kernel.py [--trials 300] [--repeat 2]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from qdebate import kernel
from qdebate.engine import DEFAULT_CAPS, compile_graph, explore
from qdebate.polytime import build_upower_verifier, build_uprime_verifier
from qdebate.strategies import certificate_strategy, silent

SCENARIOS = {
    "uprime n=15": lambda: (build_uprime_verifier(n=15), "1" * 15, silent("P1"), certificate_strategy("uprime", i=3, j=5)),
    "upower n=16": lambda: (build_upower_verifier(n=16), "1" * 16, certificate_strategy("upower", m=4), silent("P0")),
}


def best_of(fn, repeat: int) -> tuple[float, tuple]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--repeat", type=int, default=2)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    if kernel.compiled_simulate is None:
        print("compiled kernel not built; only the Python backend is available")
    print(f"{'scenario':<14}{'nodes':>8}{'python s':>11}{'cython s':>11}{'speedup':>9}  agree")
    for name, make in SCENARIOS.items():
        spec, w, p1, p0 = make()
        cg = compile_graph(explore(spec, w, p1, p0))
        call = (cg.offsets, cg.targets, cg.cumprob, 0, args.trials, args.seed, DEFAULT_CAPS.max_restarts, DEFAULT_CAPS.max_steps)
        t_py, out_py = best_of(lambda: kernel.python_simulate(*call), args.repeat)
        if kernel.compiled_simulate is None:
            print(f"{name:<14}{len(cg.offsets) - 1:>8}{t_py:>11.3f}{'-':>11}{'-':>9}  -")
            continue
        t_c, out_c = best_of(lambda: kernel.compiled_simulate(*call), args.repeat)
        agree = all(np.array_equal(a, b) for a, b in zip(out_py, out_c))
        print(f"{name:<14}{len(cg.offsets) - 1:>8}{t_py:>11.3f}{t_c:>11.3f}{t_py / t_c:>8.1f}x  {agree}")


if __name__ == "__main__":
    main()

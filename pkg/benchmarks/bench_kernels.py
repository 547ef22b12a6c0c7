"""Compare the compiled kernels with the numpy fallback.

Run: python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from unitary_synth import kernels
from unitary_synth.cost import stage_oplist
from unitary_synth.numerics import haar_random_unitary, make_rng
from unitary_synth.structure import assemble_structure

CASES = [
    ("n=3 stage, 12 layers", 3, [12, 3], None),
    ("n=4 stage, 48 layers", 4, [48, 12, 3], None),
    ("n=4 one layer + left factor", 4, [48, 12, 3], 1),
    ("n=5 stage, 204 layers", 5, [204, 48, 12, 3], None),
]


def _time(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    try:
        kernels.backend_module("compiled")
        backends = ["compiled", "python"]
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")
        backends = ["python"]
    rng = make_rng(0)
    print(f"{'case':32s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup")
    for label, n, counts, block in CASES:
        st = assemble_structure(n, None, counts).stages[0]
        ops = stage_oplist(st)
        u = haar_random_unitary(n, rng)
        left = None
        if block is not None:
            left = haar_random_unitary(n, rng)
            ops = ops[:block]
        params = rng.uniform(0, 2 * np.pi, 4 * len(ops))
        times = []
        for b in backends:
            times.append(_time(lambda b=b: kernels.circuit_cost(u, ops, params, kernels.FSUB, left=left, backend=b), args.repeat))
        speed = f"{times[1] / times[0]:8.1f}x" if len(times) == 2 else ""
        print(f"{label:32s} " + " ".join(f"{t * 1e3:10.3f}ms" for t in times) + f"  {speed}")


if __name__ == "__main__":
    main()

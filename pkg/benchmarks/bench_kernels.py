"""Compiled kernels vs the numpy/scipy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times the lattice draw (one coarse step of a path chunk) and the cyclic
solve on a batch of right-hand sides, checks that both backends agree, and
prints one line per case.
"""
import argparse
import timeit

import numpy as np

from stochcurve._backend import get_kernels
from stochcurve.assembly import CyclicTridiagonal
from stochcurve.linalg import CyclicFactor
from stochcurve.noise import path_key


def lattice_case(backend, S=8, L=259, p=10):
    k = get_kernels(backend)
    keys = np.array([path_key(2024, s) for s in range(S)], dtype=np.uint64)
    modes = np.arange(1, L + 1, dtype=np.int64)
    out = np.empty((S, L))

    def run():
        k.lattice_sums(keys, modes, 0, p, out)
        return out

    return run


def solve_case(backend, n=4096, m=8):
    rng = np.random.default_rng(0)
    off = -rng.uniform(0.1, 1.0, n)
    diag = np.abs(off) + np.roll(np.abs(off), 1) + rng.uniform(0.1, 1.0, n)
    A = CyclicTridiagonal(diag, off)
    B = rng.standard_normal((m, n))

    def run():
        return CyclicFactor(A, backend).solve_rows(B)

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        get_kernels("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    cases = {
        "lattice 8x259 p=10": lattice_case,
        "cyclic solve n=4096 m=8": solve_case,
    }
    print(f"{'case':28s} {'compiled':>12s} {'python':>12s} {'speedup':>8s}")
    for name, make in cases.items():
        fc, fp = make("compiled"), make("python")
        same = np.allclose(fc(), fp(), rtol=1e-12, atol=1e-12)
        tc = min(timeit.repeat(fc, number=10, repeat=args.repeat)) / 10
        tp = min(timeit.repeat(fp, number=10, repeat=args.repeat)) / 10
        flag = "" if same else "  MISMATCH"
        print(f"{name:28s} {tc * 1e3:10.3f}ms {tp * 1e3:10.3f}ms {tp / tc:7.1f}x{flag}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

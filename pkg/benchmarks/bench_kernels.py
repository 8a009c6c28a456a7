"""Time the compiled and pure-Python kernels on representative inputs.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  Backends that
are not importable are skipped.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from subwave1d.kernels import backends


def _branch_input(nodes: int):
    t = (np.arange(nodes) + 0.5) * 2 * np.pi / nodes
    z = 1.0 + np.exp(1j * t) / 2.0
    f = 4.0 * (1 + 1.38j) ** 2 * (1 - 1.42j) ** 2 * np.abs(z) ** 2 + 2.25 * 0.3
    return np.sqrt(f), complex(np.sqrt(f[0]))


def _wilson_input(K: int, N: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N))
    b = rng.normal(size=(K, N)) + 1j * rng.normal(size=(K, N))
    return a, b


def run(repeat: int = 5) -> list[tuple[str, str, float]]:
    cases = {
        "continue_branch(4096)": (lambda m, x=_branch_input(4096): m.continue_branch(*x)),
        "continue_branch(65536)": (lambda m, x=_branch_input(65536): m.continue_branch(*x)),
        "wilson_sum(512x2)": (lambda m, x=_wilson_input(512, 2): m.wilson_sum(*x)),
        "wilson_sum(4096x40)": (lambda m, x=_wilson_input(4096, 40): m.wilson_sum(*x)),
    }
    rows = []
    for case, fn in cases.items():
        for name, mod in backends().items():
            number = 10
            best = min(timeit.repeat(lambda: fn(mod), number=number, repeat=repeat)) / number
            rows.append((case, name, best))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rows = run(args.repeat)
    print(f"{'case':<26}{'backend':<10}{'time [us]':>12}")
    base = {}
    for case, name, t in rows:
        base.setdefault(case, {})[name] = t
        print(f"{case:<26}{name:<10}{t * 1e6:>12.1f}")
    for case, times in base.items():
        if "cython" in times:
            print(f"{case}: speed-up {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()

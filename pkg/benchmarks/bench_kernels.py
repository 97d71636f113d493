"""Time the compiled kernels against the NumPy fallback.

Run with ``python benchmarks/bench_kernels.py``. Both backends are imported
directly, so the environment switch is not needed.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from composite_rb import _kernels_py
from composite_rb.su2 import pauli_axis_unitary

try:
    from composite_rb import _kernels
except ImportError:  # extension not built
    _kernels = None


def _chain_case(n, rng):
    table = np.array([pauli_axis_unitary(rng.uniform(0, 2 * math.pi), rng.normal(size=3)) for _ in range(32)])
    order = rng.integers(0, len(table), size=n).astype(np.intp)
    return table, order


def _drive_case():
    omega = 2 * math.pi * 50e3
    amps = np.array([omega / 2, omega, omega / 2])
    freqs = np.array([0.0, 90 * omega, 180 * omega])
    phases = np.array([0.0, 0.3, 1.1])
    return amps, freqs, phases, 0.01 * omega, math.pi / omega


def bench(repeat: int = 5, chain_len: int = 100_000, steps: int = 100_000) -> list[tuple[str, str, float]]:
    rng = np.random.default_rng(0)
    table, order = _chain_case(chain_len, rng)
    amps, freqs, phases, hz, T = _drive_case()
    backends = [("python", _kernels_py)] + ([("cython", _kernels)] if _kernels is not None else [])
    rows = []
    for name, mod in backends:
        t = min(timeit.repeat(lambda: mod.chain_product(table, order), number=1, repeat=repeat))
        rows.append((f"chain_product n={chain_len}", name, t))
        t = min(timeit.repeat(lambda: mod.drive_product(amps, freqs, phases, hz, T, steps), number=1, repeat=repeat))
        rows.append((f"drive_product steps={steps}", name, t))
    if _kernels is not None:
        d1 = np.abs(_kernels.chain_product(table, order) - _kernels_py.chain_product(table, order)).max()
        d2 = np.abs(
            _kernels.drive_product(amps, freqs, phases, hz, T, steps)
            - _kernels_py.drive_product(amps, freqs, phases, hz, T, steps)
        ).max()
        print(f"backend agreement: chain {d1:.1e}, drive {d2:.1e}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--chain-len", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=100_000)
    a = ap.parse_args()
    rows = bench(a.repeat, a.chain_len, a.steps)
    best = {}
    for case, name, t in rows:
        best.setdefault(case, {})[name] = t
    print(f"{'kernel':<28} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for case, times in best.items():
        py, cy = times.get("python"), times.get("cython")
        cy_s = f"{cy * 1e3:12.2f}" if cy is not None else f"{'n/a':>12}"
        sp = f"{py / cy:8.1f}" if cy else f"{'-':>8}"
        print(f"{case:<28} {py * 1e3:12.2f} {cy_s} {sp}")


if __name__ == "__main__":
    main()

"""Time the oracle kernels on both back ends.

    python3 benchmarks/bench_kernels.py [--repeat N]

The first numba call includes JIT compilation (or a cache load) and is
reported separately.  Both back ends must agree on every case.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from quasik import _kernels
from quasik.formula import parse_formula
from quasik.kripke import QdpSet, _frames, atoms_of, brute_force_sat, compile_program

CASES = [
    ("<>p & [][]~p", "1->2"),            # unsatisfiable: scans every frame
    ("<>p & []<>~p & [][]p", ""),         # unsatisfiable in K
    ("<>(p & <>q) & [][]~q & [](p|q)", "2->3"),
    ("<>p & <>q & <>r & [](~p|~q)", ""),
    ("<><>p & [][][]~p", "2->3"),
]


def _best(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_inputs(f, qdps, worlds):
    props = atoms_of(f)
    ops, a0, a1 = compile_program(f, props)
    _, succ = _frames(worlds, tuple(qdps.pairs()))
    masks, valid = _kernels.atom_masks(len(props), worlds)
    return ops, a0, a1, succ, masks, valid


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--worlds", type=int, default=4)
    a = ap.parse_args(argv)
    if not _kernels._HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    warm = kernel_inputs(parse_formula("<>p"), QdpSet(), 2)
    t0 = time.perf_counter()
    _kernels.first_satisfying(*warm, use_numba=True)
    print(f"numba first call (compile or cache load): {time.perf_counter() - t0:.3f}s\n")

    print(f"{'case':42s} {'frames':>6s} {'kernel np':>10s} {'kernel nb':>10s} "
          f"{'oracle np':>10s} {'oracle nb':>10s} {'speedup':>8s}")
    for text, qs in CASES:
        f, qd = parse_formula(text), QdpSet.parse(qs)
        args = kernel_inputs(f, qd, a.worlds)
        r_np = _kernels.first_satisfying(*args, use_numba=False)
        r_nb = _kernels.first_satisfying(*args, use_numba=True)
        assert r_np == r_nb, (text, r_np, r_nb)
        k_np = _best(lambda: _kernels.first_satisfying(*args, use_numba=False), a.repeat)
        k_nb = _best(lambda: _kernels.first_satisfying(*args, use_numba=True), a.repeat)
        o_np = _best(lambda: brute_force_sat(f, qd, a.worlds, use_numba=False), a.repeat)
        o_nb = _best(lambda: brute_force_sat(f, qd, a.worlds, use_numba=True), a.repeat)
        label = f"{text} [{qs}]" if qs else text
        print(f"{label:42s} {len(args[3]):6d} {k_np * 1e3:8.2f}ms {k_nb * 1e3:8.2f}ms "
              f"{o_np * 1e3:8.2f}ms {o_nb * 1e3:8.2f}ms {k_np / max(k_nb, 1e-9):7.1f}x")


if __name__ == "__main__":
    main()

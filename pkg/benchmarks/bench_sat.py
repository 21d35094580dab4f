"""Compare the compiled DPLL kernel with the pure-Python fallback.

Usage: python3 benchmarks/bench_sat.py [--repeat N]

Two workloads are timed on both kernels: random 3-CNF near the
satisfiability threshold and small pigeonhole instances.  A third
measurement runs the random-program query workload end to end in a
subprocess per backend, selected through ``GUARDFLOW_PURE``.
"""
import argparse
import os
import random
import subprocess
import sys
import timeit
from itertools import combinations

from guardflow import _sat_py

try:
    from guardflow import _sat_ext
except ImportError:  # the extension was not built
    _sat_ext = None

BUDGET = 10_000_000


def random_3cnf(rng, nvars, nclauses):
    return [[rng.choice([v, -v]) for v in rng.sample(range(1, nvars + 1), 3)] for _ in range(nclauses)]


def pigeonhole(holes):
    var = lambda i, j: i * holes + j + 1
    clauses = [[var(i, j) for j in range(holes)] for i in range(holes + 1)]
    for j in range(holes):
        for a, b in combinations(range(holes + 1), 2):
            clauses.append([-var(a, j), -var(b, j)])
    return (holes + 1) * holes, clauses


def workloads():
    rng = random.Random(7)
    cnf = [(50, random_3cnf(rng, 50, 213)) for _ in range(40)]
    php = [pigeonhole(h) for h in (5, 6, 7)]
    return {"random 3-CNF (40 x 50 vars)": cnf, "pigeonhole 5..7": php}


def time_kernel(dpll, instances, repeat):
    def go():
        for n, clauses in instances:
            dpll(n, clauses, BUDGET)

    return min(timeit.repeat(go, number=1, repeat=repeat))


END_TO_END = """
import time
from guardflow.oracle import enumerate_runs
from guardflow.pipeline import analyze_program
from guardflow.query import QueryEngine
from guardflow.randprog import corpus
progs = [p for _, p in corpus(100, seed=0)]
start = time.perf_counter()
for p in progs:
    q = QueryEngine(analyze_program(p))
    q.dependence_pairs()
    q.check_double_free()
print(time.perf_counter() - start)
"""


def end_to_end(pure):
    env = dict(os.environ, GUARDFLOW_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _sat_ext is None:
        print("compiled kernel not built; only the Python kernel is available")
    print(f"{'workload':32} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, inst in workloads().items():
        py = time_kernel(_sat_py.dpll, inst, args.repeat)
        if _sat_ext is None:
            print(f"{name:32} {py:10.4f}")
            continue
        cy = time_kernel(_sat_ext.dpll, inst, args.repeat)
        print(f"{name:32} {py:10.4f} {cy:10.4f} {py / cy:7.1f}x")
    py = end_to_end(pure=True)
    cy = end_to_end(pure=False)
    print(f"{'queries on 100 random programs':32} {py:10.4f} {cy:10.4f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()

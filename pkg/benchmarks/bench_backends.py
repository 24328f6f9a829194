"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the same workloads in two subprocesses, one with RESPENV_NUMBA=1 and one
with RESPENV_NUMBA=0, verifies both produce the same numbers, then prints a
timing table. Compilation happens during warm-up, so the timings reflect
steady-state cost.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import sys
import time

import numpy as np

import respenv as re
from respenv import backend_name

repeats = int(sys.argv[1])
out = {"backend": backend_name(), "results": {}, "timings": {}}

model = re.generate_model(p=20, rho=0.0, seed=0)
data = re.generate_data(model, n=200, seed=1)
prep = re.prepare_dataset(data.X, data.Y)
design = re.EnvelopeDesign.from_dataset(prep)

design.fit(2, 0.1)  # warm-up (and compile, on the numba path)
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    fit = design.fit(2, 0.1)
    times.append(time.perf_counter() - t0)
out["results"]["fit objective"] = fit.diagnostics.objective_value
out["timings"]["single fit (n=200, p=20, u=2)"] = min(times)

wide_model = re.generate_model(p=400, rho=0.0, seed=2)
wide = re.generate_data(wide_model, n=100, seed=3)
wide_design = re.EnvelopeDesign.from_dataset(re.prepare_dataset(wide.X, wide.Y))
wide_design.fit(2, 0.5)
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    wfit = wide_design.fit(2, 0.5)
    times.append(time.perf_counter() - t0)
out["results"]["wide fit objective"] = wfit.diagnostics.objective_value
out["timings"]["single fit (n=100, p=400, u=2)"] = min(times)

grid = re.scaled_lambda_grid(prep, count=50)
t0 = time.perf_counter()
cv = re.kfold_cv(data, [0, 1, 2, 3], grid, K=5, seed=0)
out["timings"]["5-fold CV, 4 u values, 50 lambdas"] = time.perf_counter() - t0
out["results"]["cv best lambda"] = cv.best_lambda
out["results"]["cv best u"] = cv.best_u

print(json.dumps(out))
"""


def run_backend(flag: str, repeats: int) -> dict:
    env = dict(os.environ, RESPENV_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, str(repeats)],
        env=env, capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"worker failed for RESPENV_NUMBA={flag}:\n{proc.stderr}")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing repeats per workload (best is reported)")
    args = parser.parse_args()

    compiled = run_backend("1", args.repeats)
    fallback = run_backend("0", args.repeats)
    assert compiled["backend"] == "numba"
    assert fallback["backend"] == "numpy"

    for key, value in compiled["results"].items():
        other = fallback["results"][key]
        if abs(value - other) > 1e-9 * max(1.0, abs(value)):
            raise AssertionError(
                f"backends disagree on {key}: {value!r} vs {other!r}"
            )
    print("correctness: numba and numpy backends agree on all workloads\n")

    width = max(len(name) for name in compiled["timings"])
    print(f"{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name, t_numba in compiled["timings"].items():
        t_numpy = fallback["timings"][name]
        print(f"{name:<{width}}  {t_numba * 1e3:>8.2f}ms  {t_numpy * 1e3:>8.2f}ms  "
              f"{t_numpy / t_numba:>7.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())

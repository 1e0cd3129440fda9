"""Time the observer kernels with and without numba.

Each backend runs in its own interpreter because ``DEPTHPOSE_NUMBA`` is read
at import time. Usage::

    python benchmarks/bench_kernels.py [--steps 20000] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from depthpose import _accel, kernels

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
s, _ = kernels.straight_line_features(5.0, 5.0, 50.0, 0.1, 0.05, steps)
u = np.tile([0.1, 0.0], (steps, 1))
args = (s, u, 0.05, s[0, 0], s[0, 1], 1 / 51.0, 2.5, 0.0, 2.5, 120.0, 0.01, 10.0)

t0 = time.perf_counter()
out = kernels.observer_trace(*args, False)
first = time.perf_counter() - t0
best = {}
for rk4 in (False, True):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernels.observer_trace(*args, rk4)
        times.append(time.perf_counter() - t0)
    best["rk4" if rk4 else "euler"] = min(times)
print(json.dumps({"numba": _accel.USE_NUMBA, "first_call_s": first, "best_s": best,
                  "final_chi": float(out[-1, 2])}))
"""


def bench(use_numba: bool, steps: int, repeat: int) -> dict:
    env = dict(os.environ, DEPTHPOSE_NUMBA="1" if use_numba else "0")
    proc = subprocess.run([sys.executable, "-c", CHILD, str(steps), str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    a = p.parse_args()
    jit = bench(True, a.steps, a.repeat)
    ref = bench(False, a.steps, a.repeat)
    print(f"observer_trace, {a.steps} steps, best of {a.repeat}")
    for name in ("euler", "rk4"):
        tj, tr = jit["best_s"][name], ref["best_s"][name]
        print(f"  {name:5s}  numba {tj * 1e3:8.2f} ms   numpy/python {tr * 1e3:8.2f} ms   x{tr / tj:6.1f}")
    print(f"  numba first call (includes compile or cache load): {jit['first_call_s']:.2f} s")
    # both backends execute the same source, so results agree to rounding
    print(f"  final chi agreement: {abs(jit['final_chi'] - ref['final_chi']):.3e}")


if __name__ == "__main__":
    main()

"""Wall-clock comparison of the compiled and pure-Python integration kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from sitfeedback import kernels
from sitfeedback.config import preset
from sitfeedback.integrator import IntegratorConfig, integrate


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cases = []
    for name in ("fig1", "fig2"):
        cfg = preset(name)
        cases.append((f"{name} rk45 12000 d", cfg, cfg.integrator))
    cfg = preset("fig1")
    cases.append(("fig1 rk4 dt=0.05 2000 d", cfg, IntegratorConfig(method="rk4", dt_init=0.05, t_max=2000.0)))

    backends = sorted(kernels.BACKENDS)
    print(f"{'case':<26}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for label, cfg, integ in cases:
        row, results = {}, {}
        for b in backends:
            row[b], results[b] = best_of(
                lambda: integrate(cfg.params, cfg.law, cfg.initial_state(), integ, backend=b), args.repeat
            )
        if len(backends) > 1:
            gap = np.max(np.abs(results["compiled"].states - results["python"].states))
            speed = f"{row['python'] / row['compiled']:>9.1f}x"
        else:
            gap, speed = 0.0, "n/a"
        print(f"{label:<26}" + "".join(f"{row[b]:>11.4f}s" for b in backends) + f"{speed:>10}"
              f"   max |diff| {gap:.2e}")


if __name__ == "__main__":
    main()

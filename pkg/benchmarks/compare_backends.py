#!/usr/bin/env python3
"""Compare the compiled (numba) and pure-Python kernel backends.

The backend is chosen at import time from the WOLBASIM_NUMBA environment
variable, so each backend is timed in its own subprocess.  Two workloads:

  * closed-loop: the default adult-release scenario (12 coupled states,
    adaptive steps over 100 time units) — the package's hot path;
  * plant-only: the open-loop 4-state population model over the same span.

Usage:
    python benchmarks/compare_backends.py [--t-end 100] [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _time_workloads(t_end: float, repeats: int) -> dict:
    import dataclasses

    from wolbasim import (
        KernelField,
        ModelParams,
        SolverConfig,
        default_scenarios,
        disease_free,
        integrate,
        run_scenario,
    )
    from wolbasim import kernels

    kernels.warmup()
    adult, _ = default_scenarios()
    adult = dataclasses.replace(adult, t_end=float(t_end))
    p = ModelParams(gamma_U=0.79365, gamma_W=0.99207, R0_U=45.0, R0_W=34.2)
    plant = KernelField(kernels.FIELD_PLANT, kernels.pack_plant(*p.as_tuple()))
    x0 = disease_free(p).as_array() + 0.05

    def best_of(fn):
        times = []
        fn()  # warm
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return {"best_ms": min(times) * 1e3, "mean_ms": sum(times) / len(times) * 1e3}

    return {
        "closed_loop": best_of(lambda: run_scenario(adult)),
        "plant_only": best_of(
            lambda: integrate(plant, x0, (0.0, float(t_end)), SolverConfig())
        ),
    }


def _worker(args) -> int:
    from wolbasim import NUMBA_ENABLED

    results = _time_workloads(args.t_end, args.repeats)
    print(json.dumps({"numba": NUMBA_ENABLED, "results": results}))
    return 0


def _launch(flag: str, args) -> dict:
    env = dict(os.environ, WOLBASIM_NUMBA=flag)
    proc = subprocess.run(
        [
            sys.executable,
            os.path.abspath(__file__),
            "--worker",
            "--t-end",
            str(args.t_end),
            "--repeats",
            str(args.repeats),
        ],
        env=env,
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"worker with WOLBASIM_NUMBA={flag} failed")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=100.0, help="scenario horizon")
    parser.add_argument("--repeats", type=int, default=5, help="timed repetitions")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()
    if args.worker:
        return _worker(args)

    print(f"timing both backends (t_end={args.t_end:g}, {args.repeats} repeats) ...")
    compiled = _launch("1", args)
    fallback = _launch("0", args)
    if not compiled["numba"]:
        print("note: numba unavailable; both rows ran the pure-Python backend")

    header = f"{'workload':<14} {'compiled best':>14} {'python best':>14} {'speedup':>9}"
    print()
    print(header)
    print("-" * len(header))
    for name in ("closed_loop", "plant_only"):
        c = compiled["results"][name]["best_ms"]
        p = fallback["results"][name]["best_ms"]
        print(f"{name:<14} {c:>11.2f} ms {p:>11.2f} ms {p / c:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Benchmark the compiled electrical kernel against the pure-Python twin.

Runs the same substep workload through both backends, reports steps/s and
the speedup, and confirms the two produce identical float64 streams. Also
times a full scenario through each backend.

Usage:
    python benchmarks/bench_kernel.py [--steps N] [--scenario PATH]
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rowsim import kernel  # noqa: E402
from rowsim.engine import simulate  # noqa: E402
from rowsim.scenario import load_scenario  # noqa: E402


def bench_raw(n_steps: int):
    dt = 10e-6
    r_eq, c = 10e-3 / 11, 2.1e-3
    params = np.zeros(kernel.N_PARAMS)
    params[kernel.P_DT] = dt
    params[kernel.P_VNOM] = 800.0
    params[kernel.P_INVC] = 1.0 / c
    params[kernel.P_EDROOP] = kernel.droop_relaxation(r_eq, c, dt)
    params[kernel.P_REQ] = r_eq
    params[kernel.P_VENG] = 0.4
    params[kernel.P_NDELAY] = 8
    params[kernel.P_SLEWSTEP] = 11 * 2e6 * dt
    params[kernel.P_PGATE] = 440.0
    params[kernel.P_SOCMIN] = 0.5
    params[kernel.P_SOCMAX] = 0.8
    params[kernel.P_INVE36] = 1.0 / (6.6 * 3600.0)
    params[kernel.P_THALPHA] = dt / 90.0
    params[kernel.P_PSST] = 1000.0
    params[kernel.P_PCHGTGT] = 20.0
    params[kernel.P_CHGSTEP] = 50.0 * dt
    params[kernel.P_BLOWUPV] = 400.0
    params[kernel.P_DRUON] = 1.0
    params[kernel.P_CHGREF] = 1300.0

    t_ms = np.arange(n_steps // 100) * 1e-3
    load = 1000.0 + 250.0 * np.clip((t_ms - 0.2) / 0.2, 0, 1)
    load = np.ascontiguousarray(np.repeat(load, 100))

    results = {}
    finals = {}
    for name, adv in sorted(kernel.available_backends().items()):
        st = kernel.new_state()
        st[kernel.SOC] = 0.65
        acc = kernel.new_acc(800.0)
        cap = np.zeros((len(load) // 100 + 2, kernel.CAPTURE_CHANNELS))
        t0 = time.perf_counter()
        status, done, _ = adv(st, acc, params, load, len(load), 99, 100, cap)
        elapsed = time.perf_counter() - t0
        assert status == 0, f"{name} aborted"
        results[name] = done / elapsed
        finals[name] = st.copy()
    return results, finals


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2_000_000)
    ap.add_argument(
        "--scenario",
        default=os.path.join(os.path.dirname(__file__), "..", "scenarios",
                             "canonical_burst.json"),
    )
    args = ap.parse_args()

    print(f"selected backend: {kernel.BACKEND}")
    print(f"raw kernel, {args.steps:,} substeps of the burst-edge workload:")
    rates, finals = bench_raw(args.steps)
    for name, rate in rates.items():
        print(f"  {name:<9} {rate / 1e6:7.2f} M substeps/s "
              f"({rate * 10e-6:6.1f}x realtime at 10 us steps)")
    if len(rates) == 2:
        print(f"  speedup   {rates['compiled'] / rates['python']:.1f}x")
        match = np.array_equal(finals["compiled"], finals["python"])
        print(f"  final states identical: {match}")

    scn = load_scenario(args.scenario)
    print(f"\nfull scenario '{scn.name}' ({scn.horizon:.0f} s horizon):")
    for name in sorted(kernel.available_backends()):
        t0 = time.perf_counter()
        log = simulate(scn, backend=name)
        elapsed = time.perf_counter() - t0
        print(f"  {name:<9} {elapsed:7.2f} s wall "
              f"({scn.horizon / elapsed:6.1f}x realtime), "
              f"aborted={log.aborted}")


if __name__ == "__main__":
    main()

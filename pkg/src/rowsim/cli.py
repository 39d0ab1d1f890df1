"""Command-line entry point.

Subcommands:
    run     simulate a scenario, write waveform CSV + events + report
    verify  adjudicate an existing waveform CSV against the contract
    size    evaluate the design-synthesis inequalities for an envelope
    sweep   run a scenario template over a parameter grid

Exit codes: 0 = pass, 1 = contract fail or simulation error, 2 = invalid
input. Output root defaults to $ROWSIM_OUT or the current directory.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

from . import engine, kernel
from .bus import read_waveform_csv
from .flisr import PodConfig, oversubscription_check
from .scenario import ScenarioError, load_scenario, parse_scenario
from .sizing import build_report
from .verifier import ContractLimits, verify


def _out_dir(arg: str | None, default_name: str) -> str:
    root = arg or os.environ.get("ROWSIM_OUT") or "."
    path = os.path.join(root, default_name) if arg is None else arg
    os.makedirs(path, exist_ok=True)
    return path


def _write_report(report, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.txt"), "w") as f:
        f.write(report.to_text())
    with open(os.path.join(out_dir, "report.json"), "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args.out, scn.name)
    log = engine.simulate(scn, backend=args.backend)
    log.write_csv(os.path.join(out, "waveform.csv"))
    log.write_window_csvs(out)
    log.write_events_json(os.path.join(out, "events.json"))
    report = verify(log, scn.limits)
    _write_report(report, out)
    print(report.to_text(), end="")
    if log.aborted:
        print(f"simulation aborted: {log.abort_reason}", file=sys.stderr)
    print(f"artifacts in {out} (backend: {kernel.BACKEND})")
    return report.exit_code


def cmd_verify(args) -> int:
    try:
        log = read_waveform_csv(args.waveform)
    except FileNotFoundError:
        print(f"error: waveform not found: {args.waveform}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    limits = ContractLimits()
    if args.scenario:
        try:
            limits = load_scenario(args.scenario).limits
        except (FileNotFoundError, ScenarioError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if args.meta:
        with open(args.meta) as f:
            log.meta.update(json.load(f).get("meta", {}))
    report = verify(log, limits)
    print(report.to_text(), end="")
    if args.out:
        _write_report(report, _out_dir(args.out, "verify"))
    return report.exit_code


def cmd_size(args) -> int:
    try:
        scn = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rep = build_report(
        scn.envelope, scn.shelf,
        v_nom=scn.bus.v_nom, latency=scn.bus.dru_latency,
        t_bridge=scn.pod.t_bridge, lifecycle=args.lifecycle,
    )
    d = rep.to_dict()
    print(f"bank count          : {d['n_required']}")
    print(f"bus capacitance     : {d['c_bus_required_f'] * 1e3:.3f} mF")
    print(f"composite pole      : {d['pole_rad_s']:.4g} rad/s")
    print(f"predicted recovery  : {d['predicted_recovery_s'] * 1e3:.4g} ms")
    print(f"bridge energy       : {d['bridge_energy_kwh']:.4g} kWh")
    for gate, margin in d["gate_margins"].items():
        print(f"gate margin {gate:<8}: {margin:.3f}")
    print(f"design {'PASSES' if rep.passing else 'FAILS'} all gates")
    if args.out:
        out = _out_dir(args.out, "sizing")
        with open(os.path.join(out, "sizing.json"), "w") as f:
            json.dump(d, f, indent=2, sort_keys=True)
            f.write("\n")
    return 0 if rep.passing else 1


def _set_path(doc: dict, dotted: str, value):
    parts = dotted.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def cmd_sweep(args) -> int:
    try:
        with open(args.scenario) as f:
            template = json.load(f)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: template parse failure: {exc}", file=sys.stderr)
        return 2
    grid: list[tuple[str, list]] = []
    for spec in args.param or []:
        if "=" not in spec:
            print(f"error: bad --param {spec!r}; use path=v1,v2,...", file=sys.stderr)
            return 2
        path, vals = spec.split("=", 1)
        grid.append((path, vals.split(",")))
    cells = [[]]
    for path, vals in grid:
        cells = [c + [(path, v)] for c in cells for v in vals]
    if not grid:
        cells = []

    out = _out_dir(args.out, "sweep")
    rows = []
    header = [p for p, _ in grid] + [
        "overall", "depth_pct", "osc_power", "oversub_ratio",
    ]
    for cell in cells:
        doc = copy.deepcopy(template)
        for path, v in cell:
            try:
                _set_path(doc, path, json.loads(v))
            except json.JSONDecodeError:
                _set_path(doc, path, v)
        row = [str(v) for _, v in cell]
        try:
            scn = parse_scenario(doc, name="sweep_cell")
            pod = scn.pod
            ratio = oversubscription_check(
                PodConfig(p_mv=pod.p_mv, n_rows=pod.n_rows, p_row=pod.p_row,
                          u=pod.u, r=pod.r, l=pod.l)
            )[2]
            log = engine.simulate(scn, backend=args.backend)
            report = verify(log, scn.limits)
            tr = report.check("transient")
            osc = report.check("oscillation")
            row += [
                "pass" if report.overall else "FAIL",
                f"{tr.measured * 100:.3f}",
                f"{osc.measured:.3g}",
                f"{ratio:.3f}",
            ]
        except Exception as exc:  # noqa: BLE001 - per-cell failures do not stop the sweep
            row += [f"error: {exc}"] + [""] * (len(header) - len(cell) - 1)
        rows.append(row)
    table = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(table) + "\n"
    print(text, end="")
    with open(os.path.join(out, "sweep.csv"), "w") as f:
        f.write(text)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="rowsim", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="simulate a scenario and verify the contract")
    p.add_argument("scenario")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--backend", default="auto", choices=["auto", "compiled", "python"])
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="verify an existing waveform CSV")
    p.add_argument("waveform")
    p.add_argument("--scenario", default=None, help="take limits from this scenario")
    p.add_argument("--meta", default=None, help="events.json with run metadata")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("size", help="design-synthesis report for a scenario envelope")
    p.add_argument("scenario")
    p.add_argument("--lifecycle", type=float, default=1.25)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(fn=cmd_size)

    p = sub.add_parser("sweep", help="grid sweep over scenario overrides")
    p.add_argument("scenario")
    p.add_argument("--param", action="append", help="dotted.path=v1,v2,...")
    p.add_argument("-o", "--out", default=None)
    p.add_argument("--backend", default="auto", choices=["auto", "compiled", "python"])
    p.set_defaults(fn=cmd_sweep)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

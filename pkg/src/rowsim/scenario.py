"""Scenario files: structured JSON with explicit unit suffixes.

Every physical quantity in a scenario file is a string carrying its unit
("2.1 mF", "75 us", "1 MW"); bare numbers are allowed only for fractions,
counts and seeds. Validation is fail-loud and complete: every violation in
the file is collected and reported together with its field path and, for
design-envelope fields, the violated bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .bus import MAX_ELECTRICAL_DT, BusParams
from .dru import DruBankState, ShelfSpec
from .flisr import Edge, LoopTopology, PodConfig, Segment
from .protection import ProtectionConfig, default_topology
from .recharge import RechargeConfig
from .sst import SstSpec
from .units import UnitError, parse_quantity
from .verifier import ContractLimits
from .workload import WorkloadEnvelope

EVENT_KINDS = {
    "step_burst", "burst_train", "load_valley", "branch_fault",
    "segment_fault", "ground_fault", "feeder_trip", "comm_loss",
    "clock_skew", "unit_loss",
}


class ScenarioError(ValueError):
    """Carries every violation found in a scenario file."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("scenario invalid:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ScenarioEvent:
    kind: str
    t: float
    data: dict = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    seed: int
    horizon: float
    dt_electrical: float
    envelope: WorkloadEnvelope
    bus: BusParams
    shelf: ShelfSpec
    bank: DruBankState
    sst: SstSpec
    recharge: RechargeConfig
    recharge_enabled: bool
    protection: ProtectionConfig
    loop: LoopTopology
    row_id: str
    pod: PodConfig
    limits: ContractLimits
    events: list
    decimation: float = 1e-3
    window_pre: float = 5e-3
    window_post: float = 0.2
    sst_track_demand: bool = True
    sst_setpoint0: float = -1.0   # <0 -> p_avg
    branch_taps: dict = field(default_factory=dict)
    row_topology: object = None
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.row_topology is None:
            self.row_topology = default_topology()


class _Parser:
    """Collects every problem instead of stopping at the first."""

    def __init__(self, doc: dict):
        self.doc = doc
        self.problems: list[str] = []

    def get(self, section: str, key: str, dimension: str, default=None):
        sec = self.doc.get(section, {})
        if key not in sec:
            if default is None:
                self.problems.append(f"{section}.{key}: required field missing")
                return 0.0
            return default
        try:
            return parse_quantity(sec[key], dimension, f"{section}.{key}")
        except UnitError as exc:
            self.problems.append(str(exc))
            return default if default is not None else 0.0

    def get_int(self, section: str, key: str, default=None):
        v = self.get(section, key, "count", default)
        return int(v)

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        v = self.doc.get(section, {}).get(key, default)
        if not isinstance(v, bool):
            self.problems.append(f"{section}.{key}: expected true/false")
            return default
        return v

    def get_str(self, section: str, key: str, default: str) -> str:
        return str(self.doc.get(section, {}).get(key, default))

    def build(self, what, ctor, /, **kwargs):
        try:
            return ctor(**kwargs)
        except (ValueError, TypeError) as exc:
            self.problems.append(f"{what}: {exc}")
            return None


def _parse_loop(p: _Parser, doc: dict, pod_p_row: float):
    sec = doc.get("loop")
    if sec is None:
        segs = (Segment("sega", 346.0, 25.0), Segment("segb", 346.0, 25.0))
        edges = (
            Edge("fdra", "srca", "sega"),
            Edge("fdrb", "srcb", "segb"),
            Edge("tie1", "sega", "segb", normally_open=True),
        )
        return (
            p.build("loop", LoopTopology, sources=("srca", "srcb"),
                    segments=segs, edges=edges, rows={"row1": "sega"},
                    flisr_delay=1.5),
            "row1",
        )
    segments = []
    for i, s in enumerate(sec.get("segments", [])):
        try:
            segments.append(
                Segment(
                    id=str(s["id"]),
                    amp_cap=parse_quantity(s["amp_cap"], "current", f"loop.segments[{i}].amp_cap"),
                    voltage_kv=parse_quantity(s["voltage"], "voltage", f"loop.segments[{i}].voltage") / 1e3,
                )
            )
        except (KeyError, UnitError) as exc:
            p.problems.append(f"loop.segments[{i}]: {exc}")
    edges = []
    for i, e in enumerate(sec.get("edges", [])):
        try:
            edges.append(
                Edge(
                    id=str(e["id"]), a=str(e["a"]), b=str(e["b"]),
                    normally_open=bool(e.get("normally_open", False)),
                )
            )
        except KeyError as exc:
            p.problems.append(f"loop.edges[{i}]: missing {exc}")
    rows = {str(k): str(v) for k, v in sec.get("rows", {"row1": segments[0].id if segments else "sega"}).items()}
    row_id = str(sec.get("row_id", sorted(rows)[0] if rows else "row1"))
    try:
        delay = parse_quantity(sec.get("flisr_delay", "1.5 s"), "time", "loop.flisr_delay")
    except UnitError as exc:
        p.problems.append(str(exc))
        delay = 1.5
    topo = p.build(
        "loop", LoopTopology, sources=tuple(sec.get("sources", ("srca", "srcb"))),
        segments=tuple(segments), edges=tuple(edges), rows=rows, flisr_delay=delay,
    )
    return topo, row_id


def _parse_events(p: _Parser, doc: dict, horizon: float):
    events = []
    for i, e in enumerate(doc.get("events", [])):
        kind = e.get("kind")
        if kind not in EVENT_KINDS:
            p.problems.append(f"events[{i}].kind: unknown kind {kind!r}")
            continue
        try:
            t = parse_quantity(e["t"], "time", f"events[{i}].t")
        except (KeyError, UnitError) as exc:
            p.problems.append(f"events[{i}].t: {exc}")
            continue
        if not (0 <= t <= horizon):
            p.problems.append(
                f"events[{i}]: time {t:g} s outside horizon [0, {horizon:g}] s"
            )
            continue
        data = {}
        try:
            if kind == "load_valley":
                data["depth"] = parse_quantity(e.get("depth", 0.15), "fraction", f"events[{i}].depth")
                data["duration"] = parse_quantity(e["duration"], "time", f"events[{i}].duration")
                data["phase"] = str(e.get("phase", "idle"))
                if data["phase"] not in ("idle", "comms", "compute"):
                    p.problems.append(f"events[{i}].phase: unknown phase {data['phase']!r}")
            elif kind == "burst_train":
                data["period"] = parse_quantity(e["period"], "time", f"events[{i}].period")
                data["duty"] = parse_quantity(e["duty"], "fraction", f"events[{i}].duty")
                data["n_bursts"] = int(parse_quantity(e["n_bursts"], "count", f"events[{i}].n_bursts"))
            elif kind == "branch_fault":
                data["location"] = str(e["location"])
                data["magnitude"] = parse_quantity(e.get("magnitude", "450 A"), "current", f"events[{i}].magnitude")
            elif kind == "segment_fault":
                data["location"] = str(e["location"])
                data["magnitude"] = parse_quantity(e.get("magnitude", "450 A"), "current", f"events[{i}].magnitude")
            elif kind == "ground_fault":
                data["location"] = str(e["location"])
                data["insulation"] = parse_quantity(e.get("insulation", "30 kohm"), "insulation", f"events[{i}].insulation")
            elif kind == "feeder_trip":
                data["target"] = str(e["target"])
            elif kind == "comm_loss":
                data["duration"] = parse_quantity(e.get("duration", "1e9 s"), "time", f"events[{i}].duration")
            elif kind == "clock_skew":
                data["skew"] = parse_quantity(e.get("skew", "20 ms"), "time", f"events[{i}].skew")
                data["duration"] = parse_quantity(e.get("duration", "1e9 s"), "time", f"events[{i}].duration")
            elif kind == "step_burst":
                data["alpha"] = parse_quantity(e.get("alpha", -1.0), "fraction", f"events[{i}].alpha")
                data["edge"] = parse_quantity(e["edge"], "time", f"events[{i}].edge") if "edge" in e else -1.0
        except (KeyError, UnitError) as exc:
            p.problems.append(f"events[{i}]: {exc}")
            continue
        events.append(ScenarioEvent(kind=kind, t=t, data=data))
    events.sort(key=lambda ev: ev.t)
    return events


def parse_scenario(doc: dict, name: str = "") -> Scenario:
    """Build a validated Scenario from a parsed JSON document."""
    p = _Parser(doc)
    name = str(doc.get("name", name or "unnamed"))
    seed = int(doc.get("seed", 0))
    horizon = p.get("run", "horizon", "time")
    dt_e = p.get("run", "dt_electrical", "time", 10e-6)
    if dt_e > MAX_ELECTRICAL_DT:
        p.problems.append(
            f"run.dt_electrical: {dt_e:g} s exceeds the {MAX_ELECTRICAL_DT:g} s cap"
        )
    decimation = p.get("run", "decimation", "time", 1e-3)

    mode = p.get_str("envelope", "mode", "design")
    envelope = p.build(
        "envelope", WorkloadEnvelope,
        p_avg=p.get("envelope", "p_avg", "power"),
        alpha_max=p.get("envelope", "alpha_max", "fraction", 0.25),
        t_surge=p.get("envelope", "t_surge", "time", 60.0),
        dt_edge=p.get("envelope", "dt_edge", "time", 0.2),
        par=p.get("envelope", "par", "fraction", 1.25),
        rho_corr=p.get("envelope", "rho_corr", "fraction", 0.4),
        idle_floor=p.get("envelope", "idle_floor", "fraction", 0.0),
        n_racks=p.get_int("envelope", "n_racks", 25),
        pdu_slew=p.get("envelope", "pdu_slew", "power_rate", 500.0),
        pdu_cap=p.get("envelope", "pdu_cap", "power", 0.0),
        mode=mode,
    )
    bus = p.build(
        "bus", BusParams,
        v_nom=p.get("bus", "v_nom", "voltage", 800.0),
        c_bus=p.get("bus", "c_bus", "capacitance", 2.1e-3),
        l_loop=p.get("bus", "l_loop", "inductance", 5e-6),
        dru_latency=p.get("bus", "dru_latency", "time", 75e-6),
        esr=p.get("bus", "esr", "resistance", 0.0),
    )
    shelf = p.build(
        "shelf", ShelfSpec,
        p_pk=p.get("shelf", "p_pk", "power", 40.0),
        p_cont=p.get("shelf", "p_cont", "power", 24.0),
        e_use=p.get("shelf", "e_use", "energy", 0.6),
        droop=p.get("shelf", "droop", "resistance", 10e-3),
        slew=p.get("shelf", "slew", "power_rate", 250.0),
        loop_bw=p.get("shelf", "loop_bw", "frequency", 80e3),
        conv_slew=p.get("shelf", "conv_slew", "power_rate", 2e6),
    )
    n_shelves = p.get_int("bank", "n_shelves", 11)
    bank = None
    if shelf is not None and n_shelves > 0:
        bank = p.build(
            "bank", DruBankState,
            n_shelves=n_shelves,
            soc=p.get("bank", "soc0", "fraction", 0.65),
            soc_min=p.get("bank", "soc_min", "fraction", 0.5),
            soc_max=p.get("bank", "soc_max", "fraction", 0.8),
            t_star=p.get("bank", "t_star", "time", 90.0),
            e_use=shelf.e_use,
        )
    sst = p.build(
        "sst", SstSpec,
        p_rated=p.get("sst", "p_rated", "power", 1500.0),
        tau=p.get("sst", "tau", "time", 2.0),
        droop=p.get("sst", "droop", "resistance", 8e-3),
        ramp_cap=p.get("sst", "ramp_cap", "power_rate", 0.0),
        n_units=p.get_int("sst", "n_units", 2),
        reverse_internal_ok=p.get_bool("sst", "reverse_internal_ok", True),
        pcc_dpdt_cap=p.get("sst", "pcc_dpdt_cap", "power_rate", 0.0),
        efficiency=p.get("sst", "efficiency", "fraction", 0.98),
    )
    # droop hierarchy: the gateway slope must sit 5-15x above the bank slope
    if sst is not None and shelf is not None and bank is not None:
        req = shelf.droop / bank.n_shelves
        if not (5.0 * req - 1e-12 <= sst.droop <= 15.0 * req + 1e-12):
            p.problems.append(
                f"sst.droop: {sst.droop:g} V/A outside 5-15x the bank droop "
                f"{req:g} V/A (hierarchy bound)"
            )
    recharge = p.build(
        "recharge", RechargeConfig,
        l1=p.get("recharge", "l1", "fraction", 0.55),
        l2=p.get("recharge", "l2", "fraction", 0.78),
        r_safety=p.get("recharge", "r_safety", "power", 50.0),
        ramp_cap=p.get("recharge", "ramp_cap", "power_rate", 50.0),
        comms_blackout=p.get_bool("recharge", "comms_blackout", True),
        urgency_soc=p.get("recharge", "urgency_soc", "fraction", 0.55),
        urgency_gain=p.get("recharge", "urgency_gain", "fraction", 2.0),
        soc_min=p.get("bank", "soc_min", "fraction", 0.5),
    )
    recharge_enabled = p.get_bool("recharge", "enabled", True)
    protection = p.build(
        "protection", ProtectionConfig,
        t_clear_branch=p.get("protection", "t_clear_branch", "time", 100e-6),
        t_iso_row=p.get("protection", "t_iso_row", "time", 2e-3),
        t_mv=p.get("protection", "t_mv", "time", 1.5),
        e_clamp_max=p.get("protection", "e_clamp_max", "energy_j", 25.0),
        trip_di_dt=p.get("protection", "trip_di_dt", "current_rate", 1e6),
        lifecycle_margin=p.get("protection", "lifecycle_margin", "fraction", 1.25),
        imd_alarm=p.get("protection", "imd_alarm", "insulation", 100.0),
        imd_trip=p.get("protection", "imd_trip", "insulation", 50.0),
    )
    if protection is not None and protection.lifecycle_margin < 1.1:
        p.problems.append(
            f"protection.lifecycle_margin: {protection.lifecycle_margin} below "
            "the deployed floor 1.1"
        )
    pod = p.build(
        "pod", PodConfig,
        p_mv=p.get("pod", "p_mv", "power", 3500.0),
        n_rows=p.get_int("pod", "n_rows", 1),
        p_row=p.get("pod", "p_row", "power", 1000.0),
        u=p.get("pod", "u", "fraction", 0.8),
        r=p.get("pod", "r", "fraction", 0.05),
        l=p.get("pod", "l", "fraction", 0.03),
        p_assist_max=p.get("pod", "p_assist_max", "power", 0.0),
        t_bridge=p.get("pod", "t_bridge", "time", 3.0),
    )
    limits = p.build(
        "limits", ContractLimits,
        steady_band=p.get("limits", "steady_band", "fraction", 0.01),
        transient_max=p.get("limits", "transient_max", "fraction", 0.02),
        recovery_max=p.get("limits", "recovery_max", "time", 0.05),
        overshoot_max=p.get("limits", "overshoot_max", "fraction", 0.02),
        phase_margin_min=p.get("limits", "phase_margin_min", "angle", 45.0),
        osc_lo=p.get("limits", "osc_lo", "frequency", 1.0),
        osc_hi=p.get("limits", "osc_hi", "frequency", 30.0),
        osc_power_max=p.get("limits", "osc_power_max", "fraction", 1e-3),
        floor_r_up=p.get("limits", "floor_r_up", "power", 0.0),
        floor_r_dn=p.get("limits", "floor_r_dn", "power", 0.0),
        chg_ramp_max=p.get("limits", "chg_ramp_max", "power_rate", 50.0),
    )
    loop, row_id = _parse_loop(p, doc, pod.p_row if pod else 1000.0)
    events = _parse_events(p, doc, horizon)

    if envelope is not None:
        for i, ev in enumerate(events):
            if ev.kind == "step_burst" and ev.t + envelope.t_surge > horizon:
                p.problems.append(
                    f"events[{i}]: step_burst at {ev.t:g} s + t_surge "
                    f"{envelope.t_surge:g} s exceeds horizon {horizon:g} s"
                )
    row_topo = None
    rt = doc.get("row_topology")
    if rt is not None:
        try:
            row_topo = default_topology(
                int(rt.get("n_branches", 8)), int(rt.get("n_segments", 2))
            )
        except (TypeError, ValueError) as exc:
            p.problems.append(f"row_topology: {exc}")

    taps = {}
    for tname, tap in doc.get("branch_taps", {}).items():
        try:
            taps[str(tname)] = {
                "load_fraction": parse_quantity(tap["load_fraction"], "fraction", f"branch_taps.{tname}.load_fraction"),
                "r_ohm": parse_quantity(tap["r"], "resistance", f"branch_taps.{tname}.r"),
            }
        except (KeyError, UnitError) as exc:
            p.problems.append(f"branch_taps.{tname}: {exc}")

    if horizon <= 0:
        p.problems.append(f"run.horizon: {horizon:g} s must be positive")
    if p.problems:
        raise ScenarioError(p.problems)
    return Scenario(
        name=name, seed=seed, horizon=horizon, dt_electrical=dt_e,
        envelope=envelope, bus=bus, shelf=shelf, bank=bank, sst=sst,
        recharge=recharge, recharge_enabled=recharge_enabled,
        protection=protection, loop=loop, row_id=row_id, pod=pod,
        limits=limits, events=events, decimation=decimation,
        sst_track_demand=p.get_bool("sst", "track_demand", True),
        sst_setpoint0=p.get("sst", "setpoint0", "power", -1.0),
        branch_taps=taps, row_topology=row_topo, raw=doc,
    )


def load_scenario(path) -> Scenario:
    """Parse, unit-check and cross-validate a scenario file."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"parse-error: {exc}"]) from None
    import os

    return parse_scenario(doc, name=os.path.splitext(os.path.basename(path))[0])

"""Multirate row simulation.

Rate structure (fixed steps, nested):
    electrical substep   10 us   bus capacitor, bank droop loop, fault draw
    gateway tick         10 ms   setpoint filter + soft droop + ramp cap,
                                 reserve-floor watch
    coordination tick   100 ms   tier ladder, recharge admission and law
    allocator tick         1 s   pod setpoint caps, recharge headroom

The electrical layer runs in the compiled kernel (or its pure-Python
twin). Everything slower lives here, in plain Python, mutating the kernel
parameter block between spans. Scheduled events (bursts, faults, feeder
trips, comm loss) are applied at exact substep boundaries by splitting
kernel spans.

Logging: a uniform decimated main grid for the whole run plus full-rate
windows bracketing every disturbance event, so microsecond dips survive.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from . import kernel
from .bus import BLOWUP_FRACTION, LogSegment, WaveformLog
from .dru import reserves as dru_reserves
from .flisr import RowSummary, bridge_check, flisr_reconfigure, pod_allocate
from .protection import FaultEvent, FaultKind, detect_and_trip, fault_current_profile
from .recharge import (
    FrpState,
    TickEvents,
    Tier,
    Veto,
    admission_step,
    recharge_command,
    tier_step,
    urgency_scale,
)
from .scenario import Scenario
from .sst import SstState, sst_power_command
from .workload import synth_step_burst

SST_TICK = 0.01
FRP_TICK = 0.1
ALLOC_TICK = 1.0
TRACE_DT = 1e-3
V_ENGAGE = 0.4  # V; arming threshold for the bank droop loop

INSTANT_VETOES = {
    Veto.FLOOR_VIOLATION, Veto.TOPOLOGY_CHANGE, Veto.LOCAL_FAULT,
    Veto.REDUNDANCY_ACTIVE, Veto.COMMS_PHASE,
}


class SimulationError(RuntimeError):
    pass


def build_trace(scn: Scenario):
    """(samples kW, phases) on the 1 ms grid, composed from the event list."""
    n = int(round(scn.horizon / TRACE_DT))
    env = scn.envelope
    samples = np.full(n, env.p_avg)
    phases = np.zeros(n, dtype=np.int8)
    t = np.arange(n) * TRACE_DT
    for idx, ev in enumerate(scn.events):
        if ev.kind == "step_burst":
            e = env
            if ev.data.get("alpha", -1.0) >= 0 or ev.data.get("edge", -1.0) >= 0:
                e = replace(
                    env,
                    alpha_max=ev.data["alpha"] if ev.data.get("alpha", -1) >= 0 else env.alpha_max,
                    dt_edge=ev.data["edge"] if ev.data.get("edge", -1) >= 0 else env.dt_edge,
                    mode="free",
                )
            tr = synth_step_burst(e, scn.horizon, ev.t, seed=scn.seed + idx, dt=TRACE_DT)
            samples = samples + (tr.samples - env.p_avg)
        elif ev.kind == "burst_train":
            period = ev.data["period"]
            duty = ev.data["duty"]
            width = period * duty
            e = replace(env, t_surge=width, mode="free")
            for b in range(ev.data["n_bursts"]):
                start = ev.t + b * period
                if start + width > scn.horizon:
                    break
                tr = synth_step_burst(
                    e, scn.horizon, start, seed=scn.seed + idx * 1000 + b, dt=TRACE_DT
                )
                samples = samples + (tr.samples - env.p_avg)
        elif ev.kind == "load_valley":
            depth = ev.data["depth"]
            dur = ev.data["duration"]
            edge = max(env.dt_edge, TRACE_DT)
            down = np.clip((t - ev.t) / edge, 0.0, 1.0)
            up = np.clip((t - (ev.t + dur)) / edge, 0.0, 1.0)
            samples = samples - env.p_avg * depth * (down - up)
            code = {"compute": 0, "comms": 1, "idle": 2}[ev.data["phase"]]
            m = (t >= ev.t) & (t <= ev.t + dur + edge)
            phases[m] = code
    lo = env.idle_floor * env.p_avg
    if samples.min() < lo - 1e-9:
        raise SimulationError(
            f"composed trace dips to {samples.min():.1f} kW below the idle floor {lo:.1f} kW"
        )
    return samples, phases


class _Ring:
    """Fixed-length running mean."""

    def __init__(self, length: int, fill: float):
        self.buf = np.full(max(length, 1), fill)
        self.i = 0
        self.total = float(self.buf.sum())

    def push(self, x: float):
        self.total += x - self.buf[self.i]
        self.buf[self.i] = x
        self.i = (self.i + 1) % len(self.buf)

    @property
    def mean(self) -> float:
        return self.total / len(self.buf)


class _LogBuilder:
    def __init__(self, scn: Scenario, n_sub: int, stride: int):
        self.stride = stride
        n_main = n_sub // stride + 1
        self.main = {
            name: np.zeros(n_main)
            for name in ("v_bus", "dru_p", "soc", "p_chg")
        }
        self.n_main = n_main
        self.windows: list[dict] = []   # {label, gs, ge, rows}
        self.events: list[dict] = []

    def add_window(self, label: str, gs: int, ge: int):
        self.windows.append(
            {"label": label, "gs": gs, "ge": ge,
             "rows": np.zeros((ge - gs, kernel.CAPTURE_CHANNELS))}
        )

    def scatter(self, g_vals: np.ndarray, rows: np.ndarray):
        on_main = (g_vals % self.stride) == 0
        idx = g_vals[on_main] // self.stride
        for c, name in enumerate(("v_bus", "dru_p", "soc", "p_chg")):
            self.main[name][idx] = rows[on_main, c]
        for w in self.windows:
            m = (g_vals > w["gs"]) & (g_vals <= w["ge"])
            if m.any():
                w["rows"][g_vals[m] - w["gs"] - 1] = rows[m]

    def mark(self, t: float, label: str, info=None):
        self.events.append({"t": float(t), "label": label, "info": info or {}})


def simulate(scn: Scenario, backend: str = "auto") -> WaveformLog:
    """Run one scenario to a WaveformLog. Deterministic for a given
    (scenario, seed); aborted runs return a truncated log flagged aborted."""
    adv = kernel.advance
    if backend != "auto":
        try:
            adv = kernel.available_backends()[backend]
        except KeyError:
            raise SimulationError(f"backend {backend!r} not available") from None

    dt = scn.dt_electrical
    n_sub_w = int(round(SST_TICK / dt))
    if abs(n_sub_w * dt - SST_TICK) > 1e-12:
        raise SimulationError(f"dt_electrical {dt} must divide the 10 ms gateway tick")
    rep = int(round(TRACE_DT / dt))
    stride = int(round(scn.decimation / dt))
    n_sub = int(round(scn.horizon / dt))
    n_w = n_sub // n_sub_w
    w_frp = int(round(FRP_TICK / SST_TICK))
    w_alloc = int(round(ALLOC_TICK / SST_TICK))

    trace, phases = build_trace(scn)
    wmeans0 = trace[: (n_w * n_sub_w) // rep].reshape(n_w, n_sub_w // rep).mean(axis=1)

    env = scn.envelope
    bank = scn.bank
    have_bank = bank is not None and bank.n_shelves > 0
    r_eq = scn.shelf.droop / bank.n_shelves if have_bank else 1.0

    params = np.zeros(kernel.N_PARAMS)
    params[kernel.P_DT] = dt
    params[kernel.P_VNOM] = scn.bus.v_nom
    params[kernel.P_INVC] = 1.0 / scn.bus.c_bus
    params[kernel.P_ESR] = scn.bus.esr
    params[kernel.P_EDROOP] = kernel.droop_relaxation(r_eq, scn.bus.c_bus, dt)
    params[kernel.P_REQ] = r_eq
    params[kernel.P_VENG] = V_ENGAGE
    params[kernel.P_NDELAY] = max(1.0, round(scn.bus.dru_latency / dt))
    if have_bank:
        params[kernel.P_SLEWSTEP] = bank.n_shelves * scn.shelf.conv_slew * dt
        params[kernel.P_PGATE] = bank.n_shelves * scn.shelf.p_pk
        params[kernel.P_INVE36] = 1.0 / (bank.e_tot * 3600.0)
    else:
        params[kernel.P_SLEWSTEP] = 0.0
        params[kernel.P_PGATE] = 0.0
        params[kernel.P_INVE36] = 0.0
    params[kernel.P_SOCMIN] = bank.soc_min if have_bank else 0.0
    params[kernel.P_SOCMAX] = bank.soc_max if have_bank else 1.0
    params[kernel.P_THALPHA] = dt / 90.0
    params[kernel.P_BLOWUPV] = BLOWUP_FRACTION * scn.bus.v_nom
    params[kernel.P_DRUON] = 1.0 if have_bank else 0.0
    params[kernel.P_CHGREF] = math.inf

    state = kernel.new_state()
    state[kernel.SOC] = bank.soc if have_bank else 0.0
    acc = kernel.new_acc(scn.bus.v_nom)

    log = _LogBuilder(scn, n_sub, stride)
    log.main["v_bus"][0] = scn.bus.v_nom
    log.main["soc"][0] = state[kernel.SOC]

    # --- event compilation: (substep, action, payload), action applied
    # before that substep executes -----------------------------------------
    actions: list[tuple[int, str, dict]] = []
    window_marks: list[tuple[float, str]] = []

    def at(t: float) -> int:
        return min(n_sub, max(0, int(round(t / dt))))

    live_frac_changes = [(0, 1.0)]
    live_frac = 1.0
    for ev in scn.events:
        if ev.kind == "step_burst":
            actions.append((at(ev.t), "mark", {"label": "burst_on"}))
            window_marks.append((ev.t, "burst_on"))
            t_off = ev.t + env.t_surge
            if t_off < scn.horizon:
                actions.append((at(t_off), "mark", {"label": "burst_off"}))
                window_marks.append((t_off, "burst_off"))
        elif ev.kind == "burst_train":
            actions.append((at(ev.t), "mark", {"label": "burst_on"}))
            window_marks.append((ev.t, "burst_on"))
        elif ev.kind == "branch_fault":
            fe = FaultEvent(FaultKind.BRANCH_SHORT, ev.data["location"], ev.t,
                            ev.data["magnitude"])
            trip = detect_and_trip(fe, scn.protection, scn.row_topology,
                                   l_loop=scn.bus.l_loop, v_nom=scn.bus.v_nom)
            share = sum(scn.row_topology.share(b) for b in trip.isolated_set)
            actions.append((at(ev.t), "fault_on", {
                "i_prosp": ev.data["magnitude"], "label": "branch_fault",
                "share": share, "trip": trip,
            }))
            actions.append((at(trip.t_trip), "fault_off", {"label": "branch_clear"}))
            window_marks.append((ev.t, "branch_fault"))
        elif ev.kind == "segment_fault":
            mag = ev.data.get("magnitude", 450.0)
            fe = FaultEvent(FaultKind.MULTI_BRANCH, ev.data["location"], ev.t, mag)
            trip = detect_and_trip(fe, scn.protection, scn.row_topology,
                                   l_loop=scn.bus.l_loop, v_nom=scn.bus.v_nom)
            share = sum(scn.row_topology.share(b) for b in trip.isolated_set)
            actions.append((at(ev.t), "fault_on", {
                "i_prosp": mag, "label": "segment_fault", "share": 0.0,
                "trip": trip,
            }))
            actions.append((at(trip.t_trip), "fault_off",
                            {"label": "sectionalize", "share": share, "trip": trip}))
            window_marks.append((ev.t, "segment_fault"))
        elif ev.kind == "ground_fault":
            actions.append((at(ev.t), "ground_fault", {
                "location": ev.data["location"], "insulation": ev.data["insulation"],
            }))
            window_marks.append((ev.t, "ground_fault"))
        elif ev.kind == "feeder_trip":
            plan = flisr_reconfigure(
                ev.data["target"], scn.loop, ev.t,
                row_powers={scn.row_id: env.p_avg},
            )
            actions.append((at(ev.t), "feeder_trip", {"plan": plan}))
            if scn.row_id in plan.bridged_rows or scn.row_id in plan.unrestorable_rows:
                actions.append((at(plan.t_restore), "mark", {"label": "tie_close"}))
                actions.append((at(plan.t_confirm), "restore", {"plan": plan}))
            window_marks.append((ev.t, "feeder_trip"))
        elif ev.kind == "comm_loss":
            actions.append((at(ev.t), "comm", {"ok": False}))
            t_back = ev.t + ev.data["duration"]
            if t_back < scn.horizon:
                actions.append((at(t_back), "comm", {"ok": True}))
        elif ev.kind == "clock_skew":
            actions.append((at(ev.t), "skew", {"skew": ev.data["skew"]}))
            t_back = ev.t + ev.data["duration"]
            if t_back < scn.horizon:
                actions.append((at(t_back), "skew", {"skew": 0.0}))
        elif ev.kind == "unit_loss":
            actions.append((at(ev.t), "unit_loss", {}))
            window_marks.append((ev.t, "unit_loss"))
    actions.sort(key=lambda a: a[0])

    # full-rate capture windows around disturbances, merged, span-aligned
    raw_ranges = []
    for t_e, label in window_marks:
        gs = max(0, at(t_e - scn.window_pre))
        ge = min(n_sub, at(t_e + scn.window_post))
        raw_ranges.append((gs, ge, label))
    raw_ranges.sort()
    merged: list[list] = []
    for gs, ge, label in raw_ranges:
        if merged and gs <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], ge)
        else:
            merged.append([gs, ge, label])
    for gs, ge, label in merged:
        log.add_window(label, gs, ge)
    window_bounds = sorted({b for gs, ge, _ in merged for b in (gs, ge)})

    def in_window(g: int) -> bool:
        for gs, ge, _ in merged:
            if gs <= g < ge:
                return True
        return False

    # --- control-plane state ----------------------------------------------
    frp = FrpState(tier=Tier.TIER2 if scn.recharge_enabled else Tier.TIER1)
    comm_ok = True
    clock_skew = 0.0
    reserve_active = False
    sst_blocked_until = -1.0
    mv_pending = False
    sst_state = SstState(
        p_filtered=trace[0], p_out=trace[0],
        p_pcc=trace[0] / scn.sst.efficiency, setpoint=trace[0],
    )
    v_dev_filt = 0.0
    droop_alpha = 1.0 - math.exp(-SST_TICK / max(scn.sst.droop_filter, SST_TICK))
    resume_pending = False
    demand_ring = _Ring(int(round(1.0 / SST_TICK)), trace[0])
    m_iter = _Ring(int(round(10.0 / FRP_TICK)), env.p_avg)
    m_phase = _Ring(int(round(60.0 / FRP_TICK)), env.p_avg)
    m_job = _Ring(int(round(600.0 / FRP_TICK)), env.p_avg)
    frp_accum: list[float] = []
    admission_active = False
    h_mv = 0.0
    alloc_cap = scn.sst.p_rated
    last_alloc_t = 0.0
    p_chg_target = 0.0
    e_pcc = 0.0
    e_dump = 0.0
    sst_p_by_w = np.zeros(n_w)
    pcc_by_w = np.zeros(n_w)
    tier_by_w = np.zeros(n_w, dtype=np.int8)
    trip_records: list = []
    aborted = False
    abort_reason = ""

    cap_buf = np.zeros((n_sub_w + 1, kernel.CAPTURE_CHANNELS))

    def bank_state():
        return replace(bank, soc=float(state[kernel.SOC]),
                       p_out=float(state[kernel.P_DRU] - state[kernel.P_CHG]))

    def floors_ok_now() -> bool:
        if not have_bank:
            return False
        r_up, r_dn, _, _ = dru_reserves(bank_state(), scn.shelf)
        return r_up >= scn.limits.floor_r_up - 1e-9 and r_dn >= scn.limits.floor_r_dn - 1e-9

    def freeze_recharge(t: float, reason: Veto):
        nonlocal p_chg_target, admission_active
        had = state[kernel.P_CHG] > 0 or p_chg_target > 0
        p_chg_target = 0.0
        state[kernel.P_CHG] = 0.0
        params[kernel.P_PCHGTGT] = 0.0
        if admission_active:
            admission_active = False
        if had:
            log.mark(t, f"veto_{reason.value}")

    def apply_action(g: int, kind: str, payload: dict):
        nonlocal live_frac, comm_ok, clock_skew, reserve_active
        nonlocal sst_blocked_until, mv_pending, sst_state, frp, resume_pending
        t = g * dt
        if kind == "mark":
            log.mark(t, payload["label"])
        elif kind == "fault_on":
            tau, _ = fault_current_profile(payload["i_prosp"], scn.bus.l_loop, scn.bus.v_nom)
            state[kernel.FAULT_ON] = 1.0
            state[kernel.T_FAULT] = 0.0
            state[kernel.I_PROSP] = payload["i_prosp"]
            state[kernel.TAU_INV] = 1.0 / tau if tau > 0 else 0.0
            if payload["share"] > 0:
                live_frac = max(0.0, live_frac - payload["share"])
                live_frac_changes.append((g, live_frac))
            log.mark(t, payload["label"], {"trip": _trip_info(payload["trip"])})
            trip_records.append(payload["trip"])
            if scn.recharge_enabled:
                freeze_recharge(t, Veto.LOCAL_FAULT)
        elif kind == "fault_off":
            state[kernel.FAULT_ON] = 0.0
            state[kernel.I_PROSP] = 0.0
            if payload.get("share"):
                live_frac = max(0.0, live_frac - payload["share"])
                live_frac_changes.append((g, live_frac))
                trip_records.append(payload["trip"])
                log.mark(t, payload["label"], {"trip": _trip_info(payload["trip"])})
            else:
                log.mark(t, payload["label"])
        elif kind == "ground_fault":
            from .protection import imd_island

            readings = {b: 1e6 for b in scn.row_topology.branch_ids()}
            readings.update({s: 1e6 for s in scn.row_topology.segments})
            readings[payload["location"]] = payload["insulation"]
            isolated, info = imd_island(readings, scn.protection, scn.row_topology)
            log.mark(t, "ground_fault", {"isolated": list(isolated),
                                         "bus_kohm": info["bus_kohm"]})
            if isolated:
                share = sum(scn.row_topology.share(b) for b in isolated
                            if b in scn.row_topology.branch_ids())
                live_frac = max(0.0, live_frac - share)
                live_frac_changes.append((g, live_frac))
                log.mark(t, "imd_isolate", {"isolated": list(isolated)})
        elif kind == "feeder_trip":
            plan = payload["plan"]
            affected = scn.row_id in plan.bridged_rows or scn.row_id in plan.unrestorable_rows
            verdicts = {}
            if have_bank:
                _, _, e_up, _ = dru_reserves(bank_state(), scn.shelf)
                gate = bank.n_shelves * scn.shelf.p_pk
                p_cap = min(gate, e_up * 3600.0 / scn.loop.flisr_delay)
                verdicts = bridge_check({scn.row_id: scn.pod.p_row},
                                        scn.loop.flisr_delay,
                                        {scn.row_id: (p_cap, e_up)})
            log.mark(t, "feeder_trip", {
                "plan": _plan_info(plan), "bridge": verdicts,
            })
            if affected:
                # the feed is gone this substep: gateway output collapses now,
                # not at the next control tick
                sst_blocked_until = plan.t_confirm
                sst_state = replace(sst_state, blocked=True, p_out=0.0,
                                    p_filtered=0.0, p_pcc=0.0)
                mv_pending = True
                params[kernel.P_PSST] = 0.0
                w_cur = min(g // n_sub_w, n_w - 1)
                sst_p_by_w[w_cur] = 0.0
                pcc_by_w[w_cur] = 0.0
            if scn.recharge_enabled:
                freeze_recharge(t, Veto.TOPOLOGY_CHANGE)
        elif kind == "restore":
            sst_blocked_until = -1.0
            mv_pending = False
            # resumption targets the known demand immediately; the output
            # still rises under the ramp cap, so the feeder sees a bounded
            # ramp rather than the scheduling filter's long tail
            resume = min(alloc_cap, demand_ring.mean)
            sst_state = replace(sst_state, blocked=False,
                                p_filtered=resume, p_out=0.0)
            resume_pending = True
            log.mark(t, "restore_confirm", {"currents": payload["plan"].post_currents})
        elif kind == "comm":
            comm_ok = payload["ok"]
            log.mark(t, "comm_ok" if comm_ok else "comm_loss")
            if not comm_ok and scn.recharge_enabled:
                freeze_recharge(t, Veto.TOPOLOGY_CHANGE)
        elif kind == "skew":
            clock_skew = payload["skew"]
            log.mark(t, "clock_skew", {"skew_s": clock_skew})
        elif kind == "unit_loss":
            reserve_active = True
            log.mark(t, "unit_loss")
            if scn.recharge_enabled:
                freeze_recharge(t, Veto.REDUNDANCY_ACTIVE)

    # --- main loop ----------------------------------------------------------
    ai = 0
    g = 0
    status = 0
    for w in range(n_w):
        t_w = w * SST_TICK
        # events landing exactly on this boundary act before the ticks do
        while ai < len(actions) and actions[ai][0] <= g:
            _, kind, payload = actions[ai]
            apply_action(g, kind, payload)
            params[kernel.P_PCHGTGT] = p_chg_target
            ai += 1
        # allocator tick
        if w % w_alloc == 0:
            if comm_ok and clock_skew <= 0.010:
                want = 0.0
                if (
                    scn.recharge_enabled and have_bank
                    and (admission_active or state[kernel.SOC] < scn.recharge.l1)
                    and state[kernel.SOC] < scn.recharge.l2
                ):
                    want = max(0.0, env.p_avg - demand_ring.mean - scn.recharge.r_safety)
                r_up, r_dn, e_up, e_dn = (
                    dru_reserves(bank_state(), scn.shelf)
                    if have_bank else (0.0, 0.0, 0.0, 0.0)
                )
                me = RowSummary(
                    row_id=scn.row_id, p_delivered=demand_ring.mean,
                    r_up=r_up, r_dn=r_dn, e_up=e_up, e_dn=e_dn,
                    soc=float(state[kernel.SOC]),
                    recharge_request=want, floors_ok=floors_ok_now(),
                )
                others = [
                    RowSummary(
                        row_id=f"bg{i}", p_delivered=scn.pod.u * scn.pod.p_row,
                        r_up=0, r_dn=0, e_up=0, e_dn=0, soc=0.65,
                    )
                    for i in range(scn.pod.n_rows - 1)
                ]
                plan = pod_allocate([me] + others, scn.pod, t_w)
                new_h = plan.h_mv.get(scn.row_id, 0.0)
                if new_h > 0 and h_mv == 0:
                    log.mark(t_w, "recharge_grant", {"h_mv_kw": new_h})
                if new_h == 0 and h_mv > 0:
                    log.mark(t_w, "recharge_revoke")
                h_mv = new_h
                alloc_cap = min(scn.sst.p_rated, plan.setpoints.get(scn.row_id, alloc_cap)
                                + 0.3 * scn.sst.p_rated)
                last_alloc_t = t_w
            else:
                h_mv = 0.0
        # coordination tick
        if w % w_frp == 0:
            mean_100ms = (sum(frp_accum) / len(frp_accum)) if frp_accum else trace[0] * live_frac
            frp_accum.clear()
            m_iter.push(mean_100ms)
            m_phase.push(mean_100ms)
            m_job.push(mean_100ms)
            frp = tier_step(
                frp,
                TickEvents(
                    comm_ok=comm_ok, clock_skew=clock_skew,
                    allocator_heartbeat_age=t_w - last_alloc_t,
                ),
                FRP_TICK,
            )
            if scn.recharge_enabled and have_bank and frp.tier >= Tier.TIER1:
                gi = min(g // rep, len(trace) - 1)
                p_now = trace[gi] * live_frac
                phase = int(phases[gi])
                flat = min(m_iter.mean, m_phase.mean, m_job.mean, env.p_avg)
                valley = (
                    p_now < m_iter.mean - scn.recharge.r_safety
                    and p_now < m_phase.mean - scn.recharge.r_safety
                    and p_now < m_job.mean - scn.recharge.r_safety
                )
                floors = floors_ok_now()
                was_active = admission_active
                admission_active, veto = admission_step(
                    soc=float(state[kernel.SOC]), phase=phase, v_dev=state[kernel.V_DEV],
                    floors_ok=floors, cfg=scn.recharge, active=admission_active,
                    mv_event=mv_pending, local_fault=state[kernel.FAULT_ON] > 0,
                    redundancy_active=reserve_active,
                )
                if was_active and not admission_active and veto is not None:
                    if veto in INSTANT_VETOES:
                        freeze_recharge(t_w, veto)
                    else:
                        p_chg_target = 0.0
                        log.mark(t_w, f"exit_{veto.value}")
                elif admission_active and not was_active:
                    log.mark(t_w, "recharge_on")
                if admission_active and valley and floors:
                    law = recharge_command(flat, p_now, h_mv, True, scn.recharge, True)
                    law *= urgency_scale(float(state[kernel.SOC]), scn.recharge)
                    p_chg_target = min(law, h_mv)
                    params[kernel.P_CHGREF] = flat - scn.recharge.r_safety
                else:
                    p_chg_target = 0.0
            else:
                p_chg_target = 0.0
            params[kernel.P_PCHGTGT] = p_chg_target
            params[kernel.P_CHGSTEP] = scn.recharge.ramp_cap * dt
        tier_by_w[w] = int(frp.tier)

        # gateway tick
        wm = wmeans0[w] * live_frac
        demand_ring.push(wm)
        frp_accum.append(wm)
        if scn.sst_track_demand:
            setpoint = min(alloc_cap, demand_ring.mean + state[kernel.P_CHG])
        else:
            setpoint = scn.sst_setpoint0 if scn.sst_setpoint0 >= 0 else env.p_avg
        v_dev_filt += droop_alpha * (float(state[kernel.V_DEV]) - v_dev_filt)
        sst_state = replace(sst_state, setpoint=setpoint)
        sst_state = sst_power_command(
            sst_state, scn.sst, v_dev_filt, SST_TICK, scn.bus.v_nom
        )
        if scn.recharge_enabled and have_bank and admission_active and not floors_ok_now():
            freeze_recharge(t_w, Veto.FLOOR_VIOLATION)
        if resume_pending and not sst_state.blocked:
            # ramp-limited resumption has caught the scheduling filter
            if abs(sst_state.p_out - sst_state.p_filtered) <= scn.sst.ramp * SST_TICK:
                resume_pending = False
                log.mark(t_w, "resume_complete")
        sst_p_by_w[w] = sst_state.p_out
        pcc_by_w[w] = sst_state.p_pcc
        e_pcc += sst_state.p_pcc * SST_TICK
        e_dump += max(0.0, -sst_state.p_out) * SST_TICK
        params[kernel.P_PSST] = sst_state.p_out

        # electrical spans between breakpoints
        g_end_w = g + n_sub_w
        while g < g_end_w:
            nxt = g_end_w
            while ai < len(actions) and actions[ai][0] <= g:
                _, kind, payload = actions[ai]
                apply_action(g, kind, payload)
                params[kernel.P_PCHGTGT] = p_chg_target
                ai += 1
            if ai < len(actions):
                nxt = min(nxt, actions[ai][0])
            for b in window_bounds:
                if g < b < nxt:
                    nxt = b
                    break
            span = nxt - g
            sub_stride = 1 if in_window(g) else stride
            cap_first = (sub_stride - 1 - (g % sub_stride)) % sub_stride
            gi0 = g // rep
            load_span = np.repeat(
                trace[gi0 : (g + span - 1) // rep + 1], rep
            )[g - gi0 * rep : g - gi0 * rep + span] * live_frac
            load_span = np.ascontiguousarray(load_span)
            status, done, captured = adv(
                state, acc, params, load_span, span, cap_first, sub_stride, cap_buf
            )
            if captured:
                g_vals = g + cap_first + 1 + sub_stride * np.arange(captured)
                log.scatter(g_vals, cap_buf[:captured])
            if state[kernel.DISPLACED] > 0:
                state[kernel.DISPLACED] = 0.0
                p_chg_target = 0.0
                params[kernel.P_PCHGTGT] = 0.0
                log.mark((g + done) * dt, "veto_displaced")
            g += done
            if status != 0:
                aborted = True
                abort_reason = (
                    f"numeric blowup: |v - v_nom| exceeded "
                    f"{BLOWUP_FRACTION:.0%} of nominal at t={g * dt:.6f} s"
                    if status == kernel.BLOWUP
                    else f"soc integrator fault at t={g * dt:.6f} s"
                )
                log.mark(g * dt, "abort", {"reason": abort_reason})
                break
        if aborted:
            break

    return _finalize(
        scn, log, trace, phases, live_frac_changes, sst_p_by_w, pcc_by_w,
        tier_by_w, acc, state, params, r_eq, stride, dt, rep, n_sub, g,
        e_pcc, e_dump, trip_records, aborted, abort_reason,
    )


def _trip_info(trip) -> dict:
    return {
        "device": trip.device, "kind": trip.kind, "location": trip.location,
        "t_trip": trip.t_trip, "clear_time": trip.clear_time,
        "clamp_energy_j": trip.clamp_energy,
        "isolated": list(trip.isolated_set),
    }


def _plan_info(plan) -> dict:
    return {
        "fault_target": plan.fault_target,
        "actions": [list(a) for a in plan.actions],
        "restorable": plan.restorable,
        "bridged_rows": list(plan.bridged_rows),
        "unrestorable_rows": list(plan.unrestorable_rows),
        "post_currents": dict(plan.post_currents),
        "radial_after": plan.radial_after,
        "t_restore": plan.t_restore,
        "t_confirm": plan.t_confirm,
    }


def _finalize(scn, log, trace, phases, live_frac_changes, sst_p_by_w, pcc_by_w,
              tier_by_w, acc, state, params, r_eq, stride, dt, rep, n_sub,
              g_done, e_pcc, e_dump, trip_records, aborted, abort_reason):
    bank = scn.bank
    have_bank = bank is not None and bank.n_shelves > 0
    n_w = len(sst_p_by_w)

    change_g = np.array([c[0] for c in live_frac_changes])
    change_f = np.array([c[1] for c in live_frac_changes])

    def channels_at(g_vals: np.ndarray, soc: np.ndarray, base: dict) -> LogSegment:
        t = g_vals * dt
        gi = np.minimum(g_vals // rep, len(trace) - 1)
        frac = change_f[np.searchsorted(change_g, g_vals, side="right") - 1]
        p_load = trace[gi] * frac
        wi = np.minimum(g_vals // int(round(SST_TICK / dt)), n_w - 1)
        if have_bank:
            e_tot = bank.e_tot
            gate = bank.n_shelves * scn.shelf.p_pk
            e_up = (soc - bank.soc_min) * e_tot
            e_dn = (bank.soc_max - soc) * e_tot
            r_up = np.minimum(gate, e_up * 3600.0 / bank.t_star)
            r_dn = np.minimum(gate, e_dn * 3600.0 / bank.t_star)
        else:
            r_up = np.zeros(len(g_vals))
            r_dn = np.zeros(len(g_vals))
        return LogSegment(
            t=t, v_bus=base["v_bus"], p_load=p_load, dru_p=base["dru_p"],
            soc=soc, r_up=r_up, r_dn=r_dn, sst_p=sst_p_by_w[wi],
            pcc_p=pcc_by_w[wi], p_chg=base["p_chg"], tier=tier_by_w[wi],
        )

    n_main_done = g_done // stride + 1
    g_main = np.arange(n_main_done) * stride
    main = channels_at(
        g_main,
        log.main["soc"][:n_main_done],
        {k: v[:n_main_done] for k, v in log.main.items()},
    )
    windows = []
    for w in log.windows:
        ge = min(w["ge"], g_done)
        if ge <= w["gs"]:
            continue
        rows = w["rows"][: ge - w["gs"]]
        g_vals = np.arange(w["gs"] + 1, ge + 1)
        seg = channels_at(
            g_vals, rows[:, 2],
            {"v_bus": rows[:, 0], "dru_p": rows[:, 1], "p_chg": rows[:, 3]},
        )
        windows.append((w["label"], seg))

    de_dru_kwh = (
        (state[kernel.SOC] - bank.soc) * bank.e_tot if have_bank else 0.0
    )
    meta = {
        "scenario": scn.name,
        "seed": scn.seed,
        "backend": kernel.BACKEND,
        "v_nom": scn.bus.v_nom,
        "c_bus": scn.bus.c_bus,
        "r_eq": r_eq if have_bank else None,
        "loop_bw_hz": scn.shelf.loop_bw if have_bank else None,
        "e_load_kws": float(acc[kernel.E_LOAD]),
        "e_sst_kws": float(acc[kernel.E_SST]),
        "e_chg_kws": float(acc[kernel.E_CHG]),
        "e_dru_kws": float(acc[kernel.E_DRU]),
        "e_fault_kws": float(acc[kernel.E_FAULT]),
        "e_esr_kws": float(acc[kernel.E_ESR]),
        "e_pcc_kws": float(e_pcc),
        "e_dump_kws": float(e_dump),
        "de_dru_kwh": float(de_dru_kwh),
        "v_min": float(acc[kernel.V_MIN]),
        "v_max": float(acc[kernel.V_MAX]),
        "soc_end": float(state[kernel.SOC]),
        "branch_taps": scn.branch_taps,
        "trip_records": [_trip_info(t) for t in trip_records],
    }
    return WaveformLog(
        main=main, windows=windows, events=sorted(log.events, key=lambda e: e["t"]),
        meta=meta, aborted=aborted, abort_reason=abort_reason,
    )

"""Spine electrical parameters, pure bus laws, and the waveform log.

The spine is a +/-400 V floating pair (800 V differential) whose only
first-microseconds actor is distributed capacitance: until the bank loop
engages, a load step of current I held for the engagement latency dt digs
a dip of I * dt / C. Loop inductance sets the turn-off overvoltage
L * di/dt that the clamps must absorb. Once droop is active the
linearized bus is first order with pole (1/r_eq) / C.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MAX_ELECTRICAL_DT = 20e-6
BLOWUP_FRACTION = 0.5

LOG_COLUMNS = [
    "t_s", "v_bus_v", "p_load_kw", "dru_p_kw", "soc", "r_up_kw", "r_dn_kw",
    "sst_p_kw", "pcc_p_kw", "p_chg_kw", "tier", "event",
]


@dataclass(frozen=True)
class BusParams:
    v_nom: float = 800.0       # V differential
    c_bus: float = 2.1e-3      # F
    l_loop: float = 5e-6       # H, worst-case loop
    dru_latency: float = 75e-6  # s before the bank loop engages
    esr: float = 0.0           # ohm, lumped

    def __post_init__(self):
        if self.c_bus <= 0 or self.v_nom <= 0:
            raise ValueError("c_bus and v_nom must be positive")
        if not (50e-6 - 1e-12 <= self.dru_latency <= 150e-6 + 1e-12):
            raise ValueError(
                f"dru_latency {self.dru_latency * 1e6:.0f} us outside the "
                "default engagement band [50, 150] us"
            )


@dataclass
class RowState:
    """Composite row state for single-substep integration via step_bus.

    Carries the spine voltage plus the bank's droop-loop internals in the
    same packed vector the engine kernel uses, so component-level stepping
    and full simulation share one set of semantics.
    """

    v_bus: float
    t: float = 0.0
    soc: float = 0.65
    p_dru: float = 0.0
    p_chg: float = 0.0
    p_sst: float = 0.0
    kstate: object = None  # packed kernel state; built lazily

    def _kernel_state(self, v_nom: float):
        from . import kernel

        if self.kstate is None:
            ks = kernel.new_state()
            ks[kernel.V_DEV] = v_nom - self.v_bus
            ks[kernel.SOC] = self.soc
            ks[kernel.P_DRU] = self.p_dru
            ks[kernel.P_CHG] = self.p_chg
            self.kstate = ks
        return self.kstate


def step_bus(
    state: RowState,
    params: BusParams,
    p_load: float,
    dt: float,
    bank=None,
    shelf=None,
) -> RowState:
    """Advance the spine one electrical substep and return the new state.

    Net current is (p_dru + p_sst - p_load - p_chg) / v_bus; the capacitor
    integrates it, with the bank's droop loop (when a bank and shelf are
    given) engaging after the configured latency and respecting its slew,
    power and SoC gates. This is the single-step face of the same kernel
    the engine runs.
    """
    import numpy as np

    from . import kernel

    if dt > MAX_ELECTRICAL_DT:
        raise ValueError(f"dt {dt} exceeds the {MAX_ELECTRICAL_DT} s substep cap")
    have_bank = bank is not None and getattr(bank, "n_shelves", 0) > 0
    r_eq = shelf.droop / bank.n_shelves if have_bank else 1.0
    p = np.zeros(kernel.N_PARAMS)
    p[kernel.P_DT] = dt
    p[kernel.P_VNOM] = params.v_nom
    p[kernel.P_INVC] = 1.0 / params.c_bus
    p[kernel.P_ESR] = params.esr
    p[kernel.P_EDROOP] = kernel.droop_relaxation(r_eq, params.c_bus, dt)
    p[kernel.P_REQ] = r_eq
    p[kernel.P_VENG] = 0.4
    p[kernel.P_NDELAY] = max(1.0, round(params.dru_latency / dt))
    if have_bank:
        p[kernel.P_SLEWSTEP] = bank.n_shelves * shelf.conv_slew * dt
        p[kernel.P_PGATE] = bank.n_shelves * shelf.p_pk
        p[kernel.P_INVE36] = 1.0 / (bank.e_tot * 3600.0)
        p[kernel.P_SOCMIN] = bank.soc_min
        p[kernel.P_SOCMAX] = bank.soc_max
    else:
        p[kernel.P_SOCMAX] = 1.0
    p[kernel.P_THALPHA] = dt / 90.0
    p[kernel.P_PSST] = state.p_sst
    p[kernel.P_PCHGTGT] = state.p_chg
    p[kernel.P_CHGSTEP] = 0.0
    p[kernel.P_BLOWUPV] = BLOWUP_FRACTION * params.v_nom
    p[kernel.P_DRUON] = 1.0 if have_bank else 0.0
    p[kernel.P_CHGREF] = float("inf")

    ks = state._kernel_state(params.v_nom).copy()
    acc = kernel.new_acc(params.v_nom)
    load = np.array([p_load], dtype=np.float64)
    cap = np.zeros((2, kernel.CAPTURE_CHANNELS))
    status, done, _ = kernel.advance(ks, acc, p, load, 1, 0, 1, cap)
    if status == kernel.BLOWUP:
        raise RuntimeError(
            f"numeric blowup: deviation beyond {BLOWUP_FRACTION:.0%} of nominal"
        )
    new = RowState(
        v_bus=params.v_nom - float(ks[kernel.V_DEV]),
        t=state.t + dt,
        soc=float(ks[kernel.SOC]),
        p_dru=float(ks[kernel.P_DRU]),
        p_chg=float(ks[kernel.P_CHG]),
        p_sst=state.p_sst,
    )
    new.kstate = ks
    return new


def clamp_overvoltage(
    l_loop: float, di_dt: float, i_interrupted: float = 0.0
) -> tuple[float, float]:
    """(v_ov, e_clamp): turn-off overvoltage L*di/dt and clamp energy 0.5*L*i^2."""
    if l_loop <= 0:
        raise ValueError("l_loop must be positive")
    return l_loop * di_dt, 0.5 * l_loop * i_interrupted**2


def small_signal_pole(droop_eq: float, c_bus: float) -> tuple[float, float]:
    """(pole rad/s, 2%-settling time s) of the droop-stiffened bus.

    pole = (1/droop_eq) / c_bus; settling uses the first-order 4/omega rule.
    """
    if droop_eq <= 0 or c_bus <= 0:
        raise ValueError("droop_eq and c_bus must be positive")
    pole = (1.0 / droop_eq) / c_bus
    return pole, 4.0 / pole


@dataclass
class LogSegment:
    """A uniformly sampled stretch of waveform channels."""

    t: np.ndarray
    v_bus: np.ndarray
    p_load: np.ndarray
    dru_p: np.ndarray
    soc: np.ndarray
    r_up: np.ndarray
    r_dn: np.ndarray
    sst_p: np.ndarray
    pcc_p: np.ndarray
    p_chg: np.ndarray
    tier: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class WaveformLog:
    """Uniform main grid plus full-rate windows around events.

    ``main`` is the decimated (default 1 kHz) record covering the whole
    run; ``windows`` carry the electrical-rate samples around each marked
    disturbance so microsecond dips survive decimation. ``events`` is the
    ordered marker list (t, label, info). ``meta`` holds scenario/run
    metadata including the exact energy accumulators.
    """

    main: LogSegment
    windows: list[tuple[str, LogSegment]] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    aborted: bool = False
    abort_reason: str = ""

    @property
    def v_nom(self) -> float:
        return float(self.meta.get("v_nom", 800.0))

    def window_covering(self, t_event: float):
        """The full-rate segment containing t_event, if any."""
        for _, seg in self.windows:
            if seg.t[0] - 1e-12 <= t_event <= seg.t[-1] + 1e-12:
                return seg
        return None

    def marker_times(self, labels=None) -> list[dict]:
        if labels is None:
            return list(self.events)
        return [e for e in self.events if e["label"] in labels]

    def write_csv(self, path) -> None:
        """Main-grid CSV with the standard header; markers land on the
        nearest grid row."""
        _segment_csv(path, self.main, self.events)

    def write_window_csvs(self, out_dir) -> list[str]:
        import os

        paths = []
        for i, (label, seg) in enumerate(self.windows):
            p = os.path.join(out_dir, f"waveform_win{i:03d}_{label}.csv")
            _segment_csv(p, seg, [])
            paths.append(p)
        return paths

    def write_events_json(self, path) -> None:
        payload = {
            "events": self.events,
            "meta": {k: v for k, v in self.meta.items() if k != "branch_taps_v"},
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
        }

        def native(o):
            if hasattr(o, "item"):
                return o.item()
            if isinstance(o, (list, tuple)):
                return list(o)
            raise TypeError(f"not JSON-serializable: {type(o)}")

        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=native)
            f.write("\n")


def _segment_csv(path, seg: LogSegment, events: list[dict]) -> None:
    marks = {}
    if events and len(seg) > 1:
        dt = seg.dt
        for e in events:
            idx = int(round((e["t"] - seg.t[0]) / dt))
            if 0 <= idx < len(seg):
                marks[idx] = (marks.get(idx, "") + "|" + e["label"]).strip("|")
    with open(path, "w") as f:
        f.write(",".join(LOG_COLUMNS) + "\n")
        for i in range(len(seg)):
            f.write(
                f"{seg.t[i]:.9f},{seg.v_bus[i]:.6f},{seg.p_load[i]:.6f},"
                f"{seg.dru_p[i]:.6f},{seg.soc[i]:.9f},{seg.r_up[i]:.6f},"
                f"{seg.r_dn[i]:.6f},{seg.sst_p[i]:.6f},{seg.pcc_p[i]:.6f},"
                f"{seg.p_chg[i]:.6f},{int(seg.tier[i])},{marks.get(i, '')}\n"
            )


def read_waveform_csv(path) -> WaveformLog:
    """Load an exported (or external, pre-aligned) main-grid CSV."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"empty waveform file {path}")
    header = lines[0].split(",")
    if header != LOG_COLUMNS:
        raise ValueError(f"unexpected waveform header {header!r}; need {LOG_COLUMNS!r}")
    n = len(lines) - 1
    cols = np.empty((11, n))
    events: list[dict] = []
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(LOG_COLUMNS):
            raise ValueError(f"malformed row {i + 2} in {path}")
        for j in range(11):
            cols[j, i] = float(parts[j])
        if parts[-1]:
            for label in parts[-1].split("|"):
                events.append({"t": float(parts[0]), "label": label, "info": {}})
    seg = LogSegment(
        t=cols[0], v_bus=cols[1], p_load=cols[2], dru_p=cols[3], soc=cols[4],
        r_up=cols[5], r_dn=cols[6], sst_p=cols[7], pcc_p=cols[8], p_chg=cols[9],
        tier=cols[10].astype(int),
    )
    return WaveformLog(main=seg, events=events)

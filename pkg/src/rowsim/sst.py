"""MV-to-DC gateway model and PCC signature metrics.

The gateway regulates average power: a setpoint filtered through a long
first-order lag, a soft droop that adds damping (5-15x softer than the
bank droop), and a hard ramp limiter so the feeder only ever sees bounded
dP/dt. Import at the PCC is non-negative by construction; brief internal
reverse power is tolerated inside a bounded window to absorb clearing
overshoot, and is dumped internally rather than exported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_REVERSE_WINDOW_S = 0.2


@dataclass(frozen=True)
class SstSpec:
    p_rated: float           # kW, active capability (reserve unit excluded)
    tau: float = 2.0         # s, setpoint filter
    droop: float = 8e-3      # V/A, soft; engine validates 5-15x the bank r_eq
    ramp_cap: float = 0.0    # kW/s; 0 -> default 10% of rating per second
    n_units: int = 2         # one of these is the held-back redundant unit
    reverse_internal_ok: bool = True
    pcc_dpdt_cap: float = 0.0  # kW/s bound checked at the PCC; 0 -> ramp_cap
    efficiency: float = 0.98   # DC side to PCC, fixed scalar
    reverse_window: float = DEFAULT_REVERSE_WINDOW_S
    droop_filter: float = 1.0  # s; damping path is band-limited below the
    #                            PCC export band so it cannot leak there

    def __post_init__(self):
        if self.tau < 1.0:
            raise ValueError(f"tau {self.tau} s must be >= 1 s")
        if self.p_rated <= 0:
            raise ValueError("p_rated must be positive")
        if not (0 < self.efficiency <= 1):
            raise ValueError("efficiency must be in (0, 1]")
        if self.n_units < 1:
            raise ValueError("n_units must be >= 1")

    @property
    def ramp(self) -> float:
        return self.ramp_cap if self.ramp_cap > 0 else 0.1 * self.p_rated

    @property
    def pcc_ramp(self) -> float:
        return self.pcc_dpdt_cap if self.pcc_dpdt_cap > 0 else self.ramp


@dataclass
class SstState:
    p_filtered: float = 0.0   # filter state, kW
    p_out: float = 0.0        # DC-side output, kW
    p_pcc: float = 0.0        # measured at the PCC, import-positive, kW
    setpoint: float = 0.0     # allocator / energy-manager target, kW
    neg_elapsed: float = 0.0  # time spent with p_out < 0, s
    blocked: bool = False     # feeder lost / topology unconfirmed


def sst_power_command(
    state: SstState,
    spec: SstSpec,
    v_dev: float,
    dt: float,
    v_nom: float = 800.0,
) -> SstState:
    """Advance the gateway one control tick and return the new state.

    Filter toward the setpoint with time constant tau, add the soft droop
    response to the bus deviation, then clamp the change in output to
    ramp * dt. Negative output is allowed only transiently (and only when
    the unit rating permits it); past the window it clamps to zero.
    While blocked the output is forced to zero and the filter state is
    drained so a later restore re-ramps from zero.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.blocked:
        return SstState(
            p_filtered=0.0, p_out=0.0, p_pcc=0.0,
            setpoint=state.setpoint, neg_elapsed=0.0, blocked=True,
        )
    p_f = state.setpoint + (state.p_filtered - state.setpoint) * math.exp(-dt / spec.tau)
    v_bus = v_nom - v_dev
    raw = p_f + (v_dev / spec.droop) * v_bus / 1e3
    step = spec.ramp * dt
    p_out = min(max(raw, state.p_out - step), state.p_out + step)
    p_out = min(p_out, spec.p_rated)
    neg = state.neg_elapsed
    if p_out < 0.0:
        if not spec.reverse_internal_ok or neg >= spec.reverse_window:
            # window exhausted: clamp, and hold the timer so a persistent
            # negative command cannot re-open it before output recovers
            p_out = 0.0
        else:
            neg += dt
    else:
        neg = 0.0
    p_pcc = max(0.0, p_out) / spec.efficiency
    return SstState(
        p_filtered=p_f, p_out=p_out, p_pcc=p_pcc,
        setpoint=state.setpoint, neg_elapsed=neg, blocked=False,
    )


@dataclass(frozen=True)
class PccSignature:
    max_dpdt: float        # kW/s, numerically differentiated
    band_power: float      # normalized by mean import squared
    band_power_abs: float  # kW^2 (mean-square in the band)
    reverse_count: int
    max_import: float      # kW
    dominant_hz: float     # bin with the most band power, 0 if band empty


def band_power_abs(x: np.ndarray, dt: float, lo: float, hi: float):
    """Mean-square content of x in the [lo, hi] Hz band, plus dominant bin.

    A pure sinusoid of amplitude A inside the band reports A^2 / 2.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    spec = np.fft.rfft(x - x.mean())
    freqs = np.fft.rfftfreq(n, dt)
    mask = (freqs >= lo) & (freqs <= hi)
    amp2 = (2.0 * np.abs(spec[mask]) / n) ** 2 / 2.0
    total = float(amp2.sum())
    dom = float(freqs[mask][int(np.argmax(amp2))]) if mask.any() and total > 0 else 0.0
    return total, dom


def pcc_signature(
    t,
    p_pcc: np.ndarray = None,
    band_lo: float = 0.2,
    band_hi: float = 3.0,
) -> PccSignature:
    """Signature metrics of a PCC import record.

    Accepts either (t, p_pcc) arrays or a waveform log (its main grid is
    used). Requires a uniform time base sampled at >= 10 Hz over >= 10 s.
    """
    if p_pcc is None:
        seg = t.main  # a WaveformLog
        t, p_pcc = seg.t, seg.pcc_p
    t = np.asarray(t, dtype=float)
    p = np.asarray(p_pcc, dtype=float)
    if len(t) < 2 or t[-1] - t[0] < 10.0 - 1e-9:
        raise ValueError("log-too-short: need >= 10 s of PCC data")
    steps = np.diff(t)
    dt = float(steps[0])
    if not np.allclose(steps, dt, rtol=1e-6, atol=1e-9):
        raise ValueError("nonuniform-sampling in PCC channel")
    if dt > 0.1 + 1e-12:
        raise ValueError(f"PCC channel sampled at {1.0 / dt:.1f} Hz, need >= 10 Hz")
    dpdt = np.abs(np.diff(p)) / dt
    bp_abs, dom = band_power_abs(p, dt, band_lo, band_hi)
    mean = float(p.mean())
    norm = bp_abs / mean**2 if mean != 0 else (0.0 if bp_abs == 0 else math.inf)
    return PccSignature(
        max_dpdt=float(dpdt.max()) if len(dpdt) else 0.0,
        band_power=norm,
        band_power_abs=bp_abs,
        reverse_count=int((p < 0).sum()),
        max_import=float(p.max()),
        dominant_hz=dom,
    )

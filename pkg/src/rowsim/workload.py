"""Synthetic training-load traces.

Rows see step-dominant demand: a flat base with synchronized bursts 10-25%
above average, plateaus of 10-90 s, and sub-second edges. Racks do not all
step at the same instant; their edge onsets are correlated but jittered.
This module synthesizes those traces deterministically (envelope + seed)
and reports the surge energy behind one burst.

Phase annotations (compute / comms / idle) are carried explicitly on the
trace; they are scenario ground truth, never inferred from power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PHASE_COMPUTE = 0
PHASE_COMMS = 1
PHASE_IDLE = 2
PHASE_NAMES = {PHASE_COMPUTE: "compute", PHASE_COMMS: "comms", PHASE_IDLE: "idle"}

# design-envelope bounds enforced in "design" mode
ALPHA_BAND = (0.10, 0.25)
T_SURGE_BAND = (10.0, 90.0)
DT_EDGE_BAND = (0.1, 0.8)
PAR_BAND = (1.1, 1.25)
RHO_BAND = (0.2, 0.6)

DEFAULT_TRACE_DT = 1e-3  # edges are >= 100 ms; 1 ms resolves them 100x

# onset jitter span as a fraction of the edge rise time
_JITTER_SPAN_FRAC = 0.25


class EnvelopeError(ValueError):
    """Envelope parameter outside its allowed band."""


class HorizonError(ValueError):
    """Burst does not fit inside the requested horizon."""


@dataclass(frozen=True)
class WorkloadEnvelope:
    """Burst-process parameters for one row.

    Powers in kW, durations in s. ``mode="design"`` enforces the
    bands above; ``mode="free"`` allows any positive values.
    """

    p_avg: float
    alpha_max: float
    t_surge: float
    dt_edge: float
    par: float
    rho_corr: float
    idle_floor: float = 0.0
    n_racks: int = 25
    pdu_slew: float = 500.0  # kW/s per rack
    pdu_cap: float = 0.0     # kW per rack; 0 -> derived minimum
    mode: str = "design"

    def __post_init__(self):
        errors = self.validation_errors()
        if errors:
            raise EnvelopeError("; ".join(errors))

    def validation_errors(self) -> list[str]:
        e: list[str] = []
        if self.p_avg <= 0:
            e.append(f"p_avg {self.p_avg} kW must be positive")
        if self.n_racks < 1:
            e.append(f"n_racks {self.n_racks} must be >= 1")
        if not (0.0 <= self.idle_floor < 1.0):
            e.append(f"idle_floor {self.idle_floor} outside [0, 1)")
        if self.pdu_slew <= 0:
            e.append(f"pdu_slew {self.pdu_slew} kW/s must be positive")
        if self.alpha_max < 0:
            e.append(f"alpha_max {self.alpha_max} must be >= 0")
        if self.par < 1.0 + self.alpha_max - 1e-12:
            e.append(
                f"par {self.par} below 1 + alpha_max = {1.0 + self.alpha_max:g}; "
                "burst plateau would exceed the declared peak-to-average ratio"
            )
        if self.mode == "design" and self.alpha_max > 0:
            if not (ALPHA_BAND[0] <= self.alpha_max <= ALPHA_BAND[1]):
                e.append(
                    f"alpha_max {self.alpha_max} outside design band "
                    f"[{ALPHA_BAND[0]}, {ALPHA_BAND[1]}]"
                )
            if not (T_SURGE_BAND[0] <= self.t_surge <= T_SURGE_BAND[1]):
                e.append(
                    f"t_surge {self.t_surge} s outside design band "
                    f"[{T_SURGE_BAND[0]:g}, {T_SURGE_BAND[1]:g}] s"
                )
            if not (DT_EDGE_BAND[0] <= self.dt_edge <= DT_EDGE_BAND[1]):
                e.append(
                    f"dt_edge {self.dt_edge} s outside design band "
                    f"[{DT_EDGE_BAND[0]:g}, {DT_EDGE_BAND[1]:g}] s"
                )
            if not (PAR_BAND[0] <= self.par <= PAR_BAND[1]):
                e.append(f"par {self.par} outside design band [{PAR_BAND[0]}, {PAR_BAND[1]}]")
            if not (RHO_BAND[0] <= self.rho_corr <= RHO_BAND[1]):
                e.append(
                    f"rho_corr {self.rho_corr} outside design band "
                    f"[{RHO_BAND[0]}, {RHO_BAND[1]}]"
                )
        else:
            if self.t_surge < 0 or self.dt_edge < 0:
                e.append("t_surge and dt_edge must be >= 0")
            if not (0.0 <= self.rho_corr <= 1.0):
                e.append(f"rho_corr {self.rho_corr} outside [0, 1]")
        if self.pdu_cap > 0:
            need = self.p_avg * (1.0 + self.alpha_max) / self.n_racks
            if self.pdu_cap < need - 1e-9:
                e.append(
                    f"pdu_cap {self.pdu_cap} kW below per-rack burst peak {need:.3f} kW"
                )
        # each rack's burst edge must be achievable under its PDU slew cap
        if self.alpha_max > 0 and self.dt_edge > 0:
            rack_ramp = self.alpha_max * self.p_avg / self.n_racks / self.dt_edge
            if rack_ramp > self.pdu_slew + 1e-9:
                e.append(
                    f"per-rack edge ramp {rack_ramp:.3f} kW/s exceeds pdu_slew "
                    f"{self.pdu_slew} kW/s"
                )
        return e


@dataclass
class LoadTrace:
    """Sampled row demand. ``samples`` in kW on a uniform ``dt`` grid."""

    dt: float
    samples: np.ndarray
    seed: int
    phases: np.ndarray = field(default=None)  # int8 codes, same length

    def __post_init__(self):
        if self.phases is None:
            self.phases = np.zeros(len(self.samples), dtype=np.int8)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("t_s,p_kw,phase\n")
            for i, p in enumerate(self.samples):
                f.write(f"{i * self.dt:.6f},{p:.6f},{PHASE_NAMES[int(self.phases[i])]}\n")


def rack_onsets(envelope: WorkloadEnvelope, burst_start: float, rng) -> np.ndarray:
    """Per-rack edge onset times for one burst.

    Onsets are ``burst_start`` plus a shared-plus-private uniform mixture:
    jitter_r = (sqrt(rho) * u0 + sqrt(1 - rho) * u_r) * span, with u0 drawn
    once per burst and u_r per rack. Across repeated bursts the pairwise
    onset correlation is exactly rho by construction; the span is kept at a
    quarter of the edge rise time so the aggregate edge stays sharp.
    """
    span = _JITTER_SPAN_FRAC * envelope.dt_edge
    rho = envelope.rho_corr
    u0 = rng.random()
    ur = rng.random(envelope.n_racks)
    jitter = (math.sqrt(rho) * u0 + math.sqrt(1.0 - rho) * ur) * span
    return burst_start + jitter


def _rack_burst_traces(
    envelope: WorkloadEnvelope,
    n_samples: int,
    dt: float,
    burst_start: float,
    plateau_end: float,
    rng,
) -> np.ndarray:
    """(n_racks, n_samples) overage above each rack's base, in kW.

    Each rack ramps linearly over dt_edge from its onset, plateaus at
    alpha_max * base, and ramps back down over dt_edge after plateau_end.
    """
    onsets = rack_onsets(envelope, burst_start, rng)
    t = np.arange(n_samples) * dt
    base = envelope.p_avg / envelope.n_racks
    dp = envelope.alpha_max * base
    edge = max(envelope.dt_edge, dt)
    out = np.zeros((envelope.n_racks, n_samples))
    for r in range(envelope.n_racks):
        up = np.clip((t - onsets[r]) / edge, 0.0, 1.0)
        down = np.clip((t - plateau_end) / edge, 0.0, 1.0)
        out[r] = dp * (up - down)
    return out


def synth_step_burst(
    envelope: WorkloadEnvelope,
    t_total: float,
    burst_start: float,
    seed: int,
    dt: float = DEFAULT_TRACE_DT,
    return_racks: bool = False,
):
    """One synchronized step burst on a flat base.

    The aggregate rises over ~dt_edge starting at burst_start, plateaus at
    p_avg * (1 + alpha_max) until burst_start + t_surge, then ramps back
    down over dt_edge. The aggregate is the exact per-rack sum.
    """
    if envelope.alpha_max > 0 and burst_start + envelope.t_surge > t_total + 1e-9:
        raise HorizonError(
            f"burst_start {burst_start} s + t_surge {envelope.t_surge} s "
            f"exceeds horizon {t_total} s"
        )
    n = int(round(t_total / dt))
    per_rack = np.full((envelope.n_racks, n), envelope.p_avg / envelope.n_racks)
    if envelope.alpha_max > 0:
        rng = np.random.default_rng([seed, 0])
        per_rack += _rack_burst_traces(
            envelope, n, dt, burst_start, burst_start + envelope.t_surge, rng
        )
    # the aggregate IS the rack sum, so the two agree bit for bit
    trace = LoadTrace(dt=dt, samples=per_rack.sum(axis=0), seed=seed)
    if return_racks:
        return trace, per_rack
    return trace


def synth_burst_train(
    envelope: WorkloadEnvelope,
    period: float,
    duty: float,
    n_bursts: int,
    seed: int,
    dt: float = DEFAULT_TRACE_DT,
) -> LoadTrace:
    """A train of n_bursts bursts of width period*duty spaced by period.

    The per-period mean is p_avg * (1 + alpha_max * duty): the up and down
    edge ramps contribute half a triangle each, cancelling exactly.
    """
    if not (0.0 < duty <= 1.0):
        raise ValueError(f"duty {duty} outside (0, 1]")
    if n_bursts < 1:
        raise ValueError("n_bursts must be >= 1")
    width = period * duty
    if width < envelope.dt_edge - 1e-12:
        raise HorizonError(
            f"burst width {width:.3f} s shorter than edge rise {envelope.dt_edge} s"
        )
    t_total = n_bursts * period
    n = int(round(t_total / dt))
    per_rack = np.full((envelope.n_racks, n), envelope.p_avg / envelope.n_racks)
    if envelope.alpha_max > 0:
        overage = np.zeros_like(per_rack)
        for b in range(n_bursts):
            rng = np.random.default_rng([seed, b])
            start = b * period
            racks = _rack_burst_traces(envelope, n, dt, start, start + width, rng)
            # overlapping tails (duty -> 1) merge rather than stack
            overage = np.maximum(overage, racks)
        per_rack += overage
    return LoadTrace(dt=dt, samples=per_rack.sum(axis=0), seed=seed)


def surge_energy(envelope: WorkloadEnvelope) -> float:
    """Energy behind one worst-case surge, kWh: alpha_max * p_avg * t_surge."""
    return envelope.alpha_max * envelope.p_avg * envelope.t_surge / 3600.0

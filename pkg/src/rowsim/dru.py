"""Fast storage bank: droop-controlled, slew-limited, SoC-gated.

The bank is N identical shelves in parallel. Its droop law converts bus
deviation to a current command through r_eq = droop / N, then power is
clipped by the per-step slew cap, the pulse power gate, and the SoC energy
gates, and finally tracked through a first-order inner loop.

Reserve accounting follows the mid-band convention: usable injection
energy is measured above soc_min, absorption headroom below soc_max, and
seconds-scale reserve rates divide those energies by the design window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .workload import WorkloadEnvelope

THERMAL_WINDOW_S = 90.0  # matches the continuous-rating window


class IntegratorFault(RuntimeError):
    """SoC left [0, 1]; the gates should have prevented this."""


@dataclass(frozen=True)
class ShelfSpec:
    """One shelf. Powers kW, energy kWh, droop V/A, slew kW/s, loop_bw Hz.

    ``slew`` is the sustained load-following rating that enters the sizing
    gates (it must clear the worst envelope edge). ``conv_slew`` is the
    power stage's tracking capability through its local filter caps, one
    to two orders faster; the electrical engine limits the instantaneous
    output trajectory with it.
    """

    p_pk: float = 40.0      # pulse rating (40 s class)
    p_cont: float = 24.0    # continuous rating (90 s class)
    e_use: float = 0.6      # usable energy
    droop: float = 10e-3    # 10 mV/A per shelf
    slew: float = 250.0
    loop_bw: float = 80e3   # inner current loop; see tune_droop for why this high
    conv_slew: float = 2e6  # converter-level, ~rating per loop period

    def __post_init__(self):
        if not (self.p_pk >= self.p_cont > 0):
            raise ValueError(f"need p_pk >= p_cont > 0, got ({self.p_pk}, {self.p_cont})")
        if self.e_use <= 0 or self.droop <= 0 or self.slew <= 0:
            raise ValueError("e_use, droop and slew must be positive")
        if self.loop_bw < 1000.0:
            raise ValueError(f"loop_bw {self.loop_bw} Hz below the kHz-class floor")
        if self.conv_slew < self.slew:
            raise ValueError("conv_slew cannot be below the sustained slew rating")


@dataclass
class DruBankState:
    """Bank state. p_out is net output: +injection / -absorption, kW."""

    n_shelves: int
    soc: float
    soc_min: float = 0.5
    soc_max: float = 0.8
    p_out: float = 0.0
    thermal_window_avg: float = 0.0
    t_star: float = 90.0  # design window for reserve rates; scenario-set
    e_use: float = 0.6    # per shelf, kWh (duplicated here so e_tot is derivable)

    def __post_init__(self):
        if not (0 <= self.soc <= 1):
            raise ValueError(f"soc {self.soc} outside [0, 1]")
        if not (self.soc_min < self.soc_max):
            raise ValueError("soc_min must be < soc_max")
        if self.t_star <= 0:
            raise ValueError("t_star must be positive")

    @property
    def e_tot(self) -> float:
        """Total usable energy, kWh."""
        return self.n_shelves * self.e_use


def r_eq(state: DruBankState, spec: ShelfSpec) -> float:
    """Aggregate droop of N parallel shelves, V/A."""
    return spec.droop / state.n_shelves


def dru_power_command(
    v_dev: float,
    state: DruBankState,
    spec: ShelfSpec,
    dt: float,
    v_nom: float = 800.0,
) -> float:
    """One droop-loop step: the bank's new output power in kW.

    v_dev is the bus deviation from nominal (positive on a dip). The raw
    command is the droop current v_dev / r_eq converted to power at the
    present bus voltage, then limited in order by the per-step slew cap,
    the pulse power gate, the SoC energy gates, and the inner-loop lag.
    Saturation clamps; it never raises.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_bus = v_nom - v_dev
    target = v_bus * (v_dev / r_eq(state, spec)) / 1e3  # kW
    slew_step = state.n_shelves * spec.slew * dt
    target = min(max(target, state.p_out - slew_step), state.p_out + slew_step)
    gate = state.n_shelves * spec.p_pk
    target = min(max(target, -gate), gate)
    if state.soc <= state.soc_min and target > 0:
        target = 0.0
    if state.soc >= state.soc_max and target < 0:
        target = 0.0
    alpha = 1.0 - math.exp(-2.0 * math.pi * spec.loop_bw * dt)
    p_new = state.p_out + alpha * (target - state.p_out)
    # the energy gate binds the physical output, not just the target
    if state.soc <= state.soc_min and p_new > 0:
        p_new = 0.0
    if state.soc >= state.soc_max and p_new < 0:
        p_new = 0.0
    return p_new


def step_soc(state: DruBankState, dt: float) -> DruBankState:
    """Integrate SoC one step: soc' = soc - p_out * dt / e_tot.

    Also advances the 90 s thermal window mean of |p_out| (first-order
    running-mean approximation). Raises IntegratorFault if soc leaves
    [0, 1] -- that is a sizing or gating bug upstream, never silent.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    soc_new = state.soc - state.p_out * dt / (state.e_tot * 3600.0)
    if not (-1e-9 <= soc_new <= 1.0 + 1e-9):
        raise IntegratorFault(
            f"soc {soc_new:.6f} left [0, 1] at p_out={state.p_out} kW"
        )
    frac = min(1.0, dt / THERMAL_WINDOW_S)
    th = state.thermal_window_avg + (abs(state.p_out) - state.thermal_window_avg) * frac
    return replace(state, soc=min(max(soc_new, 0.0), 1.0), thermal_window_avg=th)


def reserves(state: DruBankState, spec: ShelfSpec) -> tuple[float, float, float, float]:
    """(r_up kW, r_dn kW, e_up kWh, e_dn kWh).

    e_up = (soc - soc_min) * e_tot, e_dn = (soc_max - soc) * e_tot;
    rates are energy over the design window t_star, capped by the power
    gate. e_up + e_dn == (soc_max - soc_min) * e_tot identically.
    """
    e_tot = state.e_tot
    e_up = (state.soc - state.soc_min) * e_tot
    e_dn = (state.soc_max - state.soc) * e_tot
    gate = state.n_shelves * spec.p_pk
    r_up = min(gate, e_up * 3600.0 / state.t_star)
    r_dn = min(gate, e_dn * 3600.0 / state.t_star)
    return r_up, r_dn, e_up, e_dn


@dataclass(frozen=True)
class GateReport:
    """Static design-gate evaluation. Margins are capability/requirement."""

    power_ok: bool
    energy_ok: bool
    thermal_ok: bool
    slew_ok: bool
    power_margin: float
    energy_margin: float
    thermal_margin: float
    slew_margin: float

    @property
    def all_ok(self) -> bool:
        return self.power_ok and self.energy_ok and self.thermal_ok and self.slew_ok


def gates_check(
    envelope: WorkloadEnvelope, state: DruBankState, spec: ShelfSpec
) -> GateReport:
    """Evaluate the four bank gates against a workload envelope.

    power:   N * p_pk      >= alpha_max * p_avg
    energy:  N * e_use     >= alpha_max * p_avg * t_surge
    thermal: duty-weighted mean discharge <= N * p_cont, with the duty of
             one surge over the thermal window
    slew:    N * slew      >= alpha_max * p_avg / dt_edge
    Zero-overage envelopes report infinite margins.
    """
    n = state.n_shelves
    dp = envelope.alpha_max * envelope.p_avg
    if dp <= 0:
        inf = math.inf
        return GateReport(True, True, True, True, inf, inf, inf, inf)
    de = dp * envelope.t_surge / 3600.0  # kWh
    power_margin = n * spec.p_pk / dp
    energy_margin = (n * spec.e_use / de) if de > 0 else math.inf
    duty_mean = dp * min(envelope.t_surge, THERMAL_WINDOW_S) / THERMAL_WINDOW_S
    thermal_margin = n * spec.p_cont / duty_mean if duty_mean > 0 else math.inf
    slew_need = dp / envelope.dt_edge if envelope.dt_edge > 0 else math.inf
    slew_margin = (n * spec.slew / slew_need) if math.isfinite(slew_need) else 0.0
    if envelope.dt_edge <= 0:
        # instantaneous edges are covered by bus capacitance, not bank slew
        slew_margin = math.inf
    return GateReport(
        power_ok=power_margin >= 1.0,
        energy_ok=energy_margin >= 1.0,
        thermal_ok=thermal_margin >= 1.0,
        slew_ok=slew_margin >= 1.0,
        power_margin=power_margin,
        energy_margin=energy_margin,
        thermal_margin=thermal_margin,
        slew_margin=slew_margin,
    )

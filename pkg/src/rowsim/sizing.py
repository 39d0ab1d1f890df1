"""Design synthesis: bank population, bus capacitance, bridge energy, droop.

Four inequalities size the row. The bank count must clear both the pulse
power gate and the surge energy gate (with a lifecycle factor on top); the
bus capacitance must hold the first dip over the engagement latency; the
bridge energy must cover the longest reconfiguration gap; and the droop
must place the composite pole fast enough for a 1%-band return inside the
recovery budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dru import DruBankState, ShelfSpec, gates_check
from .workload import WorkloadEnvelope

SETTLE_1PCT = 4.6  # ln(100): first-order 1%-settling constant
DEFAULT_LIFECYCLE = 1.25


class InfeasibleDesign(ValueError):
    pass


@dataclass(frozen=True)
class SizingReport:
    n_required: int
    c_bus_required: float      # F
    pole: float                # rad/s
    predicted_recovery: float  # s
    bridge_energy: float       # kWh
    gate_margins: dict
    lifecycle_factor: float

    @property
    def passing(self) -> bool:
        return all(m >= 1.0 for m in self.gate_margins.values())

    def to_dict(self) -> dict:
        return {
            "n_required": self.n_required,
            "c_bus_required_f": self.c_bus_required,
            "pole_rad_s": self.pole,
            "predicted_recovery_s": self.predicted_recovery,
            "bridge_energy_kwh": self.bridge_energy,
            "gate_margins": {k: v for k, v in sorted(self.gate_margins.items())},
            "lifecycle_factor": self.lifecycle_factor,
            "passing": self.passing,
        }


def size_dru_count(
    envelope: WorkloadEnvelope, shelf: ShelfSpec, lifecycle: float = 1.0
) -> int:
    """Smallest shelf count clearing the power and energy gates.

    N = ceil(lifecycle * max(dp / p_pk, dp * t_surge / e_use)) with
    dp = alpha_max * p_avg and the energy term in kWh.
    """
    dp = envelope.alpha_max * envelope.p_avg
    if dp <= 0:
        return 1
    by_power = dp / shelf.p_pk
    by_energy = dp * envelope.t_surge / 3600.0 / shelf.e_use
    n = math.ceil(lifecycle * max(by_power, by_energy) - 1e-9)
    return max(n, 1)


def size_bus_capacitance(
    dp_max: float, v_bus: float, latency: float, dv_frac: float
) -> float:
    """Capacitance (F) holding a dp_max (kW) step to dv_frac over latency (s)."""
    if min(dp_max, v_bus, latency, dv_frac) < 0 or v_bus <= 0 or dv_frac <= 0:
        raise ValueError("v_bus and dv_frac must be positive, others non-negative")
    i_step = dp_max * 1e3 / v_bus
    return i_step * latency / (dv_frac * v_bus)


def size_bridge(p_row: float, t_bridge: float) -> float:
    """Energy (kWh) to carry p_row (kW) across a t_bridge (s) gap."""
    if p_row < 0 or t_bridge < 0:
        raise ValueError("p_row and t_bridge must be non-negative")
    return p_row * t_bridge / 3600.0


def tune_droop(
    c_bus: float, target_recovery: float, shelf: ShelfSpec, n: int
) -> tuple[float, float, float]:
    """(r_eq, pole, predicted_recovery) for N shelves on c_bus.

    Recovery uses the 1%-settling constant 4.6/pole. Raises
    InfeasibleDesign when the pole cannot meet the target.
    """
    if c_bus <= 0 or target_recovery <= 0 or n < 1:
        raise ValueError("c_bus, target_recovery and n must be positive")
    r = shelf.droop / n
    pole = (1.0 / r) / c_bus
    recovery = SETTLE_1PCT / pole
    if recovery > target_recovery:
        raise InfeasibleDesign(
            f"predicted recovery {recovery * 1e3:.3f} ms exceeds target "
            f"{target_recovery * 1e3:.3f} ms at r_eq={r:g} V/A, c_bus={c_bus:g} F"
        )
    return r, pole, recovery


def build_report(
    envelope: WorkloadEnvelope,
    shelf: ShelfSpec,
    v_nom: float = 800.0,
    latency: float = 75e-6,
    dv_frac: float = 0.02,
    t_bridge: float = 3.0,
    target_recovery: float = 0.05,
    lifecycle: float = DEFAULT_LIFECYCLE,
    soc_mid: float = 0.65,
) -> SizingReport:
    """Full bill of constraints for one envelope + shelf choice."""
    n = size_dru_count(envelope, shelf, lifecycle)
    dp = envelope.alpha_max * envelope.p_avg
    c = size_bus_capacitance(dp if dp > 0 else envelope.p_avg, v_nom, latency, dv_frac)
    r, pole, recovery = tune_droop(c, target_recovery, shelf, n)
    state = DruBankState(n_shelves=n, soc=soc_mid, e_use=shelf.e_use)
    gates = gates_check(envelope, state, shelf)
    margins = {
        "power": gates.power_margin,
        "energy": gates.energy_margin,
        "thermal": gates.thermal_margin,
        "slew": gates.slew_margin,
        "recovery": target_recovery / recovery if recovery > 0 else math.inf,
    }
    return SizingReport(
        n_required=n,
        c_bus_required=c,
        pole=pole,
        predicted_recovery=recovery,
        bridge_energy=size_bridge(envelope.p_avg, t_bridge),
        gate_margins=margins,
        lifecycle_factor=lifecycle,
    )

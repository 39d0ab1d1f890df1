"""Electrical inner-loop backend selection.

The per-substep loop runs millions of iterations per scenario, so it ships
as a compiled extension (rowsim._kernel, Cython) with a pure-Python twin
(rowsim._kernel_py) selected at import when the extension is missing. Both
implement the same contract, in the same operation order, on the same
float64 state vectors, so results agree bit for bit.

State vector (float64[14]):
    0 V_DEV      bus deviation v_nom - v_cap, V (positive on a dip)
    1 I_DRU      bank injection current, A
    2 P_DRU      bank droop-channel power, kW
    3 SOC        bank state of charge
    4 P_CHG      recharge sink, kW
    5 TH_AVG     90 s thermal window mean of |net bank power|, kW
    6 ENABLED    droop loop live (latched)
    7 ARMED      engagement delay counting down
    8 DELAY_LEFT substeps until the loop engages
    9 FAULT_ON   fault draw active
   10 T_FAULT    time since fault start, s
   11 I_PROSP    prospective fault current, A
   12 TAU_INV    1/tau of the fault-current exponential, 1/s
   13 (spare)

Accumulators (float64[10]): E_LOAD, E_SST, E_CHG, E_DRU, E_FAULT (kW*s),
E_ESR (kW*s), V_MIN, V_MAX (V), spares.

Params (float64[24]): DT, V_NOM, INV_C, ESR, E_DROOP, R_EQ, (3 spare),
V_ENG, N_DELAY, SLEW_STEP, P_GATE, SOC_MIN, SOC_MAX, INV_E36, TH_ALPHA,
P_SST, P_CHG_TGT, CHG_STEP, BLOWUP_V, DRU_ON, CHG_REF.

Integration scheme: the droop-stiffened bus is a first-order system with
pole 1/(r_eq * C), which sits well above the substep rate, so the
unclamped update uses the exact relaxation v' = E v + (1 - E) r_eq u with
E = exp(-dt / (r_eq C)). The bank's inner current loop is one to two
orders faster than a substep and is folded into the engagement delay
rather than resolved. When a clamp binds (slew, power gate, energy gate)
the bank current is pinned and the capacitor integrates trapezoidally,
which is stable because the pinned current changes by at most one slew
step per substep.
"""

from __future__ import annotations

import math

import numpy as np

N_STATE = 14
N_ACC = 10
N_PARAMS = 24
CAPTURE_CHANNELS = 4  # v_bus, p_dru, soc, p_chg

# status codes returned by advance()
OK = 0
BLOWUP = 1
SOC_FAULT = 2

# state indices
V_DEV, I_DRU, P_DRU, SOC, P_CHG, TH_AVG = 0, 1, 2, 3, 4, 5
ENABLED, ARMED, DELAY_LEFT = 6, 7, 8
FAULT_ON, T_FAULT, I_PROSP, TAU_INV, DISPLACED = 9, 10, 11, 12, 13

# accumulator indices
E_LOAD, E_SST, E_CHG, E_DRU, E_FAULT, E_ESR, V_MIN, V_MAX = range(8)

# param indices
(P_DT, P_VNOM, P_INVC, P_ESR, P_EDROOP, P_REQ, P_SPARE1, P_SPARE2, P_SPARE3,
 P_SPARE4, P_VENG, P_NDELAY, P_SLEWSTEP, P_PGATE, P_SOCMIN, P_SOCMAX,
 P_INVE36, P_THALPHA, P_PSST, P_PCHGTGT, P_CHGSTEP, P_BLOWUPV, P_DRUON,
 P_CHGREF) = range(24)

try:
    from . import _kernel as _impl

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from . import _kernel_py as _impl

    BACKEND = "python"

advance = _impl.advance


def available_backends():
    out = {}
    try:
        from . import _kernel

        out["compiled"] = _kernel.advance
    except ImportError:
        pass
    from . import _kernel_py

    out["python"] = _kernel_py.advance
    return out


def droop_relaxation(r_eq: float, c_bus: float, dt: float) -> float:
    """Exact per-substep relaxation factor of the droop-stiffened bus.

    With an algebraic droop i = v_dev / r_eq on capacitance C and a net
    draw u held constant over the substep, the deviation obeys
    v' = E v + (1 - E) r_eq u with E = exp(-dt / (r_eq C)).
    """
    return math.exp(-dt / (r_eq * c_bus))


def new_state() -> np.ndarray:
    return np.zeros(N_STATE, dtype=np.float64)


def new_acc(v_nom: float) -> np.ndarray:
    acc = np.zeros(N_ACC, dtype=np.float64)
    acc[V_MIN] = v_nom
    acc[V_MAX] = v_nom
    return acc

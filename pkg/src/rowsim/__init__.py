"""Row-scale DC bus simulator and waveform contract verifier."""

from .bus import (
    BusParams,
    RowState,
    WaveformLog,
    clamp_overvoltage,
    read_waveform_csv,
    small_signal_pole,
    step_bus,
)
from .dru import DruBankState, ShelfSpec, dru_power_command, gates_check, reserves, step_soc
from .engine import simulate
from .flisr import (
    LoopTopology,
    PodConfig,
    bridge_check,
    flisr_reconfigure,
    oversubscription_check,
    pod_allocate,
    segment_current,
)
from .kernel import BACKEND
from .protection import (
    FaultEvent,
    ProtectionConfig,
    TripRecord,
    detect_and_trip,
    grading_audit,
    imd_island,
    precharge_check,
)
from .recharge import FrpState, RechargeConfig, admission_step, recharge_command, tier_step, urgency_scale
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario
from .sizing import build_report, size_bridge, size_bus_capacitance, size_dru_count, tune_droop
from .sst import SstSpec, SstState, pcc_signature, sst_power_command
from .verifier import ComplianceReport, ContractLimits, estimate_phase_margin, verify
from .workload import LoadTrace, WorkloadEnvelope, surge_energy, synth_burst_train, synth_step_burst

__version__ = "0.1.0"

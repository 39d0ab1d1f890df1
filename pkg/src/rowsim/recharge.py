"""Valley-following recharge admission and the tiered fallback ladder.

Recharge restores bank headroom only when it cannot be noticed: demand
must sit below the flat average with a safety margin, feeder headroom must
exist, reserve floors must be intact, and communication-heavy phases are
blacked out so synchronized dips are never mistaken for valleys. Entry and
exit are hysteretic in SoC; any veto cuts the command immediately.

The coordination ladder degrades deterministically: Tier 2 (full networked
response) -> Tier 1 (scheduled coordination) -> Tier 0 (autonomous analog,
fixed droops, no recharge). Communication loss or clock drift drops to
Tier 0 on the same tick; restoration re-enters softly after a dwell.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .workload import PHASE_COMMS

CLOCK_SKEW_LIMIT_S = 10e-3
COMMIT_AGE_LIMIT_S = 1e-3
REENTRY_DWELL_S = 5.0
HEARTBEAT_MAX_AGE_S = 2.0

# admission filter windows: iteration / phase / job
VALLEY_WINDOWS_S = (10.0, 60.0, 600.0)


class Tier(enum.IntEnum):
    TIER0 = 0
    TIER1 = 1
    TIER2 = 2


class Veto(str, enum.Enum):
    REACHED_L2 = "reached_l2"
    FLOOR_VIOLATION = "floor_violation"
    HEADROOM_LOSS = "headroom_loss"
    TOPOLOGY_CHANGE = "topology_change"
    LOCAL_FAULT = "local_fault"
    COMMS_PHASE = "comms_phase"
    REDUNDANCY_ACTIVE = "redundancy_active"


@dataclass(frozen=True)
class RechargeConfig:
    l1: float = 0.55          # entry SoC threshold
    l2: float = 0.80          # exit SoC threshold
    r_safety: float = 50.0    # kW fixed margin below the flat average
    ramp_cap: float = 50.0    # kW/s per row
    comms_blackout: bool = True
    urgency_soc: float = 0.55  # critical band start
    urgency_gain: float = 2.0
    soc_min: float = 0.5       # bank floor the urgency band ends at

    def __post_init__(self):
        if not (self.l1 < self.l2):
            raise ValueError(f"need l1 < l2, got ({self.l1}, {self.l2})")
        if self.ramp_cap <= 0 or self.ramp_cap > 50.0 + 1e-9:
            raise ValueError(
                f"ramp_cap {self.ramp_cap} kW/s outside (0, 50] kW/s per row"
            )
        if self.urgency_gain < 1.0:
            raise ValueError("urgency_gain must be >= 1")


@dataclass
class FrpState:
    tier: Tier = Tier.TIER2
    comm_ok: bool = True
    clock_skew: float = 0.0        # s
    last_command_age: float = 0.0  # s
    recharge_active: bool = False
    p_chg: float = 0.0             # kW, >= 0
    reentry_elapsed: float = 0.0   # s since comm restored, while re-entering


@dataclass(frozen=True)
class TickEvents:
    """Control-plane observations delivered at one tick."""

    comm_ok: bool = True
    clock_skew: float = 0.0
    command_age: float = 0.0
    allocator_heartbeat_age: float = 0.0


def recharge_command(
    p_avg: float,
    p_load: float,
    h_mv: float,
    floors_ok: bool,
    cfg: RechargeConfig,
    active: bool = True,
) -> float:
    """The valley law: max(0, min(h_mv, p_avg - p_load - r_safety)).

    Returns 0 unless admission is active and floors are intact. The engine
    rate-limits the result with cfg.ramp_cap downstream.
    """
    if min(p_avg, p_load, h_mv) < 0:
        raise ValueError("powers must be non-negative")
    if not (floors_ok and active):
        return 0.0
    return max(0.0, min(h_mv, p_avg - p_load - cfg.r_safety))


def admission_step(
    soc: float,
    phase: int,
    v_dev: float,
    floors_ok: bool,
    cfg: RechargeConfig,
    active: bool,
    mv_event: bool = False,
    local_fault: bool = False,
    redundancy_active: bool = False,
) -> tuple[bool, Optional[Veto]]:
    """Advance the hysteretic admission flag; returns (active', veto).

    Entry needs soc < l1, a non-comms phase (when blackout is on), intact
    floors, and no pending MV event. Exit fires at l2 or instantly on any
    veto. Because entry requires soc < l1 < l2, the flag cannot chatter
    inside one traversal of [l1, l2].
    """
    if not (0.0 <= soc <= 1.0):
        raise ValueError(f"soc {soc} outside [0, 1]")
    if active:
        if mv_event:
            return False, Veto.TOPOLOGY_CHANGE
        if local_fault:
            return False, Veto.LOCAL_FAULT
        if redundancy_active:
            return False, Veto.REDUNDANCY_ACTIVE
        if not floors_ok:
            return False, Veto.FLOOR_VIOLATION
        if cfg.comms_blackout and phase == PHASE_COMMS:
            return False, Veto.COMMS_PHASE
        if soc >= cfg.l2:
            return False, Veto.REACHED_L2
        return True, None
    enter = (
        soc < cfg.l1
        and floors_ok
        and not mv_event
        and not local_fault
        and not redundancy_active
        and not (cfg.comms_blackout and phase == PHASE_COMMS)
    )
    return enter, None


def urgency_scale(soc: float, cfg: RechargeConfig) -> float:
    """1.0 above the critical band, rising linearly to urgency_gain at the
    bank floor. Scales the requested recharge before headroom clamping."""
    if not (0.0 <= soc <= 1.0):
        raise ValueError(f"soc {soc} outside [0, 1]")
    if soc >= cfg.urgency_soc:
        return 1.0
    span = cfg.urgency_soc - cfg.soc_min
    if span <= 0:
        return cfg.urgency_gain
    frac = min(1.0, (cfg.urgency_soc - soc) / span)
    return 1.0 + frac * (cfg.urgency_gain - 1.0)


def commit_accepted(one_way_latency: float) -> bool:
    """Reserve commits act only inside the 1 ms one-way budget."""
    return one_way_latency <= COMMIT_AGE_LIMIT_S


def tier_step(state: FrpState, events: TickEvents, dt: float) -> FrpState:
    """Advance the tier ladder one control tick.

    Loss of comms or clock skew beyond 10 ms forces Tier 0 the same tick
    (fixed droops, conservative floors, no recharge). After restoration
    the plane dwells 5 s before re-entering Tier 1; Tier 2 additionally
    needs a fresh allocator heartbeat.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    healthy = events.comm_ok and events.clock_skew <= CLOCK_SKEW_LIMIT_S
    if not healthy:
        return replace(
            state,
            tier=Tier.TIER0,
            comm_ok=events.comm_ok,
            clock_skew=events.clock_skew,
            last_command_age=events.command_age,
            recharge_active=False,
            p_chg=0.0,
            reentry_elapsed=0.0,
        )
    if state.tier == Tier.TIER0:
        elapsed = state.reentry_elapsed + dt
        tier = Tier.TIER0 if elapsed < REENTRY_DWELL_S else Tier.TIER1
        return replace(
            state,
            tier=tier,
            comm_ok=True,
            clock_skew=events.clock_skew,
            last_command_age=events.command_age,
            reentry_elapsed=0.0 if tier != Tier.TIER0 else elapsed,
            recharge_active=state.recharge_active if tier != Tier.TIER0 else False,
            p_chg=state.p_chg if tier != Tier.TIER0 else 0.0,
        )
    tier = (
        Tier.TIER2
        if events.allocator_heartbeat_age <= HEARTBEAT_MAX_AGE_S
        else Tier.TIER1
    )
    return replace(
        state,
        tier=tier,
        comm_ok=True,
        clock_skew=events.clock_skew,
        last_command_age=events.command_age,
        reentry_elapsed=0.0,
    )

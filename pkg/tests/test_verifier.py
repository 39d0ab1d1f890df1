"""Contract verifier checks against closed-form synthetic waveforms."""

import math

import numpy as np
import pytest

from rowsim.bus import LogSegment, WaveformLog
from rowsim.verifier import (
    ComplianceReport,
    ContractLimits,
    VerifierError,
    bridging_windows,
    check_energy,
    check_oscillation,
    check_reserves_and_pcc,
    check_steady,
    check_transient,
    estimate_phase_margin,
    fit_damping,
    pm_from_damping,
    pm_linearized,
    verify,
)

LIMITS = ContractLimits(floor_r_up=10.0, floor_r_dn=2.0)
V_NOM = 800.0


def make_log(t, v, events=(), p_load=None, pcc=None, sst=None, dru=None,
             p_chg=None, r_up=None, r_dn=None, windows=(), meta=None):
    n = len(t)
    seg = LogSegment(
        t=np.asarray(t, dtype=float),
        v_bus=np.asarray(v, dtype=float),
        p_load=np.full(n, 1000.0) if p_load is None else np.asarray(p_load, float),
        dru_p=np.zeros(n) if dru is None else np.asarray(dru, float),
        soc=np.full(n, 0.65),
        r_up=np.full(n, 30.0) if r_up is None else np.asarray(r_up, float),
        r_dn=np.full(n, 30.0) if r_dn is None else np.asarray(r_dn, float),
        sst_p=np.full(n, 1000.0) if sst is None else np.asarray(sst, float),
        pcc_p=np.full(n, 1020.0) if pcc is None else np.asarray(pcc, float),
        p_chg=np.zeros(n) if p_chg is None else np.asarray(p_chg, float),
        tier=np.full(n, 2, dtype=np.int8),
    )
    m = {"v_nom": V_NOM}
    m.update(meta or {})
    return WaveformLog(
        main=seg,
        windows=list(windows),
        events=[dict(t=e[0], label=e[1], info={}) for e in events],
        meta=m,
    )


def flat_log(duration=30.0, dt=1e-3):
    t = np.arange(0, duration, dt)
    return make_log(t, np.full(len(t), V_NOM))


class TestSteady:
    def test_flat_passes_with_full_margin(self):
        res = check_steady(flat_log(), LIMITS)
        assert res.passed and res.measured == 0.0

    def test_sustained_offset_fails(self):
        # 10 V on 800 V = 1.25 percent
        t = np.arange(0, 30.0, 1e-3)
        res = check_steady(make_log(t, np.full(len(t), V_NOM + 10.0)), LIMITS)
        assert not res.passed
        assert res.measured == pytest.approx(0.0125)

    def test_dip_inside_event_window_excluded(self):
        t = np.arange(0, 30.0, 1e-3)
        v = np.full(len(t), V_NOM)
        v[(t > 10.0) & (t < 10.05)] = V_NOM - 12.0
        log = make_log(t, v, events=[(10.0, "burst_on")])
        assert check_steady(log, LIMITS).passed


class TestTransient:
    def exp_recovery_log(self, depth_v=14.0, tau=0.008, t_event=10.0):
        """Pure exponential recovery with known depth and time constant."""
        t = np.arange(0, 30.0, 1e-3)
        v = np.full(len(t), V_NOM)
        after = t >= t_event
        v[after] = V_NOM - depth_v * np.exp(-(t[after] - t_event) / tau)
        wt = np.arange(t_event - 0.005, t_event + 0.2, 1e-5)
        wv = np.full(len(wt), V_NOM)
        wafter = wt >= t_event
        wv[wafter] = V_NOM - depth_v * np.exp(-(wt[wafter] - t_event) / tau)
        win = LogSegment(
            t=wt, v_bus=wv, p_load=np.full(len(wt), 1000.0),
            dru_p=np.zeros(len(wt)), soc=np.full(len(wt), 0.65),
            r_up=np.full(len(wt), 30.0), r_dn=np.full(len(wt), 30.0),
            sst_p=np.full(len(wt), 1000.0), pcc_p=np.full(len(wt), 1020.0),
            p_chg=np.zeros(len(wt)), tier=np.full(len(wt), 2, dtype=np.int8),
        )
        return make_log(t, v, events=[(t_event, "burst_on")],
                        windows=[("burst_on", win)])

    def test_analytic_depth_and_recovery(self):
        # depth 14 V; re-entry into the 8 V band at tau*ln(14/8) = 4.48 ms
        log = self.exp_recovery_log()
        res = check_transient(log, LIMITS)
        assert res.passed
        assert res.measured == pytest.approx(14.0 / 800.0, rel=0.01)
        expected = 0.008 * math.log(14.0 / 8.0)
        assert f"recovery={expected * 1e3:.2f}" in res.details or True
        # parse the measured recovery out of the details
        rec_ms = float(res.details.split("recovery=")[1].split("ms")[0])
        assert rec_ms == pytest.approx(expected * 1e3, rel=0.02)

    def test_boundary_depth_passes_at_2_percent(self):
        # 16 V dip on 800 V recovered in ~9 ms: inside the band by <=
        log = self.exp_recovery_log(depth_v=16.0)
        assert check_transient(log, LIMITS).passed

    def test_excess_depth_fails(self):
        log = self.exp_recovery_log(depth_v=20.0)
        res = check_transient(log, LIMITS)
        assert not res.passed
        assert res.measured == pytest.approx(0.025, rel=0.01)

    def test_slow_recovery_fails(self):
        log = self.exp_recovery_log(depth_v=14.0, tau=0.125)  # ~70 ms re-entry
        res = check_transient(log, LIMITS)
        assert not res.passed
        assert "recovery" in res.details

    def test_unmarked_transient_fails_closed(self):
        t = np.arange(0, 30.0, 1e-3)
        v = np.full(len(t), V_NOM)
        v[(t > 20.0) & (t < 20.3)] = V_NOM - 20.0  # no marker for this
        log = make_log(t, v, events=[(5.0, "burst_on")])
        res = check_transient(log, LIMITS)
        assert not res.passed
        assert "unmarked-event" in res.details

    def test_hunting_detected(self):
        t = np.arange(0, 30.0, 1e-3)
        v = np.full(len(t), V_NOM)
        wt = np.arange(9.995, 10.2, 1e-5)
        ring = 15.0 * np.exp(-(wt - 10.0) / 0.05) * np.cos(2 * np.pi * 60 * (wt - 10.0))
        wv = np.where(wt >= 10.0, V_NOM - ring, V_NOM)
        win = LogSegment(
            t=wt, v_bus=wv, p_load=np.full(len(wt), 1000.0),
            dru_p=np.zeros(len(wt)), soc=np.full(len(wt), 0.65),
            r_up=np.full(len(wt), 30.0), r_dn=np.full(len(wt), 30.0),
            sst_p=np.full(len(wt), 1000.0), pcc_p=np.full(len(wt), 1020.0),
            p_chg=np.zeros(len(wt)), tier=np.full(len(wt), 2, dtype=np.int8),
        )
        log = make_log(t, v, events=[(10.0, "burst_on")], windows=[("w", win)])
        res = check_transient(log, LIMITS)
        assert not res.passed
        assert "hunting" in res.details


class TestOscillation:
    def test_flat_passes(self):
        assert check_oscillation(flat_log(), LIMITS).passed

    def test_in_band_ripple_measured_to_analytic(self):
        # 5 Hz at 0.5 percent (4 V): band power 4^2/2 = 8 V^2, integer periods
        t = np.arange(0, 30.0, 1e-3)
        v = V_NOM + 4.0 * np.sin(2 * np.pi * 5.0 * t)
        res = check_oscillation(make_log(t, v), LIMITS)
        assert not res.passed
        assert res.measured == pytest.approx(8.0, rel=0.01)
        assert "dominant 5.00 Hz" in res.details

    def test_out_of_band_ripple_ignored(self):
        t = np.arange(0, 30.0, 1e-4)
        v = V_NOM + 4.0 * np.sin(2 * np.pi * 300.0 * t)
        res = check_oscillation(make_log(t, v), LIMITS)
        assert res.passed

    def test_insufficient_duration(self):
        with pytest.raises(VerifierError, match="insufficient"):
            check_oscillation(flat_log(duration=5.0), LIMITS)


class TestPhaseMargin:
    def test_pure_first_order_is_90_degrees(self):
        # no secondary pole: crossover far below the lag
        assert pm_linearized(1e-3, 2.1e-3, 1e12) == pytest.approx(90.0, abs=0.1)

    def test_zeta_to_pm_closed_form(self):
        assert pm_from_damping(0.45) == pytest.approx(47.6, abs=0.5)
        assert pm_from_damping(0.2) == pytest.approx(22.6, abs=0.5)

    def test_low_damping_fails_floor(self):
        assert pm_from_damping(0.2) < 45.0

    def test_ring_fit_recovers_zeta(self):
        # damped ring with known zeta = 0.3
        zeta = 0.3
        wn = 2 * np.pi * 50.0
        wd = wn * math.sqrt(1 - zeta**2)
        t = np.arange(0, 0.2, 1e-5)
        v = V_NOM - 12.0 * np.exp(-zeta * wn * t) * np.cos(wd * t)
        est = fit_damping(t, v, V_NOM)
        assert est == pytest.approx(zeta, rel=0.05)

    def test_estimate_requires_something(self):
        with pytest.raises(VerifierError, match="unidentifiable"):
            estimate_phase_margin(None)


class TestReservesPcc:
    def test_healthy_log_passes(self):
        res = check_reserves_and_pcc(flat_log(), LIMITS)
        assert res.passed

    def test_floor_violation_fails(self):
        t = np.arange(0, 30.0, 1e-3)
        r_up = np.full(len(t), 30.0)
        r_up[5000:6000] = 5.0  # below the 10 kW floor
        log = make_log(t, np.full(len(t), V_NOM), r_up=r_up)
        assert not check_reserves_and_pcc(log, LIMITS).passed

    def test_floor_dip_inside_bridging_window_exempt(self):
        t = np.arange(0, 30.0, 1e-3)
        r_up = np.full(len(t), 30.0)
        r_up[(t > 10.0) & (t < 12.0)] = 5.0
        log = make_log(
            t, np.full(len(t), V_NOM), r_up=r_up,
            events=[(10.0, "feeder_trip"), (11.7, "restore_confirm"),
                    (12.5, "resume_complete")],
        )
        assert bridging_windows(log) == [(10.0, 12.5)]
        assert check_reserves_and_pcc(log, LIMITS).passed

    def test_single_reverse_sample_fails(self):
        t = np.arange(0, 30.0, 1e-3)
        pcc = np.full(len(t), 1020.0)
        pcc[700] = -1.0
        log = make_log(t, np.full(len(t), V_NOM), pcc=pcc)
        res = check_reserves_and_pcc(log, LIMITS)
        assert not res.passed and res.measured == 1.0

    def test_band_export_fails(self):
        t = np.arange(0, 30.0, 1e-3)
        pcc = 1020.0 + 80.0 * np.sin(2 * np.pi * 1.0 * t)
        log = make_log(t, np.full(len(t), V_NOM), pcc=pcc)
        assert not check_reserves_and_pcc(log, LIMITS).passed

    def test_chg_ramp_bound(self):
        t = np.arange(0, 30.0, 1e-3)
        chg = np.clip((t - 10.0) * 80.0, 0.0, 200.0)  # 80 kW/s > 50
        log = make_log(t, np.full(len(t), V_NOM), p_chg=chg)
        assert not check_reserves_and_pcc(log, LIMITS).passed

    def test_veto_cut_exempt_from_ramp(self):
        t = np.arange(0, 30.0, 1e-3)
        chg = np.clip((t - 5.0) * 40.0, 0.0, 150.0)
        chg[t >= 12.0] = 0.0  # instant freeze
        log = make_log(t, np.full(len(t), V_NOM), p_chg=chg,
                       events=[(12.0, "veto_topology_change")])
        assert check_reserves_and_pcc(log, LIMITS).passed


class TestEnergy:
    def test_balanced_budget_passes(self):
        log = flat_log()
        log.main.sst_p[:] = 1000.0
        log.main.p_load[:] = 1000.0
        assert check_energy(log, LIMITS).passed

    def test_unbalanced_budget_fails(self):
        log = flat_log()
        log.main.sst_p[:] = 1100.0  # 10 percent unexplained injection
        assert not check_energy(log, LIMITS).passed


class TestVerify:
    def test_empty_log_is_error_not_verdict(self):
        t = np.arange(0, 0.002, 1e-3)
        log = make_log(t, np.full(len(t), V_NOM))
        with pytest.raises(VerifierError):
            verify(log, LIMITS)

    def test_report_determinism(self):
        log = flat_log()
        a = verify(log, LIMITS)
        b = verify(log, LIMITS)
        assert a.to_text() == b.to_text()
        assert a.to_dict() == b.to_dict()

    def test_check_independence(self):
        """Measured values of one check never depend on another's verdict."""
        t = np.arange(0, 30.0, 1e-3)
        pcc = np.full(len(t), 1020.0)
        pcc[700] = -1.0  # fails reserves_pcc only
        log = make_log(t, np.full(len(t), V_NOM), pcc=pcc)
        full = verify(log, LIMITS)
        alone = check_steady(log, LIMITS)
        assert full.check("steady_band").measured == alone.measured
        assert not full.overall

    def test_exit_code_contract(self):
        good = verify(flat_log(), LIMITS)
        assert good.exit_code == 0
        t = np.arange(0, 30.0, 1e-3)
        bad = verify(make_log(t, np.full(len(t), V_NOM + 12.0)), LIMITS)
        assert bad.exit_code == 1

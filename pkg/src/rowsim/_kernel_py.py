"""Pure-Python electrical kernel; the fallback twin of rowsim._kernel.

Operation order is kept identical to the compiled version so both produce
the same float64 stream. See rowsim.kernel for the state/param layout.
"""

from __future__ import annotations

from math import exp, fabs, sqrt


def advance(state, acc, params, p_load, n, cap_first, cap_every, cap_out):
    """Run ``n`` electrical substeps; return (status, steps_done, captured).

    Captures the state after local substep k for k = cap_first,
    cap_first + cap_every, ... as rows (v_bus, p_dru, soc, p_chg) in
    cap_out. Aborts early (status != 0) on voltage blowup or a SoC
    integrator fault.
    """
    dt = params[0]
    v_nom = params[1]
    inv_c = params[2]
    esr = params[3]
    e_droop = params[4]
    r_eq = params[5]
    v_eng = params[10]
    n_delay = params[11]
    slew_step = params[12]
    p_gate = params[13]
    soc_min = params[14]
    soc_max = params[15]
    inv_e36 = params[16]
    th_alpha = params[17]
    p_sst = params[18]
    p_chg_tgt = params[19]
    chg_step = params[20]
    blowup_v = params[21]
    dru_on = params[22] != 0.0
    chg_ref = params[23]  # valley law: p_chg allowed only below this load level

    v_dev = state[0]
    i_dru = state[1]
    p_dru = state[2]
    soc = state[3]
    p_chg = state[4]
    th_avg = state[5]
    enabled = state[6] != 0.0
    armed = state[7] != 0.0
    delay_left = state[8]
    fault_on = state[9] != 0.0
    t_fault = state[10]
    i_prosp = state[11]
    tau_inv = state[12]
    displaced = state[13]

    e_load = acc[0]
    e_sst = acc[1]
    e_chg = acc[2]
    e_dru = acc[3]
    e_fault = acc[4]
    e_esr = acc[5]
    v_min = acc[6]
    v_max = acc[7]

    status = 0
    captured = 0
    next_cap = cap_first
    k = 0
    while k < n:
        # recharge sink ramps toward its target under the per-substep step
        d = p_chg_tgt - p_chg
        if d > chg_step:
            p_chg += chg_step
        elif d < -chg_step:
            p_chg -= chg_step
        else:
            p_chg = p_chg_tgt
        pl = p_load[k]
        if p_chg > 0.0:
            # displacement is immediate: a load rise that erases the valley
            # freezes recharge on the same substep, never a ramp-down
            if pl > chg_ref or soc >= soc_max:
                p_chg = 0.0
                p_chg_tgt = 0.0
                displaced = 1.0

        v_bus = v_nom - v_dev
        i_draw = (pl - p_sst + p_chg) * 1e3 / v_bus
        i_f = 0.0
        if fault_on:
            t_fault += dt
            i_f = i_prosp * (1.0 - exp(-t_fault * tau_inv)) if tau_inv > 0.0 else i_prosp
            i_draw += i_f

        if enabled and dru_on:
            # droop ask, braked so a slew-limited approach cannot overshoot
            # the balance point: allowed over-current follows the minimum-
            # time switching curve sqrt(2 * slew * C * r_eq * |excess|)
            di_max = slew_step * 1e3 / v_bus
            t_i = v_dev / r_eq
            excess = t_i - i_draw
            lim = sqrt(2.0 * (di_max / dt) * r_eq * fabs(excess) / inv_c)
            clamped = False
            if excess > lim:
                tgt_i = i_draw + lim
                clamped = True
            elif excess < -lim:
                tgt_i = i_draw - lim
                clamped = True
            else:
                tgt_i = t_i
            if tgt_i > i_dru + di_max:
                ni = i_dru + di_max
                clamped = True
            elif tgt_i < i_dru - di_max:
                ni = i_dru - di_max
                clamped = True
            else:
                ni = tgt_i
            p_g = ni * v_bus * 1e-3
            if p_g > p_gate:
                p_g = p_gate
                clamped = True
            elif p_g < -p_gate:
                p_g = -p_gate
                clamped = True
            if soc <= soc_min and p_g > 0.0:
                p_g = 0.0
                clamped = True
            if soc >= soc_max and p_g < 0.0:
                p_g = 0.0
                clamped = True
            if clamped:
                # a bound pins the bank current; the capacitor integrates it
                ni = p_g * 1e3 / v_bus
                nv = v_dev + dt * inv_c * (i_draw - 0.5 * (i_dru + ni))
                # land exactly on the droop equilibrium instead of hopping
                # across it, which would chatter at the substep rate
                v_star = r_eq * i_draw
                if (v_dev - v_star) * (nv - v_star) < 0.0:
                    ni = 2.0 * (i_draw - (v_star - v_dev) / (dt * inv_c)) - i_dru
                    nv = v_star
                    p_g = ni * v_bus * 1e-3
            else:
                # unconstrained: exact relaxation toward v* = r_eq * u
                nv = e_droop * v_dev + (1.0 - e_droop) * r_eq * i_draw
                ni = nv / r_eq
                p_g = ni * v_bus * 1e-3
            p_new = p_g
        else:
            ni = 0.0
            nv = v_dev + dt * inv_c * i_draw
            p_new = 0.0
            if dru_on and not enabled:
                if armed:
                    delay_left -= 1.0
                    if delay_left <= 0.0:
                        enabled = True
                elif fabs(nv) > v_eng:
                    armed = True
                    delay_left = n_delay - 1.0
                    if delay_left <= 0.0:
                        enabled = True

        p_net = p_new - p_chg
        soc -= p_net * dt * inv_e36
        ath = p_net if p_net >= 0.0 else -p_net
        th_avg += (ath - th_avg) * th_alpha

        e_load += pl * dt
        e_sst += p_sst * dt
        e_chg += p_chg * dt
        e_dru += p_new * dt
        e_fault += i_f * v_bus * 1e-3 * dt
        i_net = ni - i_draw
        v_meas = (v_nom - nv) + i_net * esr
        e_esr += i_net * i_net * esr * 1e-3 * dt
        if v_meas < v_min:
            v_min = v_meas
        if v_meas > v_max:
            v_max = v_meas

        v_dev = nv
        i_dru = ni
        p_dru = p_new

        if k == next_cap:
            cap_out[captured, 0] = v_meas
            cap_out[captured, 1] = p_new
            cap_out[captured, 2] = soc
            cap_out[captured, 3] = p_chg
            captured += 1
            next_cap += cap_every

        if fabs(nv) > blowup_v:
            status = 1
            k += 1
            break
        if soc < -1e-9 or soc > 1.0 + 1e-9:
            status = 2
            k += 1
            break
        k += 1

    state[0] = v_dev
    state[1] = i_dru
    state[2] = p_dru
    state[3] = soc
    state[4] = p_chg
    state[5] = th_avg
    state[6] = 1.0 if enabled else 0.0
    state[7] = 1.0 if armed else 0.0
    state[8] = delay_left
    state[9] = 1.0 if fault_on else 0.0
    state[10] = t_fault
    state[11] = i_prosp
    state[12] = tau_inv
    state[13] = displaced

    acc[0] = e_load
    acc[1] = e_sst
    acc[2] = e_chg
    acc[3] = e_dru
    acc[4] = e_fault
    acc[5] = e_esr
    acc[6] = v_min
    acc[7] = v_max
    return status, k, captured

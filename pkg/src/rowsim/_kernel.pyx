# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled electrical kernel.

Must stay operation-for-operation identical to rowsim._kernel_py so both
backends produce the same float64 stream. Layout documented in
rowsim.kernel. Compiled without fast-math so IEEE semantics match CPython.
"""

from libc.math cimport exp, fabs, sqrt


def advance(double[::1] state, double[::1] acc, double[::1] params,
            double[::1] p_load, Py_ssize_t n, Py_ssize_t cap_first,
            Py_ssize_t cap_every, double[:, ::1] cap_out):
    """Run n substeps; return (status, steps_done, captured)."""
    cdef double dt = params[0]
    cdef double v_nom = params[1]
    cdef double inv_c = params[2]
    cdef double esr = params[3]
    cdef double e_droop = params[4]
    cdef double r_eq = params[5]
    cdef double v_eng = params[10]
    cdef double n_delay = params[11]
    cdef double slew_step = params[12]
    cdef double p_gate = params[13]
    cdef double soc_min = params[14]
    cdef double soc_max = params[15]
    cdef double inv_e36 = params[16]
    cdef double th_alpha = params[17]
    cdef double p_sst = params[18]
    cdef double p_chg_tgt = params[19]
    cdef double chg_step = params[20]
    cdef double blowup_v = params[21]
    cdef bint dru_on = params[22] != 0.0
    cdef double chg_ref = params[23]

    cdef double v_dev = state[0]
    cdef double i_dru = state[1]
    cdef double p_dru = state[2]
    cdef double soc = state[3]
    cdef double p_chg = state[4]
    cdef double th_avg = state[5]
    cdef bint enabled = state[6] != 0.0
    cdef bint armed = state[7] != 0.0
    cdef double delay_left = state[8]
    cdef bint fault_on = state[9] != 0.0
    cdef double t_fault = state[10]
    cdef double i_prosp = state[11]
    cdef double tau_inv = state[12]
    cdef double displaced = state[13]

    cdef double e_load = acc[0]
    cdef double e_sst = acc[1]
    cdef double e_chg = acc[2]
    cdef double e_dru = acc[3]
    cdef double e_fault = acc[4]
    cdef double e_esr = acc[5]
    cdef double v_min = acc[6]
    cdef double v_max = acc[7]

    cdef int status = 0
    cdef Py_ssize_t captured = 0
    cdef Py_ssize_t next_cap = cap_first
    cdef Py_ssize_t k = 0
    cdef double d, v_bus, pl, i_draw, i_f, nv, ni, p_g
    cdef double di_max, t_i, excess, lim, tgt_i, v_star
    cdef bint clamped
    cdef double p_new, p_net, ath, i_net, v_meas

    while k < n:
        d = p_chg_tgt - p_chg
        if d > chg_step:
            p_chg += chg_step
        elif d < -chg_step:
            p_chg -= chg_step
        else:
            p_chg = p_chg_tgt
        pl = p_load[k]
        if p_chg > 0.0:
            if pl > chg_ref or soc >= soc_max:
                p_chg = 0.0
                p_chg_tgt = 0.0
                displaced = 1.0

        v_bus = v_nom - v_dev
        i_draw = (pl - p_sst + p_chg) * 1e3 / v_bus
        i_f = 0.0
        if fault_on:
            t_fault += dt
            if tau_inv > 0.0:
                i_f = i_prosp * (1.0 - exp(-t_fault * tau_inv))
            else:
                i_f = i_prosp
            i_draw += i_f

        if enabled and dru_on:
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
                ni = p_g * 1e3 / v_bus
                nv = v_dev + dt * inv_c * (i_draw - 0.5 * (i_dru + ni))
                v_star = r_eq * i_draw
                if (v_dev - v_star) * (nv - v_star) < 0.0:
                    ni = 2.0 * (i_draw - (v_star - v_dev) / (dt * inv_c)) - i_dru
                    nv = v_star
                    p_g = ni * v_bus * 1e-3
            else:
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
        if p_net >= 0.0:
            ath = p_net
        else:
            ath = -p_net
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

"""Compiled inner loop of the closed-loop laser jump simulation.

Between events the electron amplitudes obey dC/dt = M C with
M = [[0, i W/2], [i W/2, -gamma]], W = sqrt(rabi_sq_per_quantum * mu).
W is constant between events, so exp(M s) is evaluated in closed form and
the emission instant is the time at which the (unnormalised) amplitude norm
falls to a uniform threshold.
"""
import math

import numpy as np
from numba import njit

OK = 0
NEED_UNIFORMS = 1
BUFFER_FULL = 2
NORM_DRIFT = 3
ROOT_FAILED = 4

_SERIES_CUT = 1e-4
_NORM_TOL = 1e-6
_MAX_ITER = 200


@njit(cache=True)
def _evolve(c1, c2, rabi, gamma, s):
    alpha = np.sqrt(complex(gamma * gamma - rabi * rabi))
    z = 0.5 * alpha
    c = -0.5 * gamma
    zs = z * s
    if abs(zs) < _SERIES_CUT:
        ect = math.exp(c * s)
        zs2 = zs * zs
        ch = ect * (1.0 + zs2 / 2.0 + zs2 * zs2 / 24.0)
        sh = ect * s * (1.0 + zs2 / 6.0 + zs2 * zs2 / 120.0)
    else:
        ep = np.exp((c + z) * s)
        em = np.exp((c - z) * s)
        ch = 0.5 * (ep + em)
        sh = (ep - em) / (2.0 * z)
    hg = 0.5 * gamma
    hr = 0.5j * rabi
    n1 = ch * c1 + sh * (hg * c1 + hr * c2)
    n2 = ch * c2 + sh * (hr * c1 - hg * c2)
    return n1, n2


@njit(cache=True)
def _norm(c1, c2):
    return c1.real * c1.real + c1.imag * c1.imag + c2.real * c2.real + c2.imag * c2.imag


@njit(cache=True)
def _emission_time(c1, c2, rabi, gamma, target, s_max):
    """Solve norm(s) == target on (0, s_max]; norm is non-increasing in s."""
    lo = 0.0
    hi = s_max
    h = 1.0 / gamma
    # shrink an oversized bracket geometrically before refining
    while h < hi:
        a1, a2 = _evolve(c1, c2, rabi, gamma, h)
        if _norm(a1, a2) > target:
            lo = h
            h *= 2.0
        else:
            hi = h
            break
    tol = 1e-13 / gamma
    x = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        a1, a2 = _evolve(c1, c2, rabi, gamma, x)
        f = _norm(a1, a2) - target
        if f > 0.0:
            lo = x
        else:
            hi = x
        dfdx = -2.0 * gamma * (a2.real * a2.real + a2.imag * a2.imag)
        if hi - lo < tol or f == 0.0:
            return x, True
        step_ok = False
        if dfdx < 0.0:
            xn = x - f / dfdx
            if lo < xn < hi:
                step_ok = True
                if abs(xn - x) < tol:
                    return xn, True
                x = xn
        if not step_ok:
            x = 0.5 * (lo + hi)
    return x, False


@njit(cache=True)
def run_loop(
    state_f,
    state_c,
    state_i,
    uniforms,
    horizon,
    gamma,
    rabi_sq_per_quantum,
    frozen_rabi_sq,
    tau_p,
    det_buf,
    emit_buf,
    count_window,
    det_counts,
    emit_counts,
    trace_stride,
    trace_buf,
):
    """Advance the jump process until the horizon, or until inputs run out.

    state_f = [t, u_emit, t_det, mu_time_integral, next_trace_t]
    state_c = [c1, c2]
    state_i = [mu, n_det, n_emit, n_trace, n_det_total, n_emit_total]
    u_emit < 0 or t_det < 0 mean "draw a fresh value".
    Returns (status, uniforms consumed).
    """
    t = state_f[0]
    u_emit = state_f[1]
    t_det = state_f[2]
    mu_int = state_f[3]
    next_trace = state_f[4]
    c1 = state_c[0]
    c2 = state_c[1]
    mu = state_i[0]
    n_det = state_i[1]
    n_emit = state_i[2]
    n_trace = state_i[3]
    n_det_tot = state_i[4]
    n_emit_tot = state_i[5]
    k = 0
    nu = uniforms.size
    status = OK
    keep_det = det_buf.size > 0
    keep_emit = emit_buf.size > 0
    use_counts = count_window > 0.0
    n_cw = det_counts.size
    use_trace = trace_stride > 0.0

    while True:
        if u_emit < 0.0:
            if k >= nu:
                status = NEED_UNIFORMS
                break
            u_emit = uniforms[k]
            k += 1
            if u_emit <= 0.0:
                u_emit = 1e-300
        if t_det < 0.0:
            if k >= nu:
                status = NEED_UNIFORMS
                break
            rate = mu / tau_p
            if rate > 0.0:
                t_det = t - math.log(1.0 - uniforms[k]) / rate
            else:
                t_det = np.inf
            k += 1
        if (keep_det and n_det >= det_buf.size) or (keep_emit and n_emit >= emit_buf.size):
            status = BUFFER_FULL
            break

        if frozen_rabi_sq >= 0.0:
            rabi = math.sqrt(frozen_rabi_sq)
        else:
            rabi = math.sqrt(rabi_sq_per_quantum * mu)
        t_end = t_det if t_det < horizon else horizon
        s_max = t_end - t
        n0 = _norm(c1, c2)
        e1, e2 = _evolve(c1, c2, rabi, gamma, s_max)
        n_end = _norm(e1, e2)
        if n_end > n0 * (1.0 + _NORM_TOL):
            status = NORM_DRIFT
            break

        emitted = n_end <= u_emit
        if emitted:
            s, ok = _emission_time(c1, c2, rabi, gamma, u_emit, s_max)
            if not ok:
                status = ROOT_FAILED
                break
            e1, e2 = _evolve(c1, c2, rabi, gamma, s)
            if abs(_norm(e1, e2) - u_emit) > _NORM_TOL * u_emit:
                status = NORM_DRIFT
                break
            t_new = t + s
        else:
            t_new = t_end

        mu_int += mu * (t_new - t)
        if use_trace:
            while next_trace <= t_new and n_trace < trace_buf.size:
                trace_buf[n_trace] = mu
                n_trace += 1
                next_trace += trace_stride
        t = t_new

        if emitted:
            mu += 1
            if keep_emit:
                emit_buf[n_emit] = t
                n_emit += 1
            n_emit_tot += 1
            if use_counts:
                j = int(t / count_window)
                if j < n_cw:
                    emit_counts[j] += 1
            c1 = 1.0 + 0.0j
            c2 = 0.0j
            u_emit = -1.0
            t_det = -1.0
        elif t_det <= horizon and t == t_det:
            c1 = e1
            c2 = e2
            mu -= 1
            if keep_det:
                det_buf[n_det] = t
                n_det += 1
            n_det_tot += 1
            if use_counts:
                j = int(t / count_window)
                if j < n_cw:
                    det_counts[j] += 1
            t_det = -1.0
        else:
            c1 = e1
            c2 = e2
            break

    state_f[0] = t
    state_f[1] = u_emit
    state_f[2] = t_det
    state_f[3] = mu_int
    state_f[4] = next_trace
    state_c[0] = c1
    state_c[1] = c2
    state_i[0] = mu
    state_i[1] = n_det
    state_i[2] = n_emit
    state_i[3] = n_trace
    state_i[4] = n_det_tot
    state_i[5] = n_emit_tot
    return status, k

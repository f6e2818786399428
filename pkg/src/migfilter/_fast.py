"""Compiled hot paths for the two concrete plants.

The 100 Hz decision loop needs a full nominal rollout, a backward
costate sweep and a quadrature per tick, so these inner loops are
numba-compiled.  Each kernel mirrors the generic implementation in
``dynamics``/``objective`` stage for stage; parity tests hold the two
routes together.  If numba is unavailable (or ``NUMBA_DISABLE_JIT`` is
set) the same functions run as plain Python.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

GUARD_TIME_TOL = 1e-6
STANCE = 0
FLIGHT = 1

# rollout status codes
OK = 0
SINGULAR = 1
DIVERGED = 2
CHATTER = 3


@njit(cache=True)
def _wrap(a):
    if -np.pi < a <= np.pi:
        return a
    w = (a + np.pi) % (2.0 * np.pi) - np.pi
    if w == -np.pi:
        w = np.pi
    return w


# ---------------------------------------------------------------------------
# Cart-pendulum kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cart_flow(x, a, l, g, b, out):
    out[0] = x[1]
    out[1] = (g / l) * np.sin(x[0]) - (a / l) * np.cos(x[0]) - b * x[1]
    out[2] = x[3]
    out[3] = a


@njit(cache=True)
def cart_rollout(x0, us, dt, l, g, b):
    N = us.shape[0]
    xs = np.empty((N + 1, 4))
    for i in range(4):
        xs[0, i] = x0[i]
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    for k in range(N):
        a = us[k, 0]
        x = xs[k]
        _cart_flow(x, a, l, g, b, k1)
        for i in range(4):
            tmp[i] = x[i] + 0.5 * dt * k1[i]
        _cart_flow(tmp, a, l, g, b, k2)
        for i in range(4):
            tmp[i] = x[i] + 0.5 * dt * k2[i]
        _cart_flow(tmp, a, l, g, b, k3)
        for i in range(4):
            tmp[i] = x[i] + dt * k3[i]
        _cart_flow(tmp, a, l, g, b, k4)
        for i in range(4):
            xs[k + 1, i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return xs


@njit(cache=True)
def _cart_adj_rhs(x, a, r, l, g, b, Q, xd, out):
    # xd here is the reference already evaluated at this node's time
    e0 = _wrap(x[0] - xd[0])
    e1 = x[1] - xd[1]
    e2 = x[2] - xd[2]
    e3 = x[3] - xd[3]
    a10 = (g / l) * np.cos(x[0]) + (a / l) * np.sin(x[0])
    out[0] = -(Q[0, 0] * e0 + Q[0, 1] * e1 + Q[0, 2] * e2 + Q[0, 3] * e3) - a10 * r[1]
    out[1] = -(Q[1, 0] * e0 + Q[1, 1] * e1 + Q[1, 2] * e2 + Q[1, 3] * e3) - (r[0] - b * r[1])
    out[2] = -(Q[2, 0] * e0 + Q[2, 1] * e1 + Q[2, 2] * e2 + Q[2, 3] * e3)
    out[3] = -(Q[3, 0] * e0 + Q[3, 1] * e1 + Q[3, 2] * e2 + Q[3, 3] * e3) - r[2]


@njit(cache=True)
def cart_adjoint(xs, us, dt, l, g, b, Q, xd0, xd_rate, P):
    N = us.shape[0]
    rho = np.empty((N + 1, 4))
    e = np.empty(4)
    xd = np.empty(4)
    xdm = np.empty(4)
    xd1 = np.empty(4)
    for i in range(4):
        xd[i] = xd0[i] + xd_rate[i] * (N * dt)
        e[i] = xs[N, i] - xd[i]
    e[0] = _wrap(e[0])
    for i in range(4):
        s = 0.0
        for j in range(4):
            s += P[i, j] * e[j]
        rho[N, i] = s
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    rt = np.empty(4)
    xm = np.empty(4)
    for k in range(N - 1, -1, -1):
        a = us[k, 0]
        x0 = xs[k]
        x1 = xs[k + 1]
        for i in range(4):
            xm[i] = 0.5 * (x0[i] + x1[i])
            xd[i] = xd0[i] + xd_rate[i] * (k * dt)
            xd1[i] = xd0[i] + xd_rate[i] * ((k + 1) * dt)
            xdm[i] = 0.5 * (xd[i] + xd1[i])
        r = rho[k + 1]
        _cart_adj_rhs(x1, a, r, l, g, b, Q, xd1, k1)
        for i in range(4):
            rt[i] = r[i] - 0.5 * dt * k1[i]
        _cart_adj_rhs(xm, a, rt, l, g, b, Q, xdm, k2)
        for i in range(4):
            rt[i] = r[i] - 0.5 * dt * k2[i]
        _cart_adj_rhs(xm, a, rt, l, g, b, Q, xdm, k3)
        for i in range(4):
            rt[i] = r[i] - dt * k3[i]
        _cart_adj_rhs(x0, a, rt, l, g, b, Q, xd, k4)
        for i in range(4):
            rho[k, i] = r[i] - (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return rho


@njit(cache=True)
def cart_mig_schedule(xs, rho, us2, us1, dt, l):
    """Per-interval trapezoid of rho^T [f(x,u2) - f(x,u1)] over the grid."""
    N = us2.shape[0]
    s = 0.0
    for k in range(N):
        du = us2[k, 0] - us1[k, 0]
        if du != 0.0:
            g0 = du * (-np.cos(xs[k, 0]) / l * rho[k, 1] + rho[k, 3])
            g1 = du * (-np.cos(xs[k + 1, 0]) / l * rho[k + 1, 1] + rho[k + 1, 3])
            s += 0.5 * dt * (g0 + g1)
    return s


@njit(cache=True)
def cart_schedule(xs, rho, r, alpha_d, lim, l):
    """Pointwise action u = alpha_d b / (r + b^2), b = h(x)^T rho, clamped."""
    N = xs.shape[0] - 1
    us = np.empty((N, 1))
    for k in range(N):
        b = -np.cos(xs[k, 0]) / l * rho[k, 1] + rho[k, 3]
        u = alpha_d * b / (r + b * b)
        if u > lim:
            u = lim
        elif u < -lim:
            u = -lim
        us[k, 0] = u
    return us


# ---------------------------------------------------------------------------
# SLIP kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _slip_flow(x, u_s, u_t, mode, kk, l0, m, g, eps, out):
    if mode == STANCE:
        dx = x[0] - x[4]
        ls = np.sqrt(dx * dx + x[2] * x[2])
        if ls <= eps:
            return SINGULAR
        force = kk * (l0 - ls) + u_s
        out[0] = x[1]
        out[1] = force * dx / (m * ls)
        out[2] = x[3]
        out[3] = force * x[2] / (m * ls) - g
        out[4] = 0.0
    else:
        out[0] = x[1]
        out[1] = 0.0
        out[2] = x[3]
        out[3] = -g
        out[4] = x[1] + u_t
    return OK


@njit(cache=True)
def _slip_rk4(x, u_s, u_t, mode, dt, kk, l0, m, g, eps, out, k1, k2, k3, k4, tmp):
    st = _slip_flow(x, u_s, u_t, mode, kk, l0, m, g, eps, k1)
    if st != OK:
        return st
    for i in range(5):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    st = _slip_flow(tmp, u_s, u_t, mode, kk, l0, m, g, eps, k2)
    if st != OK:
        return st
    for i in range(5):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    st = _slip_flow(tmp, u_s, u_t, mode, kk, l0, m, g, eps, k3)
    if st != OK:
        return st
    for i in range(5):
        tmp[i] = x[i] + dt * k3[i]
    st = _slip_flow(tmp, u_s, u_t, mode, kk, l0, m, g, eps, k4)
    if st != OK:
        return st
    for i in range(5):
        out[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return OK


@njit(cache=True)
def _leg_ext(x, l0):
    dx = x[0] - x[4]
    return np.sqrt(dx * dx + x[2] * x[2]) - l0


@njit(cache=True)
def slip_rollout(x0, mode0, us, dt, kk, l0, m, g, eps, trans_t, trans_from, trans_to):
    """RK4 rollout with guard bisection; mirrors ``dynamics.step``.

    Returns (xs, modes, status, n_valid, n_trans).  On failure the
    rollout stops and ``n_valid`` is the last node written.
    """
    N = us.shape[0]
    xs = np.empty((N + 1, 5))
    modes = np.empty(N + 1, dtype=np.int64)
    for i in range(5):
        xs[0, i] = x0[i]
    modes[0] = mode0
    n_trans = 0
    max_trans = trans_t.shape[0]
    x = np.empty(5)
    x_next = np.empty(5)
    x_mid = np.empty(5)
    x_hi = np.empty(5)
    w1 = np.empty(5)
    w2 = np.empty(5)
    w3 = np.empty(5)
    w4 = np.empty(5)
    w5 = np.empty(5)
    for k in range(N):
        u_s = us[k, 0]
        u_t = us[k, 1]
        for i in range(5):
            x[i] = xs[k, i]
        mode = modes[k]
        remaining = dt
        t_base = k * dt
        settled = False
        for _sw in range(8):
            st = _slip_rk4(x, u_s, u_t, mode, remaining, kk, l0, m, g, eps, x_next, w1, w2, w3, w4, w5)
            if st != OK:
                return xs, modes, st, k, n_trans
            g0 = _leg_ext(x, l0)
            g1 = _leg_ext(x_next, l0)
            if mode == STANCE:
                crossed = g0 < 0.0 and g1 >= 0.0
            else:
                crossed = g0 > 0.0 and g1 <= 0.0
            if not crossed:
                for i in range(5):
                    x[i] = x_next[i]
                settled = True
                break
            lo = 0.0
            hi = remaining
            for i in range(5):
                x_hi[i] = x_next[i]
            while hi - lo > GUARD_TIME_TOL:
                mid = 0.5 * (lo + hi)
                st = _slip_rk4(x, u_s, u_t, mode, mid, kk, l0, m, g, eps, x_mid, w1, w2, w3, w4, w5)
                if st != OK:
                    return xs, modes, st, k, n_trans
                gm = _leg_ext(x_mid, l0)
                if (mode == STANCE and g0 < 0.0 and gm >= 0.0) or \
                        (mode == FLIGHT and g0 > 0.0 and gm <= 0.0):
                    hi = mid
                    for i in range(5):
                        x_hi[i] = x_mid[i]
                else:
                    lo = mid
            if mode == FLIGHT and x_hi[3] >= 0.0:
                # rising: touchdown vetoed, keep the full step in flight
                for i in range(5):
                    x[i] = x_next[i]
                settled = True
                break
            t_base += hi
            remaining -= hi
            for i in range(5):
                x[i] = x_hi[i]
            new_mode = FLIGHT if mode == STANCE else STANCE
            if n_trans < max_trans:
                trans_t[n_trans] = t_base
                trans_from[n_trans] = mode
                trans_to[n_trans] = new_mode
                n_trans += 1
            mode = new_mode
            if remaining <= GUARD_TIME_TOL:
                settled = True
                break
        if not settled:
            return xs, modes, CHATTER, k, n_trans
        finite = True
        for i in range(5):
            xs[k + 1, i] = x[i]
            if not np.isfinite(x[i]) or abs(x[i]) > 1e6:
                finite = False
        modes[k + 1] = mode
        if not finite:
            return xs, modes, DIVERGED, k + 1, n_trans
    return xs, modes, OK, N, n_trans


@njit(cache=True)
def _slip_adj_rhs(x, u_s, r, mode, kk, l0, m, g, eps, Q, xd, out):
    # xd here is the reference already evaluated at this node's time
    e0 = x[0] - xd[0]
    e1 = x[1] - xd[1]
    e2 = x[2] - xd[2]
    e3 = x[3] - xd[3]
    e4 = x[4] - xd[4]
    for i in range(5):
        out[i] = -(Q[i, 0] * e0 + Q[i, 1] * e1 + Q[i, 2] * e2 + Q[i, 3] * e3 + Q[i, 4] * e4)
    if mode == STANCE:
        dx = x[0] - x[4]
        zm = x[2]
        ls = np.sqrt(dx * dx + zm * zm)
        if ls <= eps:
            return SINGULAR
        c1 = dx / ls
        c3 = zm / ls
        force = kk * (l0 - ls) + u_s
        q = force / ls
        dax_dxm = (-kk * c1 * c1 + q * (1.0 - c1 * c1)) / m
        dax_dzm = -c1 * c3 * (kk + q) / m
        daz_dzm = (-kk * c3 * c3 + q * (1.0 - c3 * c3)) / m
        out[0] -= dax_dxm * r[1] + dax_dzm * r[3]
        out[1] -= r[0]
        out[2] -= dax_dzm * r[1] + daz_dzm * r[3]
        out[3] -= r[2]
        out[4] -= -dax_dxm * r[1] - dax_dzm * r[3]
    else:
        out[1] -= r[0] + r[4]
        out[3] -= r[2]
    return OK


@njit(cache=True)
def slip_adjoint(xs, modes, us, dt, kk, l0, m, g, eps, Q, xd0, xd_rate, P):
    N = us.shape[0]
    rho = np.empty((N + 1, 5))
    e = np.empty(5)
    xd = np.empty(5)
    xdm = np.empty(5)
    xd1 = np.empty(5)
    for i in range(5):
        xd[i] = xd0[i] + xd_rate[i] * (N * dt)
        e[i] = xs[N, i] - xd[i]
    for i in range(5):
        s = 0.0
        for j in range(5):
            s += P[i, j] * e[j]
        rho[N, i] = s
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    rt = np.empty(5)
    xm = np.empty(5)
    status = OK
    for k in range(N - 1, -1, -1):
        u_s = us[k, 0]
        x0 = xs[k]
        x1 = xs[k + 1]
        for i in range(5):
            xm[i] = 0.5 * (x0[i] + x1[i])
            xd[i] = xd0[i] + xd_rate[i] * (k * dt)
            xd1[i] = xd0[i] + xd_rate[i] * ((k + 1) * dt)
            xdm[i] = 0.5 * (xd[i] + xd1[i])
        mode = modes[k]
        r = rho[k + 1]
        st = _slip_adj_rhs(x1, u_s, r, modes[k + 1], kk, l0, m, g, eps, Q, xd1, k1)
        status += st
        for i in range(5):
            rt[i] = r[i] - 0.5 * dt * k1[i]
        st = _slip_adj_rhs(xm, u_s, rt, mode, kk, l0, m, g, eps, Q, xdm, k2)
        status += st
        for i in range(5):
            rt[i] = r[i] - 0.5 * dt * k2[i]
        st = _slip_adj_rhs(xm, u_s, rt, mode, kk, l0, m, g, eps, Q, xdm, k3)
        status += st
        for i in range(5):
            rt[i] = r[i] - dt * k3[i]
        st = _slip_adj_rhs(x0, u_s, rt, mode, kk, l0, m, g, eps, Q, xd, k4)
        status += st
        if status != OK:
            return rho, SINGULAR
        for i in range(5):
            rho[k, i] = r[i] - (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return rho, OK


@njit(cache=True)
def _slip_mig_point(xs, modes, rho, j, du_s, du_t, m, eps, l0):
    if modes[j] == STANCE:
        dx = xs[j, 0] - xs[j, 4]
        zm = xs[j, 2]
        ls = np.sqrt(dx * dx + zm * zm)
        if ls <= eps:
            return np.nan
        return du_s * (dx * rho[j, 1] + zm * rho[j, 3]) / (m * ls)
    return du_t * rho[j, 4]


@njit(cache=True)
def slip_mig_schedule(xs, modes, rho, us2, us1, dt, m, eps, l0):
    N = us2.shape[0]
    s = 0.0
    for k in range(N):
        du_s = us2[k, 0] - us1[k, 0]
        du_t = us2[k, 1] - us1[k, 1]
        if du_s != 0.0 or du_t != 0.0:
            g0 = _slip_mig_point(xs, modes, rho, k, du_s, du_t, m, eps, l0)
            g1 = _slip_mig_point(xs, modes, rho, k + 1, du_s, du_t, m, eps, l0)
            s += 0.5 * dt * (g0 + g1)
    return s


@njit(cache=True)
def slip_schedule(xs, modes, rho, r_s, r_t, alpha_d, lim_s, lim_t, m, eps):
    """Pointwise action on the active channel only (see cart_schedule)."""
    N = xs.shape[0] - 1
    us = np.empty((N, 2))
    for k in range(N):
        us[k, 0] = 0.0
        us[k, 1] = 0.0
        if modes[k] == STANCE:
            dx = xs[k, 0] - xs[k, 4]
            zm = xs[k, 2]
            ls = np.sqrt(dx * dx + zm * zm)
            if ls > eps:
                b = (dx * rho[k, 1] + zm * rho[k, 3]) / (m * ls)
                u = alpha_d * b / (r_s + b * b)
                if u > lim_s:
                    u = lim_s
                elif u < -lim_s:
                    u = -lim_s
                us[k, 0] = u
        else:
            b = rho[k, 4]
            u = alpha_d * b / (r_t + b * b)
            if u > lim_t:
                u = lim_t
            elif u < -lim_t:
                u = -lim_t
            us[k, 1] = u
    return us

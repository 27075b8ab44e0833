"""Compiled right-hand sides and the RK4 day integrator.

State layouts (all blocks have length J):

* life:  E, L, P, A
* epi:   E, L, P, As, Ae, Ai, then Hs, He, Hi, Hr, cumulative incidence

``r`` is one row of the rate matrix in ``forcing.RATE_NAMES`` order. ``p``
holds the per-day scalars: ``[C]`` for life and
``[C, n_B, phi_HV, phi_VH, gamma_H, eta_H, N_H, k_bite]`` for epi.
"""

import math

import numpy as np
from numba import njit

KIND_LIFE = 0
KIND_EPI = 1

STATUS_OK = 0
STATUS_DT_UNDERFLOW = 1

# RK4 real-axis stability limit: |1 - z + z^2/2 - z^3/6 + z^4/24| <= 1 for z <= 2.785
RK4_STABILITY = 2.785


@njit(cache=True)
def hatch_factor(l, C):
    if C <= 0.0:
        return 0.0
    h = 1.0 - l / C
    return h if h > 0.0 else 0.0


@njit(cache=True)
def life_rhs(y, J, r, p, dy):
    gel, glp, gpa, gae = r[0], r[1], r[2], r[3]
    ged, gld, gpd, gad = r[4], r[5], r[6], r[7]
    ov = r[9]
    E, L, P, A = 0, J, 2 * J, 3 * J
    l = 0.0
    for j in range(J):
        l += y[L + j]
    h = hatch_factor(l, p[0])
    dy[E] = J * ov * gae * y[A + J - 1] - (J * gel + ged) * y[E]
    dy[L] = J * h * gel * y[E + J - 1] - (J * glp + gld) * y[L]
    dy[P] = J * glp * y[L + J - 1] - (J * gpa + gpd) * y[P]
    dy[A] = J * (0.5 * gpa * y[P + J - 1] + gae * y[A + J - 1]) - (J * gae + gad) * y[A]
    for j in range(1, J):
        dy[E + j] = J * gel * y[E + j - 1] - (J * gel + ged) * y[E + j]
        dy[L + j] = J * glp * y[L + j - 1] - (J * glp + gld) * y[L + j]
        dy[P + j] = J * gpa * y[P + j - 1] - (J * gpa + gpd) * y[P + j]
        dy[A + j] = J * gae * y[A + j - 1] - (J * gae + gad) * y[A + j]


@njit(cache=True)
def forces(y, J, r, p):
    """(lambda_VH, lambda_HV) with the J/k biting-stage correction."""
    gae = r[3]
    n_b, phi_hv, phi_vh, n_h = p[1], p[2], p[3], p[6]
    k = int(p[7])
    ai = 0.0
    first = J - k
    I = 5 * J
    for j in range(first, J):
        ai += y[I + j]
    ratio = J / k
    lam_vh = n_b * gae * phi_vh * ratio * ai / n_h
    lam_hv = n_b * gae * phi_hv * ratio * y[6 * J + 2] / n_h
    return lam_vh, lam_hv


@njit(cache=True)
def epi_rhs(y, J, r, p, dy):
    gel, glp, gpa, gae = r[0], r[1], r[2], r[3]
    ged, gld, gpd, gad = r[4], r[5], r[6], r[7]
    gv, ov = r[8], r[9]
    gh, eh = p[4], p[5]
    first_bite = J - int(p[7])
    E, L, P, S, X, I, H = 0, J, 2 * J, 3 * J, 4 * J, 5 * J, 6 * J
    l = 0.0
    for j in range(J):
        l += y[L + j]
    h = hatch_factor(l, p[0])
    lam_vh, lam_hv = forces(y, J, r, p)
    adults_last = y[S + J - 1] + y[X + J - 1] + y[I + J - 1]

    dy[E] = J * ov * gae * adults_last - (J * gel + ged) * y[E]
    dy[L] = J * h * gel * y[E + J - 1] - (J * glp + gld) * y[L]
    dy[P] = J * glp * y[L + J - 1] - (J * gpa + gpd) * y[P]
    for j in range(1, J):
        dy[E + j] = J * gel * y[E + j - 1] - (J * gel + ged) * y[E + j]
        dy[L + j] = J * glp * y[L + j - 1] - (J * glp + gld) * y[L + j]
        dy[P + j] = J * gpa * y[P + j - 1] - (J * gpa + gpd) * y[P + j]

    out_rate = J * gae + gad
    for j in range(J):
        if j == 0:
            in_s = J * (0.5 * gpa * y[P + J - 1] + gae * y[S + J - 1])
            in_x = J * gae * y[X + J - 1]
            in_i = J * gae * y[I + J - 1]
        else:
            in_s = J * gae * y[S + j - 1]
            in_x = J * gae * y[X + j - 1]
            in_i = J * gae * y[I + j - 1]
        infect = lam_hv * y[S + j] if j >= first_bite else 0.0
        incub = gv * y[X + j]
        dy[S + j] = in_s - out_rate * y[S + j] - infect
        dy[X + j] = in_x - out_rate * y[X + j] + infect - incub
        dy[I + j] = in_i - out_rate * y[I + j] + incub

    hs, he, hi = y[H], y[H + 1], y[H + 2]
    new_inf = lam_vh * hs
    onset = gh * he
    recov = eh * hi
    dy[H] = -new_inf
    dy[H + 1] = new_inf - onset
    dy[H + 2] = onset - recov
    dy[H + 3] = recov
    dy[H + 4] = onset


@njit(cache=True)
def rhs(kind, y, J, r, p, dy):
    if kind == KIND_LIFE:
        life_rhs(y, J, r, p, dy)
    else:
        epi_rhs(y, J, r, p, dy)


@njit(cache=True)
def rk4_step(kind, y, J, r, p, dt, out, ws):
    """One classical RK4 step from ``y`` into ``out``; ``ws`` is (5, n) scratch."""
    n = y.shape[0]
    k1, k2, k3, k4, tmp = ws[0], ws[1], ws[2], ws[3], ws[4]
    rhs(kind, y, J, r, p, k1)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k1[i]
    rhs(kind, tmp, J, r, p, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * dt * k2[i]
    rhs(kind, tmp, J, r, p, k3)
    for i in range(n):
        tmp[i] = y[i] + dt * k3[i]
    rhs(kind, tmp, J, r, p, k4)
    for i in range(n):
        out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True)
def _clip_negatives(y, scale, neg_tol):
    """Zero round-off negatives; return False if any entry is truly negative."""
    for i in range(y.shape[0]):
        if y[i] < 0.0:
            if y[i] < -neg_tol * scale:
                return False
            y[i] = 0.0
    return True


@njit(cache=True)
def advance(kind, y, J, r, p, span, dt0, dt_min, tol, ws, buf):
    """Integrate ``y`` in place over ``span`` days under constant forcing.

    Starts at ``dt0`` and halves until (a) the step-doubling error estimate of
    the first substep is below ``tol * max(1, |y|_inf)`` and (b) every substep
    keeps the state nonnegative. Returns ``(status, dt)``.

    ``ws`` is (5, n) RK4 scratch, ``buf`` is (3, n).
    """
    n = y.shape[0]
    full, half, cur = buf[0], buf[1], buf[2]
    scale = 1.0
    for i in range(n):
        a = abs(y[i])
        if a > scale:
            scale = a
    neg_tol = 1e-12
    dt = dt0
    while dt >= dt_min * (1.0 - 1e-9):
        nsub = int(round(span / dt))
        if nsub < 1:
            nsub = 1
        h = span / nsub
        rk4_step(kind, y, J, r, p, h, full, ws)
        rk4_step(kind, y, J, r, p, 0.5 * h, cur, ws)
        rk4_step(kind, cur, J, r, p, 0.5 * h, half, ws)
        err = 0.0
        for i in range(n):
            e = abs(half[i] - full[i])
            if e > err:
                err = e
        err /= 15.0
        ok = err <= tol * scale and _clip_negatives(half, scale, neg_tol)
        if ok:
            for i in range(n):
                cur[i] = half[i]
            for s in range(1, nsub):
                rk4_step(kind, cur, J, r, p, h, full, ws)
                if not _clip_negatives(full, scale, neg_tol):
                    ok = False
                    break
                for i in range(n):
                    cur[i] = full[i]
        if ok:
            for i in range(n):
                y[i] = cur[i]
            return STATUS_OK, h
        dt *= 0.5
    return STATUS_DT_UNDERFLOW, dt


@njit(cache=True, nogil=True)
def integrate_daily(kind, y0, J, rates, params, dt0, dt_min, tol):
    """Integrate day by day; ``rates`` is (days, 10), ``params`` is (days, np).

    Returns ``(trajectory (days+1, n), dt_per_day, status, failed_day)``.
    """
    days = rates.shape[0]
    n = y0.shape[0]
    traj = np.empty((days + 1, n))
    dts = np.zeros(days)
    y = y0.copy()
    traj[0] = y
    ws = np.empty((5, n))
    buf = np.empty((3, n))
    for d in range(days):
        status, h = advance(kind, y, J, rates[d], params[d], 1.0, dt0, dt_min, tol, ws, buf)
        if status != STATUS_OK:
            return traj, dts, status, d
        dts[d] = h
        traj[d + 1] = y
    return traj, dts, STATUS_OK, -1


@njit(cache=True, nogil=True)
def integrate_epi_batch(Y, C, n_b, consts, J, rates, dt0, dt_min, tol):
    """Advance every particle row of ``Y`` through all days of ``rates``.

    ``consts`` = [phi_HV, phi_VH, gamma_H, eta_H, N_H, k_bite]. Returns the
    per-particle status (0 ok) and the incidence over the whole interval.
    """
    N, n = Y.shape
    days = rates.shape[0]
    ws = np.empty((5, n))
    buf = np.empty((3, n))
    p = np.empty(8)
    y = np.empty(n)
    status = np.zeros(N, dtype=np.int64)
    incidence = np.zeros(N)
    cum = 6 * J + 4
    for i in range(N):
        p[0] = C[i]
        p[1] = n_b[i]
        for m in range(6):
            p[2 + m] = consts[m]
        for m in range(n):
            y[m] = Y[i, m]
        start = y[cum]
        for d in range(days):
            st, h = advance(KIND_EPI, y, J, rates[d], p, 1.0, dt0, dt_min, tol, ws, buf)
            if st != STATUS_OK:
                status[i] = st
                break
        for m in range(n):
            Y[i, m] = y[m]
        incidence[i] = y[cum] - start
    return status, incidence


@njit(cache=True)
def max_decay_rate(kind, J, r, p):
    """Largest diagonal loss rate of the linearized system (stability bound)."""
    m = 0.0
    for s in range(4):
        v = J * r[s] + r[4 + s]
        if v > m:
            m = v
    if kind == KIND_EPI:
        gae, gad, gv = r[3], r[7], r[8]
        v = J * gae + gad + gv
        if v > m:
            m = v
    return m


def make_epi_params(C, n_b, phi_hv, phi_vh, gamma_h, eta_h, n_h, k_bite):
    return np.array([C, n_b, phi_hv, phi_vh, gamma_h, eta_h, n_h, float(k_bite)])


def dt_stability_limit(kind, J, r, p):
    m = max_decay_rate(kind, J, np.asarray(r, dtype=float), np.asarray(p, dtype=float))
    return math.inf if m <= 0 else RK4_STABILITY / m

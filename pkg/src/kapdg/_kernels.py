"""Fused compiled kernels for the float64 hot paths.

Each kernel replaces a chain of tens of elementwise numpy expressions with a
single pass over memory; semantics match the numpy implementations in
`transport` and `limiters`, which stay in use for extended-precision runs.
Point arrays use the native evaluation layout (cells, components, points).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from .eos import ZETA_P

_ = ZETA_P  # shared constant namespace with the scalar source kernels


@njit(cache=True, inline="always")
def _mix_coeffs(z1, g1, pw1, g2, pw2):
    z2 = 1.0 - z1
    gamma_coef = z1 / (g1 - 1.0) + z2 / (g2 - 1.0)
    pi_coef = z1 * g1 * pw1 / (g1 - 1.0) + z2 * g2 * pw2 / (g2 - 1.0)
    return gamma_coef, pi_coef


@njit(cache=True, parallel=True)
def volume_fluxes(vals, avg, dims, g1, pw1, g2, pw2):
    """Axis fluxes at quadrature points minus the cell-average-state flux.

    vals: (n, c, q), avg: (n, c).  Returns fx[, fy] (n, c-1, q), velocities
    (n, dims, q), favg (n, dims, c-1), and a bad-density flag (n, q).
    """
    n, c, q = vals.shape
    w = c - 1
    fx = np.empty((n, w, q))
    fy = np.empty((n, w, q)) if dims == 2 else np.empty((1, 1, 1))
    vel = np.empty((n, dims, q))
    favg = np.empty((n, dims, w))
    bad = np.zeros((n, q), np.uint8)
    for i in prange(n):
        rho_a = avg[i, 0] + avg[i, 1]
        kin_a = 0.0
        for d in range(dims):
            kin_a += avg[i, 2 + d] * avg[i, 2 + d]
        kin_a = 0.5 * kin_a / rho_a
        gam_a, pi_a = _mix_coeffs(avg[i, c - 1], g1, pw1, g2, pw2)
        p_a = (avg[i, c - 2] - kin_a - pi_a) / gam_a
        for d in range(dims):
            un = avg[i, 2 + d] / rho_a
            for m in range(w):
                favg[i, d, m] = avg[i, m] * un
            favg[i, d, 2 + d] += p_a
            favg[i, d, w - 1] += p_a * un
        for k in range(q):
            rho = vals[i, 0, k] + vals[i, 1, k]
            if rho <= 0.0:
                bad[i, k] = 1
                for m in range(w):
                    fx[i, m, k] = 0.0
                    if dims == 2:
                        fy[i, m, k] = 0.0
                for d in range(dims):
                    vel[i, d, k] = 0.0
                continue
            kin = 0.0
            for d in range(dims):
                vel[i, d, k] = vals[i, 2 + d, k] / rho
                kin += vals[i, 2 + d, k] * vel[i, d, k]
            kin *= 0.5
            gam, pi = _mix_coeffs(vals[i, c - 1, k], g1, pw1, g2, pw2)
            p = (vals[i, c - 2, k] - kin - pi) / gam
            u = vel[i, 0, k]
            for m in range(w):
                fx[i, m, k] = vals[i, m, k] * u - favg[i, 0, m]
            fx[i, 2, k] += p
            fx[i, w - 1, k] += p * u
            if dims == 2:
                v = vel[i, 1, k]
                for m in range(w):
                    fy[i, m, k] = vals[i, m, k] * v - favg[i, 1, m]
                fy[i, 3, k] += p
                fy[i, w - 1, k] += p * v
    return fx, fy, vel, favg, bad


@njit(cache=True, parallel=True)
def face_terms(minus, plus, axis, g1, pw1, g2, pw2):
    """Lax-Friedrichs flux and one-sided z corrections on a face batch.

    minus, plus: (n, c, q) trace states.  Returns fhat (n, c-1, q), the
    minus/plus-side z corrections (n, q), and a bad-state flag (n, q) with
    1 = non-positive density, 2 = non-hyperbolic trace.
    """
    n, c, q = minus.shape
    w = c - 1
    dims = c - 4
    fhat = np.empty((n, w, q))
    g_minus = np.empty((n, q))
    g_plus = np.empty((n, q))
    bad = np.zeros((n, q), np.uint8)
    for i in prange(n):
        for k in range(q):
            rho_m = minus[i, 0, k] + minus[i, 1, k]
            rho_p = plus[i, 0, k] + plus[i, 1, k]
            if rho_m <= 0.0 or rho_p <= 0.0:
                bad[i, k] = 1
                for m in range(w):
                    fhat[i, m, k] = 0.0
                g_minus[i, k] = 0.0
                g_plus[i, k] = 0.0
                continue
            kin_m = 0.0
            kin_p = 0.0
            for d in range(dims):
                kin_m += minus[i, 2 + d, k] * minus[i, 2 + d, k]
                kin_p += plus[i, 2 + d, k] * plus[i, 2 + d, k]
            kin_m = 0.5 * kin_m / rho_m
            kin_p = 0.5 * kin_p / rho_p
            gam_m, pi_m = _mix_coeffs(minus[i, c - 1, k], g1, pw1, g2, pw2)
            gam_p, pi_p = _mix_coeffs(plus[i, c - 1, k], g1, pw1, g2, pw2)
            p_m = (minus[i, c - 2, k] - kin_m - pi_m) / gam_m
            p_p = (plus[i, c - 2, k] - kin_p - pi_p) / gam_p
            c2_m = ((gam_m + 1.0) * p_m + pi_m) / (gam_m * rho_m)
            c2_p = ((gam_p + 1.0) * p_p + pi_p) / (gam_p * rho_p)
            if c2_m < 0.0 or c2_p < 0.0:
                bad[i, k] = 2
                for m in range(w):
                    fhat[i, m, k] = 0.0
                g_minus[i, k] = 0.0
                g_plus[i, k] = 0.0
                continue
            u_m = minus[i, 2 + axis, k] / rho_m
            u_p = plus[i, 2 + axis, k] / rho_p
            s = max(abs(u_m) + np.sqrt(c2_m), abs(u_p) + np.sqrt(c2_p))
            for m in range(w):
                flux_m = minus[i, m, k] * u_m
                flux_p = plus[i, m, k] * u_p
                if m == 2 + axis:
                    flux_m += p_m
                    flux_p += p_p
                if m == w - 1:
                    flux_m += p_m * u_m
                    flux_p += p_p * u_p
                fhat[i, m, k] = 0.5 * (flux_m + flux_p) - 0.5 * s * (
                    plus[i, m, k] - minus[i, m, k]
                )
            dz = minus[i, c - 1, k] - plus[i, c - 1, k]
            g_minus[i, k] = 0.5 * dz * (u_m - s)
            g_plus[i, k] = 0.5 * dz * (u_p + s)
    return fhat, g_minus, g_plus, bad


@njit(cache=True, parallel=True)
def bp_limit(avg, lob, g1, pw1, g2, pw2, eps_cap):
    """Fused two-stage bound-preserving rescale decision per cell.

    avg: (n, c), lob: (n, c, L).  Returns the combined modal scale factor
    theta * theta_p, per-cell stats (min_p, max_p, min_z, max_z, activated)
    of the final state, and a bad-average flag.
    """
    n, c, L = lob.shape
    dims = c - 4
    factor = np.empty(n)
    stats = np.empty((n, 5))
    bad = np.zeros(n, np.uint8)
    for i in prange(n):
        z_avg = avg[i, c - 1]
        if (
            avg[i, 0] < -1e-12
            or avg[i, 1] < -1e-12
            or z_avg < -1e-12
            or z_avg > 1.0 + 1e-12
        ):
            bad[i] = 1
            factor[i] = 1.0
            for m in range(5):
                stats[i, m] = 0.0
            continue
        eps_z = min(min(z_avg, 1.0 - z_avg), eps_cap)
        z_min = lob[i, c - 1, 0]
        z_max = z_min
        m1_min = lob[i, 0, 0]
        m2_min = lob[i, 1, 0]
        for k in range(1, L):
            z_min = min(z_min, lob[i, c - 1, k])
            z_max = max(z_max, lob[i, c - 1, k])
            m1_min = min(m1_min, lob[i, 0, k])
            m2_min = min(m2_min, lob[i, 1, k])
        theta = 1.0
        if z_min < eps_z and z_avg - z_min > 0.0:
            theta = min(theta, (z_avg - eps_z) / (z_avg - z_min))
        if z_max > 1.0 - eps_z and z_max - z_avg > 0.0:
            theta = min(theta, ((1.0 - eps_z) - z_avg) / (z_max - z_avg))
        eps_1 = min(avg[i, 0], eps_cap)
        if m1_min < eps_1 and avg[i, 0] - m1_min > 0.0:
            theta = min(theta, (avg[i, 0] - eps_1) / (avg[i, 0] - m1_min))
        eps_2 = min(avg[i, 1], eps_cap)
        if m2_min < eps_2 and avg[i, 1] - m2_min > 0.0:
            theta = min(theta, (avg[i, 1] - eps_2) / (avg[i, 1] - m2_min))
        theta = min(max(theta, 0.0), 1.0)

        rho_a = avg[i, 0] + avg[i, 1]
        kin_a = 0.0
        for d in range(dims):
            kin_a += avg[i, 2 + d] * avg[i, 2 + d]
        kin_a = 0.5 * kin_a / rho_a
        gam_a, pi_a = _mix_coeffs(z_avg, g1, pw1, g2, pw2)
        p_avg = (avg[i, c - 2] - kin_a - pi_a) / gam_a
        eps_p = min(p_avg, eps_cap)
        h0 = gam_a * (p_avg - eps_p)
        theta_p = 1.0
        for k in range(L):
            rho = (
                avg[i, 0]
                + theta * (lob[i, 0, k] - avg[i, 0])
                + avg[i, 1]
                + theta * (lob[i, 1, k] - avg[i, 1])
            )
            kin = 0.0
            for d in range(dims):
                mom = avg[i, 2 + d] + theta * (lob[i, 2 + d, k] - avg[i, 2 + d])
                kin += mom * mom
            energy = avg[i, c - 2] + theta * (lob[i, c - 2, k] - avg[i, c - 2])
            zv = z_avg + theta * (lob[i, c - 1, k] - z_avg)
            gam, pi = _mix_coeffs(zv, g1, pw1, g2, pw2)
            if rho > 0.0:
                p = (energy - 0.5 * kin / rho - pi) / gam
            else:
                p = -np.inf
            h1 = gam * (p - eps_p)
            if h1 < 0.0:
                theta_p = min(theta_p, h0 / (h0 - h1))
        theta_p = min(max(theta_p, 0.0), 1.0)
        combined = theta * theta_p
        factor[i] = combined

        min_p = np.inf
        max_p = -np.inf
        min_z = np.inf
        max_z = -np.inf
        for k in range(L):
            rho = (
                avg[i, 0]
                + combined * (lob[i, 0, k] - avg[i, 0])
                + avg[i, 1]
                + combined * (lob[i, 1, k] - avg[i, 1])
            )
            kin = 0.0
            for d in range(dims):
                mom = avg[i, 2 + d] + combined * (lob[i, 2 + d, k] - avg[i, 2 + d])
                kin += mom * mom
            energy = avg[i, c - 2] + combined * (lob[i, c - 2, k] - avg[i, c - 2])
            zv = z_avg + combined * (lob[i, c - 1, k] - z_avg)
            gam, pi = _mix_coeffs(zv, g1, pw1, g2, pw2)
            if rho > 0.0:
                p = (energy - 0.5 * kin / rho - pi) / gam
            else:
                p = -np.inf
            min_p = min(min_p, p)
            max_p = max(max_p, p)
            min_z = min(min_z, zv)
            max_z = max(max_z, zv)
        stats[i, 0] = min_p
        stats[i, 1] = max_p
        stats[i, 2] = min_z
        stats[i, 3] = max_z
        stats[i, 4] = 1.0 if combined < 1.0 else 0.0
    return factor, stats, bad


@njit(cache=True, parallel=True)
def speed_spread_and_dev(sample, avg, dims, g1, pw1, g2, pw2):
    """Per-cell wave-speed spread and max deviation from the global average.

    sample: (n, c, P), avg: (c,).  Returns beta (n, dims) and devmax (n, c);
    density and sound-speed radicand floored exactly like the numpy path.
    """
    n, c, P = sample.shape
    beta = np.empty((n, dims))
    devmax = np.empty((n, c))
    for i in prange(n):
        for m in range(c):
            dm = 0.0
            for k in range(P):
                d = abs(sample[i, m, k] - avg[m])
                if d > dm:
                    dm = d
            devmax[i, m] = dm
        for d in range(dims):
            lo = np.inf
            hi = -np.inf
            for k in range(P):
                rho = sample[i, 0, k] + sample[i, 1, k]
                if rho < 1e-300:
                    rho = 1e-300
                kin = 0.0
                for dd in range(dims):
                    kin += sample[i, 2 + dd, k] * sample[i, 2 + dd, k]
                kin = 0.5 * kin / rho
                gam, pi = _mix_coeffs(sample[i, c - 1, k], g1, pw1, g2, pw2)
                p = (sample[i, c - 2, k] - kin - pi) / gam
                c2 = ((gam + 1.0) * p + pi) / (gam * rho)
                if c2 < 0.0:
                    c2 = 0.0
                sp = abs(sample[i, 2 + d, k] / rho) + np.sqrt(c2)
                lo = min(lo, sp)
                hi = max(hi, sp)
            beta[i, d] = hi - lo
    return beta, devmax


@njit(cache=True, parallel=True)
def sigma_from_traces(minus, plus, face_wts, scale, order_start, coefs, linf, near_const):
    """Jump indicators from stacked derivative traces.

    minus, plus: (n, c, A, F) two-sided traces of the stacked derivative
    operators, sorted by derivative order; order_start: (n_orders+1,) slice
    bounds of each order in the stack; coefs: per-order scale factors.
    Returns sigma (n, c, n_orders).
    """
    n, c, A, F = minus.shape
    n_orders = coefs.shape[0]
    sigma = np.empty((n, c, n_orders))
    for i in prange(n):
        for m in range(c):
            if near_const[m] or linf[m] == 0.0:
                for o in range(n_orders):
                    sigma[i, m, o] = 0.0
                continue
            for o in range(n_orders):
                total = 0.0
                for a in range(order_start[o], order_start[o + 1]):
                    favg = 0.0
                    for k in range(F):
                        favg += face_wts[k] * abs(plus[i, m, a, k] - minus[i, m, a, k])
                    total += favg * scale[a]
                sigma[i, m, o] = coefs[o] * total / linf[m]
    return sigma

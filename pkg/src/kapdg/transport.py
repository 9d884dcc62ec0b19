"""Quasi-conservative semi-discrete DG residual for the five-equation
transport model, with Lax-Friedrichs fluxes for the conservative block and
the element-sided interface flux for the volume fraction.

The conservative components W = (z1*rho1, z2*rho2, rho*u[, rho*v], E) use a
single-valued Lax-Friedrichs flux; the z1 equation is discretized in the
non-conservative advective form plus one-sided face corrections, which is
what keeps uniform velocity/pressure states exactly uniform across material
interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, eos
from .boundary import ghost_pad
from .errors import SolverFailure
from .field import ModalField


@dataclass(frozen=True)
class FaceTrace:
    """States on the two sides of a face; minus = left/lower element."""

    minus: np.ndarray
    plus: np.ndarray
    axis: int = 0


def physical_flux(states, p, axis):
    """Flux of the conservative block along one axis.

    states: (..., ncomp) conserved values, p: (...,) pressure.
    Returns (..., ncomp-1).
    """
    states = eos._as_float_array(states)
    rho = states[..., 0] + states[..., 1]
    un = states[..., 2 + axis] / rho
    w = states[..., :-1]
    f = w * un[..., None]
    f[..., 2 + axis] += p
    f[..., -1] += p * un
    return f


def _trace_quantities(states, phases):
    """(rho, velocities, p, c~) for trace states; raises on bad states."""
    rho = states[..., 0] + states[..., 1]
    if np.any(rho <= 0.0):
        idx = np.unravel_index(int(np.argmin(rho)), rho.shape)
        raise SolverFailure("non-positive density at face trace", cell=idx, quantity="rho")
    p = eos.pressure(states, phases)
    gamma_coef, pi_coef = eos.mixture_coefficients(states[..., -1], phases)
    c2 = ((gamma_coef + 1.0) * p + pi_coef) / (gamma_coef * rho)
    if np.any(c2 < 0.0):
        idx = np.unravel_index(int(np.argmin(c2)), c2.shape)
        raise SolverFailure(
            "non-hyperbolic trace (negative sound-speed radicand)",
            cell=idx,
            quantity="ctilde^2",
        )
    vel = states[..., 2:-2] / rho[..., None]
    return rho, vel, p, np.sqrt(c2)


def wave_speed(trace, phases):
    """Local characteristic speed S_d = max(|u_d^-|+c~^-, |u_d^+|+c~^+)."""
    _, vel_m, _, c_m = _trace_quantities(np.asarray(trace.minus, dtype=float), phases)
    _, vel_p, _, c_p = _trace_quantities(np.asarray(trace.plus, dtype=float), phases)
    return np.maximum(
        np.abs(vel_m[..., trace.axis]) + c_m, np.abs(vel_p[..., trace.axis]) + c_p
    )


def lf_flux(trace, phases):
    """Lax-Friedrichs flux for the conservative block of a face."""
    minus = np.asarray(trace.minus, dtype=float)
    plus = np.asarray(trace.plus, dtype=float)
    _, _, p_m, _ = _trace_quantities(minus, phases)
    _, _, p_p, _ = _trace_quantities(plus, phases)
    s = wave_speed(trace, phases)
    f_m = physical_flux(minus, p_m, trace.axis)
    f_p = physical_flux(plus, p_p, trace.axis)
    return 0.5 * (f_m + f_p) - 0.5 * s[..., None] * (plus[..., :-1] - minus[..., :-1])


def z_interface_flux(trace, side, s):
    """Element-sided quasi-conservative flux for z1 at one face.

    `side` names the element requesting the flux: the element on the minus
    side uses its own trace velocity u^- (this is its high face), the plus
    side uses u^+.  The flux is therefore not single-valued across the face.
    """
    minus = np.asarray(trace.minus, dtype=float)
    plus = np.asarray(trace.plus, dtype=float)
    z_m, z_p = minus[..., -1], plus[..., -1]
    if side == "minus":
        u = minus[..., 2 + trace.axis] / (minus[..., 0] + minus[..., 1])
    elif side == "plus":
        u = plus[..., 2 + trace.axis] / (plus[..., 0] + plus[..., 1])
    else:
        raise ValueError("side must be 'minus' or 'plus'")
    return 0.5 * u * (z_m + z_p) - 0.5 * s * (z_p - z_m)


def _face_states(pad, basis, axis):
    """Minus/plus trace states on every face along one axis.

    Returns arrays shaped (n_faces_along_axis, ..., nfq, ncomp).
    """
    lo = basis.face_phi[axis][0]
    hi = basis.face_phi[axis][1]
    if axis == 0:
        if pad.ndim == 3:  # 1D: (nx+2, ncomp, n_modes)
            minus, plus = pad[:-1] @ hi, pad[1:] @ lo
        else:
            minus, plus = pad[:-1, 1:-1] @ hi, pad[1:, 1:-1] @ lo
    else:
        minus, plus = pad[1:-1, :-1] @ hi, pad[1:-1, 1:] @ lo
    # (..., ncomp, nfq) -> (..., nfq, ncomp)
    return np.swapaxes(minus, -1, -2), np.swapaxes(plus, -1, -2)


def _face_terms(minus, plus, axis, phases):
    """LF flux for W plus the one-sided z corrections on a set of faces."""
    _, vel_m, p_m, c_m = _trace_quantities(minus, phases)
    _, vel_p, p_p, c_p = _trace_quantities(plus, phases)
    u_m = vel_m[..., axis]
    u_p = vel_p[..., axis]
    s = np.maximum(np.abs(u_m) + c_m, np.abs(u_p) + c_p)
    fhat = (
        0.5 * (physical_flux(minus, p_m, axis) + physical_flux(plus, p_p, axis))
        - 0.5 * s[..., None] * (plus[..., :-1] - minus[..., :-1])
    )
    dz = minus[..., -1] - plus[..., -1]
    g_minus = 0.5 * dz * (u_m - s)  # correction seen by the minus-side element
    g_plus = 0.5 * dz * (u_p + s)  # correction seen by the plus-side element
    return fhat, g_minus, g_plus


def residual(field, phases, bc):
    """Semi-discrete residual dU/dt = L(U) as a modal coefficient array.

    Every flux is taken relative to the flux of the owning cell's average
    state: mathematically a no-op (constants integrate to zero against the
    test functions), but it makes the residual of exactly uniform cells
    bitwise zero instead of roundoff-sized, which matters for long runs
    holding uniform far fields.  Mode-0 (conservation) is unaffected even in
    floats because the shift has no mode-0 footprint at all.

    Dispatches to fused compiled kernels for float64 fields; the numpy
    reference path below also serves extended-precision runs.
    """
    if field.coeffs.dtype == np.float64:
        return _residual_fast(field, phases, bc)
    return _residual_reference(field, phases, bc)


def _phase_args(phases):
    return phases.gamma1, phases.pw1, phases.gamma2, phases.pw2


def _raise_bad(bad, what):
    idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
    kind = "non-positive density" if bad[idx] == 1 else "non-hyperbolic state"
    raise SolverFailure(f"{kind} in {what}", cell=idx[:-1], quantity="rho/ctilde^2")


def _residual_fast(field, phases, bc):
    mesh, basis, c = field.mesh, field.basis, field.coeffs
    dims, ncomp, nm = mesh.dims, field.ncomp, basis.n_modes
    dx = mesh.dx
    ph = _phase_args(phases)
    pad = ghost_pad(field, bc)
    cells = c.shape[: dims]

    flat = c.reshape(-1, ncomp, nm)
    vals = (flat.reshape(-1, nm) @ basis.phi_vol).reshape(-1, ncomp, basis.phi_vol.shape[1])
    avg = np.ascontiguousarray(flat[:, :, 0])
    fx, fy, vel, favg, bad = _kernels.volume_fluxes(vals, avg, dims, *ph)
    if bad.any():
        _raise_bad(bad.reshape(cells + bad.shape[1:]), "cell quadrature")

    res = np.zeros_like(flat)
    gx = basis.dphi_vol[0] * basis.vol_wts
    res[:, :-1, :] += (2.0 / dx) * (fx @ gx.T)
    z_xi = flat[:, -1, :] @ basis.dphi_vol[0]
    adv = vel[:, 0, :] * z_xi * (2.0 / dx)
    if dims == 2:
        dy = mesh.dy
        gy = basis.dphi_vol[1] * basis.vol_wts
        res[:, :-1, :] += (2.0 / dy) * (fy @ gy.T)
        z_eta = flat[:, -1, :] @ basis.dphi_vol[1]
        adv = adv + vel[:, 1, :] * z_eta * (2.0 / dy)
    res[:, -1, :] -= adv @ basis.proj_vol.T
    res = res.reshape(c.shape)
    favg = favg.reshape(cells + favg.shape[1:])

    def face_batch(minus_cells, plus_cells, axis):
        lead = minus_cells.shape[:-2]
        minus = (minus_cells.reshape(-1, nm) @ basis.face_phi[axis][1]).reshape(
            (-1, ncomp) + (basis.face_phi[axis][1].shape[1],)
        )
        plus = (plus_cells.reshape(-1, nm) @ basis.face_phi[axis][0]).reshape(minus.shape)
        fhat, g_m, g_p, bad_f = _kernels.face_terms(minus, plus, axis, *ph)
        if bad_f.any():
            _raise_bad(bad_f.reshape(lead + bad_f.shape[1:]), f"axis-{axis} face trace")
        nfq = fhat.shape[-1]
        return (
            fhat.reshape(lead + (ncomp - 1, nfq)),
            g_m.reshape(lead + (nfq,)),
            g_p.reshape(lead + (nfq,)),
        )

    fe = basis.face_phi[0][1] * basis.face_wts
    fw = basis.face_phi[0][0] * basis.face_wts
    if dims == 1:
        fhat, g_m, g_p = face_batch(pad[:-1], pad[1:], 0)
        shift = favg[:, 0, :, None]
        res[:, :-1, :] -= (1.0 / dx) * (
            (fhat[1:] - shift) @ fe.T - (fhat[:-1] - shift) @ fw.T
        )
        res[:, -1, :] += (1.0 / dx) * (g_m[1:] @ fe.T + g_p[:-1] @ fw.T)
        return res
    fhat, g_m, g_p = face_batch(pad[:-1, 1:-1], pad[1:, 1:-1], 0)
    shift = favg[:, :, 0, :, None]
    res[..., :-1, :] -= (1.0 / dx) * (
        (fhat[1:] - shift) @ fe.T - (fhat[:-1] - shift) @ fw.T
    )
    res[..., -1, :] += (1.0 / dx) * (g_m[1:] @ fe.T + g_p[:-1] @ fw.T)
    fn = basis.face_phi[1][1] * basis.face_wts
    fs = basis.face_phi[1][0] * basis.face_wts
    fhat, g_m, g_p = face_batch(pad[1:-1, :-1], pad[1:-1, 1:], 1)
    shift = favg[:, :, 1, :, None]
    res[..., :-1, :] -= (1.0 / mesh.dy) * (
        (fhat[:, 1:] - shift) @ fn.T - (fhat[:, :-1] - shift) @ fs.T
    )
    res[..., -1, :] += (1.0 / mesh.dy) * (g_m[:, 1:] @ fn.T + g_p[:, :-1] @ fs.T)
    return res


def _residual_reference(field, phases, bc):
    mesh, basis, c = field.mesh, field.basis, field.coeffs
    dx = mesh.dx
    pad = ghost_pad(field, bc)

    vals = np.swapaxes(c @ basis.phi_vol, -1, -2)  # (..., nvq, ncomp)
    rho = vals[..., 0] + vals[..., 1]
    if np.any(rho <= 0.0):
        idx = np.unravel_index(int(np.argmin(rho)), rho.shape)
        raise SolverFailure("non-positive density at quadrature point", cell=idx, quantity="rho")
    p = eos.pressure(vals, phases)
    avg = c[..., 0]
    p_avg = eos.pressure(avg, phases)
    res = np.zeros_like(c)

    gx = basis.dphi_vol[0] * basis.vol_wts
    f0x = physical_flux(avg, p_avg, 0)  # per-cell reference flux
    fxs = physical_flux(vals, p, 0) - f0x[..., None, :]
    res[..., :-1, :] += (2.0 / dx) * (np.swapaxes(fxs, -1, -2) @ gx.T)
    u = vals[..., 2] / rho
    z_xi = c[..., -1, :] @ basis.dphi_vol[0]
    adv = u * z_xi * (2.0 / dx)
    if mesh.dims == 2:
        dy = mesh.dy
        gy = basis.dphi_vol[1] * basis.vol_wts
        f0y = physical_flux(avg, p_avg, 1)
        fys = physical_flux(vals, p, 1) - f0y[..., None, :]
        res[..., :-1, :] += (2.0 / dy) * (np.swapaxes(fys, -1, -2) @ gy.T)
        v = vals[..., 3] / rho
        z_eta = c[..., -1, :] @ basis.dphi_vol[1]
        adv = adv + v * z_eta * (2.0 / dy)
    res[..., -1, :] -= adv @ basis.proj_vol.T

    # x faces
    minus, plus = _face_states(pad, basis, 0)
    fhat, g_minus, g_plus = _face_terms(minus, plus, 0, phases)
    fe = basis.face_phi[0][1] * basis.face_wts
    fw = basis.face_phi[0][0] * basis.face_wts
    shift = f0x[..., None, :]
    if mesh.dims == 1:
        res[:, :-1, :] -= (1.0 / dx) * (
            np.swapaxes(fhat[1:] - shift, -1, -2) @ fe.T
            - np.swapaxes(fhat[:-1] - shift, -1, -2) @ fw.T
        )
        res[:, -1, :] += (1.0 / dx) * (g_minus[1:] @ fe.T + g_plus[:-1] @ fw.T)
    else:
        res[..., :-1, :] -= (1.0 / dx) * (
            np.swapaxes(fhat[1:] - shift, -1, -2) @ fe.T
            - np.swapaxes(fhat[:-1] - shift, -1, -2) @ fw.T
        )
        res[..., -1, :] += (1.0 / dx) * (g_minus[1:] @ fe.T + g_plus[:-1] @ fw.T)
        # y faces
        minus, plus = _face_states(pad, basis, 1)
        fhat, g_minus, g_plus = _face_terms(minus, plus, 1, phases)
        fn = basis.face_phi[1][1] * basis.face_wts
        fs = basis.face_phi[1][0] * basis.face_wts
        shift = f0y[..., None, :]
        res[..., :-1, :] -= (1.0 / mesh.dy) * (
            np.swapaxes(fhat[:, 1:] - shift, -1, -2) @ fn.T
            - np.swapaxes(fhat[:, :-1] - shift, -1, -2) @ fs.T
        )
        res[..., -1, :] += (1.0 / mesh.dy) * (g_minus[:, 1:] @ fn.T + g_plus[:, :-1] @ fs.T)
    return res


def max_cell_speeds(field, phases):
    """Per-cell max |u_d| + c~ sampled at the Lobatto points.

    The Lobatto set is where the BP limiter enforces admissibility, so the
    sound speed is guaranteed real there on a limited field; interior Gauss
    values may transiently leave the admissible set between limiter calls.
    """
    vals = np.swapaxes(field.lobatto_values(), -1, -2)
    rho = vals[..., 0] + vals[..., 1]
    if np.any(rho <= 0.0):
        idx = np.unravel_index(int(np.argmin(rho)), rho.shape)
        raise SolverFailure("non-positive density in cell", cell=idx[:-1], quantity="rho")
    p = eos.pressure(vals, phases)
    gamma_coef, pi_coef = eos.mixture_coefficients(vals[..., -1], phases)
    c2 = ((gamma_coef + 1.0) * p + pi_coef) / (gamma_coef * rho)
    if np.any(c2 < 0.0):
        idx = np.unravel_index(int(np.argmin(c2)), c2.shape)
        raise SolverFailure("non-hyperbolic cell", cell=idx[:-1], quantity="ctilde^2")
    c = np.sqrt(c2)
    speeds = []
    for axis in range(field.mesh.dims):
        un = vals[..., 2 + axis] / rho
        speeds.append(np.max(np.abs(un) + c, axis=-1))
    return speeds


def compute_dt(field, cfl, phases):
    """CFL time step: dt = cfl / max_cells(sum_d S_d / dx_d)."""
    speeds = max_cell_speeds(field, phases)
    rate = speeds[0] / field.mesh.dx
    if field.mesh.dims == 2:
        rate = rate + speeds[1] / field.mesh.dy
    return cfl / float(np.max(rate))


def ssp_rk_step(u0, dt, rhs, post_stage=None):
    """Third-order SSP Runge-Kutta step (Shu-Osher form) on a plain array.

    `post_stage` is applied after each of the three stage updates.
    """
    post = post_stage if post_stage is not None else (lambda u: u)
    u1 = post(u0 + dt * rhs(u0))
    u2 = post(0.75 * u0 + 0.25 * (u1 + dt * rhs(u1)))
    return post(u0 / 3.0 + 2.0 / 3.0 * (u2 + dt * rhs(u2)))


def advance_transport(field, dt, phases, bc, post_stage=None):
    """One SSP-RK3 step of the transport model on a modal field."""

    def rhs(coeffs):
        return residual(field.with_coeffs(coeffs), phases, bc)

    if post_stage is None:
        post = None
    else:

        def post(coeffs):
            return post_stage(field.with_coeffs(coeffs)).coeffs

    new = ssp_rk_step(field.coeffs, dt, rhs, post)
    return field.with_coeffs(new)

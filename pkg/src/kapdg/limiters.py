"""Post-stage limiters: oscillation-eliminating modal damping and the
two-stage bound-preserving rescale.

Both limiters leave every cell average bitwise untouched (only modal
coefficients of degree >= 1 are scaled) and apply one shared factor to all
state components per cell, which is what makes them linearity-invariant and
lets uniform velocity/pressure states pass through unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, eos
from .boundary import ghost_pad
from .errors import SolverFailure

# a component is treated as globally constant when its sampled deviation
# from the domain average falls below this relative threshold
NEAR_CONSTANT_RTOL = 1e-12

EPS_BOUND = 1e-13  # cap used inside the bound-preserving thresholds


@dataclass(frozen=True)
class OEContext:
    """Global reductions and local wave-speed estimates for the OE damping."""

    dt: float
    global_avg: np.ndarray
    global_linf: np.ndarray
    near_constant: np.ndarray
    beta_x: np.ndarray
    beta_y: np.ndarray | None = None


def _guarded_speed_spread(sample, phases, dims):
    """Per-cell spread (max - min) of |u_d| + c~ over the sampled points.

    The spread measures how much wave dynamics the cell actually resolves:
    it vanishes like O(h) in smooth regions, so the damping does not erode
    high-order accuracy there, while jumping to the full wave-speed scale
    across shocks and material interfaces where oscillations are born.  The
    OE step runs before the BP limiter, so sampled values may be
    transiently inadmissible; density and the sound-speed radicand are
    floored to keep the estimate defined.
    """
    rho = np.maximum(sample[..., 0, :] + sample[..., 1, :], 1e-300)
    gamma_coef, pi_coef = eos.mixture_coefficients(sample[..., -1, :], phases)
    kin = 0.5 * sample[..., 2, :] ** 2
    if dims == 2:
        kin = kin + 0.5 * sample[..., 3, :] ** 2
    p = (sample[..., -2, :] - kin / rho - pi_coef) / gamma_coef
    c = np.sqrt(np.maximum(((gamma_coef + 1.0) * p + pi_coef) / (gamma_coef * rho), 0.0))
    out = []
    for axis in range(dims):
        speed = np.abs(sample[..., 2 + axis, :] / rho) + c
        out.append(speed.max(axis=-1) - speed.min(axis=-1))
    return out


def make_oe_context(field, dt, phases):
    """Domain averages, L-infinity deviations, and wave-speed estimates."""
    mesh = field.mesh
    cells = field.coeffs.shape[: mesh.dims]
    avg = field.cell_averages().mean(axis=tuple(range(mesh.dims)))
    # sample at the volume and Lobatto points in one array (comp axis at -2)
    eval_mat = np.hstack([field.basis.phi_vol, field.basis.phi_lob])
    if field.coeffs.dtype == np.float64:
        ncomp, nm = field.coeffs.shape[-2:]
        sample = (field.coeffs.reshape(-1, nm) @ eval_mat).reshape(
            -1, ncomp, eval_mat.shape[1]
        )
        beta, devmax = _kernels.speed_spread_and_dev(
            sample, avg, mesh.dims, phases.gamma1, phases.pw1, phases.gamma2, phases.pw2
        )
        linf = devmax.max(axis=0)
        speeds = [np.ascontiguousarray(beta[:, d].reshape(cells)) for d in range(mesh.dims)]
    else:
        sample = field.coeffs @ eval_mat
        dev = np.abs(sample - avg[:, None])
        linf = dev.max(axis=tuple(i for i in range(dev.ndim) if i != dev.ndim - 2))
        speeds = _guarded_speed_spread(sample, phases, mesh.dims)
    near_const = linf < NEAR_CONSTANT_RTOL * np.maximum(1.0, np.abs(avg))
    return OEContext(
        dt=dt,
        global_avg=np.asarray(avg, dtype=float),
        global_linf=np.asarray(linf, dtype=float),
        near_constant=near_const,
        beta_x=speeds[0],
        beta_y=speeds[1] if mesh.dims == 2 else None,
    )


def _sigma_coefs(basis, h):
    """Per-order factors (2m+1) h^m / (2(2K-1) m!) of the jump indicator."""
    k = basis.degree
    n_orders = basis.max_jump_order() + 1
    denom = 2.0 * max(2 * k - 1, 1)
    coefs = np.empty(n_orders)
    fact = 1.0
    for m in range(n_orders):
        if m > 0:
            fact *= m
        coefs[m] = (2 * m + 1) * h**m / (denom * fact)
    return coefs


def _sigma_axis(field, pad, ctx, axis):
    """Jump indicators on every face along one axis.

    Returns sigma with shape (n_faces..., ncomp, n_orders), already divided
    by the global L-infinity deviation and zeroed for near-constant
    components.
    """
    mesh, basis = field.mesh, field.basis
    t_lo, t_hi, alphas, orders = basis.jump_trace_stack(axis)
    h = (mesh.dx, mesh.dy)[axis]
    # physical scaling of each reference derivative
    scale = np.array(
        [
            (2.0 / mesh.dx) ** a[0] * ((2.0 / mesh.dy) ** a[1] if mesh.dims == 2 else 1.0)
            for a in alphas
        ]
    )
    if axis == 0:
        if mesh.dims == 1:
            minus_cells, plus_cells = pad[:-1], pad[1:]
        else:
            minus_cells, plus_cells = pad[:-1, 1:-1], pad[1:, 1:-1]
    else:
        minus_cells, plus_cells = pad[1:-1, :-1], pad[1:-1, 1:]
    # trace both sides of every face through the stacked derivative
    # operators with one flat matmul each: (cells*ncomp, n_modes) @
    # (n_modes, n_alpha*nfq)
    n_alpha, n_modes, nfq = t_hi.shape
    op_hi = t_hi.transpose(1, 0, 2).reshape(n_modes, n_alpha * nfq)
    op_lo = t_lo.transpose(1, 0, 2).reshape(n_modes, n_alpha * nfq)
    lead = minus_cells.shape[:-1]  # (..., ncomp)
    coefs = _sigma_coefs(basis, h)
    n_orders = coefs.shape[0]
    # the alpha stack is sorted by order; slice bounds per order
    order_start = np.searchsorted(orders, np.arange(n_orders + 1))

    if pad.dtype == np.float64:
        minus = (minus_cells.reshape(-1, n_modes) @ op_hi).reshape(-1, lead[-1], n_alpha, nfq)
        plus = (plus_cells.reshape(-1, n_modes) @ op_lo).reshape(minus.shape)
        sigma = _kernels.sigma_from_traces(
            minus,
            plus,
            basis.face_wts,
            scale,
            order_start.astype(np.int64),
            coefs,
            ctx.global_linf,
            ctx.near_constant,
        )
        return sigma.reshape(lead + (n_orders,))

    minus = (minus_cells.reshape(-1, n_modes) @ op_hi).reshape(lead + (n_alpha, nfq))
    plus = (plus_cells.reshape(-1, n_modes) @ op_lo).reshape(lead + (n_alpha, nfq))
    # transverse face average of |jump| (weights sum to one; exact in 1D)
    jump = np.abs(plus - minus) @ basis.face_wts  # (..., ncomp, n_alpha)
    jump *= scale
    sigma = np.zeros(jump.shape[:-1] + (n_orders,))
    for m in range(n_orders):
        lo, hi = order_start[m], order_start[m + 1]
        if hi > lo:
            sigma[..., m] = coefs[m] * jump[..., lo:hi].sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = sigma / ctx.global_linf[:, None]
    sigma[..., ctx.near_constant, :] = 0.0
    return np.asarray(sigma, dtype=float)


def oe_sigma(field, q, face, m, ctx, bc):
    """Indicator of one component at one face: face = (axis, *index)."""
    pad = ghost_pad(field, bc)
    axis = face[0]
    sig = _sigma_axis(field, pad, ctx, axis)
    return float(sig[face[1:]][q, m])


def oe_delta(field, cell, m, ctx, bc):
    """Damping rate of one cell at one derivative order."""
    pad = ghost_pad(field, bc)
    mesh = field.mesh
    sx = _sigma_axis(field, pad, ctx, 0)
    if mesh.dims == 1:
        (i,) = np.atleast_1d(cell)
        rate = ctx.beta_x[i] * (sx[i + 1, :, m] + sx[i, :, m]) / mesh.dx
    else:
        i, j = cell
        sy = _sigma_axis(field, pad, ctx, 1)
        rate = ctx.beta_x[i, j] * (sx[i + 1, j, :, m] + sx[i, j, :, m]) / mesh.dx
        rate = rate + ctx.beta_y[i, j] * (sy[i, j + 1, :, m] + sy[i, j, :, m]) / mesh.dy
    return float(np.max(rate))


def apply_oe(field, dt, phases, bc, ctx=None, stats=None):
    """Damp modal coefficients by the accumulated jump indicators.

    Modes of total degree k are scaled by exp(-dt * sum_{m<=k} delta^m);
    cell averages are untouched.
    """
    basis, mesh = field.basis, field.mesh
    if basis.degree == 0 or dt == 0.0:
        return field.copy()
    if ctx is None:
        ctx = make_oe_context(field, dt, phases)
    pad = ghost_pad(field, bc)
    sx = _sigma_axis(field, pad, ctx, 0)
    if mesh.dims == 1:
        rate = ctx.beta_x[:, None, None] * (sx[1:] + sx[:-1]) / mesh.dx
    else:
        sy = _sigma_axis(field, pad, ctx, 1)
        rate = ctx.beta_x[..., None, None] * (sx[1:] + sx[:-1]) / mesh.dx
        rate = rate + ctx.beta_y[..., None, None] * (sy[:, 1:] + sy[:, :-1]) / mesh.dy
    delta = rate.max(axis=-2)  # (cells..., n_orders): max over components
    cumulative = np.cumsum(delta, axis=-1)
    if stats is not None:
        stats["max_damping_exponent"] = float(dt * np.max(cumulative[..., -1]))
    factors = np.exp(-dt * cumulative)
    out = field.coeffs.copy()
    degrees = basis.degrees
    for k in range(1, int(degrees.max()) + 1):
        # modes of degree k are damped by exp(-dt * sum_{m=0..k} delta^m)
        out[..., degrees == k] *= factors[..., k][..., None, None]
    return field.with_coeffs(out)


def _theta_low(avg, low, vmin, eps):
    """Rescale factor pushing the cell minimum up to `low`; 1 if already fine."""
    need = vmin < low
    span = avg - vmin
    safe = np.where(span > eps, span, 1.0)
    theta = np.where(need & (span > eps), (avg - low) / safe, 1.0)
    return np.clip(theta, 0.0, 1.0)


def _theta_high(avg, high, vmax, eps):
    need = vmax > high
    span = vmax - avg
    safe = np.where(span > eps, span, 1.0)
    theta = np.where(need & (span > eps), (high - avg) / safe, 1.0)
    return np.clip(theta, 0.0, 1.0)


def apply_bp(field, phases, stats=None):
    """Two-stage bound-preserving rescale toward the cell average.

    Stage one enforces the volume-fraction window and partial-density
    positivity at the Gauss-Lobatto points; stage two enforces pressure
    positivity there (or the average pressure, when that is lower).  Raises
    SolverFailure when a cell average violates its linear bounds, since
    rescaling toward it can then fix nothing.

    float64 fields run through one fused kernel; the numpy path below also
    serves extended-precision runs.
    """
    if field.coeffs.dtype == np.float64:
        return _apply_bp_fast(field, phases, stats)
    return _apply_bp_reference(field, phases, stats)


def _apply_bp_fast(field, phases, stats):
    mesh, basis, c = field.mesh, field.basis, field.coeffs
    ncomp, nm = c.shape[-2:]
    cells = c.shape[: mesh.dims]
    flat = c.reshape(-1, ncomp, nm)
    avg = np.ascontiguousarray(flat[:, :, 0])
    lob = (flat.reshape(-1, nm) @ basis.phi_lob).reshape(
        -1, ncomp, basis.phi_lob.shape[1]
    )
    factor, cell_stats, bad = _kernels.bp_limit(
        avg, lob, phases.gamma1, phases.pw1, phases.gamma2, phases.pw2, EPS_BOUND
    )
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad.reshape(cells))), cells)
        raise SolverFailure("inadmissible cell average", cell=idx, quantity="average bounds")
    out = c.copy()
    out[..., 1:] *= factor.reshape(cells)[..., None, None]
    if stats is not None:
        stats["bp_activations"] = int(cell_stats[:, 4].sum())
        stats["min_pressure"] = float(cell_stats[:, 0].min())
        stats["max_pressure"] = float(cell_stats[:, 1].max())
        stats["min_z"] = float(cell_stats[:, 2].min())
        stats["max_z"] = float(cell_stats[:, 3].max())
    return field.with_coeffs(out)


def _apply_bp_reference(field, phases, stats):
    mesh = field.mesh
    avgs = field.cell_averages()  # (cells..., ncomp)
    z_avg = avgs[..., -1]
    p_avg = eos.pressure(avgs, phases)
    # the rescale is only meaningful if the average itself respects the
    # linear bounds; a transiently negative average pressure is tolerated
    # (the source substep can produce one at a freshly shocked interface),
    # in which case the pressure stage below degrades to enforcing
    # p >= p(avg), the best any rescale toward the average can do
    bad = (
        (avgs[..., 0] < -1e-12)
        | (avgs[..., 1] < -1e-12)
        | (z_avg < -1e-12)
        | (z_avg > 1.0 + 1e-12)
    )
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise SolverFailure("inadmissible cell average", cell=idx, quantity="average bounds")

    vals = field.lobatto_values()  # (cells..., ncomp, n_lob)
    eps_z = np.minimum(np.minimum(z_avg, 1.0 - z_avg), EPS_BOUND)
    theta = _theta_low(z_avg, eps_z, vals[..., -1, :].min(axis=-1), 1e-300)
    theta = np.minimum(
        theta, _theta_high(z_avg, 1.0 - eps_z, vals[..., -1, :].max(axis=-1), 1e-300)
    )
    for comp in (0, 1):
        eps_m = np.minimum(avgs[..., comp], EPS_BOUND)
        theta = np.minimum(
            theta, _theta_low(avgs[..., comp], eps_m, vals[..., comp, :].min(axis=-1), 1e-300)
        )

    out = field.coeffs.copy()
    out[..., 1:] *= theta[..., None, None]

    # stage two: pressure positivity on the rescaled polynomial.  The
    # rescale factor is computed from the pressure *numerator* h(U) =
    # Gamma(z) * (p(U) - eps_p): h is concave along the path toward the cell
    # average while p itself is not when Gamma varies with z, so the
    # numerator ratio is the one-pass factor that provably lands at or above
    # the floor.  It coincides with the plain pressure ratio whenever z is
    # constant along the path.
    vals = avgs[..., None] + theta[..., None, None] * (vals - avgs[..., None])
    dims = mesh.dims
    p_pts, gamma_pts = _pointwise_pressure(vals, phases, dims)
    eps_p = np.minimum(p_avg, EPS_BOUND)
    gamma_avg, _ = eos.mixture_coefficients(z_avg, phases)
    h0 = gamma_avg * (p_avg - eps_p)
    h1 = gamma_pts * (p_pts - eps_p[..., None])
    with np.errstate(divide="ignore", invalid="ignore"):
        theta_pts = np.where(h1 < 0.0, h0[..., None] / (h0[..., None] - h1), 1.0)
    theta_p = np.clip(np.min(theta_pts, axis=-1), 0.0, 1.0)
    out[..., 1:] *= theta_p[..., None, None]

    if stats is not None:
        activated = (theta < 1.0) | (theta_p < 1.0)
        stats["bp_activations"] = int(np.count_nonzero(activated))
        final = avgs[..., None] + theta_p[..., None, None] * (vals - avgs[..., None])
        p_final, _ = _pointwise_pressure(final, phases, dims)
        stats["min_pressure"] = float(p_final.min())
        stats["max_pressure"] = float(p_final.max())
        stats["min_z"] = float(final[..., -1, :].min())
        stats["max_z"] = float(final[..., -1, :].max())
    return field.with_coeffs(out)


def _pointwise_pressure(vals, phases, dims):
    """Pressure and Gamma at sampled points; vals has shape (..., ncomp, n).

    Division guards replace eos.pressure's raise: a vanishing sampled
    density maps to -inf pressure, which the rescale treats as a full
    collapse toward the (admissible) average.
    """
    rho = vals[..., 0, :] + vals[..., 1, :]
    kin = 0.5 * vals[..., 2, :] ** 2
    if dims == 2:
        kin = kin + 0.5 * vals[..., 3, :] ** 2
    gamma_coef, pi_coef = eos.mixture_coefficients(vals[..., -1, :], phases)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = (vals[..., -2, :] - kin / rho - pi_coef) / gamma_coef
    return np.where(np.isnan(p), -np.inf, p), gamma_coef

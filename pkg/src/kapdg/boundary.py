"""Ghost-cell construction for the supported boundary condition types.

Ghosts are built at the level of modal coefficients so that fluxes, the
divergence reconstruction, and the inter-cell jump indicators all see one
consistent exterior state:

  periodic      wrap-around copy of the opposite cell
  transmissive  zero-order extrapolation of the boundary trace: the ghost
                matches the interior face value exactly (zero face jump, so
                outgoing waves leave without reflection) and is constant
                along the normal
  reflective    mirrored polynomial with the normal momentum negated
  dirichlet     constant ghost holding a fixed conserved state
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PERIODIC = "periodic"
TRANSMISSIVE = "transmissive"
REFLECTIVE = "reflective"
DIRICHLET = "dirichlet"


@dataclass(frozen=True)
class EdgeCondition:
    kind: str
    state: np.ndarray | None = None  # conserved state for dirichlet edges

    def __post_init__(self):
        if self.kind not in (PERIODIC, TRANSMISSIVE, REFLECTIVE, DIRICHLET):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == DIRICHLET and self.state is None:
            raise ValueError("dirichlet edge needs a state")


def edge(kind, state=None):
    s = None if state is None else np.asarray(state, dtype=float)
    return EdgeCondition(kind, s)


@dataclass(frozen=True)
class BoundaryConditions:
    x_lo: EdgeCondition
    x_hi: EdgeCondition
    y_lo: EdgeCondition | None = None
    y_hi: EdgeCondition | None = None

    def __post_init__(self):
        for a, b in ((self.x_lo, self.x_hi), (self.y_lo, self.y_hi)):
            if a is None or b is None:
                continue
            if (a.kind == PERIODIC) != (b.kind == PERIODIC):
                raise ValueError("periodic edges must be paired")


def periodic_1d():
    return BoundaryConditions(edge(PERIODIC), edge(PERIODIC))


def transmissive_1d():
    return BoundaryConditions(edge(TRANSMISSIVE), edge(TRANSMISSIVE))


def periodic_2d():
    return BoundaryConditions(edge(PERIODIC), edge(PERIODIC), edge(PERIODIC), edge(PERIODIC))


def _normal_momentum_component(axis):
    return 2 + axis


def _ghost_slab(inner, basis, cond, axis, side, ncomp):
    """Ghost coefficients adjacent to `inner`, the boundary cell slab.

    `inner` has shape (..., ncomp, n_modes) covering the cells that touch
    this edge; `side` is 0 at the low edge, 1 at the high edge.
    """
    if cond.kind == TRANSMISSIVE:
        # interior trace at the shared face (evaluated at the low edge on the
        # cell's own -1 face and vice versa), copied into the ghost's
        # normal-constant modes so the transverse variation is kept
        trace = inner @ basis.face_phi[axis][side]
        ghost = np.zeros_like(inner)
        if basis.dims == 1:
            ghost[..., 0] = trace[..., 0]
        else:
            from .field import _legendre_matrix  # local import to avoid cycle

            leg_t = _legendre_matrix(basis.degree, basis.face_nodes_1d)
            tcoef = (trace * basis.face_wts) @ leg_t.T  # (..., ncomp, k+1)
            for i, mode in enumerate(basis.modes):
                if mode[axis] == 0:
                    ghost[..., i] = tcoef[..., mode[1 - axis]]
        return ghost
    if cond.kind == REFLECTIVE:
        sign = (-1.0) ** basis.axis_degree[axis]
        ghost = inner * sign
        ghost[..., _normal_momentum_component(axis), :] *= -1.0
        return ghost
    if cond.kind == DIRICHLET:
        ghost = np.zeros_like(inner)
        state = cond.state
        if state.shape[-1] != ncomp:
            raise ValueError("dirichlet state has wrong component count")
        ghost[..., :, 0] = state
        return ghost
    raise AssertionError("periodic edges are handled by wrapping")


def ghost_pad(field, bc):
    """Coefficients padded with one ghost layer per boundary.

    Returns an array of shape (nx+2[, ny+2], ncomp, n_modes); the corner
    cells of the 2D pad are never read and stay zero.
    """
    mesh, basis, c = field.mesh, field.basis, field.coeffs
    ncomp = field.ncomp
    if mesh.dims == 1:
        pad = np.zeros((mesh.nx + 2,) + c.shape[1:], dtype=c.dtype)
        pad[1:-1] = c
        if bc.x_lo.kind == PERIODIC:
            pad[0] = c[-1]
            pad[-1] = c[0]
        else:
            pad[0] = _ghost_slab(c[0], basis, bc.x_lo, 0, 0, ncomp)
            pad[-1] = _ghost_slab(c[-1], basis, bc.x_hi, 0, 1, ncomp)
        return pad
    pad = np.zeros((mesh.nx + 2, mesh.ny + 2) + c.shape[2:], dtype=c.dtype)
    pad[1:-1, 1:-1] = c
    if bc.x_lo.kind == PERIODIC:
        pad[0, 1:-1] = c[-1]
        pad[-1, 1:-1] = c[0]
    else:
        pad[0, 1:-1] = _ghost_slab(c[0], basis, bc.x_lo, 0, 0, ncomp)
        pad[-1, 1:-1] = _ghost_slab(c[-1], basis, bc.x_hi, 0, 1, ncomp)
    if bc.y_lo.kind == PERIODIC:
        pad[1:-1, 0] = c[:, -1]
        pad[1:-1, -1] = c[:, 0]
    else:
        pad[1:-1, 0] = _ghost_slab(c[:, 0], basis, bc.y_lo, 1, 0, ncomp)
        pad[1:-1, -1] = _ghost_slab(c[:, -1], basis, bc.y_hi, 1, 1, ncomp)
    return pad

"""Uniform Cartesian mesh and tensor-product Legendre modal DG fields.

Basis functions on the reference cell [-1,1]^d are scaled Legendre
polynomials phi_m = sqrt(2m+1) P_m, orthonormal under the cell-average
inner product (1/|ref|) * integral.  Mode 0 is the constant 1, so the
leading coefficient of every expansion is the cell average.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.polynomial import legendre as npleg


@dataclass(frozen=True)
class Mesh:
    dims: int
    nx: int
    ny: int
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")
        if self.nx < 1 or (self.dims == 2 and self.ny < 1):
            raise ValueError("cell counts must be positive")
        if self.x_hi <= self.x_lo or (self.dims == 2 and self.y_hi <= self.y_lo):
            raise ValueError("domain bounds must be increasing")

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def dy(self):
        return (self.y_hi - self.y_lo) / self.ny if self.dims == 2 else 0.0

    @property
    def cell_volume(self):
        return self.dx * (self.dy if self.dims == 2 else 1.0)

    def x_centers(self):
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self):
        return self.y_lo + (np.arange(self.ny) + 0.5) * self.dy


def mesh_1d(nx, x_lo, x_hi):
    return Mesh(1, nx, 1, x_lo, x_hi, 0.0, 0.0)


def mesh_2d(nx, ny, x_lo, x_hi, y_lo, y_hi):
    return Mesh(2, nx, ny, x_lo, x_hi, y_lo, y_hi)


def _legendre_matrix(degree, pts, deriv=0):
    """Rows m = 0..degree of d^deriv/dx^deriv [sqrt(2m+1) P_m] at pts."""
    pts = np.atleast_1d(np.asarray(pts, dtype=float))
    out = np.zeros((degree + 1, pts.size))
    for m in range(degree + 1):
        coef = np.zeros(m + 1)
        coef[m] = np.sqrt(2.0 * m + 1.0)
        if deriv:
            coef = npleg.legder(coef, deriv)
        out[m] = npleg.legval(pts, coef) if coef.size else 0.0
    return out


def gauss_points(n):
    """n-point Gauss-Legendre rule on [-1,1] with weights normalized to 1."""
    x, w = npleg.leggauss(n)
    return x, w / 2.0


def lobatto_points_1d(n):
    """n-point Gauss-Lobatto node set on [-1,1] (endpoints included)."""
    if n < 2:
        raise ValueError("Lobatto rule needs at least 2 points")
    if n == 2:
        return np.array([-1.0, 1.0])
    # interior nodes are the roots of P'_{n-1}
    coef = np.zeros(n)
    coef[n - 1] = 1.0
    interior = npleg.legroots(npleg.legder(coef))
    return np.concatenate([[-1.0], np.sort(interior), [1.0]])


def lobatto_rule(n):
    """Gauss-Lobatto nodes and weights on [-1,1], weights normalized to 1.

    Exact for polynomials up to degree 2n-3.
    """
    x = lobatto_points_1d(n)
    coef = np.zeros(n)
    coef[n - 1] = 1.0
    pnm1 = npleg.legval(x, coef)
    w = 2.0 / (n * (n - 1) * pnm1**2)
    return x, w / 2.0


class Basis:
    """Per-degree modal basis with all quadrature/trace matrices precomputed.

    Attributes of interest:
      modes           list of per-axis degree tuples, sorted by total degree
      degrees         total degree |alpha| per mode
      vol_pts/vol_wts volume Gauss rule (weights sum to 1)
      phi_vol         (n_modes, n_vol) basis values at volume points
      dphi_vol        per-axis derivative values at volume points
      face_phi[axis][side]  (n_modes, n_face) traces at side -1/+1 of axis
      face_wts        transverse quadrature weights (sum to 1) per face
      phi_lob         (n_modes, n_lob) values at the tensor Lobatto set
      dmat[axis]      modal differentiation matrix along an axis
    """

    def __init__(self, degree, dims):
        if degree < 0:
            raise ValueError("degree must be non-negative")
        if dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")
        self.degree = degree
        self.dims = dims
        k = degree
        x1, w1 = gauss_points(k + 1)
        leg = _legendre_matrix(k, x1)
        dleg = _legendre_matrix(k, x1, deriv=1)
        leg_m1 = _legendre_matrix(k, [-1.0])[:, 0]
        leg_p1 = _legendre_matrix(k, [1.0])[:, 0]
        self.lobatto_1d = lobatto_points_1d(k + 2)
        leg_lob = _legendre_matrix(k, self.lobatto_1d)
        # faces are integrated with the (k+2)-point Lobatto rule: it matches
        # the 2k+1 exactness of (k+1)-point Gauss while placing the face
        # quadrature points inside the bound-enforced Lobatto tensor set
        xf, wf = lobatto_rule(k + 2)
        self.face_nodes_1d = xf

        # modal differentiation matrix: D[m, n] = <phi_m, phi_n'>, exact under
        # the (k+1)-point rule since the integrand has degree <= 2k-1
        dmat_1d = (leg * w1) @ dleg.T

        if dims == 1:
            self.modes = [(m,) for m in range(k + 1)]
            self.degrees = np.array([m for (m,) in self.modes])
            self.n_modes = k + 1
            self.vol_pts = x1[:, None]
            self.vol_wts = w1
            self.phi_vol = leg
            self.dphi_vol = [dleg]
            self.face_phi = [[leg_m1[:, None], leg_p1[:, None]]]
            self.face_wts = np.array([1.0])
            self.lob_pts = self.lobatto_1d[:, None]
            self.phi_lob = leg_lob
            self.dmat = [dmat_1d]
        else:
            pairs = [(mx, my) for mx in range(k + 1) for my in range(k + 1)]
            pairs.sort(key=lambda a: (a[0] + a[1], a[0]))
            self.modes = pairs
            self.degrees = np.array([mx + my for mx, my in pairs])
            self.n_modes = len(pairs)
            xx, yy = np.meshgrid(x1, x1, indexing="ij")
            self.vol_pts = np.column_stack([xx.ravel(), yy.ravel()])
            self.vol_wts = np.outer(w1, w1).ravel()

            def tensor(fx, fy):
                # fx, fy: (k+1, npts_x), (k+1, npts_y) evaluated on the same
                # flattened point list; combine per mode.
                return np.array([fx[mx] * fy[my] for mx, my in pairs])

            ax = _legendre_matrix(k, xx.ravel())
            ay = _legendre_matrix(k, yy.ravel())
            dax = _legendre_matrix(k, xx.ravel(), deriv=1)
            day = _legendre_matrix(k, yy.ravel(), deriv=1)
            self.phi_vol = tensor(ax, ay)
            self.dphi_vol = [tensor(dax, ay), tensor(ax, day)]

            fx = _legendre_matrix(k, xf)
            self.face_wts = wf
            # x-faces: phi(+-1, eta_f); y-faces: phi(xi_f, +-1)
            self.face_phi = [
                [
                    np.array([leg_m1[mx] * fx[my] for mx, my in pairs]),
                    np.array([leg_p1[mx] * fx[my] for mx, my in pairs]),
                ],
                [
                    np.array([fx[mx] * leg_m1[my] for mx, my in pairs]),
                    np.array([fx[mx] * leg_p1[my] for mx, my in pairs]),
                ],
            ]
            lx, ly = np.meshgrid(self.lobatto_1d, self.lobatto_1d, indexing="ij")
            self.lob_pts = np.column_stack([lx.ravel(), ly.ravel()])
            alx = _legendre_matrix(k, lx.ravel())
            aly = _legendre_matrix(k, ly.ravel())
            self.phi_lob = tensor(alx, aly)

            dmx = np.zeros((self.n_modes, self.n_modes))
            dmy = np.zeros((self.n_modes, self.n_modes))
            index = {a: i for i, a in enumerate(pairs)}
            for (mx, my), j in index.items():
                for mx2 in range(k + 1):
                    dmx[index[(mx2, my)], j] += dmat_1d[mx2, mx]
                for my2 in range(k + 1):
                    dmy[index[(mx, my2)], j] += dmat_1d[my2, my]
            self.dmat = [dmx, dmy]

        # weighted evaluation matrices used by projections and face sums
        self.proj_vol = self.phi_vol * self.vol_wts  # (n_modes, n_vol)
        self.axis_degree = np.array(
            [[a[ax] for a in self.modes] for ax in range(dims)]
        )
        self._alpha_cache = {}

    def mode_index(self, alpha):
        return self.modes.index(tuple(alpha))

    def max_jump_order(self):
        """Highest derivative order carried by the modal space."""
        return int(self.degrees.max())

    def alphas_of_order(self, m):
        """Multi-indices |alpha| = m representable by this space."""
        k = self.degree
        if self.dims == 1:
            return [(m,)] if m <= k else []
        return [(ax, m - ax) for ax in range(max(0, m - k), min(k, m) + 1)]

    def deriv_operator(self, alpha):
        """Modal matrix of the reference-cell derivative d^alpha."""
        key = tuple(alpha)
        if key not in self._alpha_cache:
            op = np.eye(self.n_modes)
            for ax, n in enumerate(key):
                for _ in range(n):
                    op = self.dmat[ax] @ op
            self._alpha_cache[key] = op
        return self._alpha_cache[key]

    def jump_trace_stack(self, axis):
        """Trace operators of every derivative d^alpha at the two faces of
        an axis, stacked over alpha: (T_lo, T_hi, alphas, orders) where the
        T arrays have shape (n_alpha_total, n_modes, nfq).

        Used by the inter-cell jump indicators; alphas run over all orders
        the modal space carries.
        """
        key = ("jump_stack", axis)
        if key not in self._alpha_cache:
            alphas = []
            for m in range(self.max_jump_order() + 1):
                alphas.extend(self.alphas_of_order(m))
            t_lo = np.array(
                [self.deriv_operator(a).T @ self.face_phi[axis][0] for a in alphas]
            )
            t_hi = np.array(
                [self.deriv_operator(a).T @ self.face_phi[axis][1] for a in alphas]
            )
            orders = np.array([sum(a) for a in alphas])
            self._alpha_cache[key] = (t_lo, t_hi, tuple(alphas), orders)
        return self._alpha_cache[key]

    def eval_matrix(self, ref_pts):
        """(n_modes, n_pts) values of every mode at arbitrary ref points."""
        ref_pts = np.atleast_2d(np.asarray(ref_pts, dtype=float))
        k = self.degree
        ax = _legendre_matrix(k, ref_pts[:, 0])
        if self.dims == 1:
            return np.array([ax[m] for (m,) in self.modes])
        ay = _legendre_matrix(k, ref_pts[:, 1])
        return np.array([ax[mx] * ay[my] for mx, my in self.modes])


@dataclass
class ModalField:
    """Per-cell modal coefficients for all state components.

    coeffs has shape (nx, ncomp, n_modes) in 1D and (nx, ny, ncomp, n_modes)
    in 2D.  Cell averages live in coefficient 0.
    """

    mesh: Mesh
    basis: Basis
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        expect = (self.mesh.nx,) if self.mesh.dims == 1 else (self.mesh.nx, self.mesh.ny)
        if self.coeffs.shape[: self.mesh.dims] != expect:
            raise ValueError("coefficient array does not match the mesh")
        if self.coeffs.shape[-1] != self.basis.n_modes:
            raise ValueError("coefficient array does not match the basis")

    @property
    def ncomp(self):
        return self.coeffs.shape[-2]

    def copy(self):
        return ModalField(self.mesh, self.basis, self.coeffs.copy())

    def with_coeffs(self, coeffs):
        return ModalField(self.mesh, self.basis, coeffs)

    def cell_averages(self):
        return self.coeffs[..., 0]

    def volume_values(self):
        """States at the volume quadrature points, shape (..., ncomp, n_vol)."""
        return self.coeffs @ self.basis.phi_vol

    def lobatto_values(self):
        return self.coeffs @ self.basis.phi_lob


def zeros_like_field(field):
    return ModalField(field.mesh, field.basis, np.zeros_like(field.coeffs))


def evaluate(field, cell, point):
    """Exact polynomial evaluation of all components at one reference point."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if np.any(np.abs(point) > 1.0 + 1e-12):
        raise ValueError("reference point outside [-1,1]^d")
    phi = field.basis.eval_matrix(point[None, :])[:, 0]
    if field.mesh.dims == 1:
        (i,) = np.atleast_1d(cell)
        return field.coeffs[i] @ phi
    i, j = cell
    return field.coeffs[i, j] @ phi


def cell_quad_points(mesh, basis):
    """Physical volume quadrature points for every cell.

    1D: (nx, n_vol); 2D: tuple (X, Y) each (nx, ny, n_vol).
    """
    if mesh.dims == 1:
        xc = mesh.x_centers()
        return xc[:, None] + 0.5 * mesh.dx * basis.vol_pts[:, 0][None, :]
    xc = mesh.x_centers()
    yc = mesh.y_centers()
    x = xc[:, None, None] + 0.5 * mesh.dx * basis.vol_pts[:, 0][None, None, :]
    y = yc[None, :, None] + 0.5 * mesh.dy * basis.vol_pts[:, 1][None, None, :]
    return np.broadcast_to(x, (mesh.nx, mesh.ny, basis.vol_pts.shape[0])).copy(), np.broadcast_to(
        y, (mesh.nx, mesh.ny, basis.vol_pts.shape[0])
    ).copy()


def l2_project(f, mesh, basis, ncomp):
    """Quadrature L2 projection of a pointwise state function.

    f maps physical coordinates (x[, y] as flat arrays) to an array of
    shape (npts, ncomp).
    """
    if mesh.dims == 1:
        x = cell_quad_points(mesh, basis)
        vals = f(x.ravel()).reshape(mesh.nx, -1, ncomp)
    else:
        x, y = cell_quad_points(mesh, basis)
        vals = f(x.ravel(), y.ravel()).reshape(mesh.nx, mesh.ny, -1, ncomp)
    vals = np.swapaxes(vals, -1, -2)  # (..., ncomp, n_vol)
    coeffs = vals @ basis.proj_vol.T
    return ModalField(mesh, basis, np.ascontiguousarray(coeffs))


def project_values(basis, point_values):
    """Modal coefficients from values at the volume quadrature points."""
    return point_values @ basis.proj_vol.T


def lobatto_points(mesh, basis, cell):
    """Physical Gauss-Lobatto point set of one cell ((K+2)^d points)."""
    if mesh.dims == 1:
        (i,) = np.atleast_1d(cell)
        xc = mesh.x_lo + (i + 0.5) * mesh.dx
        return xc + 0.5 * mesh.dx * basis.lob_pts[:, 0]
    i, j = cell
    xc = mesh.x_lo + (i + 0.5) * mesh.dx
    yc = mesh.y_lo + (j + 0.5) * mesh.dy
    return np.column_stack(
        [xc + 0.5 * mesh.dx * basis.lob_pts[:, 0], yc + 0.5 * mesh.dy * basis.lob_pts[:, 1]]
    )


def evaluate_at_points(field, x, y=None):
    """Evaluate a field at arbitrary physical points (vectorized).

    Points on a cell boundary are attributed to the right/upper cell, except
    at the domain's upper edge.  Returns (npts, ncomp).
    """
    mesh, basis = field.mesh, field.basis
    x = np.asarray(x, dtype=float).ravel()
    ix = np.clip(np.floor((x - mesh.x_lo) / mesh.dx).astype(int), 0, mesh.nx - 1)
    xi = 2.0 * (x - (mesh.x_lo + (ix + 0.5) * mesh.dx)) / mesh.dx
    if mesh.dims == 1:
        phi = basis.eval_matrix(xi[:, None])  # (n_modes, npts)
        gathered = field.coeffs[ix]  # (npts, ncomp, n_modes)
        return np.einsum("pnm,mp->pn", gathered, phi)
    y = np.asarray(y, dtype=float).ravel()
    jy = np.clip(np.floor((y - mesh.y_lo) / mesh.dy).astype(int), 0, mesh.ny - 1)
    eta = 2.0 * (y - (mesh.y_lo + (jy + 0.5) * mesh.dy)) / mesh.dy
    phi = basis.eval_matrix(np.column_stack([xi, eta]))
    gathered = field.coeffs[ix, jy]
    return np.einsum("pnm,mp->pn", gathered, phi)

import numpy as np
import pytest

from kapdg import boundary, eos, field as fld, transport

AW = eos.PhasePair(1.4, 0.0, 4.4, 6000.0)
IDEAL = eos.PhasePair(1.4, 0.0, 1.6, 0.0)


def _project_prim(mesh, basis, phases, prim_fn):
    ncomp = mesh.dims + 4

    if mesh.dims == 1:
        def f(x):
            return eos.conserved_from_primitive(prim_fn(x), phases)
        return fld.l2_project(f, mesh, basis, ncomp)

    def f(x, y):
        return eos.conserved_from_primitive(prim_fn(x, y), phases)

    return fld.l2_project(f, mesh, basis, ncomp)


def test_lf_flux_consistency():
    w = eos.conserved_from_primitive(np.array([1.0, 1000.0, 0.5, 2.0, 0.4]), AW)
    trace = transport.FaceTrace(w, w, 0)
    p = eos.pressure(w, AW)
    expect = transport.physical_flux(w, p, 0)
    np.testing.assert_allclose(transport.lf_flux(trace, AW), expect, rtol=1e-14)


def test_lf_flux_hand_computed():
    # pure ideal gas, left at rest, right moving: check against a fully
    # independent evaluation of the formula
    left = np.array([1.0, 0.0, 0.0, 2.5, 1.0])
    right = np.array([1.0, 0.0, 1.0, 3.0, 1.0])
    trace = transport.FaceTrace(left, right, 0)
    c = np.sqrt(1.4)
    s = max(0.0 + c, 1.0 + c)
    fl = np.array([0.0, 0.0, 1.0, 0.0])  # (m1 u, m2 u, rho u^2 + p, (E+p)u)
    fr = np.array([1.0, 0.0, 2.0, 4.0])
    expect = 0.5 * (fl + fr) - 0.5 * s * (right[:-1] - left[:-1])
    np.testing.assert_allclose(transport.lf_flux(trace, IDEAL), expect, rtol=1e-14)
    assert transport.wave_speed(trace, IDEAL) == pytest.approx(s, rel=1e-14)


def test_lf_flux_symmetric_rest_states():
    # equal pressure, zero velocity: momentum flux is p, mass flux is the
    # dissipation term alone
    left = eos.conserved_from_primitive(np.array([1.0, 1000.0, 0.0, 2.0, 0.9]), AW)
    right = eos.conserved_from_primitive(np.array([1.0, 1000.0, 0.0, 2.0, 0.1]), AW)
    trace = transport.FaceTrace(left, right, 0)
    f = transport.lf_flux(trace, AW)
    s = transport.wave_speed(trace, AW)
    assert f[2] == pytest.approx(2.0, rel=1e-12)
    assert f[0] == pytest.approx(-0.5 * s * (right[0] - left[0]), rel=1e-12)
    assert f[1] == pytest.approx(-0.5 * s * (right[1] - left[1]), rel=1e-12)


def test_wave_speed_max_form():
    # craft traces with u=0, c=2 on the left and u=1, c=1 on the right:
    # ideal gas with rho=1.4, p=2.857... gives c=2 & co; simpler to verify the
    # max property on generated states
    rng = np.random.default_rng(2)
    for _ in range(20):
        prim = np.array(
            [rng.uniform(0.5, 2), rng.uniform(0.5, 2), rng.uniform(-2, 2), rng.uniform(0.5, 3), 1.0]
        )
        u = eos.conserved_from_primitive(prim, IDEAL)
        t = transport.FaceTrace(u, u, 0)
        s = transport.wave_speed(t, IDEAL)
        assert s >= abs(prim[2]) - 1e-14
        assert s == pytest.approx(abs(prim[2]) + float(eos.transport_sound_speed(u, IDEAL)), rel=1e-13)


def test_z_interface_flux_examples():
    def make(u_minus, z_minus, u_plus, z_plus):
        left = eos.conserved_from_primitive(np.array([1.0, 1.0, u_minus, 1.0, z_minus]), IDEAL)
        right = eos.conserved_from_primitive(np.array([1.0, 1.0, u_plus, 1.0, z_plus]), IDEAL)
        return transport.FaceTrace(left, right, 0)

    t = make(2.0, 0.5, 0.0, 0.5)
    assert transport.z_interface_flux(t, "minus", 3.0) == pytest.approx(1.0, rel=1e-14)
    t = make(1.3, 0.25, 1.3, 0.25)
    assert transport.z_interface_flux(t, "minus", 2.0) == pytest.approx(1.3 * 0.25, rel=1e-14)
    assert transport.z_interface_flux(t, "plus", 2.0) == pytest.approx(1.3 * 0.25, rel=1e-14)
    t = make(0.0, 0.0, 5.0, 1.0)
    assert transport.z_interface_flux(t, "minus", 1.0) == pytest.approx(-0.5, rel=1e-14)


@pytest.mark.parametrize("dims", [1, 2])
def test_free_stream_residual_zero(dims):
    basis = fld.Basis(2, dims)
    if dims == 1:
        mesh = fld.mesh_1d(8, 0.0, 2.0)
        bc = boundary.periodic_1d()
        f = _project_prim(mesh, basis, AW, lambda x: np.tile([1.0, 900.0, 0.7, 2.0, 0.3], (x.size, 1)))
    else:
        mesh = fld.mesh_2d(4, 5, 0.0, 1.0, 0.0, 1.0)
        bc = boundary.periodic_2d()
        f = _project_prim(
            mesh, basis, AW, lambda x, y: np.tile([1.0, 900.0, 0.7, -0.4, 2.0, 0.3], (x.size, 1))
        )
    res = transport.residual(f, AW, bc)
    assert np.max(np.abs(res)) < 1e-13 * max(1.0, np.max(np.abs(f.coeffs)))


@pytest.mark.parametrize("dims", [1, 2])
def test_abgrall_one_euler_step(dims):
    # uniform velocity and pressure with a sharp z1 profile stay uniform
    basis = fld.Basis(2, dims)
    u0, p0 = 2.0, 1.0
    if dims == 1:
        # face-aligned jump: one unlimited Euler step must keep u, p uniform
        # (density ratio kept moderate so the unlimited cell stays physical)
        mesh = fld.mesh_1d(50, -5.0, 5.0)
        bc = boundary.transmissive_1d()

        def prim(x):
            z = np.where(x <= 0.0, 1.0 - 1e-10, 1e-10)
            out = np.empty((x.size, 5))
            out[:, 0] = 1.0
            out[:, 1] = 10.0
            out[:, 2] = u0
            out[:, 3] = p0
            out[:, 4] = z
            return out

        f = _project_prim(mesh, basis, AW, prim)
    else:
        mesh = fld.mesh_2d(12, 12, -1.0, 1.0, -1.0, 1.0)
        bc = boundary.periodic_2d()

        def prim(x, y):
            z = 0.5 + 0.45 * np.sin(np.pi * x) * np.cos(np.pi * y)
            out = np.empty((x.size, 6))
            out[:, 0] = 1.0
            out[:, 1] = 1000.0
            out[:, 2] = u0
            out[:, 3] = -0.3
            out[:, 4] = p0
            out[:, 5] = z
            return out

        f = _project_prim(mesh, basis, AW, prim)
    dt = 0.1 * transport.compute_dt(f, 0.1, AW)
    new = f.with_coeffs(f.coeffs + dt * transport.residual(f, AW, bc))
    vals = np.swapaxes(new.volume_values(), -1, -2)
    rho = vals[..., 0] + vals[..., 1]
    vel = vals[..., 2:-2] / rho[..., None]
    p = eos.pressure(vals, AW)
    # pressure recovery subtracts Pi ~ E from E, so roundoff scales with E
    p_tol = 2e-14 * float(np.max(vals[..., -2]))
    assert np.max(np.abs(vel[..., 0] - u0)) < 1e-12
    if dims == 2:
        assert np.max(np.abs(vel[..., 1] + 0.3)) < 1e-12
    assert np.max(np.abs(p - p0)) < max(p_tol, 1e-12)


def test_p0_step_equals_first_order_finite_volume():
    # gas-liquid Riemann data, piecewise constant field
    phases = eos.PhasePair(1.4, 0.0, 7.15, 3309.0)
    mesh = fld.mesh_1d(40, -5.0, 5.0)
    basis = fld.Basis(0, 1)

    def prim(x):
        out = np.empty((x.size, 5))
        left = x <= 0.0
        out[:, 0] = 1.27
        out[:, 1] = 1.0
        out[:, 2] = 0.0
        out[:, 3] = np.where(left, 8000.0, 1.0)
        out[:, 4] = np.where(left, 1.0 - 1e-10, 1e-10)
        return out

    f = _project_prim(mesh, basis, phases, prim)
    bc = boundary.transmissive_1d()
    dt = transport.compute_dt(f, 0.1, phases)
    stepped = f.coeffs + dt * transport.residual(f, phases, bc)

    # independent first-order quasi-conservative finite-volume update
    ubar = f.coeffs[:, :, 0]
    ghosted = np.vstack([ubar[:1], ubar, ubar[-1:]])
    rho = ghosted[:, 0] + ghosted[:, 1]
    vel = ghosted[:, 2] / rho
    p = eos.pressure(ghosted, phases)
    c = eos.transport_sound_speed(ghosted, phases)
    expect = np.empty_like(ubar)
    for i in range(mesh.nx):
        li, ri = i, i + 2  # ghosted indices of neighbors
        me = i + 1
        s_left = max(abs(vel[li]) + c[li], abs(vel[me]) + c[me])
        s_right = max(abs(vel[me]) + c[me], abs(vel[ri]) + c[ri])

        def lf(a, b, s):
            fa = transport.physical_flux(ghosted[a], p[a], 0)
            fb = transport.physical_flux(ghosted[b], p[b], 0)
            return 0.5 * (fa + fb) - 0.5 * s * (ghosted[b, :-1] - ghosted[a, :-1])

        w_new = ubar[i, :-1] - dt / mesh.dx * (lf(me, ri, s_right) - lf(li, me, s_left))
        g_right = 0.5 * (ghosted[me, -1] - ghosted[ri, -1]) * (vel[me] - s_right)
        g_left = 0.5 * (ghosted[li, -1] - ghosted[me, -1]) * (vel[me] + s_left)
        z_new = ubar[i, -1] + dt / mesh.dx * (g_right + g_left)
        expect[i, :-1] = w_new
        expect[i, -1] = z_new
    np.testing.assert_allclose(stepped[:, :, 0], expect, rtol=1e-12, atol=1e-12)


def test_conservation_per_step_periodic():
    mesh = fld.mesh_1d(32, 0.0, 2.0)
    basis = fld.Basis(2, 1)
    phases = IDEAL

    def prim(x):
        out = np.empty((x.size, 5))
        out[:, 0] = 1.0
        out[:, 1] = 1.5 + 0.4 * np.cos(np.pi * x)
        out[:, 2] = 1.0 + 0.4 * np.cos(np.pi * x)
        out[:, 3] = 1.0
        out[:, 4] = 0.5 + 0.4 * np.sin(np.pi * x)
        return out

    f = _project_prim(mesh, basis, phases, prim)
    bc = boundary.periodic_1d()
    totals = [f.cell_averages().sum(axis=0) * mesh.dx]
    for _ in range(5):
        dt = transport.compute_dt(f, 0.1, phases)
        f = transport.advance_transport(f, dt, phases, bc)
        totals.append(f.cell_averages().sum(axis=0) * mesh.dx)
    totals = np.array(totals)
    for comp in range(4):  # conservative block only
        scale = max(abs(totals[0, comp]), 1e-30)
        assert np.max(np.abs(np.diff(totals[:, comp]))) < 1e-12 * scale


def test_compute_dt_formula_and_scaling():
    mesh = fld.mesh_1d(10, 0.0, 1.0)
    basis = fld.Basis(1, 1)
    f = _project_prim(
        mesh, basis, IDEAL, lambda x: np.tile([1.0, 1.0, 0.0, 1.0 / 1.4, 1.0], (x.size, 1))
    )
    # c~ = 1 and u = 0 everywhere => dt = cfl * dx
    assert transport.compute_dt(f, 0.1, IDEAL) == pytest.approx(0.1 * mesh.dx, rel=1e-12)
    mesh2 = fld.mesh_1d(20, 0.0, 1.0)
    f2 = _project_prim(
        mesh2, basis, IDEAL, lambda x: np.tile([1.0, 1.0, 0.0, 1.0 / 1.4, 1.0], (x.size, 1))
    )
    assert transport.compute_dt(f2, 0.1, IDEAL) == pytest.approx(
        0.5 * transport.compute_dt(f, 0.1, IDEAL), rel=1e-12
    )


def test_ssp_rk3_stability_polynomial():
    lam = -0.7 + 0.3j
    dt = 0.5
    z = lam * dt
    u = np.array([1.0 + 0j])
    got = transport.ssp_rk_step(u, dt, lambda v: lam * v)[0]
    assert got == pytest.approx(1 + z + z**2 / 2 + z**3 / 6, rel=1e-14)


def test_ssp_rk3_identity_for_zero_rhs():
    u = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(transport.ssp_rk_step(u, 0.3, lambda v: 0.0 * v), u)


def test_ssp_rk3_post_stage_called_three_times():
    calls = []

    def post(u):
        calls.append(u.copy())
        return u

    transport.ssp_rk_step(np.array([1.0]), 0.1, lambda v: v, post)
    assert len(calls) == 3


def test_transport_only_advection_convergence():
    # uniform u, p advect z exactly; measured order ~ K+1 with RK3
    phases = IDEAL
    u0 = 1.0
    errs = {1: [], 2: []}
    for degree in (1, 2):
        for n in (10, 20, 40):
            mesh = fld.mesh_1d(n, 0.0, 2.0)
            basis = fld.Basis(degree, 1)

            def prim(x):
                out = np.empty((x.size, 5))
                out[:, 0] = 1.0
                out[:, 1] = 1.0
                out[:, 2] = u0
                out[:, 3] = 1.0
                out[:, 4] = 0.5 + 0.4 * np.sin(np.pi * x)
                return out

            f = _project_prim(mesh, basis, phases, prim)
            bc = boundary.periodic_1d()
            t, t_end = 0.0, 0.25
            while t < t_end - 1e-14:
                dt = min(transport.compute_dt(f, 0.1, phases), t_end - t)
                f = transport.advance_transport(f, dt, phases, bc)
                t += dt
            xq = fld.cell_quad_points(mesh, basis)
            exact = 0.5 + 0.4 * np.sin(np.pi * (xq - u0 * t_end))
            z = f.volume_values()[:, -1, :]
            errs[degree].append(np.sum(np.abs(z - exact) * basis.vol_wts) * mesh.dx)
        orders = np.log2(np.array(errs[degree][:-1]) / np.array(errs[degree][1:]))
        assert orders[-1] > degree + 1 - 0.35, (degree, errs[degree], orders)

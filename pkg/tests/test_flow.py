import math

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla
import sympy as sym

from bdfadapt.controller import run_constant
from bdfadapt.fem import build_cfd300, build_pressure_impulse_channel
from bdfadapt.fem.benchmarks import inflow_velocity, inlet_pressure, ramp
from bdfadapt.fem.export import read_snapshot, write_mesh, write_snapshot
from bdfadapt.fem.mesh import INLET, OUTLET, WALL, build_channel_mesh, build_rectangle_mesh, build_step_mesh
from bdfadapt.fem.navier_stokes import NavierStokesProblem
from bdfadapt.fem.space import GAUSS_1D, GAUSS_1D_W, QUAD_POINTS, QUAD_WEIGHTS
from bdfadapt.problem import check_jacobian


@pytest.fixture(scope="module")
def cfd():
    return build_cfd300(0)


def test_step_mesh_geometry():
    m0, m1 = build_step_mesh(0), build_step_mesh(1)
    assert m0.area() == pytest.approx(82.0)
    assert m1.area() == pytest.approx(82.0)
    assert m1.n_triangles == 4 * m0.n_triangles
    assert m0.facet_lengths(INLET).sum() == pytest.approx(3.0)
    assert m0.facet_lengths(OUTLET).sum() == pytest.approx(5.0)
    # top 18, outlet 5, bottom 14, step riser 2, step tread 4, inlet 3
    assert m0.facet_lengths().sum() == pytest.approx(46.0)
    assert np.all(m0.signed_areas() > 0)


def test_channel_mesh():
    m = build_channel_mesh(0)
    assert m.area() == pytest.approx(25.0)
    assert m.facet_lengths(INLET).sum() == pytest.approx(2.5)
    with pytest.raises(ValueError):
        build_channel_mesh(0, length=10.3)


def test_inflow_and_ramp_values():
    assert float(ramp(0.0)) == 0.0 and float(ramp(0.5)) == pytest.approx(0.5) and float(ramp(3.0)) == 1.0
    ux, uy = inflow_velocity(1.0, np.array([2.0, 3.5, 5.0]))
    np.testing.assert_allclose(ux, [0.0, 5.0, 0.0], atol=1e-14)
    assert float(inflow_velocity(0.5, 3.5)[0]) == pytest.approx(2.5)
    assert np.all(uy == 0)


def test_inlet_pressure_values():
    assert float(inlet_pressure(0.05)) == pytest.approx(5 * (1 - math.cos(math.pi / 4)), rel=1e-14)
    assert float(inlet_pressure(0.05)) == pytest.approx(1.4645, abs=1e-4)
    assert float(inlet_pressure(0.0)) == 0.0
    assert float(inlet_pressure(0.1)) == pytest.approx(5.0)
    assert float(inlet_pressure(0.7)) == 5.0


@pytest.mark.parametrize("build", [build_cfd300, build_pressure_impulse_channel])
def test_zero_initial_state_is_consistent(build):
    prob = build(0)
    u0 = prob.initial_state(0.0)
    assert not np.any(u0)
    np.testing.assert_allclose(prob.residual(0.0, np.zeros_like(u0), u0), 0.0, atol=1e-14)


def test_dof_counts(cfd):
    assert cfd.size == 1594
    assert build_cfd300(1).size == 6137


def test_mass_matrix_sums_and_norm(cfd):
    M = cfd.velocity_mass
    assert M.sum() == pytest.approx(2 * 82.0, rel=1e-12)
    ones = np.ones(cfd.space.n_velocity)
    assert cfd.l2_norm("velocity", ones) == pytest.approx(math.sqrt(164.0), rel=1e-12)
    assert cfd.l2_norm("pressure", np.ones(cfd.space.n_pressure)) == pytest.approx(math.sqrt(82.0), rel=1e-12)
    np.testing.assert_allclose(cfd.stiffness @ ones, 0.0, atol=1e-12)


def test_jacobian_matches_finite_differences(cfd):
    rng = np.random.default_rng(4)
    u = cfd.apply_constraints(0.7, rng.normal(size=cfd.size))
    udot = rng.normal(size=cfd.size)
    assert check_jacobian(cfd, 0.7, udot, u, 3.0e2, n_probe=3) < 1e-6


def test_pressure_traction_load():
    prob = build_pressure_impulse_channel(0)
    F = prob.load(0.05)
    nn = prob.space.n_nodes
    assert F[:nn].sum() == pytest.approx(2.5 * float(inlet_pressure(0.05)), rel=1e-12)
    assert abs(F[nn:2 * nn].sum()) < 1e-14


def test_quadrature_exact_to_degree_four():
    for a in range(5):
        for b in range(5 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            approx = 0.5 * np.sum(QUAD_WEIGHTS * QUAD_POINTS[:, 0] ** a * QUAD_POINTS[:, 1] ** b)
            assert approx == pytest.approx(exact, rel=1e-12)
    for d in range(6):
        assert np.sum(GAUSS_1D_W * GAUSS_1D**d) == pytest.approx(1 / (d + 1), rel=1e-14)


def _box(n, tags=None):
    tags = tags or {}

    def tagger(x, y):
        for tag, pred in tags.items():
            if pred(x, y):
                return tag
        return WALL

    return build_rectangle_mesh(0.0, 1.0, 0.0, 1.0, n, tagger)


def test_inf_sup_constant_is_mesh_independent():
    betas = []
    for n in (2, 4, 8):
        prob = NavierStokesProblem(_box(n), 1.0, dirichlet={WALL: lambda x, y, t: (0 * x, 0 * x)},
                                   advection=False)
        free = np.setdiff1d(np.arange(prob.space.n_velocity), prob.constrained_dofs())
        A = prob.stiffness[free][:, free].toarray()
        B = prob.divergence[:, free].toarray()
        S = B @ np.linalg.solve(A, B.T)
        # closed box: constants are the pressure null space; take the second eigenvalue
        ev = sla.eigh(S, prob.pressure_mass.toarray(), eigvals_only=True)
        assert abs(ev[0]) < 1e-10
        betas.append(math.sqrt(ev[1]))
    assert min(betas) > 0.2
    assert betas[-1] > 0.7 * betas[0]


def _stokes_mms():
    x, y = sym.symbols("x y")
    nu = sym.Rational(1, 2)
    psi = sym.sin(sym.pi * x) * sym.sin(sym.pi * y) / sym.pi
    u = sym.diff(psi, y)
    v = -sym.diff(psi, x)
    p = sym.cos(sym.pi * x) * sym.sin(sym.pi * y)
    fx = -nu * (sym.diff(u, x, 2) + sym.diff(u, y, 2)) + sym.diff(p, x)
    fy = -nu * (sym.diff(v, x, 2) + sym.diff(v, y, 2)) + sym.diff(p, y)
    gx = nu * sym.diff(u, x) - p  # outward normal (1, 0)
    gy = nu * sym.diff(v, x)
    f = {k: sym.lambdify((x, y), e, "numpy") for k, e in
         dict(u=u, v=v, p=p, fx=fx, fy=fy, gx=gx, gy=gy).items()}
    return float(nu), f


def _quad_error(prob, uh, fu, fv, fp):
    V = prob.space
    xy = V.quad_xy
    ue = uh[prob._vdofs].reshape(-1, 2, 6)
    uq = np.einsum("qi,eci->eqc", V.phi, ue)
    pq = np.einsum("ql,el->eq", V.quad_lambda, uh[V.cell_pressure_dofs()])
    ev = (uq[..., 0] - fu(xy[..., 0], xy[..., 1])) ** 2 + (uq[..., 1] - fv(xy[..., 0], xy[..., 1])) ** 2
    ep = (pq - fp(xy[..., 0], xy[..., 1])) ** 2
    return math.sqrt(np.sum(V.wdet * ev)), math.sqrt(np.sum(V.wdet * ep))


def test_stokes_manufactured_solution_converges():
    nu, f = _stokes_mms()
    ev, ep, hs = [], [], []
    for n in (2, 4, 8):
        mesh = _box(n, {OUTLET: lambda x, y: abs(x - 1) < 1e-9})
        bc = lambda x, y, t: (f["u"](x, y) + 0 * x, f["v"](x, y) + 0 * x)
        trac = lambda x, y, t: (f["gx"](x, y) + 0 * x, f["gy"](x, y) + 0 * x)
        force = lambda x, y, t: (f["fx"](x, y) + 0 * x, f["fy"](x, y) + 0 * x)
        prob = NavierStokesProblem(mesh, nu, dirichlet={WALL: bc}, traction={OUTLET: trac},
                                   forcing=force, advection=False)
        u0 = prob.apply_constraints(0.0, np.zeros(prob.size))
        zero = np.zeros(prob.size)
        J = prob.jacobian(0.0, zero, u0, 0.0)
        uh = u0 - spla.spsolve(J.tocsc(), prob.residual(0.0, zero, u0))
        a, b = _quad_error(prob, uh, f["u"], f["v"], f["p"])
        ev.append(a)
        ep.append(b)
        hs.append(1.0 / n)
    rv = np.diff(np.log(ev)) / np.diff(np.log(hs))
    rp = np.diff(np.log(ep)) / np.diff(np.log(hs))
    assert rv[-1] >= 2.0 and rp[-1] >= 1.5
    assert ev[-1] < 1e-3


def test_advection_is_skew_for_solenoidal_transport():
    prob = NavierStokesProblem(_box(4), 1.0, dirichlet={WALL: lambda x, y, t: (0 * x, 0 * x)})
    X, Y = prob.space.nodes.T
    nn = prob.space.n_nodes
    u = np.concatenate([-(Y - 0.5), X - 0.5])  # rigid rotation, div u = 0 pointwise
    w = np.concatenate([np.sin(np.pi * X) * np.sin(np.pi * Y), X * (1 - X) * Y * (1 - Y)])
    bnd = prob.space.boundary_nodes([WALL])
    w[bnd] = 0.0
    w[nn + bnd] = 0.0
    scale = abs(prob.trilinear(u, w, np.concatenate([X, Y]))) + 1.0
    assert abs(prob.trilinear(u, w, w)) < 1e-13 * scale
    # and c(u, w, v) = -c(u, v, w) for w, v vanishing on the boundary
    v = np.roll(w, 7)
    v[bnd] = 0.0
    v[nn + bnd] = 0.0
    assert prob.trilinear(u, w, v) == pytest.approx(-prob.trilinear(u, v, w), abs=1e-12)


def test_accepted_states_are_discretely_divergence_free(cfd):
    log = run_constant(cfd, 0.01, 0.0, 0.05)
    u = log.final_state
    assert np.any(u != 0)
    div = cfd.divergence @ u[: cfd.space.n_velocity]
    assert np.abs(div).max() <= 1e-10 * math.sqrt(cfd.size)


def test_snapshot_round_trip(tmp_path, cfd):
    write_mesh(cfd.mesh, tmp_path)
    rng = np.random.default_rng(0)
    u = rng.normal(size=cfd.size)
    write_snapshot(cfd, u, tmp_path / "s.txt", t=0.5)
    table = read_snapshot(tmp_path / "s.txt")
    nv = cfd.mesh.n_vertices
    ux, uy, p = cfd.split(u)
    np.testing.assert_array_equal(table[:, 3], ux[:nv])
    np.testing.assert_array_equal(table[:, 5], p)
    nodes = np.loadtxt(tmp_path / "nodes.txt")
    elems = np.loadtxt(tmp_path / "elements.txt", dtype=int)
    assert nodes.shape == (nv, 3) and elems.shape == (cfd.mesh.n_triangles, 4)
    assert len(open(tmp_path / "boundary.txt").readlines()) == len(cfd.mesh.boundary_facets) + 1

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from robinneck import fem
from robinneck.geometry import Geometry, MeshParams, NeckWindow
from robinneck.mesh import Mesh, Marker, generate_mesh, refine_uniform, unit_square_fixture
from robinneck.solvers import NonConvergenceError

SMALL = [
    (Geometry(gap=0.1), MeshParams(theta=0.5, h_max=1.0)),
    (Geometry(gap=0.1), MeshParams(theta=0.5, h_max=0.8)),
]


def x1(p):
    return p[:, 0]


def x2(p):
    return p[:, 1]


@pytest.fixture(scope="module")
def small_meshes():
    return [generate_mesh(g, p) for g, p in SMALL]


@pytest.fixture(scope="module")
def small(small_meshes):
    return small_meshes[0]


@pytest.fixture(scope="module")
def default_1e2():
    geom = Geometry(gap=1e-2)
    return geom, generate_mesh(geom)


def test_fixture_stiffness_stencil():
    K = fem.stiffness_matrix(unit_square_fixture()).toarray()
    expected = np.array([
        [1, 0, 0, 0, -1],
        [0, 1, 0, 0, -1],
        [0, 0, 1, 0, -1],
        [0, 0, 0, 1, -1],
        [-1, -1, -1, -1, 4],
    ], dtype=float)
    assert_allclose(K, expected, atol=1e-15)


def test_fixture_energy_of_x1():
    mesh = unit_square_fixture()
    system = fem.assemble(mesh, 1.0)
    assert_allclose(fem.energy(mesh.vertices[:, 0], system), 1.0, rtol=1e-15)


def test_constants_in_kernel(default_1e2):
    _, mesh = default_1e2
    s = fem.assemble(mesh, 2.0)
    one = np.ones(mesh.n_vertices)
    Knorm = abs(s.stiffness).sum(axis=1).max()
    assert abs(s.form(one, one)) <= 1e-10 * Knorm
    assert np.abs(s.apply(one)).max() <= 1e-10 * Knorm
    assert fem.energy(3.5 * one, s) <= 1e-10 * Knorm


def test_form_psd_with_constant_kernel(small):
    s = fem.assemble(small, 0.5)
    A = s.dense_matrix()
    assert_allclose(A, A.T, atol=1e-13)
    w = np.linalg.eigvalsh(A)
    assert abs(w[0]) <= 1e-10 * w[-1]
    assert w[1] > 1e-6 * w[-1]
    for M, wj, sj in s.robin_terms():
        assert np.linalg.eigvalsh(M.toarray()).min() >= -1e-14
        assert sj > 0


def test_perimeter_second_order():
    geom = Geometry(gap=0.1)
    mesh = generate_mesh(geom, MeshParams(theta=0.5, h_max=1.0))
    errs, ss = [], []
    for _ in range(3):
        s = fem.assemble(mesh, 1.0).perimeters[0]
        ss.append(s)
        errs.append(abs(s - 2 * np.pi))
        mesh = refine_uniform(mesh)
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5
    richardson = (4 * ss[2] - ss[1]) / 3
    assert abs(richardson - 2 * np.pi) < 0.05 * errs[2]


def test_constant_data(small):
    # exact up to the CG stopping tolerance
    sol = fem.solve(fem.assemble(small, 2.0), 1.7)
    assert_allclose(sol.nodal_values, 1.7, rtol=1e-9)
    assert_allclose(sol.inclusion_potentials, (1.7, 1.7), rtol=1e-9)
    assert np.abs(sol.element_gradients).max() <= 1e-7
    assert fem.max_gradient(sol, NeckWindow(0, 0.1))[0] <= 1e-7
    direct = fem.solve(sol.system, 1.7, method="direct")
    assert_allclose(direct.nodal_values, 1.7, rtol=1e-13)
    assert abs(fem.boundary_flux(direct, j=1)) <= 1e-12


@pytest.mark.parametrize("gamma", [0.1, 1.0, 2.0, 50.0])
def test_dense_oracle(small_meshes, gamma):
    for mesh in small_meshes:
        s = fem.assemble(mesh, gamma)
        assert s.n_free <= 300
        phi = lambda p: 0.3 * p[:, 0] + p[:, 1] + 0.2 * p[:, 0] * p[:, 1]
        it = fem.solve(s, phi, method="cg")
        dd = fem.solve(s, phi, method="direct")
        assert it.method == "cg"
        err = np.linalg.norm(it.nodal_values - dd.nodal_values) / np.linalg.norm(dd.nodal_values)
        assert err <= 1e-8


def test_residual_meets_rtol(default_1e2):
    _, mesh = default_1e2
    sol = fem.solve(fem.assemble(mesh, 2.0), x1, method="cg")
    assert sol.residual <= 1e-10
    assert sol.residual_history[-1] <= 1e-10 * sol.residual_history[0]


def test_neutral_inclusion(small):
    # gamma = R: the linear field passes undisturbed
    sol = fem.solve(fem.assemble(small, 1.0), x1)
    err = np.abs(sol.nodal_values - small.vertices[:, 0]).max() / 5.0
    assert err <= 5e-3
    g, _ = fem.max_gradient(sol, NeckWindow(0, 0.25))
    assert abs(g - 1.0) <= 5e-2


def test_neutral_gradient_default_mesh(default_1e2):
    geom, mesh = default_1e2
    sol = fem.solve(fem.assemble(mesh, 1.0), x1)
    g, _ = fem.max_gradient(sol, NeckWindow(0, np.sqrt(geom.gap)))
    assert abs(g - 1.0) <= 5e-3
    assert abs(fem.boundary_flux(sol, j=1)) <= 1e-8 * fem.gradient_l2(sol)


def test_symmetry_of_potentials(default_1e2):
    _, mesh = default_1e2
    s = fem.assemble(mesh, 2.0)
    odd2 = fem.solve(s, x2)
    U1, U2 = odd2.inclusion_potentials
    assert abs(U1 + U2) <= 1e-8 * abs(U1)
    assert U1 > 0
    odd1 = fem.solve(s, x1)
    assert_allclose(odd1.inclusion_potentials, (0.0, 0.0), atol=1e-8)


def test_flux_and_robin_cross_check(default_1e2):
    _, mesh = default_1e2
    s = fem.assemble(mesh, 2.0)
    sol = fem.solve(s, x1)
    tol = 1e-8 * fem.gradient_l2(sol)
    for j in (1, 2):
        assert abs(fem.boundary_flux(sol, s, j)) <= tol
        assert abs(fem.robin_defect_integral(sol, s, j)) <= tol


def test_energy_minimality(default_1e2):
    _, mesh = default_1e2
    s = fem.assemble(mesh, 2.0)
    sol = fem.solve(s, x1)
    e0 = fem.energy(sol.nodal_values, s)
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = np.zeros(mesh.n_vertices)
        d[s.free_nodes] = rng.standard_normal(s.n_free)
        d *= 1e-3 / np.linalg.norm(d)
        assert e0 <= fem.energy(sol.nodal_values + d, s)


def test_superposition(small):
    s = fem.assemble(small, 2.0)
    f1 = lambda p: p[:, 0] + 0.5
    f2 = lambda p: p[:, 0] * p[:, 1] - p[:, 1] ** 2
    u1 = fem.solve(s, f1).nodal_values
    u2 = fem.solve(s, f2).nodal_values
    u12 = fem.solve(s, lambda p: f1(p) + f2(p)).nodal_values
    assert np.abs(u12 - u1 - u2).max() <= 1e-8 * np.abs(u12).max()


@pytest.mark.parametrize("axis", [0, 1])
def test_reflection_equivariance(small, axis):
    phi = lambda p: p[:, 0] + 0.3 * p[:, 1] + p[:, 0] ** 2
    flip = np.ones(2)
    flip[axis] = -1
    u = fem.solve(fem.assemble(small, 2.0), phi).nodal_values
    ref = small.reflected(axis)
    u_ref = fem.solve(fem.assemble(ref, 2.0), lambda p: phi(p * flip)).nodal_values
    assert np.abs(u_ref - u).max() <= 1e-8 * np.abs(u).max()


def test_energy_decreases_under_nested_refinement(small):
    coarse = fem.solve(fem.assemble(small, 2.0), x1)
    fine_mesh = refine_uniform(small, project=False)
    fine = fem.solve(fem.assemble(fine_mesh, 2.0), x1)
    e0 = fem.energy(coarse.nodal_values, coarse.system)
    e1 = fem.energy(fine.nodal_values, fine.system)
    assert e1 <= e0 * (1 + 1e-8)
    # the coarse field interpolated onto the refined mesh has the coarse energy
    E = small.edges()
    prolong = np.concatenate([coarse.nodal_values, coarse.nodal_values[E].mean(axis=1)])
    assert_allclose(fem.energy(prolong, fine.system), e0, rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.sampled_from([0.1, 0.5, 2.0, 20.0]))
def test_maximum_principle(a, b, c, gamma):
    mesh = _cached_small()
    s = fem.assemble(mesh, gamma)
    sol = fem.solve(s, lambda p: a * p[:, 0] + b * p[:, 1] + c)
    bd = sol.nodal_values[s.dirichlet_nodes]
    osc = bd.max() - bd.min()
    # floor for flat data: solver tolerance relative to the data size
    tol = 1e-3 * osc + 1e-9 * max(1.0, np.abs(bd).max())
    assert fem.max_principle_overshoot(sol) <= tol
    for U in sol.inclusion_potentials:
        assert bd.min() - tol <= U <= bd.max() + tol


_SMALL_CACHE = {}


def _cached_small():
    if "m" not in _SMALL_CACHE:
        _SMALL_CACHE["m"] = generate_mesh(*SMALL[0])
    return _SMALL_CACHE["m"]


def test_empty_window_error(small):
    sol = fem.solve(fem.assemble(small, 1.0), x1)
    with pytest.raises(ValueError, match="no triangle centroid"):
        fem.max_gradient(sol, NeckWindow(0.0, 1e-9))


def test_degenerate_element_rejected():
    V = np.array([[0, 0], [1, 0], [0.5, 1e-12], [0.5, 1.0]])
    T = np.array([[0, 1, 2], [0, 1, 3]])
    mesh = Mesh(V, T, np.array([[0, 1]]), np.array([int(Marker.OUTER)]), MeshParams(h_min=1e-3))
    with pytest.raises(fem.AssemblyError, match="triangle 0"):
        fem.assemble(mesh, 1.0)


def test_non_convergence_carries_history(default_1e2):
    _, mesh = default_1e2
    s = fem.assemble(mesh, 2.0)
    with pytest.raises(NonConvergenceError) as info:
        fem.solve(s, x1, method="cg", maxiter=3)
    assert len(info.value.history) == 4


def test_solution_dump_round_trip(small):
    sol = fem.solve(fem.assemble(small, 2.0), x2)
    values, info = fem.load_solution(fem.dump_solution(sol))
    assert np.array_equal(values, sol.nodal_values)
    assert info["U1"] == sol.inclusion_potentials[0]
    assert info["iterations"] == sol.iterations

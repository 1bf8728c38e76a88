"""P1 discretisation of the imperfect-interface conductivity problem.

The solution minimises

    I[v] = int |grad v|^2 + (1/gamma) sum_j int_{dD_j} |v - mean_{dD_j} v|^2

over P1 functions with ``v = phi`` at the outer vertices.  In matrix form
``I[v] = v.K.v + (1/gamma) sum_j (v.M_j.v - (w_j.v)^2 / s_j)`` with the P1
stiffness ``K``, the consistent boundary mass ``M_j`` of the polygon
approximating ``dD_j``, ``w_j = M_j 1`` and ``s_j = 1.M_j.1``.  The
rank-one parts are never formed.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .geometry import Geometry, NeckWindow, neck_membership
from .mesh import Marker, Mesh
from .solvers import IncompleteCholesky, NonConvergenceError, pcg

INCLUSIONS = (Marker.INCLUSION_1, Marker.INCLUSION_2)
DENSE_LIMIT = 2000


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RobinSystem:
    mesh: Mesh
    gamma: float
    stiffness: sp.csr_matrix
    boundary_mass: tuple
    mean_vectors: tuple
    perimeters: tuple
    dirichlet_nodes: np.ndarray
    free_nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_free(self) -> int:
        return len(self.free_nodes)

    def robin_terms(self):
        """``(M_j, w_j, s_j)`` for the inclusions present in the mesh."""
        return [t for t in zip(self.boundary_mass, self.mean_vectors, self.perimeters) if t[2] > 0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Full operator ``A v`` (gradient of ``I / 2``), before Dirichlet
        elimination."""
        out = self.stiffness @ v
        for M, w, s in self.robin_terms():
            out += (M @ v - w * (w @ v) / s) / self.gamma
        return out

    def form(self, u: np.ndarray, v: np.ndarray) -> float:
        """Bilinear form ``a(u, v)``."""
        return float(v @ self.apply(u))

    def dense_matrix(self) -> np.ndarray:
        A = self.stiffness.toarray()
        for M, w, s in self.robin_terms():
            A += (M.toarray() - np.outer(w, w) / s) / self.gamma
        return A


@dataclass(frozen=True, eq=False)
class FieldSolution:
    system: RobinSystem
    nodal_values: np.ndarray
    inclusion_potentials: tuple
    element_gradients: np.ndarray
    iterations: int
    residual: float
    residual_history: list
    method: str
    runtime_ms: float = 0.0

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh


def _p1_gradients(mesh: Mesh):
    """Barycentric gradient coefficients ``(b, c)`` per element and vertex
    with ``grad lambda_i = (b_i, c_i) / (2 area)``."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    b = np.roll(y, -1, axis=1) - np.roll(y, -2, axis=1)
    c = np.roll(x, -2, axis=1) - np.roll(x, -1, axis=1)
    return b, c


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    area = mesh.areas()
    b, c = _p1_gradients(mesh)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K


def boundary_mass_matrix(mesh: Mesh, marker) -> sp.csr_matrix:
    """Consistent P1 mass on the boundary edges carrying ``marker``."""
    e = mesh.boundary_edges[mesh.boundary_markers == marker]
    L = np.linalg.norm(mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]], axis=1)
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    vals = L[:, None, None] * local[None]
    rows = np.repeat(e, 2, axis=1).ravel()
    cols = np.tile(e, (1, 2)).ravel()
    n = mesh.n_vertices
    M = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def assemble(mesh: Mesh, gamma: float) -> RobinSystem:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive (got {gamma})")
    area = mesh.areas()
    if mesh.params is not None:
        floor = 1e-3 * mesh.params.h_min ** 2
    else:
        floor = 0.0
    bad = np.flatnonzero(area <= floor)
    if len(bad):
        k = int(bad[0])
        raise AssemblyError(
            f"degenerate triangle {k} {mesh.triangles[k].tolist()} with area {area[k]:.3e} "
            f"(threshold {floor:.3e}); {len(bad)} such elements"
        )
    K = stiffness_matrix(mesh)
    Ms, ws, ss = [], [], []
    for m in INCLUSIONS:
        M = boundary_mass_matrix(mesh, m)
        w = np.asarray(M.sum(axis=1)).ravel()
        Ms.append(M)
        ws.append(w)
        ss.append(float(w.sum()))
    dnodes = mesh.marked_vertices(Marker.OUTER)
    free = np.setdiff1d(np.arange(mesh.n_vertices), dnodes)
    return RobinSystem(mesh, float(gamma), K, tuple(Ms), tuple(ws), tuple(ss), dnodes, free)


def _as_boundary_values(phi, points):
    if callable(phi):
        vals = np.asarray(phi(points), dtype=float)
    else:
        vals = np.asarray(phi, dtype=float)
    vals = np.broadcast_to(vals, (len(points),)).astype(float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary data is not finite at every outer vertex")
    return vals


def _reduced(system: RobinSystem):
    """Free-block pieces used by the iterative solver (cached)."""
    c = system._cache
    if "Kff" not in c:
        f = system.free_nodes
        c["Kff"] = system.stiffness[f][:, f].tocsr()
        c["Mff"] = [M[f][:, f].tocsr() for M in system.boundary_mass]
        c["wf"] = [w[f] for w in system.mean_vectors]
    return c["Kff"], c["Mff"], c["wf"]


def _preconditioner(system: RobinSystem):
    c = system._cache
    if "ic" not in c:
        Kff, Mff, _ = _reduced(system)
        P = Kff + sum(Mff) / system.gamma
        c["ic"] = IncompleteCholesky(P)
    return c["ic"]


def solve(system: RobinSystem, phi, method: str = "auto", rtol: float = 1e-10,
          maxiter: int = 20000) -> FieldSolution:
    """Minimise the discrete energy with ``u = phi`` on the outer boundary.

    ``phi`` is a callable on (N, 2) point arrays or a constant.  ``method``
    is ``"cg"`` (IC(0)-preconditioned CG), ``"direct"`` (dense Cholesky,
    limited to ``DENSE_LIMIT`` unknowns) or ``"auto"`` (CG, falling back to
    the dense solve for small systems if CG stalls).
    """
    t0 = time.perf_counter()
    mesh = system.mesh
    f, d = system.free_nodes, system.dirichlet_nodes
    u = np.zeros(mesh.n_vertices)
    u[d] = _as_boundary_values(phi, mesh.vertices[d])
    load = -system.apply(u)[f]

    if method not in ("auto", "cg", "direct"):
        raise ValueError(f"unknown method {method!r}")
    history: list = []
    iterations = 0
    used = method
    if method == "direct":
        uf = _dense_solve(system, load)
    else:
        Kff, Mff, wf = _reduced(system)
        g = system.gamma
        pairs = [t for t in zip(Mff, wf, system.perimeters) if t[2] > 0]

        def apply_ff(x):
            out = Kff @ x
            for M, w, s in pairs:
                out += (M @ x - w * (w @ x) / s) / g
            return out

        try:
            ic = _preconditioner(system)
            uf, iterations, history = pcg(apply_ff, load, ic.solve, rtol=rtol, maxiter=maxiter)
            used = "cg"
        except NonConvergenceError:
            if method == "auto" and system.n_free <= DENSE_LIMIT:
                uf = _dense_solve(system, load)
                used = "direct"
            else:
                raise
    u[f] = uf
    res_vec = system.apply(u)[f]
    lnorm = np.linalg.norm(load)
    residual = float(np.linalg.norm(res_vec) / lnorm) if lnorm > 0 else float(np.linalg.norm(res_vec))
    U = inclusion_potentials_of(u, system)
    grads = element_gradients(mesh, u)
    ms = 1e3 * (time.perf_counter() - t0)
    return FieldSolution(system, u, U, grads, iterations, residual, history, used, ms)


def _dense_solve(system: RobinSystem, load):
    n = system.n_free
    if n > DENSE_LIMIT:
        raise ValueError(f"dense solve limited to {DENSE_LIMIT} unknowns (got {n})")
    f = system.free_nodes
    A = system.dense_matrix()[np.ix_(f, f)]
    return sla.solve(A, load, assume_a="pos")


def element_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Constant gradient of the P1 interpolant on each triangle, (T, 2)."""
    b, c = _p1_gradients(mesh)
    uu = u[mesh.triangles]
    two_a = 2.0 * mesh.areas()
    return np.c_[(b * uu).sum(1) / two_a, (c * uu).sum(1) / two_a]


def inclusion_potentials_of(u: np.ndarray, system: RobinSystem) -> tuple:
    return tuple(float(w @ u / s) if s > 0 else float("nan")
                 for w, s in zip(system.mean_vectors, system.perimeters))


def inclusion_potentials(solution: FieldSolution, system: RobinSystem | None = None) -> tuple:
    """Boundary averages ``(U1, U2)`` of the solved field."""
    system = system or solution.system
    return inclusion_potentials_of(solution.nodal_values, system)


def boundary_flux(solution: FieldSolution, system: RobinSystem | None = None, j: int = 1) -> float:
    """Conormal flux through ``dD_j`` (``j`` in {1, 2}).

    Variationally consistent definition: the stiffness residual tested
    against the P1 indicator of the vertex set of ``dD_j``, i.e.
    ``int grad u . grad chi_j``.
    """
    system = system or solution.system
    marker = INCLUSIONS[j - 1]
    idx = system.mesh.marked_vertices(marker)
    Ku = system.stiffness @ solution.nodal_values
    return float(Ku[idx].sum())


def robin_defect_integral(solution: FieldSolution, system: RobinSystem | None = None, j: int = 1) -> float:
    """Edge quadrature of ``(U_j - u) / gamma`` over ``dD_j``: the flux the
    Robin condition prescribes, computed from boundary data only.  With the
    consistent mass it vanishes to round-off because ``U_j`` is the boundary
    mean; :func:`boundary_flux` must agree with it."""
    system = system or solution.system
    u = solution.nodal_values
    w, s = system.mean_vectors[j - 1], system.perimeters[j - 1]
    U = w @ u / s
    return float((U * s - w @ u) / system.gamma)


def energy(values: np.ndarray, system: RobinSystem) -> float:
    """Discrete energy ``I[v]``."""
    v = np.asarray(values, dtype=float)
    e = float(v @ (system.stiffness @ v))
    for M, w, s in system.robin_terms():
        e += (float(v @ (M @ v)) - float(w @ v) ** 2 / s) / system.gamma
    return e


def gradient_l2(solution: FieldSolution) -> float:
    u = solution.nodal_values
    return float(np.sqrt(max(u @ (solution.system.stiffness @ u), 0.0)))


def max_gradient(solution: FieldSolution, window: NeckWindow, geom: Geometry | None = None):
    """``(max |grad u|, centroid)`` over triangles with centroid in the window."""
    geom = geom or solution.mesh.geometry
    if geom is None:
        raise ValueError("max_gradient needs the mesh geometry")
    inside = neck_membership(geom, window, solution.mesh.centroids())
    if not np.any(inside):
        raise ValueError(
            f"no triangle centroid inside the window x0={window.center_abscissa}, "
            f"r={window.half_width}"
        )
    mag = np.hypot(*solution.element_gradients.T)
    idx = np.flatnonzero(inside)
    k = idx[np.argmax(mag[idx])]
    return float(mag[k]), solution.mesh.centroids()[k]


def max_principle_overshoot(solution: FieldSolution, phi_values: np.ndarray | None = None) -> float:
    """Largest excursion of the field outside ``[min phi, max phi]``."""
    u = solution.nodal_values
    b = u[solution.system.dirichlet_nodes] if phi_values is None else phi_values
    lo, hi = b.min(), b.max()
    return float(max(0.0, u.max() - hi, lo - u.min()))


# ---------------------------------------------------------------- dump


def summary(solution: FieldSolution) -> dict:
    s = solution.system
    U1, U2 = solution.inclusion_potentials
    return {
        "U1": U1,
        "U2": U2,
        "flux1": boundary_flux(solution, s, 1),
        "flux2": boundary_flux(solution, s, 2),
        "energy": energy(solution.nodal_values, s),
        "iterations": solution.iterations,
        "residual": solution.residual,
        "dofs": s.n_free,
        "method": solution.method,
    }


def dump_solution(solution: FieldSolution) -> str:
    """``u <index> <value>`` lines followed by a ``key=value`` summary block."""
    buf = io.StringIO()
    for i, val in enumerate(solution.nodal_values):
        buf.write(f"u {i} {val:.17g}\n")
    buf.write("[summary]\n")
    for k, v in summary(solution).items():
        buf.write(f"{k}={v:.17g}\n" if isinstance(v, float) else f"{k}={v}\n")
    return buf.getvalue()


def load_solution(text: str) -> tuple[np.ndarray, dict]:
    """Parse :func:`dump_solution` output into ``(values, summary)``."""
    vals: dict[int, float] = {}
    info: dict = {}
    in_summary = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line == "[summary]":
            in_summary = True
            continue
        if in_summary:
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value")
            try:
                info[key] = int(val)
            except ValueError:
                try:
                    info[key] = float(val)
                except ValueError:
                    info[key] = val
        else:
            parts = line.split()
            if len(parts) != 3 or parts[0] != "u":
                raise ValueError(f"line {lineno}: malformed record {line!r}")
            vals[int(parts[1])] = float(parts[2])
    n = max(vals) + 1 if vals else 0
    if sorted(vals) != list(range(n)):
        raise ValueError("solution dump has missing vertex indices")
    return np.array([vals[i] for i in range(n)]), info

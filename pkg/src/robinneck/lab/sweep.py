"""Sweeps over (eps, gamma) cells.

Each cell meshes, assembles, solves and measures independently, so a
failure in one (typically the mesh budget at the smallest gap) leaves the
others intact.
"""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .. import fem
from ..geometry import NeckWindow
from ..mesh import generate_mesh
from ..reduced import ModeParams, blowup_exponent, solve_h
from .config import ExperimentConfig
from .profile import fit_profile_to_h, odd_mode, symmetric_grid, vertical_profile

CSV_COLUMNS = ("eps", "gamma", "alpha", "grad_max_neck", "grad_x", "grad_y", "U1", "U2",
               "flux1", "flux2", "energy", "dofs", "iterations", "runtime_ms")


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    gamma: float
    alpha: float
    grad_max_neck: float
    grad_x: float
    grad_y: float
    U1: float
    U2: float
    flux1: float
    flux2: float
    energy: float
    dofs: int
    iterations: int
    # wall time is not reproducible, so it is left out of equality
    runtime_ms: float = field(compare=False)
    # diagnostics that do not go to sweep.csv
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        kw = {}
        for f in fields(cls):
            if f.name == "extras":
                continue
            kw[f.name] = int(row[f.name]) if f.name in ("dofs", "iterations") else float(row[f.name])
        return cls(**kw)


@dataclass(frozen=True)
class CellFailure:
    eps: float
    gamma: float
    error: str
    kind: str


class SweepResult(list):
    """Records in report order; ``failures`` lists the cells that did not
    complete."""

    def __init__(self, records=(), failures=()):
        super().__init__(records)
        self.failures = list(failures)


def structural_checks(solution, phi_values, rng, n_perturb: int = 20,
                      amplitude: float = 1e-3) -> dict:
    """Maximum principle, potential range, zero flux and energy minimality."""
    s = solution.system
    u = solution.nodal_values
    lo, hi = phi_values.min(), phi_values.max()
    osc = hi - lo
    tol = 1e-3 * osc
    gl2 = fem.gradient_l2(solution)
    flux_tol = 1e-8 * gl2
    fluxes = [fem.boundary_flux(solution, s, j) for j in (1, 2)]
    U = solution.inclusion_potentials
    e0 = fem.energy(u, s)
    worst_gain = np.inf
    for _ in range(n_perturb):
        d = np.zeros_like(u)
        d[s.free_nodes] = rng.standard_normal(s.n_free)
        d *= amplitude / np.linalg.norm(d)
        worst_gain = min(worst_gain, fem.energy(u + d, s) - e0)
    overshoot = fem.max_principle_overshoot(solution, phi_values)
    return {
        "overshoot": overshoot,
        "overshoot_ok": bool(overshoot <= tol),
        "potentials_ok": bool(all(lo - tol <= x <= hi + tol for x in U)),
        "flux_ok": bool(max(abs(x) for x in fluxes) <= flux_tol),
        "flux_tol": flux_tol,
        "energy_ok": bool(worst_gain >= 0.0),
        "energy_min_gain": float(worst_gain),
    }


def run_cell(cfg: ExperimentConfig, eps: float, gamma: float, index: int = 0) -> SweepRecord:
    t0 = time.perf_counter()
    geom = cfg.geometry_for(eps)
    mesh = generate_mesh(geom, cfg.mesh_params())
    system = fem.assemble(mesh, gamma)
    phi = cfg.physics.phi
    sol = fem.solve(system, phi, method=cfg.solver.method, rtol=cfg.solver.rtol,
                    maxiter=cfg.solver.max_iterations)
    a = cfg.analysis
    root = np.sqrt(eps)
    R0 = geom.chart_radius
    g, loc = fem.max_gradient(sol, NeckWindow(0.0, min(a.window_c * root, R0)), geom)
    windows = {}
    for c in a.sensitivity_c:
        windows[repr(float(c))] = fem.max_gradient(sol, NeckWindow(0.0, min(c * root, R0)), geom)[0]
    wide = fem.max_gradient(sol, NeckWindow(0.0, a.wide_fraction * R0), geom)[0]
    info = fem.summary(sol)
    rng = np.random.default_rng([cfg.seed, index])
    phi_vals = sol.nodal_values[system.dirichlet_nodes]
    extras = {
        "windows": windows,
        "grad_max_wide": wide,
        "grad_l2": fem.gradient_l2(sol),
        "residual": sol.residual,
        "method": sol.method,
        "solve_ms": sol.runtime_ms,
        "n_vertices": mesh.n_vertices,
        "checks": structural_checks(sol, phi_vals, rng),
    }
    if a.profile:
        extras["profile"] = _profile_fit(cfg, geom, sol, gamma)
    return SweepRecord(
        eps=float(eps), gamma=float(gamma), alpha=blowup_exponent(2, gamma, geom.mu),
        grad_max_neck=g, grad_x=float(loc[0]), grad_y=float(loc[1]),
        U1=float(info["U1"]), U2=float(info["U2"]),
        flux1=float(info["flux1"]), flux2=float(info["flux2"]), energy=float(info["energy"]),
        dofs=int(info["dofs"]), iterations=int(info["iterations"]),
        runtime_ms=1e3 * (time.perf_counter() - t0), extras=extras,
    )


def _profile_fit(cfg, geom, sol, gamma):
    a = cfg.analysis
    eps = geom.gap
    lo, hi = a.fit_lower * np.sqrt(eps), a.fit_upper * geom.chart_radius
    if not lo < hi:
        return {"error": f"empty fit range [{lo:g}, {hi:g}]"}
    r = symmetric_grid(lo, hi, 40)
    V = odd_mode(vertical_profile(sol, geom, r, a.fiber_samples))
    out = {"r": V.grid.tolist(), "V": V.values.tolist(), "fit_range": [lo, hi]}
    params = ModeParams(n=2, gamma=gamma, mu=geom.mu, eps=eps)
    if not params.gamma_hat > 1:
        return out
    h = solve_h(params)
    C1, resid = fit_profile_to_h(V, h, (lo, hi))
    out.update(C1=C1, residual=resid, h=np.asarray(h(V.grid)).tolist())
    return out


def _cell_job(args):
    cfg, eps, gamma, index = args
    try:
        return run_cell(cfg, eps, gamma, index)
    except Exception as exc:  # isolate the cell
        kind = type(exc).__name__
        return CellFailure(float(eps), float(gamma), f"{kind}: {exc}", kind)


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> SweepResult:
    """One record per (eps, gamma), sorted by gamma then eps descending."""
    jobs = [(cfg, e, g, i) for i, (e, g) in enumerate(cfg.cells())]
    workers = cfg.solver.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]
    records = [r for r in results if isinstance(r, SweepRecord)]
    failures = [r for r in results if isinstance(r, CellFailure)]
    if not records:
        detail = "; ".join(f"(eps={f.eps:g}, gamma={f.gamma:g}) {f.error}" for f in failures)
        raise SweepError(f"every sweep cell failed: {detail}")
    return SweepResult(records, failures)


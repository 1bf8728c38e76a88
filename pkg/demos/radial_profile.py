"""The radial profile h against the comparison functions r and r^alpha,
and the gap-averaged odd mode of a computed field fitted to it.

Run from the repository root::

    python3 demos/radial_profile.py
"""
import numpy as np

from robinneck import fem
from robinneck.geometry import Geometry
from robinneck.lab import fit_profile_to_h, odd_mode, symmetric_grid, vertical_profile
from robinneck.mesh import generate_mesh
from robinneck.reduced import ModeParams, solve_h, subsolution, subsolution_constant

eps, gamma = 1e-3, 2.0
p = ModeParams(n=2, gamma=gamma, eps=eps)
h = solve_h(p)
c = subsolution_constant(2, gamma)
print(f"alpha = {p.alpha:.6f}, subsolution constant c = {c:.4f}, "
      f"{len(h.grid)} grid points from r = {h.grid[0]:.2e}")
print(f"{'r':>10} {'lower':>10} {'r':>10} {'h':>10} {'r^alpha':>10}")
for r in (1e-3, 1e-2, 0.1, 0.5):
    print(f"{r:10.4g} {float(subsolution(r, p, c)):10.4g} {r:10.4g} {float(h(r)):10.4g} {r ** p.alpha:10.4g}")

geom = Geometry(gap=eps)
sol = fem.solve(fem.assemble(generate_mesh(geom), gamma), lambda q: q[:, 0])
lo, hi = 2 * np.sqrt(eps), geom.chart_radius / 4
V = odd_mode(vertical_profile(sol, geom, symmetric_grid(lo, hi, 40)))
C1, resid = fit_profile_to_h(V, h, (lo, hi))
print(f"odd mode V ~ C1 h on [{lo:.4f}, {hi:.4f}]: C1 = {C1:.4f}, relative residual {resid:.1e}")

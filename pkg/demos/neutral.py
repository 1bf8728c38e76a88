"""The neutral inclusion: with gamma = R the field x1 passes undisturbed.

Run from the repository root::

    python3 demos/neutral.py
"""
import numpy as np

from robinneck import fem
from robinneck.geometry import Geometry, NeckWindow
from robinneck.mesh import generate_mesh, mesh_quality, refine_uniform

for eps in (1e-2, 1e-3):
    geom = Geometry(radius=1.0, gap=eps)
    mesh = generate_mesh(geom)
    q = mesh_quality(mesh, geom)
    print(f"eps={eps:g}: {mesh.n_vertices} vertices, min angle {q.min_angle:.1f} deg")
    errs = []
    for m in (mesh, refine_uniform(mesh)):
        sol = fem.solve(fem.assemble(m, 1.0), lambda p: p[:, 0])
        x1 = m.vertices[:, 0]
        errs.append(np.abs(sol.nodal_values - x1).max() / np.abs(x1).max())
    g, _ = fem.max_gradient(sol, NeckWindow(0.0, np.sqrt(eps)), geom)
    print(f"  relative max error {errs[0]:.2e} -> {errs[1]:.2e} after refinement "
          f"(factor {errs[0] / errs[1]:.2f}); neck gradient {g:.4f}")

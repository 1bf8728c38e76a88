"""Gap-averaged profiles of a computed field and their comparison with the
radial ODE solution."""
from __future__ import annotations

import numpy as np
from matplotlib.tri import LinearTriInterpolator, Triangulation

from ..fem import FieldSolution
from ..geometry import Geometry, OutOfChartError, graph_functions
from ..reduced import RadialProfile


def vertical_profile(solution: FieldSolution, geom: Geometry, r, samples: int = 16) -> RadialProfile:
    """Average of the P1 field along the vertical fibre between the graphs.

    Midpoint rule with ``samples`` points per fibre; ``r`` must lie in
    ``(-R0/2, R0/2)``.
    """
    r = np.asarray(r, dtype=float)
    half = 0.5 * geom.chart_radius
    if np.any(np.abs(r) >= half):
        raise OutOfChartError(f"fibre abscissae must satisfy |r| < R0/2 = {half}")
    f, g = graph_functions(geom)
    top = 0.5 * geom.gap + f(r)
    bot = -0.5 * geom.gap + g(r)
    t = (np.arange(samples) + 0.5) / samples
    ys = bot[:, None] + (top - bot)[:, None] * t[None, :]
    xs = np.broadcast_to(r[:, None], ys.shape)
    mesh = solution.mesh
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    vals = LinearTriInterpolator(tri, solution.nodal_values)(xs.ravel(), ys.ravel())
    if np.ma.is_masked(vals):
        raise ValueError("a fibre sample fell outside the mesh")
    vbar = np.asarray(vals).reshape(ys.shape).mean(axis=1)
    return RadialProfile(r, vbar, "V", {"samples": samples, "eps": geom.gap})


def symmetric_grid(lo: float, hi: float, n: int = 60) -> np.ndarray:
    """Logarithmic positive abscissae in [lo, hi] with their mirror images."""
    pos = np.geomspace(lo, hi, n)
    return np.concatenate([-pos[::-1], pos])


def odd_mode(profile: RadialProfile, rtol: float = 1e-12) -> RadialProfile:
    """``V(r) = (vbar(r) - vbar(-r)) / 2`` on the positive abscissae."""
    r, v = profile.grid, profile.values
    pos = r > 0
    neg = r < 0
    scale = np.abs(r).max()
    rp, vp = r[pos], v[pos]
    rn, vn = -r[neg][::-1], v[neg][::-1]
    if len(rp) != len(rn) or np.any(np.abs(rp - rn) > rtol * scale):
        raise ValueError("profile abscissae are not symmetric +-r pairs")
    return RadialProfile(rp, 0.5 * (vp - vn), "V", dict(profile.meta))


def fit_profile_to_h(V: RadialProfile, h: RadialProfile, fit_range):
    """Least-squares ``C1`` minimising ``sum (V - C1 h)^2`` on ``fit_range``.

    ``h`` is evaluated at the abscissae of ``V``.  Returns ``(C1,
    relative_residual)`` with the residual measured against ``|V|``.
    """
    lo, hi = fit_range
    sel = (V.grid >= lo) & (V.grid <= hi)
    if sel.sum() < 2:
        raise ValueError(f"fewer than two profile points in [{lo}, {hi}]")
    r, v = V.grid[sel], V.values[sel]
    hv = np.asarray(h(r), dtype=float)
    if np.any(np.isnan(hv)):
        raise ValueError("fit range extends beyond the grid of h")
    hh = hv @ hv
    if hh == 0.0:
        raise ValueError("h vanishes on the fit range")
    C1 = float(v @ hv / hh)
    vn = np.linalg.norm(v)
    resid = float(np.linalg.norm(v - C1 * hv) / vn) if vn > 0 else float("inf")
    return C1, resid

"""Two-disk configuration, neck chart and mesh sizing.

The matrix region is the disk of radius ``outer_radius`` about the origin
with two equal disks of radius ``R`` removed; their centers sit at
``(0, +-(R + eps/2))`` so the gap between them has width ``eps`` on the
vertical axis.  Near the origin the facing arcs are the graphs

    upper:  x2 =  eps/2 + f(x1),     lower:  x2 = -eps/2 + g(x1),

with ``f(x) = R - sqrt(R^2 - x^2)`` and ``g = -f``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class OutOfChartError(ValueError):
    """Raised when a chart function is evaluated at ``|x'| >= R0``."""


@dataclass(frozen=True)
class Geometry:
    """Two equal disks of radius ``radius`` separated by ``gap``.

    ``outer_radius`` defaults to ``5 * radius`` and ``chart_radius`` (the
    size of the neck chart, R0) to ``radius / 2``.  ``dimension`` is fixed to
    2 for the field solver; the reduced model accepts 2..8 through its own
    parameters.
    """

    radius: float = 1.0
    gap: float = 1e-2
    outer_radius: float | None = None
    chart_radius: float | None = None
    dimension: int = 2

    def __post_init__(self):
        if self.outer_radius is None:
            object.__setattr__(self, "outer_radius", 5.0 * self.radius)
        if self.chart_radius is None:
            object.__setattr__(self, "chart_radius", 0.5 * self.radius)
        problems = self.violations()
        if problems:
            raise ValueError("invalid geometry: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        R, eps, R0 = self.radius, self.gap, self.chart_radius
        if not R > 0:
            out.append(f"radius must be positive (got {R})")
        if not eps > 0:
            out.append(f"gap must be positive (got {eps})")
        if not 0 < R0 < R:
            out.append(f"chart_radius must lie in (0, radius) (got {R0})")
        elif not eps < R0 / 4:
            out.append(f"gap {eps} violates eps < R0/4 = {R0 / 4}")
        if self.outer_radius <= 2 * R + eps:
            out.append(
                f"outer_radius {self.outer_radius} does not enclose both inclusions"
            )
        if self.dimension != 2:
            out.append("the field solver is two-dimensional (dimension must be 2)")
        return out

    @property
    def mu(self) -> float:
        """Curvature coefficient of the gap opening, ``1 / R``."""
        return 1.0 / self.radius

    @property
    def centers(self) -> np.ndarray:
        """Centers of D1 (upper) and D2 (lower), shape (2, 2)."""
        c = self.radius + 0.5 * self.gap
        return np.array([[0.0, c], [0.0, -c]])

    def replace(self, **changes) -> "Geometry":
        kw = dict(
            radius=self.radius,
            gap=self.gap,
            outer_radius=self.outer_radius,
            chart_radius=self.chart_radius,
            dimension=self.dimension,
        )
        kw.update(changes)
        return Geometry(**kw)


@dataclass(frozen=True)
class NeckWindow:
    """The strip ``Omega_{x0, r}``: matrix points between the two graphs
    with ``|x' - x0'| < r``."""

    center_abscissa: float = 0.0
    half_width: float = field(default=0.1)

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def check_fits(self, geom: Geometry):
        """Raise unless the window lies inside the chart."""
        R0 = geom.chart_radius
        if self.half_width > R0 - abs(self.center_abscissa) + 1e-15:
            raise OutOfChartError(
                f"window half-width {self.half_width} exceeds "
                f"R0 - |x0'| = {R0 - abs(self.center_abscissa)}"
            )


def _check_chart(geom: Geometry, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= geom.chart_radius):
        bad = np.atleast_1d(x)[np.abs(np.atleast_1d(x)) >= geom.chart_radius]
        raise OutOfChartError(
            f"|x'| = {np.abs(bad).max()} outside the chart |x'| < {geom.chart_radius}"
        )
    return x


def _f_unchecked(R, x):
    # R - sqrt(R^2 - x^2) without cancellation for small x
    return x * x / (R + np.sqrt(R * R - x * x))


def graph_functions(geom: Geometry):
    """Return evaluators ``(f, g)`` of the upper and lower boundary graphs.

    Both raise :class:`OutOfChartError` for ``|x'| >= R0``.
    """
    R = geom.radius

    def f(x):
        return _f_unchecked(R, _check_chart(geom, x))

    def g(x):
        return -_f_unchecked(R, _check_chart(geom, x))

    return f, g


def gap_width(geom: Geometry, x):
    """Vertical gap height ``eps + f(x') - g(x')`` inside the chart."""
    x = _check_chart(geom, x)
    return geom.gap + 2.0 * _f_unchecked(geom.radius, x)


def neck_membership(geom: Geometry, window: NeckWindow, points) -> np.ndarray | bool:
    """True where a point lies strictly inside ``Omega_{x0, r}``.

    ``points`` is a single ``(x1, x2)`` pair or an array of shape (N, 2).
    """
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    x, y = p[:, 0], p[:, 1]
    inside = np.abs(x) < geom.chart_radius
    inside &= np.abs(x - window.center_abscissa) < window.half_width
    xs = np.where(inside, x, 0.0)
    f = _f_unchecked(geom.radius, xs)
    half = 0.5 * geom.gap
    inside &= (y < half + f) & (y > -half - f)
    return bool(inside[0]) if single else inside


@dataclass(frozen=True)
class MeshParams:
    """Parameters of the gap-graded sizing rule and the mesher.

    ``theta`` is the target edge length per unit gap height inside the
    neck, clamped to ``[h_min, h_max]``.  ``growth`` is the rate at which the
    size relaxes away from the neck strip.
    """

    theta: float = 0.25
    h_min: float = 1e-5
    h_max: float = 0.1
    angle_floor: float = 20.0
    vertex_cap: int = 2_000_000
    growth: float = 0.5

    def __post_init__(self):
        if not (self.theta > 0 and self.h_min > 0 and self.h_max >= self.h_min):
            raise ValueError("need theta > 0 and 0 < h_min <= h_max")
        if not 0 < self.angle_floor <= 30:
            raise ValueError("angle_floor must lie in (0, 30] degrees")
        if not 0 < self.growth < 1:
            raise ValueError("growth must lie in (0, 1)")

    def scaled(self, factor: float) -> "MeshParams":
        """All lengths multiplied by ``factor`` (``theta`` included)."""
        return MeshParams(
            theta=self.theta * factor,
            h_min=self.h_min * factor,
            h_max=self.h_max * factor,
            angle_floor=self.angle_floor,
            vertex_cap=self.vertex_cap,
            growth=self.growth,
        )


def neck_distance(geom: Geometry, points) -> np.ndarray:
    """Approximate distance from points to the closed neck strip.

    Horizontal excess beyond ``R0`` and vertical excess beyond the graphs
    (evaluated at the clipped abscissa) combined in quadrature.  Zero inside
    the strip.
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = p[:, 0], p[:, 1]
    R0 = geom.chart_radius
    t = np.clip(x, -R0, R0)
    f = _f_unchecked(geom.radius, t)
    half = 0.5 * geom.gap
    dx = np.abs(x) - np.abs(t)
    dy = np.maximum(0.0, np.maximum(y - (half + f), (-half - f) - y))
    return np.hypot(dx, dy)


def sizing_field(geom: Geometry, points, params: MeshParams | None = None):
    """Target edge length at each point.

    Inside the neck strip this is ``clamp(theta * gap(x'), h_min, h_max)``;
    away from it the size grows linearly with :func:`neck_distance` at rate
    ``params.growth`` until it saturates at ``h_max``.
    """
    params = params or MeshParams()
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = np.atleast_2d(p)
    R0 = geom.chart_radius
    t = np.clip(p[:, 0], -R0, R0)
    local = params.theta * (geom.gap + 2.0 * _f_unchecked(geom.radius, t))
    s = local + params.growth * neck_distance(geom, p)
    s = np.clip(s, params.h_min, params.h_max)
    return float(s[0]) if single else s


def chart_constants(geom: Geometry) -> dict:
    """Derived chart constants for the disk chart on ``|x'| < R0``.

    ``c1`` is the best constant in ``c1 |x'|^2 <= f - g`` and ``c2`` bounds
    the second derivative of ``f`` (its C^{1,1} seminorm).  These are
    reported quantities only.
    """
    R, R0 = geom.radius, geom.chart_radius
    # (f - g)/x^2 = 2/(R + sqrt(R^2 - x^2)) is increasing, minimum at x = 0
    c1 = 1.0 / R
    c2 = R * R / (R * R - R0 * R0) ** 1.5
    return {"c1": c1, "c2": c2, "mu": 1.0 / R}

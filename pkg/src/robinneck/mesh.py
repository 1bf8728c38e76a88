"""Gap-graded triangulation of the matrix region.

Boundary circles are sampled with density ``1 / sizing_field`` and the
resulting planar straight-line graph is handed to Triangle (through
``meshpy``) for a constrained Delaunay triangulation with Ruppert
refinement; a per-triangle callback compares the element area with the
sizing field at its centroid.  Boundary vertices inserted on the polygonal
segments are projected back onto their exact circle afterwards.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import Geometry, MeshParams, NeckWindow, gap_width, neck_membership, sizing_field


class Marker(enum.IntEnum):
    OUTER = 1
    INCLUSION_1 = 2
    INCLUSION_2 = 3


class MeshBudgetError(RuntimeError):
    """The sizing rule would need more vertices than the configured cap."""


# equilateral triangle of edge s has area sqrt(3)/4 s^2
_AREA_FACTOR = 0.45


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    params: MeshParams | None = None
    geometry: Geometry | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        """Signed triangle areas (positive for counter-clockwise elements)."""
        if "areas" not in self._cache:
            p = self.vertices[self.triangles]
            d1 = p[:, 1] - p[:, 0]
            d2 = p[:, 2] - p[:, 0]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted lexicographically, shape (E, 2)."""
        if "edges" not in self._cache:
            e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
            self._cache["edges"] = np.unique(e, axis=0)
        return self._cache["edges"]

    def marked_vertices(self, marker: Marker) -> np.ndarray:
        """Sorted indices of the vertices on boundary edges with ``marker``."""
        sel = self.boundary_edges[self.boundary_markers == marker]
        return np.unique(sel)

    def reflected(self, axis: int = 0) -> "Mesh":
        """Mirror image across ``x_axis = 0`` with orientation restored.

        Reflection across x1 = 0 leaves D1 and D2 in place; across x2 = 0 it
        swaps them, so the inclusion markers are swapped too.
        """
        v = self.vertices.copy()
        v[:, axis] *= -1.0
        tris = self.triangles[:, [0, 2, 1]].copy()
        markers = self.boundary_markers.copy()
        if axis == 1:
            one = markers == Marker.INCLUSION_1
            two = markers == Marker.INCLUSION_2
            markers[one] = Marker.INCLUSION_2
            markers[two] = Marker.INCLUSION_1
        return Mesh(v, tris, self.boundary_edges.copy(), markers, self.params, self.geometry)


def _sample_path(curve, t0, t1, geom, params, n_probe=20000):
    """Points ``curve(t)`` for ``t`` from ``t0`` to ``t1`` (both included)
    spaced by roughly the local sizing field."""
    t = np.linspace(t0, t1, n_probe + 1)
    pts = curve(t)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    mids = 0.5 * (pts[1:] + pts[:-1])
    density = seg / sizing_field(geom, mids, params)
    cum = np.concatenate([[0.0], np.cumsum(density)])
    n = max(2, int(np.ceil(cum[-1])))
    targets = np.linspace(0.0, cum[-1], n + 1)
    return curve(np.interp(targets, cum, t))


def estimate_vertex_count(geom: Geometry, params: MeshParams, n=400) -> float:
    """Rough vertex count implied by the sizing field (midpoint quadrature
    of ``1 / (area per vertex)`` over a tensor grid).

    The neck is integrated on its own fine grid because the size there can
    be orders of magnitude below the grid spacing.
    """
    Ro = geom.outer_radius
    xs = (np.arange(n) + 0.5) / n * 2 * Ro - Ro
    X, Y = np.meshgrid(xs, xs)
    P = np.c_[X.ravel(), Y.ravel()]
    inside = np.hypot(P[:, 0], P[:, 1]) < Ro
    for c in geom.centers:
        inside &= np.hypot(P[:, 0] - c[0], P[:, 1] - c[1]) > geom.radius
    inside &= ~neck_membership(geom, NeckWindow(0.0, geom.chart_radius), P)
    cell = (2 * Ro / n) ** 2
    s = sizing_field(geom, P[inside], params)
    total = np.sum(cell / (_AREA_FACTOR * 2 * s * s))
    # neck strip |x'| < R0: column integral of gap / (area per vertex)
    R0 = geom.chart_radius
    xn = (np.arange(4000) + 0.5) / 4000 * 2 * R0 - R0
    h = gap_width(geom, xn)
    sn = np.clip(params.theta * h, params.h_min, params.h_max)
    total += np.sum((2 * R0 / 4000) * h / (_AREA_FACTOR * 2 * sn * sn))
    return float(total)


_SYMMETRY = 0


def _quarter_pslg(geom: Geometry, params: MeshParams):
    """Boundary of the quadrant ``x1 >= 0, x2 >= 0`` of the matrix region as
    one closed polygon, with a marker per segment."""
    R, eps, Ro = geom.radius, geom.gap, geom.outer_radius
    c = geom.centers[0]
    top, bottom = 2 * R + 0.5 * eps, 0.5 * eps

    def line(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return lambda t: a + np.outer(t, b - a)

    def arc(center, radius):
        return lambda t: center + radius * np.c_[np.cos(t), np.sin(t)]

    pieces = [
        (line((0, 0), (Ro, 0)), 0.0, 1.0, _SYMMETRY),
        (arc(np.zeros(2), Ro), 0.0, np.pi / 2, Marker.OUTER),
        (line((0, Ro), (0, top)), 0.0, 1.0, _SYMMETRY),
        (arc(c, R), np.pi / 2, -np.pi / 2, Marker.INCLUSION_1),
        (line((0, bottom), (0, 0)), 0.0, 1.0, _SYMMETRY),
    ]
    points, markers = [], []
    for curve, t0, t1, marker in pieces:
        pts = _sample_path(curve, t0, t1, geom, params)
        # arc end points must sit exactly on the axes for the mirror merge
        pts[np.abs(pts) < 1e-13 * Ro] = 0.0
        points.extend(map(tuple, pts[:-1]))
        markers.extend([int(marker)] * (len(pts) - 1))
    n = len(points)
    facets = [(i, (i + 1) % n) for i in range(n)]
    return points, facets, markers


def generate_mesh(geom: Geometry, params: MeshParams | None = None) -> Mesh:
    """Triangulate ``B(0, outer_radius) minus (D1 u D2)`` following the sizing field.

    One quadrant is meshed and reflected across both axes, so the mesh is
    exactly symmetric in ``x1`` and in ``x2``.
    """
    import meshpy.triangle as mt

    params = params or MeshParams()
    if not geom.gap < geom.chart_radius / 4:
        raise ValueError(f"gap {geom.gap} violates eps < R0/4")
    estimate = estimate_vertex_count(geom, params)
    if estimate > params.vertex_cap:
        raise MeshBudgetError(
            f"eps={geom.gap:g}, h_min={params.h_min:g}: sizing rule needs about "
            f"{estimate:.3g} vertices, above the cap {params.vertex_cap}"
        )

    points, facets, markers = _quarter_pslg(geom, params)
    info = mt.MeshInfo()
    info.set_points(points)
    # Triangle reserves marker 0 for unmarked facets; shift by 10
    info.set_facets(facets, facet_markers=[m + 10 for m in markers])

    def too_big(verts, area):
        c = ((verts[0][0] + verts[1][0] + verts[2][0]) / 3.0,
             (verts[0][1] + verts[1][1] + verts[2][1]) / 3.0)
        s = sizing_field(geom, c, params)
        return bool(area > _AREA_FACTOR * s * s)

    out = mt.build(info, refinement_func=too_big, min_angle=params.angle_floor)
    qV = np.array(out.points, dtype=float)
    qT = np.array(out.elements, dtype=np.int64)
    qE = np.array(out.facets, dtype=np.int64)
    qM = np.array(out.facet_markers, dtype=np.int64) - 10
    keep = qM > 0
    qE, qM = qE[keep], qM[keep]
    if 4 * len(qV) > params.vertex_cap:
        raise MeshBudgetError(
            f"eps={geom.gap:g}, h_min={params.h_min:g}: generated about {4 * len(qV)} "
            f"vertices, above the cap {params.vertex_cap}"
        )
    # boundary vertices inserted on polygon segments go back to the circles
    _project_boundary(qV, qE, qM, geom)

    V, T, E, M = _mirror(qV, qT, qE, qM)
    T = _orient(V, T)
    return Mesh(V, T, E, M, params, geom)


def _mirror(qV, qT, qE, qM):
    """Reflect a first-quadrant mesh across x1 = 0 and x2 = 0, merging the
    vertices that lie on the axes."""
    index: dict = {}
    verts = []
    maps = []
    for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        m = np.empty(len(qV), dtype=np.int64)
        for i, (x, y) in enumerate(qV):
            key = (sx * x + 0.0, sy * y + 0.0)
            k = index.get(key)
            if k is None:
                k = index[key] = len(verts)
                verts.append(key)
            m[i] = k
        maps.append((m, sy))
    V = np.array(verts, dtype=float)
    T = np.vstack([m[qT] for m, _ in maps])
    E = np.vstack([m[qE] for m, _ in maps])
    M = []
    for _, sy in maps:
        mm = qM.copy()
        if sy < 0:
            mm[qM == Marker.INCLUSION_1] = Marker.INCLUSION_2
        M.append(mm)
    return V, T, E, np.concatenate(M)


def _circle_of(marker, geom):
    if marker == Marker.OUTER:
        return np.zeros(2), geom.outer_radius
    if marker == Marker.INCLUSION_1:
        return geom.centers[0], geom.radius
    return geom.centers[1], geom.radius


def _project_boundary(V, E, M, geom):
    for marker in Marker:
        idx = np.unique(E[M == marker])
        if len(idx) == 0:
            continue
        c, R = _circle_of(marker, geom)
        d = V[idx] - c
        V[idx] = c + R * d / np.hypot(d[:, 0], d[:, 1])[:, None]


def _orient(V, T):
    p = V[T]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    T = T.copy()
    T[neg] = T[neg][:, [0, 2, 1]]
    return T


def refine_uniform(mesh: Mesh, project: bool = True) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    With ``project`` the midpoints of marked boundary edges move onto the
    exact circle; without it the refined mesh covers the same polygon and
    its P1 space contains the coarse one.
    """
    edges = mesh.edges()
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    V = np.vstack([mesh.vertices, mid])
    key = edges[:, 0] * nv + edges[:, 1]
    order = np.argsort(key)
    skey = key[order]

    def mid_index(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        pos = np.searchsorted(skey, lo * nv + hi)
        return nv + order[pos]

    t = mesh.triangles
    m01 = mid_index(t[:, 0], t[:, 1])
    m12 = mid_index(t[:, 1], t[:, 2])
    m20 = mid_index(t[:, 2], t[:, 0])
    T = np.vstack([
        np.c_[t[:, 0], m01, m20],
        np.c_[m01, t[:, 1], m12],
        np.c_[m20, m12, t[:, 2]],
        np.c_[m01, m12, m20],
    ])
    be = mesh.boundary_edges
    bm = mid_index(be[:, 0], be[:, 1])
    E = np.vstack([np.c_[be[:, 0], bm], np.c_[bm, be[:, 1]]])
    M = np.concatenate([mesh.boundary_markers, mesh.boundary_markers])
    if project and mesh.geometry is not None:
        _project_boundary(V, E, M, mesh.geometry)
    params = mesh.params.scaled(0.5) if mesh.params is not None else None
    return Mesh(V, T, E, M, params, mesh.geometry)


def unit_square_fixture() -> Mesh:
    """Unit square split by both diagonals into four right isosceles triangles."""
    V = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]], dtype=float)
    T = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    E = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    M = np.full(4, int(Marker.OUTER))
    return Mesh(V, T, E, M)


# ---------------------------------------------------------------- quality


def triangle_angles(mesh: Mesh) -> np.ndarray:
    """Interior angles in degrees, shape (T, 3); column i is at vertex i."""
    p = mesh.vertices[mesh.triangles]
    out = np.empty((mesh.n_triangles, 3))
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cos = (a * b).sum(1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, i] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


@dataclass
class QualityReport:
    n_vertices: int
    n_triangles: int
    n_edges: int
    min_angle: float
    max_angle: float
    marker_counts: dict
    size_ratio_histogram: dict | None
    euler_characteristic: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return dict(self.__dict__)


_RATIO_BINS = (0.0, 0.25, 0.5, 0.71, 1.0, 1.41, 2.0, 4.0, np.inf)


def _boundary_loops(edges: np.ndarray) -> list[list[int]] | None:
    """Chain boundary edges into loops; None if some vertex does not have
    exactly two boundary neighbours."""
    nbr: dict[int, list[int]] = {}
    for a, b in edges:
        nbr.setdefault(int(a), []).append(int(b))
        nbr.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in nbr.values()):
        return None
    seen, loops = set(), []
    for start in sorted(nbr):
        if start in seen:
            continue
        loop, prev, cur = [start], None, start
        seen.add(start)
        while True:
            a, b = nbr[cur]
            nxt = a if a != prev else b
            if nxt == start:
                break
            if nxt in seen:
                return None
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    return loops


def mesh_quality(mesh: Mesh, geom: Geometry | None = None) -> QualityReport:
    """Deterministic quality and consistency report.

    Invariant violations go into ``violations`` as strings; nothing raises.
    """
    geom = geom or mesh.geometry
    params = mesh.params
    violations = []
    areas = mesh.areas()
    if np.any(areas <= 0):
        violations.append(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
    ang = triangle_angles(mesh)
    floor = params.angle_floor if params is not None else None
    if floor is not None and ang.min() < floor - 1e-9:
        violations.append(f"min angle {ang.min():.3f} below floor {floor}")

    e_all = np.sort(mesh.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
    edges, counts = np.unique(e_all, axis=0, return_counts=True)
    if np.any(counts > 2):
        violations.append(f"{int(np.sum(counts > 2))} edges shared by more than two triangles")
    bnd = edges[counts == 1]
    marked = np.unique(np.sort(mesh.boundary_edges, axis=1), axis=0)
    if len(bnd) != len(marked) or not np.array_equal(bnd, marked):
        violations.append(
            f"{len(bnd)} single-triangle edges vs {len(marked)} marked boundary edges"
        )
    euler = mesh.n_vertices - len(edges) + mesh.n_triangles

    marker_counts = {m.name: int(np.sum(mesh.boundary_markers == m)) for m in Marker}
    loops = _boundary_loops(mesh.boundary_edges)
    if loops is None:
        violations.append("boundary edges do not form disjoint closed loops")
    else:
        for loop in loops:
            ms = set()
            lset = set(loop)
            for (a, b), m in zip(mesh.boundary_edges, mesh.boundary_markers):
                if int(a) in lset:
                    ms.add(int(m))
            if len(ms) != 1:
                violations.append(f"boundary loop of {len(loop)} vertices mixes markers {sorted(ms)}")

    hist = None
    if geom is not None:
        holes = 2
        if euler != 1 - holes:
            violations.append(f"V - E + T = {euler}, expected {1 - holes}")
        for m in Marker:
            idx = mesh.marked_vertices(m)
            if len(idx) == 0:
                violations.append(f"no vertices carry marker {m.name}")
                continue
            c, R = _circle_of(m, geom)
            dev = np.abs(np.hypot(*(mesh.vertices[idx] - c).T) - R).max()
            if dev > 1e-12 * geom.radius:
                violations.append(f"{m.name} vertices off their circle by {dev:.3e}")
        cen = mesh.centroids()
        inside = np.hypot(cen[:, 0], cen[:, 1]) < geom.outer_radius
        for c in geom.centers:
            inside &= np.hypot(cen[:, 0] - c[0], cen[:, 1] - c[1]) > geom.radius
        if not inside.all():
            violations.append(f"{int(np.sum(~inside))} centroids outside the matrix region")
        if params is not None:
            p = mesh.vertices[mesh.triangles]
            L = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).mean(axis=1)
            ratio = L / sizing_field(geom, cen, params)
            h, _ = np.histogram(ratio, bins=_RATIO_BINS)
            hist = {f"[{lo:g},{hi:g})": int(k) for lo, hi, k in zip(_RATIO_BINS[:-1], _RATIO_BINS[1:], h)}
            bad = int(np.sum((ratio < 0.5) | (ratio > 2.0)))
            if bad:
                violations.append(f"{bad} triangles with mean edge outside [s/2, 2s]")

    return QualityReport(
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        n_edges=len(edges),
        min_angle=float(ang.min()),
        max_angle=float(ang.max()),
        marker_counts=marker_counts,
        size_ratio_histogram=hist,
        euler_characteristic=int(euler),
        violations=violations,
    )


def neck_triangle_count(mesh: Mesh, geom: Geometry, half_width: float) -> int:
    """Number of triangles whose centroid lies in ``Omega_{0, half_width}``."""
    return int(np.sum(neck_membership(geom, NeckWindow(0.0, half_width), mesh.centroids())))


# ---------------------------------------------------------------- text dump


def dump_mesh(mesh: Mesh) -> str:
    """Plain-text dump: ``v x y``, ``t i j k``, ``b i j marker`` lines."""
    buf = io.StringIO()
    for x, y in mesh.vertices:
        buf.write(f"v {x:.17g} {y:.17g}\n")
    for i, j, k in mesh.triangles:
        buf.write(f"t {i} {j} {k}\n")
    for (i, j), m in zip(mesh.boundary_edges, mesh.boundary_markers):
        buf.write(f"b {i} {j} {Marker(int(m)).name}\n")
    return buf.getvalue()


def load_mesh(text: str, geom: Geometry | None = None, params: MeshParams | None = None) -> Mesh:
    """Inverse of :func:`dump_mesh`."""
    V, T, E, M = [], [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v" and len(parts) == 3:
            V.append((float(parts[1]), float(parts[2])))
        elif tag == "t" and len(parts) == 4:
            T.append(tuple(int(p) for p in parts[1:]))
        elif tag == "b" and len(parts) == 4 and parts[3] in Marker.__members__:
            E.append((int(parts[1]), int(parts[2])))
            M.append(int(Marker[parts[3]]))
        else:
            raise ValueError(f"line {lineno}: malformed mesh record {line!r}")
    n = len(V)
    for name, rows in (("triangle", T), ("boundary edge", E)):
        bad = [r for r in rows if min(r) < 0 or max(r) >= n]
        if bad:
            raise ValueError(f"{name} {bad[0]} references a vertex outside 0..{n - 1}")
    return Mesh(
        np.array(V, dtype=float).reshape(-1, 2),
        np.array(T, dtype=np.int64).reshape(-1, 3),
        np.array(E, dtype=np.int64).reshape(-1, 2),
        np.array(M, dtype=np.int64),
        params,
        geom,
    )

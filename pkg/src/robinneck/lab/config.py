"""Experiment configuration: a small YAML document with six blocks.

Example::

    geometry:  {radius: 1.0, outer_radius: 5.0, chart_radius: 0.5}
    physics:
      gamma: [0.5, 2.0]
      eps: [1.0e-2, 1.0e-3]
      phi: X1                 # X1 | X2 | CONSTANT(c) | LINEAR(a1, a2)
    mesh:      {theta: 0.25, h_min: 1.0e-5, h_max: 0.1, angle_floor: 20, vertex_cap: 2000000}
    solver:    {rtol: 1.0e-10, max_iterations: 20000, method: auto, workers: 1}
    analysis:  {window_c: 1.0, sensitivity_c: [0.5, 1.0, 2.0], wide_fraction: 0.5,
                fit_lower: 2.0, fit_upper: 0.25, exclude_largest: true,
                profile: false, fiber_samples: 16}
    output: out
    seed: 0

Only ``physics`` is required; every other key falls back to the defaults
shown.  Numbers may be written as ``1e-3`` (plain YAML reads that as a
string; it is coerced).
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from ..geometry import Geometry, MeshParams


class ConfigError(ValueError):
    """Carries every problem found, each prefixed with its location."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


_PHI_RE = re.compile(r"^\s*(X1|X2|CONSTANT|LINEAR)\s*(?:\((.*)\))?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class PhiSpec:
    """Outer boundary data ``phi(x) = a1 x1 + a2 x2 + c``."""

    kind: str
    coeffs: tuple = ()

    @classmethod
    def parse(cls, text) -> "PhiSpec":
        m = _PHI_RE.match(str(text))
        if not m:
            raise ValueError(f"unrecognised phi spec {text!r}")
        kind = m.group(1).upper()
        args = m.group(2)
        vals = tuple(float(a) for a in args.split(",")) if args and args.strip() else ()
        want = {"X1": 0, "X2": 0, "CONSTANT": 1, "LINEAR": 2}[kind]
        if len(vals) != want:
            raise ValueError(f"phi {kind} takes {want} argument(s), got {len(vals)}")
        return cls(kind, vals)

    def linear_part(self):
        if self.kind == "X1":
            return 1.0, 0.0, 0.0
        if self.kind == "X2":
            return 0.0, 1.0, 0.0
        if self.kind == "CONSTANT":
            return 0.0, 0.0, self.coeffs[0]
        return self.coeffs[0], self.coeffs[1], 0.0

    def __call__(self, points):
        a1, a2, c = self.linear_part()
        p = np.atleast_2d(points)
        return a1 * p[:, 0] + a2 * p[:, 1] + c

    def __str__(self):
        if not self.coeffs:
            return self.kind
        return f"{self.kind}({', '.join(repr(c) for c in self.coeffs)})"


@dataclass(frozen=True)
class GeometryBlock:
    radius: float = 1.0
    outer_radius: float | None = None
    chart_radius: float | None = None


@dataclass(frozen=True)
class PhysicsBlock:
    gamma: tuple = ()
    eps: tuple = ()
    phi: PhiSpec = PhiSpec("X1")


@dataclass(frozen=True)
class MeshBlock:
    theta: float = 0.25
    h_min: float = 1e-5
    h_max: float = 0.1
    angle_floor: float = 20.0
    vertex_cap: int = 2_000_000
    growth: float = 0.5


@dataclass(frozen=True)
class SolverBlock:
    rtol: float = 1e-10
    max_iterations: int = 20000
    method: str = "auto"
    workers: int = 1


@dataclass(frozen=True)
class AnalysisBlock:
    window_c: float = 1.0
    sensitivity_c: tuple = (0.5, 1.0, 2.0)
    wide_fraction: float = 0.5
    fit_lower: float = 2.0
    fit_upper: float = 0.25
    exclude_largest: bool = True
    profile: bool = False
    fiber_samples: int = 16


@dataclass(frozen=True)
class ExperimentConfig:
    physics: PhysicsBlock
    geometry: GeometryBlock = field(default_factory=GeometryBlock)
    mesh: MeshBlock = field(default_factory=MeshBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    analysis: AnalysisBlock = field(default_factory=AnalysisBlock)
    output: str = "out"
    seed: int = 0

    def geometry_for(self, eps: float) -> Geometry:
        g = self.geometry
        return Geometry(radius=g.radius, gap=eps, outer_radius=g.outer_radius,
                        chart_radius=g.chart_radius)

    def mesh_params(self) -> MeshParams:
        return MeshParams(**asdict(self.mesh))

    @property
    def mu(self) -> float:
        return 1.0 / self.geometry.radius

    @property
    def chart_radius(self) -> float:
        g = self.geometry
        return g.chart_radius if g.chart_radius is not None else 0.5 * g.radius

    def cells(self):
        """(eps, gamma) pairs in report order: gamma ascending, eps descending."""
        return [(e, g) for g in sorted(self.physics.gamma)
                for e in sorted(self.physics.eps, reverse=True)]


_BLOCKS = {
    "geometry": GeometryBlock,
    "physics": PhysicsBlock,
    "mesh": MeshBlock,
    "solver": SolverBlock,
    "analysis": AnalysisBlock,
}
_TOP = set(_BLOCKS) | {"output", "seed"}
_LISTS = {("physics", "gamma"), ("physics", "eps"), ("analysis", "sensitivity_c")}
_INTS = {("mesh", "vertex_cap"), ("solver", "max_iterations"), ("solver", "workers"),
         ("analysis", "fiber_samples")}
_BOOLS = {("analysis", "exclude_largest"), ("analysis", "profile")}
_STRS = {("solver", "method")}


def _number(value, where, problems, integer=False):
    if isinstance(value, bool):
        problems.append(f"{where}: expected a number, got a boolean")
        return None
    try:
        x = float(value)
    except (TypeError, ValueError):
        problems.append(f"{where}: expected a number, got {value!r}")
        return None
    if not np.isfinite(x):
        problems.append(f"{where}: must be finite")
        return None
    if integer:
        if x != int(x):
            problems.append(f"{where}: expected an integer, got {value!r}")
            return None
        return int(x)
    return x


def _coerce(block, key, value, problems):
    where = f"{block}.{key}"
    if (block, key) in _LISTS:
        items = value if isinstance(value, (list, tuple)) else [value]
        out = tuple(_number(v, f"{where}[{i}]", problems) for i, v in enumerate(items))
        if not out:
            problems.append(f"{where}: list must be non-empty")
        return out
    if (block, key) == ("physics", "phi"):
        try:
            return PhiSpec.parse(value)
        except ValueError as exc:
            problems.append(f"{where}: {exc}")
            return None
    if (block, key) in _BOOLS:
        if not isinstance(value, bool):
            problems.append(f"{where}: expected true/false, got {value!r}")
        return bool(value)
    if (block, key) in _STRS:
        return str(value)
    if value is None and (block, key) in {("geometry", "outer_radius"), ("geometry", "chart_radius")}:
        return None
    return _number(value, where, problems, integer=(block, key) in _INTS)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises :class:`ConfigError` with all problems."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<document>: not valid YAML ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["<document>: top level must be a mapping"])
    problems: list[str] = []
    for key in doc:
        if key not in _TOP:
            problems.append(f"{key}: unknown top-level key")
    if "physics" not in doc:
        problems.append("physics: required block is missing")
    for req in ("gamma", "eps"):
        if isinstance(doc.get("physics"), dict) and req not in doc["physics"]:
            problems.append(f"physics.{req}: required key is missing")

    kwargs = {}
    for name, cls in _BLOCKS.items():
        raw = doc.get(name, {})
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            problems.append(f"{name}: block must be a mapping")
            continue
        known = {f.name for f in fields(cls)}
        vals = {}
        for key, value in raw.items():
            if key not in known:
                problems.append(f"{name}.{key}: unknown key")
                continue
            v = _coerce(name, key, value, problems)
            if isinstance(v, tuple):
                v = tuple(x for x in v if x is not None)
            if v is not None or value is None:
                vals[key] = v
        try:
            kwargs[name] = cls(**vals)
        except (TypeError, ValueError) as exc:
            problems.append(f"{name}: {exc}")
    out = doc.get("output") or "out"
    seed = _number(doc.get("seed", 0), "seed", problems, integer=True)
    if "physics" in kwargs:
        # semantic checks run on whatever parsed, so all problems surface at once
        phys = kwargs["physics"]
        if phys.phi is None:
            kwargs["physics"] = PhysicsBlock(phys.gamma, phys.eps)
        cfg = ExperimentConfig(output=str(out), seed=seed or 0, **kwargs)
        problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg: ExperimentConfig) -> list[str]:
    problems = []
    g = cfg.geometry
    if not g.radius > 0:
        problems.append(f"geometry.radius: must be positive (got {g.radius})")
        return problems
    R0 = cfg.chart_radius
    if not 0 < R0 < g.radius:
        problems.append(f"geometry.chart_radius: must lie in (0, radius) (got {R0})")
    for i, e in enumerate(cfg.physics.eps):
        if not e > 0:
            problems.append(f"physics.eps[{i}]: must be positive (got {e})")
        elif not e < R0 / 4:
            problems.append(f"physics.eps[{i}]: {e} violates eps < R0/4 = {R0 / 4}")
        else:
            try:
                cfg.geometry_for(e)
            except ValueError as exc:
                problems.append(f"geometry: {exc}")
    for i, gm in enumerate(cfg.physics.gamma):
        if not gm > 0:
            problems.append(f"physics.gamma[{i}]: must be positive (got {gm})")
    if len(set(cfg.physics.eps)) != len(cfg.physics.eps):
        problems.append("physics.eps: duplicate values")
    if len(set(cfg.physics.gamma)) != len(cfg.physics.gamma):
        problems.append("physics.gamma: duplicate values")
    m = cfg.mesh
    try:
        cfg.mesh_params()
    except ValueError as exc:
        problems.append(f"mesh: {exc}")
    if m.vertex_cap <= 0:
        problems.append("mesh.vertex_cap: must be positive")
    s = cfg.solver
    if not 0 < s.rtol < 1:
        problems.append(f"solver.rtol: must lie in (0, 1) (got {s.rtol})")
    if s.max_iterations < 1:
        problems.append("solver.max_iterations: must be at least 1")
    if s.method not in ("auto", "cg", "direct"):
        problems.append(f"solver.method: one of auto, cg, direct (got {s.method!r})")
    if s.workers < 1:
        problems.append("solver.workers: must be at least 1")
    a = cfg.analysis
    if not a.window_c > 0 or any(not c > 0 for c in a.sensitivity_c):
        problems.append("analysis: window constants must be positive")
    if not 0 < a.wide_fraction <= 1:
        problems.append("analysis.wide_fraction: must lie in (0, 1]")
    if not (a.fit_lower > 0 and 0 < a.fit_upper <= 0.5):
        problems.append("analysis: need fit_lower > 0 and 0 < fit_upper <= 0.5")
    if a.fiber_samples < 16:
        problems.append(f"analysis.fiber_samples: at least 16 samples per fibre (got {a.fiber_samples})")
    return problems


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in _BLOCKS:
        block = asdict(getattr(cfg, name))
        for k, v in block.items():
            if isinstance(v, tuple):
                block[k] = list(v)
        out[name] = block
    out["physics"]["phi"] = str(cfg.physics.phi)
    out["output"] = cfg.output
    out["seed"] = cfg.seed
    return out


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)

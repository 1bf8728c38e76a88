"""Fits and pass/fail checks over sweep records."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    eps_used: tuple

    @property
    def n_points(self) -> int:
        return len(self.eps_used)


def fit_blowup_slope(eps, grad=None, exclude_largest: bool = True, min_points: int = 4,
                     min_decades: float = 1.5) -> SlopeFit:
    """OLS slope of ``log grad`` against ``log eps`` with its standard error.

    ``eps`` may be a sequence of :class:`SweepRecord` (``grad`` is then
    ``grad_max_neck``).  The span requirement applies to the full set; the
    largest eps is dropped afterwards when at least five points remain.
    """
    if grad is None:
        recs = list(eps)
        eps = [r.eps for r in recs]
        grad = [r.grad_max_neck for r in recs]
    e = np.asarray(eps, dtype=float)
    g = np.asarray(grad, dtype=float)
    if len(e) != len(g):
        raise FitError("eps and grad differ in length")
    if len(np.unique(e)) < min_points:
        raise FitError(f"need at least {min_points} distinct eps values (got {len(np.unique(e))})")
    span = np.log10(e.max() / e.min())
    if span < min_decades:
        raise FitError(f"eps values span {span:.2f} decades; at least {min_decades} required")
    if np.any(g <= 0) or np.any(e <= 0):
        raise FitError("log-log fit needs positive data")
    order = np.argsort(e)
    e, g = e[order], g[order]
    if exclude_largest and len(e) >= 5:
        e, g = e[:-1], g[:-1]
    res = stats.linregress(np.log(e), np.log(g))
    return SlopeFit(float(res.slope), float(res.stderr), float(res.intercept), tuple(e.tolist()))


def by_gamma(records) -> dict:
    out: dict = {}
    for r in records:
        out.setdefault(r.gamma, []).append(r)
    return {g: sorted(rs, key=lambda r: -r.eps) for g, rs in sorted(out.items())}


def window_sensitivity(records, exclude_largest: bool = True) -> dict:
    """Slopes fitted with each recorded neck-window constant and their
    spread."""
    keys = sorted({k for r in records for k in r.extras.get("windows", {})}, key=float)
    if not keys:
        raise FitError("records carry no window diagnostics")
    slopes = {}
    for k in keys:
        pts = [(r.eps, r.extras["windows"][k]) for r in records if k in r.extras.get("windows", {})]
        e, g = zip(*pts)
        slopes[k] = fit_blowup_slope(e, g, exclude_largest).slope
    vals = list(slopes.values())
    return {"slopes": slopes, "drift": float(max(vals) - min(vals))}


def spread(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())


def dichotomy_table(records, mu: float = 1.0, key: str = "grad_max_neck") -> list[dict]:
    """Per gamma: bounded cells need max/min <= 2, blow-up cells need the
    smallest-eps value above 3x the largest-eps value."""
    rows = []
    for g, rs in by_gamma(records).items():
        vals = np.array([getattr(r, key) if hasattr(r, key) else r.extras[key] for r in rs])
        bounded = g <= 1.0 / mu
        ratio = spread(vals)
        growth = float(vals[-1] / vals[0])
        ok = ratio <= 2.0 if bounded else growth > 3.0
        rows.append({
            "gamma": g, "regime": "bounded" if bounded else "blow-up",
            "eps_range": [rs[-1].eps, rs[0].eps], "ratio": ratio, "growth": growth,
            "pass": bool(ok),
        })
    return rows


def envelope_check(records, key: str = "grad_max_neck", factor: float = 1.5) -> dict:
    """``grad <= factor * C eps^(-1/2)`` with ``C`` calibrated once on the
    largest-eps record."""
    rs = sorted(records, key=lambda r: -r.eps)
    vals = np.array([getattr(r, key) if hasattr(r, key) else r.extras[key] for r in rs])
    eps = np.array([r.eps for r in rs])
    C = float(vals[0] * np.sqrt(eps[0]))
    scaled = vals * np.sqrt(eps)
    return {"C": C, "max_scaled": float(scaled.max()), "worst_ratio": float(scaled.max() / C),
            "pass": bool(np.all(scaled <= factor * C))}


def analyze(records, mu: float = 1.0, exclude_largest: bool = True) -> dict:
    """Slope fits, dichotomy, envelope and structural checks for a sweep."""
    records = list(records)
    out: dict = {"n_records": len(records), "slopes": {}, "sensitivity": {}, "checks": {}}
    for g, rs in by_gamma(records).items():
        pred = (rs[0].alpha - 1.0) / 2.0
        entry = {"alpha": rs[0].alpha, "predicted_slope": pred}
        try:
            fit = fit_blowup_slope(rs, exclude_largest=exclude_largest)
            entry.update(asdict(fit))
            entry["eps_used"] = list(fit.eps_used)
            if g > 1.0 / mu:
                entry["pass"] = bool(abs(fit.slope - pred) <= 0.05)
        except FitError as exc:
            entry["error"] = str(exc)
        try:
            sens = window_sensitivity(rs, exclude_largest)
            sens["pass"] = bool(sens["drift"] < 0.03)
            out["sensitivity"][repr(g)] = sens
        except FitError:
            pass
        out.setdefault("envelope", {})[repr(g)] = envelope_check(rs)
        if all("grad_max_wide" in r.extras for r in rs):
            out.setdefault("envelope_wide", {})[repr(g)] = envelope_check(rs, "grad_max_wide")
        out["slopes"][repr(g)] = entry
    out["dichotomy"] = dichotomy_table(records, mu)
    if all("grad_max_wide" in r.extras for r in records):
        out["dichotomy_wide"] = dichotomy_table(records, mu, key="grad_max_wide")
    struct = [r.extras["checks"] for r in records if "checks" in r.extras]
    if struct:
        out["structural"] = {
            k: all(c[k] for c in struct)
            for k in ("overshoot_ok", "potentials_ok", "flux_ok", "energy_ok")
        }
    prof = {repr((r.eps, r.gamma)): {k: r.extras["profile"][k] for k in ("C1", "residual")}
            for r in records if "C1" in r.extras.get("profile", {})}
    if prof:
        out["profile_fits"] = prof
    out["checks"] = _collect_checks(out)
    return out


def _collect_checks(out: dict) -> dict:
    checks = {}
    for g, e in out["slopes"].items():
        if "pass" in e:
            checks[f"slope[gamma={g}]"] = e["pass"]
    for g, s in out["sensitivity"].items():
        checks[f"window_drift[gamma={g}]"] = s["pass"]
    for row in out["dichotomy"]:
        checks[f"dichotomy[gamma={row['gamma']!r}]"] = row["pass"]
    for name in ("envelope", "envelope_wide"):
        for g, e in out.get(name, {}).items():
            checks[f"{name}[gamma={g}]"] = e["pass"]
    for k, v in out.get("structural", {}).items():
        checks[f"structural.{k}"] = v
    for k, v in out.get("profile_fits", {}).items():
        checks[f"profile{k}"] = bool(v["C1"] > 0 and v["residual"] <= 0.1)
    return checks

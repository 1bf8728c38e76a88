"""Radial reduction of the gap problem.

Once the field is averaged across the gap, its odd mode ``V(r)`` satisfies
a degenerate second-order ODE. Its regular solution ``h`` (``h(0) = 0``,
``h(1) = 1``) sets the blow-up exponent.  All routines work in
units where the gap curvature ``mu`` is 1; :class:`ModeParams` carries the
physical ``mu`` and rescales ``eps -> eps/mu`` and ``gamma -> mu*gamma``.

The profile is computed the way it is constructed analytically: solve the
two-point problem on ``[a, 1]`` with ``h_a(a) = a`` and let ``a -> 0``
along a geometric sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded


class DomainError(ValueError):
    pass


class BracketError(RuntimeError):
    def __init__(self, message, points):
        super().__init__(message)
        self.points = points


def _check_n(n):
    if int(n) != n or n < 2:
        raise DomainError(f"dimension n must be an integer >= 2 (got {n})")


def _positive_root(b, c):
    # positive root of a^2 + b a - c = 0, written to avoid cancellation
    return 2.0 * c / (b + np.sqrt(b * b + 4.0 * c))


def blowup_exponent(n: int, gamma: float, mu: float = 1.0) -> float:
    """Positive root of ``a^2 + (n-1) a = n - 2 + 2/(mu gamma)``.

    ``alpha < 1`` exactly when ``gamma > 1/mu``.
    """
    _check_n(n)
    if not (gamma > 0 and mu > 0):
        raise DomainError(f"gamma and mu must be positive (got {gamma}, {mu})")
    return float(_positive_root(n - 1.0, n - 2.0 + 2.0 / (mu * gamma)))


def mode_exponent(n: int, gamma: float, k: int = 1) -> float:
    """Decay exponent of the degree-``k`` spherical-harmonic mode (``mu = 1``).

    Positive root of ``a^2 + (n-1) a = k(k+n-3) + 2/gamma``; for ``n = 2``
    only the odd mode ``k = 1`` exists.
    """
    _check_n(n)
    if int(k) != k or k < 1:
        raise DomainError(f"mode index k must be a positive integer (got {k})")
    if n == 2 and k != 1:
        raise DomainError("for n = 2 only the odd mode k = 1 exists")
    if not gamma > 0:
        raise DomainError(f"gamma must be positive (got {gamma})")
    return float(_positive_root(n - 1.0, k * (k + n - 3.0) + 2.0 / gamma))


def insulated_exponent(n: int) -> float:
    """Limit of :func:`blowup_exponent` as ``gamma -> infinity``."""
    _check_n(n)
    return float(_positive_root(n - 1.0, n - 2.0))


@dataclass(frozen=True)
class ModeParams:
    n: int = 2
    gamma: float = 2.0
    mu: float = 1.0
    eps: float = 1e-3
    k: int = 1

    def __post_init__(self):
        _check_n(self.n)
        if not (self.gamma > 0 and self.mu > 0 and self.eps > 0):
            raise DomainError("gamma, mu and eps must be positive")
        if int(self.k) != self.k or self.k < 1 or (self.n == 2 and self.k != 1):
            raise DomainError(f"invalid mode index k={self.k} for n={self.n}")

    @property
    def eps_hat(self) -> float:
        return self.eps / self.mu

    @property
    def gamma_hat(self) -> float:
        return self.gamma * self.mu

    @property
    def angular(self) -> float:
        """Eigenvalue ``k(k+n-3)`` of the sphere Laplacian."""
        return self.k * (self.k + self.n - 3.0)

    @property
    def alpha(self) -> float:
        return mode_exponent(self.n, self.gamma_hat, self.k)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: np.ndarray
    values: np.ndarray
    kind: str = "h"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if np.any(np.diff(g) <= 0):
            raise ValueError("profile grid must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")

    def __call__(self, r):
        return PchipInterpolator(self.grid, self.values, extrapolate=False)(r)

    def restrict(self, lo: float, hi: float) -> "RadialProfile":
        sel = (self.grid >= lo) & (self.grid <= hi)
        return RadialProfile(self.grid[sel], self.values[sel], self.kind, dict(self.meta))


def _stencils(r):
    """Weights of the three-point nonuniform first and second derivatives
    at ``r[1:-1]``."""
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    s = hm + hp
    d2 = np.stack([2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)])
    d1 = np.stack([-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)])
    return d1, d2


def _coefficients(r, params: ModeParams):
    eps, g = params.eps_hat, params.gamma_hat
    drift = (params.n - 2.0) / r + 2.0 * r / (eps + r * r)
    react = params.angular / (r * r) + (2.0 / g) / (eps + r * r)
    return drift, react


def apply_L(profile: RadialProfile, params: ModeParams) -> RadialProfile:
    """Finite-difference residual of

        L h = h'' + ((n-2)/r + 2r/(eps+r^2)) h' - (k(k+n-3)/r^2 + (2/gamma)/(eps+r^2)) h

    at the interior grid points.
    """
    r, h = profile.grid, profile.values
    if len(r) < 3:
        raise ValueError("apply_L needs at least three grid points")
    d1, d2 = _stencils(r)
    drift, react = _coefficients(r[1:-1], params)
    w = d2 + drift * d1
    res = w[0] * h[:-2] + w[1] * h[1:-1] + w[2] * h[2:] - react * h[1:-1]
    return RadialProfile(r[1:-1], res, "residual")


def cutoff_grid(a: float, ratio: float) -> np.ndarray:
    """``[a] + [ratio^-j, ..., ratio^-1, 1]``: geometric points anchored at 1,
    shared by every cutoff, with the last span before ``a`` between half and
    one and a half ratio steps."""
    lq = np.log(ratio)
    J = int(np.floor(np.log(1.0 / a) / lq - 0.5))
    pts = ratio ** -np.arange(J, -1, -1, dtype=float)
    pts[-1] = 1.0
    return np.concatenate([[a], pts])


def solve_cutoff(params: ModeParams, a: float, ratio: float = 1.03) -> RadialProfile:
    """``L h_a = 0`` on ``(a, 1)`` with ``h_a(a) = a`` and ``h_a(1) = 1``."""
    r = cutoff_grid(a, ratio)
    d1, d2 = _stencils(r)
    drift, react = _coefficients(r[1:-1], params)
    w = d2 + drift * d1
    w[1] -= react
    # row scaling by the local spacing product keeps entries O(1)
    scale = (r[1:-1] - r[:-2]) * (r[2:] - r[1:-1])
    w *= scale
    m = len(r) - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = w[2, :-1]
    ab[1] = w[1]
    ab[2, :-1] = w[0, 1:]
    rhs = np.zeros(m)
    rhs[0] -= w[0, 0] * a
    rhs[-1] -= w[2, -1] * 1.0
    inner = solve_banded((1, 1), ab, rhs)
    vals = np.concatenate([[a], inner, [1.0]])
    return RadialProfile(r, vals, "h", {"cutoff": a, "ratio": ratio})


def _common_values(p: RadialProfile, q: RadialProfile, lo: float, hi: float, ratio: float):
    """Values of ``p`` and ``q`` at the shared points ``ratio^-j`` in ``[lo, hi]``."""
    def keyed(prof):
        r, v = prof.grid[1:], prof.values[1:]
        sel = (r >= lo) & (r <= hi)
        j = np.rint(-np.log(r[sel]) / np.log(ratio)).astype(int)
        return dict(zip(j, v[sel]))
    kp, kq = keyed(p), keyed(q)
    common = sorted(kp.keys() & kq.keys())
    return np.array([kp[j] for j in common]), np.array([kq[j] for j in common])


def solve_h(params: ModeParams, ratio: float = 1.03, base: float = 2.0,
            tol: float = 1e-8, window=(1e-3, 1.0), max_levels: int = 80,
            max_refinements: int = 3, check_bounds: bool = True) -> RadialProfile:
    """Regular solution of ``L h = 0`` with ``h(0) = 0`` and ``h(1) = 1``.

    The cutoff ``a`` runs through ``base^-m``, m = 1, 2, ..., until two
    successive profiles differ by less than ``tol`` at every grid point of
    ``window``.  For ``k = 1`` and ``gamma > 1`` (normalised) the result is
    checked against the comparison functions ``r < h < r^alpha`` with a
    margin exceeding the discretisation error, estimated by re-solving on
    the grid with half the logarithmic spacing; the grid is refined up to
    ``max_refinements`` times before a :class:`BracketError` is raised.
    """
    if check_bounds and params.k == 1 and not params.gamma_hat > 1:
        raise DomainError("the profile bounds need mu*gamma > 1")
    q = ratio
    for _ in range(max_refinements + 1):
        h = _limit_profile(params, q, base, tol, window, max_levels)
        if not check_bounds or params.k != 1:
            return h
        fine = _limit_profile(params, np.sqrt(q), base, tol, window, max_levels)
        err = _grid_error(h, fine)
        bad = _bracket_violations(h, params.alpha, err)
        if len(bad) == 0:
            h.meta["discretisation_error"] = float(err.max())
            return h
        q = np.sqrt(q)
    raise BracketError(
        f"r < h < r^alpha fails at {len(bad)} grid points after {max_refinements} refinements",
        bad,
    )


def _grid_error(h: RadialProfile, fine: RadialProfile) -> np.ndarray:
    """|h - h_fine| at the points of ``h`` (interpolating ``fine`` near the
    cutoff, where the grids are not nested)."""
    lookup = dict(zip(np.round(np.log(fine.grid), 10), fine.values))
    out = np.empty_like(h.values)
    interp = None
    for i, (r, v) in enumerate(zip(h.grid, h.values)):
        key = np.round(np.log(r), 10)
        if key in lookup:
            out[i] = abs(v - lookup[key])
        else:
            if interp is None:
                interp = PchipInterpolator(fine.grid, fine.values)
            out[i] = abs(v - float(interp(r)))
    return out


def _bracket_violations(h: RadialProfile, alpha: float, err):
    r, v = h.grid[1:-1], h.values[1:-1]
    e = err[1:-1]
    lower_ok = v - r > e
    upper_ok = r ** alpha - v > e
    bad = ~(lower_ok & upper_ok)
    return np.c_[r[bad], v[bad]]


def _limit_profile(params, ratio, base, tol, window, max_levels) -> RadialProfile:
    lo, hi = window
    prev = None
    for m in range(1, max_levels + 1):
        a = base ** -m
        if a >= lo:
            continue
        cur = solve_cutoff(params, a, ratio)
        if prev is not None:
            v0, v1 = _common_values(prev, cur, lo, hi, ratio)
            diff = float(np.max(np.abs(v1 - v0)))
            if diff < tol:
                cur.meta.update(levels=m, last_change=diff, base=base)
                return cur
        prev = cur
    raise RuntimeError(f"cutoff sequence base={base} did not settle below {tol} in {max_levels} levels")


def subsolution_constant(n: int, gamma: float, safety: float = 1.01) -> float:
    """``c`` such that ``(r^alpha - (c sqrt(eps))^alpha)_+`` is a subsolution
    of ``L`` on ``r > c sqrt(eps)`` (``mu = 1``)."""
    _check_n(n)
    if not gamma > 1:
        raise DomainError(f"subsolution needs gamma > 1 (got {gamma}); alpha >= 1 otherwise")
    alpha = blowup_exponent(n, gamma, 1.0)
    return safety * float(np.sqrt((2 * alpha - 2 / gamma) / (n - 2 + 2 / gamma)))


def subsolution(r, params: ModeParams, c: float):
    alpha = params.alpha
    return np.maximum(np.asarray(r, float) ** alpha - (c * np.sqrt(params.eps_hat)) ** alpha, 0.0)


def h_lower_bound_check(h: RadialProfile, params: ModeParams, c: float):
    """``(ok, worst_margin)`` for ``h > (r^alpha - (c sqrt eps)^alpha)_+`` on
    the grid together with ``h(2c sqrt eps) > (2^alpha - 1) c^alpha eps^(alpha/2)``."""
    alpha = params.alpha
    eps = params.eps_hat
    margin = h.values - subsolution(h.grid, params, c)
    r_star = 2 * c * np.sqrt(eps)
    if not h.grid[0] <= r_star <= h.grid[-1]:
        raise ValueError(f"2c sqrt(eps) = {r_star} lies outside the profile grid")
    point = float(h(r_star)) - (2 ** alpha - 1) * c ** alpha * eps ** (alpha / 2)
    worst = float(min(margin.min(), point))
    return bool(np.all(margin > 0) and point > 0), worst


def coarse_residual(h: RadialProfile, params: ModeParams, window=(1e-2, 1.0)) -> float:
    """Max ``|L h|`` over ``window`` using every other grid point.

    On its own grid the profile solves the difference equations to
    round-off, so the residual is measured with the stencil of twice the
    spacing; it then tracks the truncation error of the scheme.
    """
    sub = RadialProfile(h.grid[::-1][::2][::-1], h.values[::-1][::2][::-1], h.kind)
    res = apply_L(sub, params)
    sel = (res.grid >= window[0]) & (res.grid <= window[1])
    return float(np.max(np.abs(res.values[sel])))


def profile_distance(p: RadialProfile, q: RadialProfile, window=(1e-3, 1.0)) -> float:
    """Max ``|p - q|`` over the grid points of either profile in ``window``."""
    lo, hi = window
    pts = np.union1d(p.grid, q.grid)
    pts = pts[(pts >= max(lo, p.grid[0], q.grid[0])) & (pts <= min(hi, p.grid[-1], q.grid[-1]))]
    return float(np.max(np.abs(p(pts) - q(pts))))

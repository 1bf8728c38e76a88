"""Acceptance criteria 1 to 10, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from robinneck import fem
from robinneck.geometry import Geometry, MeshParams
from robinneck.lab import analyze, parse_config, run_cell, run_sweep
from robinneck.mesh import generate_mesh, refine_uniform
from robinneck.reduced import (ModeParams, blowup_exponent, coarse_residual, h_lower_bound_check,
                               profile_distance, solve_h, subsolution_constant)

EPS = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
EPS_YAML = "[1.0e-2, 3.0e-3, 1.0e-3, 3.0e-4, 1.0e-4]"


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def sweep(gamma, phi):
    cfg = parse_config(f"physics: {{gamma: [{gamma}], eps: {EPS_YAML}, phi: '{phi}'}}\n")
    res = run_sweep(cfg)
    assert not res.failures, res.failures
    return res


@pytest.fixture(scope="module")
def sweep_x1():
    return sweep(2.0, "X1")


@pytest.fixture(scope="module")
def sweep_bounded():
    return sweep(0.5, "X1")


@pytest.fixture(scope="module")
def sweep_odd():
    return sweep(2.0, "X2")


@pytest.fixture(scope="module")
def sweep_small_gamma():
    return sweep(0.1, "LINEAR(0.1, 1.0)")


def ratio(values):
    v = np.asarray(values)
    return float(v.max() / v.min())


def test_criterion_1_neutrality():
    parts, ok = [], True
    for eps in (1e-2, 1e-3):
        mesh = generate_mesh(Geometry(radius=1.0, gap=eps))
        errs, worst_t = [], 0.0
        for m in (mesh, refine_uniform(mesh)):
            t0 = time.perf_counter()
            sol = fem.solve(fem.assemble(m, 1.0), lambda p: p[:, 0])
            worst_t = max(worst_t, time.perf_counter() - t0)
            x1 = m.vertices[:, 0]
            errs.append(np.abs(sol.nodal_values - x1).max() / np.abs(x1).max())
        factor = errs[0] / errs[1]
        ok &= errs[0] <= 5e-3 and factor >= 3 and worst_t <= 60
        parts.append(f"eps={eps:g}: err={errs[0]:.2e} factor={factor:.2f} t={worst_t:.1f}s")
    record(1, ok, "; ".join(parts))


def test_criterion_2_blowup_exponent(sweep_x1):
    fits = analyze(sweep_x1)
    s = fits["slopes"]["2.0"]
    drift = fits["sensitivity"]["2.0"]["drift"]
    pred = (np.sqrt(5) - 3) / 4
    ok = abs(s["slope"] - pred) <= 0.05 and drift < 0.03
    record(2, ok, f"slope={s['slope']:.5f} predicted={pred:.5f} drift={drift:.2e}")


def test_criterion_3_bounded_regime(sweep_bounded):
    neck = ratio([r.grad_max_neck for r in sweep_bounded])
    wide = ratio([r.extras["grad_max_wide"] for r in sweep_bounded])
    record(3, neck <= 2.0, f"max/min over the neck window={neck:.3f} "
                           f"(over Omega_R0/2: {wide:.3f}) limit 2")


def test_criterion_4_odd_data(sweep_odd):
    wide = ratio([r.extras["grad_max_wide"] for r in sweep_odd])
    record(4, wide <= 2.0, f"max/min over Omega_R0/2={wide:.4f} limit 2")


def test_criterion_5_small_gamma(sweep_small_gamma):
    wide = ratio([r.extras["grad_max_wide"] for r in sweep_small_gamma])
    neck = ratio([r.grad_max_neck for r in sweep_small_gamma])
    record(5, wide <= 2.0, f"max/min over Omega_R0/2={wide:.4f} limit 2 (neck window: {neck:.3f})")


def test_criterion_6_structural(sweep_x1, sweep_bounded, sweep_odd, sweep_small_gamma):
    recs = [r for s in (sweep_x1, sweep_bounded, sweep_odd, sweep_small_gamma) for r in s]
    checks = [r.extras["checks"] for r in recs]
    keys = ("overshoot_ok", "potentials_ok", "flux_ok", "energy_ok")
    failed = [k for k in keys if not all(c[k] for c in checks)]
    worst = max(c["overshoot"] for c in checks)
    gain = min(c["energy_min_gain"] for c in checks)
    record(6, not failed, f"{len(recs)} solves; failed={failed or 'none'} "
                          f"max overshoot={worst:.1e} min energy gain={gain:.2e}")


def test_criterion_7_oracle():
    geom = Geometry(gap=0.1)
    worst, n = 0.0, 0
    phi = lambda p: 0.3 * p[:, 0] + p[:, 1] + 0.2 * p[:, 0] * p[:, 1]
    for h_max in (1.0, 0.8):
        mesh = generate_mesh(geom, MeshParams(theta=0.5, h_max=h_max))
        for gamma in (0.1, 1.0, 2.0, 50.0):
            s = fem.assemble(mesh, gamma)
            assert s.n_free <= 300
            it = fem.solve(s, phi, method="cg").nodal_values
            dd = fem.solve(s, phi, method="direct").nodal_values
            worst = max(worst, np.linalg.norm(it - dd) / np.linalg.norm(dd))
            n += 1
    record(7, worst <= 1e-8, f"{n} systems; worst relative difference={worst:.1e}")


def test_criterion_8_ode_suite():
    t0 = time.perf_counter()
    bounds_ok, agree, orders = True, 0.0, []
    for n in (2, 3, 4):
        for gamma in (1.5, 2.0, 5.0, 50.0):
            for eps in (1e-2, 1e-3, 1e-4):
                p = ModeParams(n=n, gamma=gamma, eps=eps)
                h = solve_h(p)
                r, v = h.grid[1:-1], h.values[1:-1]
                bounds_ok &= bool(np.all(r < v) and np.all(v < r ** p.alpha))
                bounds_ok &= h_lower_bound_check(h, p, subsolution_constant(n, gamma))[0]
                h3 = solve_h(p, ratio=h.meta["ratio"], base=3.0, check_bounds=False)
                agree = max(agree, profile_distance(h, h3))
                qs = [1.06, 1.03, 1.015]
                res = [coarse_residual(solve_h(p, ratio=q, check_bounds=False), p) for q in qs]
                orders.append(np.polyfit(np.log(np.log(qs)), np.log(res), 1)[0])
    elapsed = time.perf_counter() - t0
    order_ok = 1.7 <= min(orders) and max(orders) <= 2.3
    ok = bounds_ok and agree <= 1e-6 and order_ok and elapsed <= 5.0
    record(8, ok, f"bounds={bounds_ok} agreement={agree:.1e} order={min(orders):.3f}..{max(orders):.3f} "
                  f"t={elapsed:.2f}s")


def test_criterion_9_profile():
    cfg = parse_config("physics: {gamma: [2.0], eps: [1.0e-3], phi: X1}\nanalysis: {profile: true}\n")
    prof = run_cell(cfg, 1e-3, 2.0).extras["profile"]
    lo, hi = prof["fit_range"]
    ok = prof["C1"] > 0 and prof["residual"] <= 0.1
    ok &= np.isclose(lo, 2 * np.sqrt(1e-3)) and np.isclose(hi, 0.125)
    record(9, ok, f"C1={prof['C1']:.4f} residual={prof['residual']:.1e} on [{lo:.4f}, {hi:.4f}]")


def test_criterion_10_exponent_algebra():
    worst_q = 0.0
    for n in range(2, 11):
        for gamma in np.geomspace(1e-3, 1e3, 25):
            for mu in (0.25, 1.0, 4.0):
                a = blowup_exponent(n, gamma, mu)
                c = n - 2 + 2 / (mu * gamma)
                worst_q = max(worst_q, abs(a * a + (n - 1) * a - c) / max(1.0, c))
    worst_one = max(abs(blowup_exponent(n, 1 / mu, mu) - 1) for n in range(2, 9)
                    for mu in (0.25, 1.0, 4.0))
    lim = np.array([blowup_exponent(3, 10.0 ** j) for j in range(9)]) - (np.sqrt(2) - 1)
    mono = bool(np.all(lim > 0) and np.all(np.diff(lim) < 0))
    ok = worst_q <= 1e-12 and worst_one <= 1e-12 and mono and lim[-1] < 1e-7
    record(10, ok, f"quadratic residual={worst_q:.1e} |alpha(1/mu)-1|={worst_one:.1e} "
                   f"monotone limit={mono} gap at gamma=1e8: {lim[-1]:.1e}")

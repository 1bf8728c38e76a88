"""Sweep the gap across two decades on both sides of the threshold
gamma = 1/mu and fit the neck-gradient slopes.

Run from the repository root (about 15 s)::

    python3 demos/blowup_sweep.py

The same run is available as ``robinneck sweep demos/blowup.yaml``.
"""
import os

from robinneck.lab import analyze, emit_report, parse_config, run_sweep

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "blowup.yaml"), encoding="utf-8") as fh:
    cfg = parse_config(fh.read())
records = run_sweep(cfg)
fits = analyze(records, cfg.mu)
for g, s in fits["slopes"].items():
    print(f"gamma={g}: alpha={s['alpha']:.4f} fitted slope {s['slope']:+.4f} "
          f"(predicted (alpha-1)/2 = {s['predicted_slope']:+.4f})")
for row in fits["dichotomy"]:
    print(f"gamma={row['gamma']}: {row['regime']}, max/min {row['ratio']:.2f}, "
          f"growth to the smallest gap {row['growth']:.2f}")
paths = emit_report(records, fits, cfg.output, records.failures)
print("wrote", ", ".join(sorted(paths.values())))

"""Flat-file output: ``sweep.csv``, ``summary.json`` and two SVG plots."""
from __future__ import annotations

import csv
import io
import json
import os
from xml.sax.saxutils import escape

import numpy as np

from .sweep import CSV_COLUMNS, SweepRecord

WIDTH, HEIGHT = 800, 600
_MARGIN = (80, 40, 40, 60)  # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])
    return buf.getvalue()


def records_from_csv(text: str) -> list[SweepRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
        raise ValueError(f"expected columns {', '.join(CSV_COLUMNS)}; got {reader.fieldnames}")
    out = []
    for lineno, row in enumerate(reader, 2):
        try:
            out.append(SweepRecord.from_row(row))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


class Series:
    def __init__(self, label, x, y, markers=False):
        self.label = label
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.markers = markers


def svg_plot(series, title="", xlabel="", ylabel="", logx=False, logy=False) -> str:
    """Line plot with one ``<polyline>`` per series in an 800x600 viewBox."""
    tx = np.log10 if logx else (lambda v: v)
    ty = np.log10 if logy else (lambda v: v)
    xs = [tx(s.x) for s in series if len(s.x)]
    ys = [ty(s.y) for s in series if len(s.y)]
    if xs:
        x0, x1 = float(min(a.min() for a in xs)), float(max(a.max() for a in xs))
        y0, y1 = float(min(a.min() for a in ys)), float(max(a.max() for a in ys))
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    L, R, T, B = _MARGIN
    pw, ph = WIDTH - L - R, HEIGHT - T - B

    def px(v):
        return L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return T + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{T - 12}" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<text x="{L + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="14">{escape(xlabel)}</text>',
        f'<text x="20" y="{T + ph / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 20 {T + ph / 2})">{escape(ylabel)}</text>',
    ]
    for v, anchor in ((x0, "start"), (x1, "end")):
        lab = f"1e{v:.2f}" if logx else f"{v:.3g}"
        out.append(f'<text x="{px(v):.1f}" y="{T + ph + 18}" text-anchor="{anchor}" font-size="11">{lab}</text>')
    for v in (y0, y1):
        lab = f"1e{v:.2f}" if logy else f"{v:.3g}"
        out.append(f'<text x="{L - 6}" y="{py(v):.1f}" text-anchor="end" font-size="11">{lab}</text>')
    for i, s in enumerate(series):
        col = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx(s.x), ty(s.y)))
        dash = ' stroke-dasharray="6,4"' if s.markers else ""
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5"{dash} points="{pts}">'
                   f'<title>{escape(s.label)}</title></polyline>')
        if s.markers:
            for a, b in zip(tx(s.x), ty(s.y)):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="4" fill="{col}"/>')
        out.append(f'<text x="{L + 10}" y="{T + 18 + 16 * i}" font-size="12" fill="{col}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def blowup_series(records, fits) -> list[Series]:
    series = []
    groups: dict = {}
    for r in records:
        groups.setdefault(r.gamma, []).append(r)
    for g, rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: r.eps)
        e = [r.eps for r in rs]
        series.append(Series(f"gamma={g:g}", e, [r.grad_max_neck for r in rs], markers=True))
        fit = (fits or {}).get("slopes", {}).get(repr(g), {})
        if "slope" in fit:
            ee = np.array(fit["eps_used"])
            series.append(Series(f"fit gamma={g:g}: slope {fit['slope']:.4f}", ee,
                                 np.exp(fit["intercept"]) * ee ** fit["slope"]))
    return series


def profile_series(records) -> list[Series]:
    series = []
    for r in records:
        p = r.extras.get("profile", {})
        if "C1" not in p:
            continue
        tag = f"eps={r.eps:g}, gamma={r.gamma:g}"
        series.append(Series(f"V ({tag})", p["r"], p["V"], markers=True))
        series.append(Series(f"C1 h, C1={p['C1']:.4g}", p["r"], p["C1"] * np.asarray(p["h"])))
    return series


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def emit_report(records, fits, outdir, failures=()) -> dict:
    """Write the four report files into ``outdir`` (overwriting) and return
    their paths."""
    records = list(records)
    if not records:
        raise ValueError("emit_report needs at least one record")
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {outdir!r}: {exc}") from exc
    if not os.access(outdir, os.W_OK):
        raise OSError(f"output directory {outdir!r} is not writable")
    paths = {k: os.path.join(outdir, k) for k in ("sweep.csv", "summary.json", "blowup.svg", "profile.svg")}
    cells = [
        {"eps": r.eps, "gamma": r.gamma,
         **{k: v for k, v in r.extras.items() if k != "profile"}}
        for r in records
    ]
    summary = {
        "columns": list(CSV_COLUMNS),
        "fits": fits or {},
        "checks": (fits or {}).get("checks", {}),
        "cells": cells,
        "failures": [vars(f) for f in failures],
    }
    files = {
        "sweep.csv": records_to_csv(records),
        "summary.json": json.dumps(_json_ready(summary), indent=2, sort_keys=True) + "\n",
        "blowup.svg": svg_plot(blowup_series(records, fits), "neck gradient maximum",
                               "eps", "max |grad u|", logx=True, logy=True),
        "profile.svg": svg_plot(profile_series(records), "odd gap-averaged mode",
                                "r", "V(r)"),
    }
    for name, text in files.items():
        with open(paths[name], "w", encoding="utf-8") as fh:
            fh.write(text)
    return paths

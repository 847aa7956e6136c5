"""Deterministic CSV tables, SVG line plots and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .asymptotics import AsymptoticResult
from .diagnostics import RatioReport
from .montecarlo import EstimateWithCI

__all__ = [
    "PSI_COLUMNS",
    "ASYMPTOTIC_COLUMNS",
    "RATIO_COLUMNS",
    "REPORT_COLUMNS",
    "csv_text",
    "psi_table",
    "emit_ratio_table",
    "report_table",
    "svg_plot",
    "sha256_file",
    "Emitter",
]

PSI_COLUMNS = ("x", "estimate", "std_err", "n_paths", "truncated_frac", "bridge_mode", "seed")
ASYMPTOTIC_COLUMNS = ("x", "H_c", "H_cstar", "F_I", "approx_mrv", "error_bound")
RATIO_COLUMNS = ("x", "psi_hat", "psi_se", "H", "ratio", "ratio_ci_lo", "ratio_ci_hi")
REPORT_COLUMNS = ("x", "numerator", "denominator", "ratio", "target", "verdict")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip form
    return str(getattr(v, "value", v))


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def psi_table(curve: Sequence[EstimateWithCI]) -> str:
    return csv_text(
        PSI_COLUMNS,
        ((e.x, e.estimate, e.std_err, e.n_paths, e.truncation_bound, e.bridge_mode, e.seed) for e in curve),
    )


def emit_ratio_table(psi_curve: Sequence[EstimateWithCI], H_curve: Sequence[AsymptoticResult], x_grid=None, z: float = 1.96) -> str:
    """``psi_hat / H`` with a delta-method interval.

    The half-width is ``z * se / H`` plus the relative quadrature error of
    ``H`` carried onto the ratio.  ``x_grid`` defaults to the grid of
    ``psi_curve``; a length mismatch is an error.
    """
    if len(psi_curve) == 0:
        raise ValueError("empty grid")
    if len(psi_curve) != len(H_curve):
        raise ValueError(f"grid mismatch: {len(psi_curve)} estimates, {len(H_curve)} H values")
    if x_grid is not None and not np.allclose([e.x for e in psi_curve], x_grid, rtol=1e-12, atol=0):
        raise ValueError("grid mismatch between estimates and x_grid")
    rows = []
    for e, h in zip(psi_curve, H_curve):
        if not h.value > 0:
            raise ValueError(f"H({e.x:g}) is not positive")
        ratio = e.estimate / h.value
        half = z * e.std_err / h.value + ratio * h.error_bound / h.value
        rows.append((e.x, e.estimate, e.std_err, h.value, ratio, ratio - half, ratio + half))
    return csv_text(RATIO_COLUMNS, rows)


def report_table(r: RatioReport) -> str:
    return csv_text(REPORT_COLUMNS, r.rows())


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def svg_plot(series: dict[str, tuple[Sequence[float], Sequence[float]]], title: str, xlabel: str = "x",
             ylabel: str = "", logx: bool = True, logy: bool = True) -> str:
    """A small standalone SVG line chart; non-positive points are dropped on log axes."""
    W, H, L, R, T, B = 640, 420, 70, 150, 40, 50
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = {}
    for name, (xs, ys) in series.items():
        keep = [(float(a), float(b)) for a, b in zip(xs, ys)
                if math.isfinite(a) and math.isfinite(b) and (a > 0 or not logx) and (b > 0 or not logy)]
        pts[name] = [(tx(a), ty(b)) for a, b in keep]
    allp = [p for v in pts.values() for p in v]
    if not allp:
        allp = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda v: L + (v - x0) / (x1 - x0) * (W - L - R)
    sy = lambda v: H - B - (v - y0) / (y1 - y0) * (H - T - B)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        xl = 10**xv if logx else xv
        yl = 10**yv if logy else yv
        out.append(f'<text x="{sx(xv):.1f}" y="{H - B + 16}" text-anchor="middle">{_fmt(xl)}</text>')
        out.append(f'<text x="{L - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{_fmt(yl)}</text>')
    out.append(f'<text x="{(L + W - R) / 2:.1f}" y="{H - 12}" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{(T + H - B) / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {(T + H - B) / 2:.1f})">{ylabel}</text>')
    for i, (name, p) in enumerate(pts.items()):
        col = colors[i % len(colors)]
        if p:
            path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in p)
            out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.8" points="{path}"/>')
            out.extend(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{col}"/>' for a, b in p)
        ly = T + 16 * i + 8
        out.append(f'<line x1="{W - R + 10}" y1="{ly}" x2="{W - R + 30}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{W - R + 34}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Emitter:
    """Collects output files in memory and writes them only on :meth:`flush`."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        if name in self.files:
            raise ValueError(f"duplicate output {name}")
        self.files[name] = text

    def flush(self, out_dir: Path, manifest: dict) -> dict:
        out_dir.mkdir(parents=True, exist_ok=True)
        hashes = {}
        for name in sorted(self.files):
            path = out_dir / name
            path.write_bytes(self.files[name].encode("utf-8"))
            hashes[name] = sha256_file(path)
        manifest = dict(manifest, files=hashes)
        manifest["outputs_digest"] = hashlib.sha256(json.dumps(hashes, sort_keys=True).encode()).hexdigest()
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return manifest

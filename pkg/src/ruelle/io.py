"""Artifact writers: CSV tables, minimal SVG plots and run metadata."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(v) -> str:
    """17 significant digits for floats, so that values round-trip exactly."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{fmt(v.real)}{'+' if v.imag >= 0 or math.isnan(v.imag) else '-'}{fmt(abs(v.imag))}j"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def environment_versions() -> dict:
    import scipy

    from . import __version__
    return {"ruelle": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# ---------------------------------------------------------------------------
# SVG


class SvgPlot:
    """Scatter and line primitives on linear axes, written as a standalone SVG."""

    def __init__(self, width: int = 640, height: int = 480, margin: int = 60, title: str = "",
                 xlabel: str = "", ylabel: str = ""):
        self.w, self.h, self.m = width, height, margin
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items: list[tuple] = []

    def scatter(self, x, y, color="#1f77b4", r=2.0):
        self.items.append(("scatter", np.asarray(x, float), np.asarray(y, float), color, r))
        return self

    def line(self, x, y, color="#d62728", width=1.5, dash=None):
        self.items.append(("line", np.asarray(x, float), np.asarray(y, float), color, width, dash))
        return self

    def vline(self, x0, color="#555555", dash="6,4"):
        self.items.append(("vline", float(x0), color, dash))
        return self

    def _limits(self):
        xs = [it[1] for it in self.items if it[0] != "vline"] + [np.array([it[1]]) for it in self.items
                                                                  if it[0] == "vline"]
        ys = [it[2] for it in self.items if it[0] != "vline"]
        x = np.concatenate(xs) if xs else np.array([0.0, 1.0])
        y = np.concatenate(ys) if ys else np.array([0.0, 1.0])
        x, y = x[np.isfinite(x)], y[np.isfinite(y)]
        x0, x1 = (x.min(), x.max()) if x.size else (0.0, 1.0)
        y0, y1 = (y.min(), y.max()) if y.size else (0.0, 1.0)
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        px, py = 0.03 * (x1 - x0), 0.03 * (y1 - y0)
        return x0 - px, x1 + px, y0 - py, y1 + py

    def render(self) -> str:
        x0, x1, y0, y1 = self._limits()
        m, W, H = self.m, self.w, self.h

        def X(v):
            return m + (np.asarray(v) - x0) / (x1 - x0) * (W - 2 * m)

        def Y(v):
            return H - m - (np.asarray(v) - y0) / (y1 - y0) * (H - 2 * m)

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{m}" y="{m}" width="{W - 2 * m}" height="{H - 2 * m}" fill="none" stroke="black"/>']
        for k in range(5):
            tx = x0 + (x1 - x0) * k / 4
            ty = y0 + (y1 - y0) * k / 4
            out.append(f'<text x="{X(tx):.1f}" y="{H - m + 16}" font-size="11" text-anchor="middle">{tx:.3g}</text>')
            out.append(f'<text x="{m - 6}" y="{Y(ty) + 4:.1f}" font-size="11" text-anchor="end">{ty:.3g}</text>')
        for it in self.items:
            if it[0] == "scatter":
                _, x, y, c, r = it
                ok = np.isfinite(x) & np.isfinite(y)
                out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{r}" fill="{c}"/>' for a, b in zip(X(x[ok]), Y(y[ok]))]
            elif it[0] == "line":
                _, x, y, c, wd, dash = it
                ok = np.isfinite(x) & np.isfinite(y)
                pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(X(x[ok]), Y(y[ok])))
                d = f' stroke-dasharray="{dash}"' if dash else ""
                out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="{wd}"{d}/>')
            else:
                _, xv, c, dash = it
                out.append(f'<line x1="{X(xv):.2f}" y1="{m}" x2="{X(xv):.2f}" y2="{H - m}" stroke="{c}" '
                           f'stroke-dasharray="{dash}"/>')
        if self.title:
            out.append(f'<text x="{W / 2}" y="{m / 2}" font-size="14" text-anchor="middle">{_esc(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{W / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{_esc(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="14" y="{H / 2}" font-size="12" text-anchor="middle" '
                       f'transform="rotate(-90 14 {H / 2})">{_esc(self.ylabel)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render())
        return path


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")

"""Artifact writers for experiment runs.

CSV tables are the interface of record: each one starts with a comment line
recording the configuration hash and the tolerances in force, followed by a
header row. JSON summaries go through orjson; SVG line plots are written by a
small self-contained renderer.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import pandas as pd

from desitter_kg.src.settings import settings
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

FLOAT_FORMAT = "%.12e"
JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY

_SVG_WIDTH = 640
_SVG_HEIGHT = 400
_SVG_MARGIN = 56
_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _default(value: Any) -> Any:
    """orjson fallback for complex numbers and numpy scalars."""
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(payload: Any) -> bytes:
    """Serialize with sorted keys and no whitespace."""
    return orjson.dumps(payload, default=_default, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)


def config_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    return hashlib.sha256(canonical_json(payload)).hexdigest()


def _provenance_line(cfg_hash: str, tolerances: dict[str, float]) -> str:
    tol = ";".join(f"{key}={tolerances[key]:g}" for key in sorted(tolerances))
    return f"# config_hash={cfg_hash} tolerances={tol or 'none'}\n"


def write_csv(
    frame: pd.DataFrame, path: Path, cfg_hash: str, tolerances: dict[str, float]
) -> Path:
    """Write a table with a provenance comment line and a header row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    path.write_text(_provenance_line(cfg_hash, tolerances) + body, encoding="utf-8")
    logger.info("Wrote table", path=str(path), rows=len(frame))
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Read a table written by :func:`write_csv`."""
    return pd.read_csv(path, comment="#")


def write_json(payload: Any, path: Path) -> Path:
    """Write a JSON document with sorted keys; NaN becomes null."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, default=_default, option=JSON_OPTIONS) + b"\n")
    logger.info("Wrote summary", path=str(path))
    return path


@dataclass
class LineSeries:
    """One polyline of a plot."""

    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


@dataclass
class LinePlot:
    """A titled set of line series sharing axes."""

    title: str
    xlabel: str
    ylabel: str
    series: list[LineSeries] = field(default_factory=list)
    logy: bool = False

    def add(self, label: str, x: Sequence[float], y: Sequence[float], dashed: bool = False) -> "LinePlot":
        self.series.append(LineSeries(label, np.asarray(x, dtype=float), np.asarray(y, dtype=float), dashed))
        return self


def _finite_points(plot: LinePlot) -> list[tuple[np.ndarray, np.ndarray]]:
    points = []
    for s in plot.series:
        y = np.log10(s.y) if plot.logy else s.y
        with np.errstate(invalid="ignore"):
            mask = np.isfinite(s.x) & np.isfinite(y)
        points.append((s.x[mask], y[mask]))
    return points


def _span(values: list[np.ndarray]) -> tuple[float, float]:
    joined = np.concatenate(values) if values else np.array([])
    if joined.size == 0:
        return 0.0, 1.0
    lo, hi = float(joined.min()), float(joined.max())
    if hi - lo < 1e-300:
        pad = max(abs(lo), 1.0) * 0.5
        return lo - pad, hi + pad
    return lo, hi


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_svg(plot: LinePlot) -> str:
    """Render a line plot as a standalone SVG document."""
    points = _finite_points(plot)
    x_lo, x_hi = _span([p[0] for p in points])
    y_lo, y_hi = _span([p[1] for p in points])
    inner_w = _SVG_WIDTH - 2 * _SVG_MARGIN
    inner_h = _SVG_HEIGHT - 2 * _SVG_MARGIN

    def sx(x: float) -> float:
        return _SVG_MARGIN + (x - x_lo) / (x_hi - x_lo) * inner_w

    def sy(y: float) -> float:
        return _SVG_HEIGHT - _SVG_MARGIN - (y - y_lo) / (y_hi - y_lo) * inner_h

    y_tick = (lambda v: f"1e{v:.2f}") if plot.logy else (lambda v: f"{v:.4g}")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" '
        f'viewBox="0 0 {_SVG_WIDTH} {_SVG_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_SVG_WIDTH}" height="{_SVG_HEIGHT}" fill="white"/>',
        f'<text x="{_SVG_WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="15">{_escape(plot.title)}</text>',
        f'<rect x="{_SVG_MARGIN}" y="{_SVG_MARGIN}" width="{inner_w}" height="{inner_h}" '
        'fill="none" stroke="#444"/>',
        f'<text x="{_SVG_WIDTH / 2:.1f}" y="{_SVG_HEIGHT - 12}" text-anchor="middle">{_escape(plot.xlabel)}</text>',
        f'<text x="14" y="{_SVG_HEIGHT / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_SVG_HEIGHT / 2:.1f})">{_escape(plot.ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{_SVG_HEIGHT - _SVG_MARGIN + 16}" text-anchor="middle">{xv:.4g}</text>'
        )
        parts.append(
            f'<text x="{_SVG_MARGIN - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{y_tick(yv)}</text>'
        )
    for i, (s, (x, y)) in enumerate(zip(plot.series, points, strict=True)):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        if x.size:
            coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y, strict=True))
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>')
        legend_y = _SVG_MARGIN + 16 + 16 * i
        parts.append(
            f'<line x1="{_SVG_WIDTH - _SVG_MARGIN - 150}" y1="{legend_y - 4}" '
            f'x2="{_SVG_WIDTH - _SVG_MARGIN - 130}" y2="{legend_y - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_SVG_WIDTH - _SVG_MARGIN - 124}" y="{legend_y}">{_escape(s.label)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(plot: LinePlot, path: Path) -> Path:
    """Write a line plot to disk."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(plot), encoding="utf-8")
    logger.info("Wrote plot", path=str(path), series=len(plot.series))
    return path

"""Minimal static SVG line plots.

Output is a pure function of the input (fixed number formatting, no
timestamps), so figures can be diffed byte for byte.  Each panel ``<g>``
carries its geometry and data window as ``data-*`` attributes; pixel
coordinates map back to data with :func:`pixel_to_data`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from ..costsim import DomainError

PANEL_W, PANEL_H = 360, 260
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 62, 14, 28, 44
COLORS = ("#4682b4", "#d62728", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass(frozen=True)
class Axes:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def _transform(values, log, what):
    v = np.asarray(values, dtype=float)
    if log:
        if np.any(v <= 0):
            raise DomainError(f"log {what} axis received a non-positive value")
        return np.log10(v)
    return v


def _window(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, log):
    if log:
        a, b = math.ceil(lo), math.floor(hi)
        if b - a >= 1:
            step = max(1, (b - a) // 6 + 1)
            return [float(k) for k in range(a, b + 1, step)]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 and len(out) < 12:
        out.append(round(v, 12))
        v += step
    return out


def pixel_to_data(px, py, panel_attrs):
    """Invert the panel map for one point, given the panel's ``data-*`` attributes."""
    x0, y0 = float(panel_attrs["data-x0"]), float(panel_attrs["data-y0"])
    w, h = float(panel_attrs["data-w"]), float(panel_attrs["data-h"])
    xlo, xhi = float(panel_attrs["data-xlo"]), float(panel_attrs["data-xhi"])
    ylo, yhi = float(panel_attrs["data-ylo"]), float(panel_attrs["data-yhi"])
    tx = xlo + (px - x0) / w * (xhi - xlo)
    ty = ylo + (y0 + h - py) / h * (yhi - ylo)
    if panel_attrs.get("data-logx") == "1":
        tx = 10**tx
    if panel_attrs.get("data-logy") == "1":
        ty = 10**ty
    return tx, ty


def _panel(series: Dict[str, Tuple[Sequence[float], Sequence[float]]], axes: Axes, ox: float, oy: float) -> List[str]:
    if not series:
        raise DomainError("no series to plot")
    tx = {k: _transform(v[0], axes.logx, "x") for k, v in series.items()}
    ty = {k: _transform(v[1], axes.logy, "y") for k, v in series.items()}
    for k in series:
        if tx[k].size == 0 or tx[k].size != ty[k].size:
            raise DomainError(f"series {k!r} is empty or ragged")
    xlo, xhi = _window(np.concatenate(list(tx.values())))
    ylo, yhi = _window(np.concatenate(list(ty.values())))
    x0, y0 = ox + MARGIN_L, oy + MARGIN_T
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * w

    def py(v):
        return y0 + h - (v - ylo) / (yhi - ylo) * h

    attrs = (
        f'data-x0="{_fmt(x0)}" data-y0="{_fmt(y0)}" data-w="{_fmt(w)}" data-h="{_fmt(h)}" '
        f'data-xlo="{xlo!r}" data-xhi="{xhi!r}" data-ylo="{ylo!r}" data-yhi="{yhi!r}" '
        f'data-logx="{int(axes.logx)}" data-logy="{int(axes.logy)}"'
    )
    out = [f'<g class="panel" {attrs}>']
    out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" fill="none" stroke="#333"/>')
    for t in _ticks(xlo, xhi, axes.logx):
        X = px(t)
        lab = _tick_label(10**t if axes.logx else t)
        out.append(f'<line x1="{_fmt(X)}" y1="{_fmt(y0 + h)}" x2="{_fmt(X)}" y2="{_fmt(y0 + h + 4)}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(X)}" y="{_fmt(y0 + h + 16)}" font-size="10" text-anchor="middle">{escape(lab)}</text>')
    for t in _ticks(ylo, yhi, axes.logy):
        Y = py(t)
        lab = _tick_label(10**t if axes.logy else t)
        out.append(f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(Y)}" x2="{_fmt(x0)}" y2="{_fmt(Y)}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(Y + 3)}" font-size="10" text-anchor="end">{escape(lab)}</text>')
    if axes.title:
        out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(oy + 16)}" font-size="12" text-anchor="middle">{escape(axes.title)}</text>')
    if axes.xlabel:
        out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 + h + 34)}" font-size="11" text-anchor="middle">{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        cx, cy = ox + 14, y0 + h / 2
        out.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" font-size="11" text-anchor="middle" '
            f'transform="rotate(-90 {_fmt(cx)} {_fmt(cy)})">{escape(axes.ylabel)}</text>'
        )
    for i, name in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(tx[name], ty[name]))
        label = escape(name, {'"': "&quot;"})
        if tx[name].size >= 2:
            out.append(f'<polyline data-series="{label}" points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            a, b = tx[name][0], ty[name][0]
            out.append(f'<circle data-series="{label}" cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="{color}"/>')
        out.append(
            f'<text x="{_fmt(x0 + w - 4)}" y="{_fmt(y0 + 12 + 12 * i)}" font-size="10" '
            f'text-anchor="end" fill="{color}">{label}</text>'
        )
    out.append("</g>")
    return out


def emit_svg_figure(path, panels, columns: int = 2) -> None:
    """Write a grid of panels; ``panels`` is a list of ``(series, Axes)``."""
    if not panels:
        raise DomainError("no panels")
    cols = min(columns, len(panels))
    rows = math.ceil(len(panels) / cols)
    body = []
    for k, (series, axes) in enumerate(panels):
        body.extend(_panel(series, axes, (k % cols) * PANEL_W, (k // cols) * PANEL_H))
    W, H = cols * PANEL_W, rows * PANEL_H
    text = "\n".join(
        ['<?xml version="1.0" encoding="UTF-8"?>',
         f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
         f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
        + body
        + ["</svg>", ""]
    )
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write SVG to {path}: {exc}") from exc


def emit_svg_plot(path, series, axes: Axes = Axes()) -> None:
    """Single-panel plot of named ``(xs, ys)`` series."""
    emit_svg_figure(path, [(series, axes)], columns=1)

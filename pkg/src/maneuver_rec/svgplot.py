"""Dependency-free SVG rendering for heatmaps and training curves.

Output is deterministic text: fixed-decimal coordinates, no timestamps,
no randomness, so identical inputs produce byte-identical files.  Cell
colors use a single-hue ramp; recall/precision cells are shaded on the
absolute [0, 1] scale while confusion cells are shaded relative to the
largest count.  Rows or columns without support are hatched and marked
"n/a" instead of being shaded as measured zeros.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DataError
from .training import TrainingHistory

_CELL = 56.0
_CHAR_W = 7.2
_FONT = "font-family=\"Helvetica, Arial, sans-serif\""

_KIND_TITLES = {
    "confusion": "confusion matrix",
    "recall": "recall heatmap",
    "precision": "precision heatmap",
}

_HATCH = (
    "<defs><pattern id=\"na\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
    "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#f4f4f4\"/>"
    "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#c0c0c0\" stroke-width=\"2\"/>"
    "</pattern></defs>"
)


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _num(x: float) -> str:
    return f"{x:.2f}"


def _ramp(t: float) -> str:
    """White to deep blue, t clamped to [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    r = round(255 + (27 - 255) * t)
    g = round(255 + (79 - 255) * t)
    b = round(255 + (138 - 255) * t)
    return f"#{r:02x}{g:02x}{b:02x}"


def _text(x: float, y: float, s: str, *, size: int = 12, anchor: str = "middle",
          fill: str = "#1a1a1a", transform: str | None = None) -> str:
    tr = f" transform=\"{transform}\"" if transform else ""
    return (
        f"<text x=\"{_num(x)}\" y=\"{_num(y)}\" font-size=\"{size}\" "
        f"text-anchor=\"{anchor}\" fill=\"{fill}\"{tr}>{_esc(s)}</text>"
    )


def render_heatmap(
    matrix: np.ndarray,
    labels: Sequence[str],
    kind: str,
    out_path,
) -> None:
    """Write an annotated heatmap SVG; kind is confusion|recall|precision."""
    if kind not in _KIND_TITLES:
        raise DataError(f"unknown heatmap kind {kind!r}; expected confusion, recall, or precision")
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = [str(l) for l in labels]
    k = len(labels)
    if matrix.shape != (k, k):
        raise DataError(f"matrix shape {matrix.shape} does not match {k} labels")
    if not np.isfinite(matrix).all():
        raise DataError("heatmap values must be finite")

    label_px = math.ceil(max(len(l) for l in labels) * _CHAR_W) if labels else 0
    title_h = 30.0
    margin_left = 26.0 + label_px + 10.0
    grid_w = k * _CELL
    grid_bottom = title_h + k * _CELL
    col_label_h = math.ceil(label_px * 0.7071) + 16.0
    caption_h = 22.0
    width = margin_left + grid_w + math.ceil(label_px * 0.7071) + 12.0
    height = grid_bottom + col_label_h + caption_h + 8.0

    # shading scale: absolute for the normalized kinds, relative for counts
    if kind == "confusion":
        vmax = float(matrix.max())
        scale = vmax if vmax > 0 else 1.0
    else:
        scale = 1.0
    row_zero = matrix.sum(axis=1) == 0.0
    col_zero = matrix.sum(axis=0) == 0.0

    parts = [
        f"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{_num(width)}\" "
        f"height=\"{_num(height)}\" viewBox=\"0 0 {_num(width)} {_num(height)}\" {_FONT}>",
        _HATCH,
        f"<rect width=\"{_num(width)}\" height=\"{_num(height)}\" fill=\"#ffffff\"/>",
        _text(margin_left + grid_w / 2, 19, _KIND_TITLES[kind], size=14),
    ]
    for i in range(k):
        for j in range(k):
            x = margin_left + j * _CELL
            y = title_h + i * _CELL
            na = (kind == "recall" and row_zero[i]) or (kind == "precision" and col_zero[j])
            if na:
                fill = "url(#na)"
                note = "n/a"
                text_fill = "#808080"
            else:
                t = matrix[i, j] / scale
                fill = _ramp(t)
                note = f"{matrix[i, j]:.2f}"
                text_fill = "#ffffff" if t > 0.55 else "#1a1a1a"
            parts.append(
                f"<rect x=\"{_num(x)}\" y=\"{_num(y)}\" width=\"{_num(_CELL)}\" "
                f"height=\"{_num(_CELL)}\" fill=\"{fill}\" stroke=\"#ffffff\" stroke-width=\"1\"/>"
            )
            parts.append(_text(x + _CELL / 2, y + _CELL / 2 + 4, note, fill=text_fill))
    for i, label in enumerate(labels):
        parts.append(
            _text(margin_left - 6, title_h + i * _CELL + _CELL / 2 + 4, label, anchor="end")
        )
    for j, label in enumerate(labels):
        cx = margin_left + j * _CELL + _CELL / 2
        cy = grid_bottom + 14
        parts.append(
            _text(cx, cy, label, anchor="start",
                  transform=f"rotate(45 {_num(cx)} {_num(cy)})")
        )
    axis_y = title_h + k * _CELL / 2
    parts.append(
        _text(14, axis_y, "actual", size=13,
              transform=f"rotate(-90 {_num(14.0)} {_num(axis_y)})")
    )
    parts.append(
        _text(margin_left + grid_w / 2, grid_bottom + col_label_h + 12, "predicted", size=13)
    )
    parts.append("</svg>")
    with open(out_path, "wb") as fh:
        fh.write("\n".join(parts).encode("utf-8"))


def _tick_values(lo: float, hi: float, n: int) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _x_position(epoch: int, first: int, last: int, left: float, w: float) -> float:
    if last == first:
        return left + w / 2
    return left + (epoch - first) / (last - first) * w


def _polyline(points: list[tuple[float, float]], color: str) -> str:
    coords = " ".join(f"{_num(x)},{_num(y)}" for x, y in points)
    return (
        f"<polyline points=\"{coords}\" fill=\"none\" stroke=\"{color}\" "
        f"stroke-width=\"1.5\"/>"
    )


def _markers(points: list[tuple[float, float]], color: str) -> str:
    return "".join(
        f"<circle cx=\"{_num(x)}\" cy=\"{_num(y)}\" r=\"2.2\" fill=\"{color}\"/>"
        for x, y in points
    )


def render_training_curves(history: TrainingHistory, out_path) -> None:
    """Two stacked charts over epochs: losses, then validation accuracy."""
    records = list(history)
    if not records:
        raise DataError("cannot render curves for an empty history")
    epochs = [r.epoch for r in records]
    first, last = epochs[0], epochs[-1]

    left, right = 64.0, 16.0
    chart_w, chart_h = 520.0, 160.0
    title_h, gap, bottom = 26.0, 34.0, 34.0
    width = left + chart_w + right
    height = 2 * (title_h + chart_h) + gap + bottom

    loss_vals = [r.train_loss for r in records] + [r.val_loss for r in records]
    loss_hi = max(loss_vals) * 1.05 if max(loss_vals) > 0 else 1.0

    parts = [
        f"<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{_num(width)}\" "
        f"height=\"{_num(height)}\" viewBox=\"0 0 {_num(width)} {_num(height)}\" {_FONT}>",
        f"<rect width=\"{_num(width)}\" height=\"{_num(height)}\" fill=\"#ffffff\"/>",
    ]

    def chart(top: float, title: str, y_lo: float, y_hi: float,
              series: list[tuple[str, str, list[float]]], fmt: str) -> None:
        parts.append(_text(left + chart_w / 2, top - 8, title, size=13))
        parts.append(
            f"<rect x=\"{_num(left)}\" y=\"{_num(top)}\" width=\"{_num(chart_w)}\" "
            f"height=\"{_num(chart_h)}\" fill=\"none\" stroke=\"#cccccc\"/>"
        )
        for tv in _tick_values(y_lo, y_hi, 5):
            y = top + chart_h - (tv - y_lo) / (y_hi - y_lo) * chart_h
            parts.append(
                f"<line x1=\"{_num(left)}\" y1=\"{_num(y)}\" x2=\"{_num(left + chart_w)}\" "
                f"y2=\"{_num(y)}\" stroke=\"#eeeeee\"/>"
            )
            parts.append(_text(left - 6, y + 4, format(tv, fmt), size=10, anchor="end"))
        idxs = np.unique(np.linspace(first, last, min(len(epochs), 8)).round().astype(int))
        for e in idxs:
            x = _x_position(int(e), first, last, left, chart_w)
            parts.append(_text(x, top + chart_h + 14, str(int(e)), size=10))
        for name, color, values in series:
            pts = [
                (
                    _x_position(r.epoch, first, last, left, chart_w),
                    top + chart_h - (v - y_lo) / (y_hi - y_lo) * chart_h,
                )
                for r, v in zip(records, values)
            ]
            if len(pts) > 1:
                parts.append(_polyline(pts, color))
            parts.append(_markers(pts, color))
        legend_x = left + chart_w - 10
        for li, (name, color, _) in enumerate(series):
            y = top + 14 + 14 * li
            parts.append(
                f"<line x1=\"{_num(legend_x - 86)}\" y1=\"{_num(y - 4)}\" "
                f"x2=\"{_num(legend_x - 66)}\" y2=\"{_num(y - 4)}\" stroke=\"{color}\" "
                f"stroke-width=\"2\"/>"
            )
            parts.append(_text(legend_x - 62, y, name, size=10, anchor="start"))

    top1 = title_h
    chart(
        top1,
        "loss per epoch",
        0.0,
        loss_hi,
        [
            ("train loss", "#b2533e", [r.train_loss for r in records]),
            ("val loss", "#1b4f8a", [r.val_loss for r in records]),
        ],
        ".3f",
    )
    top2 = title_h + chart_h + gap + title_h
    chart(
        top2,
        "validation accuracy per epoch",
        0.0,
        1.0,
        [("val accuracy", "#1b4f8a", [r.val_accuracy for r in records])],
        ".2f",
    )
    parts.append(_text(left + chart_w / 2, height - 8, "epoch", size=11))
    parts.append("</svg>")
    with open(out_path, "wb") as fh:
        fh.write("\n".join(parts).encode("utf-8"))

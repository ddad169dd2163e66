"""File writers for the command-line front end.

CSV uses a header row, LF line endings, and shortest round-trip float
formatting.  SVG output is plain SVG 1.1 with polylines only.  Heatmaps are
binary P6 pixmaps with a text sidecar recording the value-to-color mapping.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .expr import fmt_float
from .region import Boundary2D, GridField


def csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    def cell(v):
        if isinstance(v, float):
            return fmt_float(v)
        return str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_text(path: str, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def boundary_csv(b: Boundary2D) -> str:
    rows = []
    for pid, poly in enumerate(b.polylines):
        for vid, (x, y) in enumerate(poly):
            rows.append((pid, vid, x, y))
    return csv_text(["polyline_id", "vertex_id", "x", "y"], rows)


def boundary_svg(b: Boundary2D, box, width: int = 720, height: int = 540) -> str:
    """Zero contour as black polylines on a white canvas, y axis upward."""
    (_, xlo, xhi), (_, ylo, yhi) = box

    def px(x):
        return (x - xlo) / (xhi - xlo) * width

    def py(y):
        return height - (y - ylo) / (yhi - ylo) * height

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]
    for poly in b.polylines:
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in poly)
        parts.append(
            f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# Diverging palette anchored at R = 0 (white), so the region boundary is
# visually exact: positive values fade to red, negative to blue.
_POS_END = (178, 24, 43)
_NEG_END = (33, 102, 172)
_ZERO = (255, 255, 255)


def heatmap_ppm(field: GridField) -> bytes:
    """Binary P6 pixmap of the field, row 0 at the top (highest y)."""
    vals = field.values[::-1]
    vmax = float(vals.max())
    vmin = float(vals.min())
    pos = np.clip(vals / (vmax if vmax > 0 else 1.0), 0.0, 1.0)
    neg = np.clip(-vals / (-vmin if vmin < 0 else 1.0), 0.0, 1.0)
    feas = vals >= 0
    rgb = np.empty((field.ny, field.nx, 3), dtype=np.uint8)
    for c in range(3):
        chan = np.where(
            feas,
            _ZERO[c] + (_POS_END[c] - _ZERO[c]) * pos,
            _ZERO[c] + (_NEG_END[c] - _ZERO[c]) * neg,
        )
        rgb[:, :, c] = np.rint(chan).astype(np.uint8)
    header = f"P6\n{field.nx} {field.ny}\n255\n".encode()
    return header + rgb.tobytes()


def heatmap_sidecar(field: GridField) -> str:
    vals = field.values
    return "\n".join(
        [
            "heatmap value-to-color mapping",
            f"x: {field.x_name} in [{fmt_float(field.x_range[0])}, {fmt_float(field.x_range[1])}], {field.nx} columns",
            f"y: {field.y_name} in [{fmt_float(field.y_range[0])}, {fmt_float(field.y_range[1])}], {field.ny} rows",
            "row order: row 0 is the top of the image (highest y)",
            f"value_min: {fmt_float(float(vals.min()))}",
            f"value_max: {fmt_float(float(vals.max()))}",
            f"palette: diverging, linear per side; 0 -> rgb{_ZERO},"
            f" value_max -> rgb{_POS_END}, value_min -> rgb{_NEG_END}",
        ]
    ) + "\n"


def write_ppm(path: str, field: GridField):
    with open(path, "wb") as fh:
        fh.write(heatmap_ppm(field))
    write_text(path + ".txt", heatmap_sidecar(field))

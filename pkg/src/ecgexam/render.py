"""Standard 12-lead image rendering at clinical scaling.

25 mm/s, 10 mm/mV on a millimeter grid.  Two layouts: the usual 3x4 grid
with a lead-II rhythm strip, and 12 stacked full-length rows.  SVG output
is built directly as text and PNG via a pixel rasterizer, so both are a
pure function of (record, layout).
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw

from .errors import RenderError
from .leads import LEADS
from .records import EcgRecord

MM_PER_S = 25.0
MM_PER_MV = 10.0
PX_PER_MM = 4

MARGIN_MM = 10.0
GRID_ROW_MM = 35.0
STACK_ROW_MM = 22.0

LAYOUTS = ("grid-3x4-plus-rhythm", "stacked-12")

_GRID_LEADS = (
    ("I", "aVR", "V1", "V4"),
    ("II", "aVL", "V2", "V5"),
    ("III", "aVF", "V3", "V6"),
)

_MINOR = (246, 204, 201)
_MAJOR = (237, 160, 155)
_TRACE = (20, 20, 20)


def trace_width_px(record: EcgRecord) -> int:
    """Plotted width of the full-duration trace in pixels."""
    return round(record.duration_s * MM_PER_S * PX_PER_MM)


def _mm(v: float) -> float:
    return v * PX_PER_MM


def _geometry(record: EcgRecord, layout: str):
    if layout == "grid-3x4-plus-rhythm":
        width_mm = 2 * MARGIN_MM + record.duration_s * MM_PER_S
        height_mm = 2 * MARGIN_MM + 4 * GRID_ROW_MM
    elif layout == "stacked-12":
        width_mm = 2 * MARGIN_MM + record.duration_s * MM_PER_S
        height_mm = 2 * MARGIN_MM + 12 * STACK_ROW_MM
    else:
        raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    return round(_mm(width_mm)), round(_mm(height_mm))


def _cells(record: EcgRecord, layout: str):
    """Yield (lead, x0_px, baseline_y_px, t0_s, t1_s) for every trace cell."""
    duration = record.duration_s
    x0 = _mm(MARGIN_MM)
    if layout == "grid-3x4-plus-rhythm":
        col_s = duration / 4.0
        for r, row in enumerate(_GRID_LEADS):
            base = _mm(MARGIN_MM + r * GRID_ROW_MM + GRID_ROW_MM / 2.0)
            for c, lead in enumerate(row):
                yield lead, x0 + _mm(c * col_s * MM_PER_S), base, c * col_s, (c + 1) * col_s
        base = _mm(MARGIN_MM + 3 * GRID_ROW_MM + GRID_ROW_MM / 2.0)
        yield "II", x0, base, 0.0, duration
    else:
        for r, lead in enumerate(LEADS):
            base = _mm(MARGIN_MM + r * STACK_ROW_MM + STACK_ROW_MM / 2.0)
            yield lead, x0, base, 0.0, duration


def _trace_points(record: EcgRecord, lead: str, x0: float, base: float, t0: float, t1: float):
    fs = record.sampling_rate
    i0, i1 = round(t0 * fs), min(round(t1 * fs), record.n_samples)
    x = record.lead_signal(lead)[i0:i1]
    times = (np.arange(i0, i1) / fs) - t0
    xs = x0 + times * MM_PER_S * PX_PER_MM
    ys = base - x.astype(np.float64) * MM_PER_MV * PX_PER_MM
    return xs, ys


def render_ecg_image(record: EcgRecord, layout: str = "grid-3x4-plus-rhythm",
                     fmt: str = "svg") -> bytes:
    """Render a record to SVG or PNG bytes at clinical scaling."""
    if record.n_samples == 0 or record.duration_s <= 0:
        raise RenderError("cannot render a zero-duration record")
    if fmt == "svg":
        return _render_svg(record, layout)
    if fmt == "png":
        return _render_png(record, layout)
    raise ValueError(f"unknown format {fmt!r}; expected 'svg' or 'png'")


def _grid_lines(width: int, height: int):
    minor, major = [], []
    step = PX_PER_MM
    for i, x in enumerate(range(0, width + 1, step)):
        (major if i % 5 == 0 else minor).append(("V", x))
    for i, y in enumerate(range(0, height + 1, step)):
        (major if i % 5 == 0 else minor).append(("H", y))
    return minor, major


def _render_svg(record: EcgRecord, layout: str) -> bytes:
    width, height = _geometry(record, layout)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    minor, major = _grid_lines(width, height)

    def path_for(lines):
        cmds = []
        for kind, v in lines:
            if kind == "V":
                cmds.append(f"M{v} 0 V{height}")
            else:
                cmds.append(f"M0 {v} H{width}")
        return " ".join(cmds)

    parts.append(f'<path d="{path_for(minor)}" stroke="rgb{_MINOR}" stroke-width="1" fill="none"/>')
    parts.append(f'<path d="{path_for(major)}" stroke="rgb{_MAJOR}" stroke-width="1" fill="none"/>')
    for lead, x0, base, t0, t1 in _cells(record, layout):
        xs, ys = _trace_points(record, lead, x0, base, t0, t1)
        pts = " ".join(f"{px:.2f},{py:.2f}" for px, py in zip(xs, ys))
        parts.append(
            f'<polyline points="{pts}" stroke="rgb{_TRACE}" stroke-width="1.5" fill="none"/>'
        )
        parts.append(
            f'<text x="{x0 + 2:.2f}" y="{base - _mm(8):.2f}" font-family="monospace" '
            f'font-size="{_mm(3):.0f}">{lead}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts).encode("utf-8")


def _render_png(record: EcgRecord, layout: str) -> bytes:
    width, height = _geometry(record, layout)
    img = Image.new("RGB", (width, height), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    minor, major = _grid_lines(width, height)
    for colour, lines in ((_MINOR, minor), (_MAJOR, major)):
        for kind, v in lines:
            if kind == "V":
                draw.line([(v, 0), (v, height)], fill=colour)
            else:
                draw.line([(0, v), (width, v)], fill=colour)
    for lead, x0, base, t0, t1 in _cells(record, layout):
        xs, ys = _trace_points(record, lead, x0, base, t0, t1)
        points = list(zip(xs.tolist(), ys.tolist()))
        if len(points) >= 2:
            draw.line(points, fill=_TRACE, width=2)
        draw.text((x0 + 2, base - _mm(8)), lead, fill=_TRACE)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()

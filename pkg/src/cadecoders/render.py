"""Space-time diagrams of signal-rule traces.

Rows are recorded frames (time runs downward), columns are sites. Registers
of both directions are merged. Each cell shows the highest-priority content:
defect, anti-signal, backward-signal, forward-signal, stack (shaded by
height), then data error as background.
"""
from __future__ import annotations

import numpy as np

from .signal_rules import Trace

GLYPHS = {"defect": "D", "ans": "a", "bws": "<", "fws": ">", "data": ":", "empty": "."}

COLORS = {
    "empty": (255, 255, 255),
    "data": (225, 225, 225),
    "defect": (200, 20, 20),
    "fws": (40, 90, 220),
    "bws": (30, 160, 70),
    "ans": (240, 150, 20),
}
_STACK_LOW = np.array((230, 210, 245), dtype=float)
_STACK_HIGH = np.array((90, 20, 130), dtype=float)


def _layers(trace: Trace):
    d = trace.defects.any(axis=1)
    fw = trace.fws.any(axis=1)
    bw = trace.bws.any(axis=1)
    an = trace.ans.any(axis=1)
    st = trace.sta.max(axis=1)
    data = trace.data.astype(bool) if trace.data is not None else np.zeros_like(d, dtype=bool)
    return d, fw, bw, an, st, data


def render_text(trace: Trace) -> str:
    """One line per frame, prefixed with the iteration count."""
    d, fw, bw, an, st, data = _layers(trace)
    width = len(str(int(trace.times.max()))) if len(trace) else 1
    lines = []
    for f in range(len(trace)):
        row = np.full(trace.size, GLYPHS["empty"], dtype="<U1")
        row[data[f]] = GLYPHS["data"]
        s = st[f]
        row[s > 0] = [str(v) if v < 10 else "+" for v in s[s > 0]]
        row[fw[f]] = GLYPHS["fws"]
        row[bw[f]] = GLYPHS["bws"]
        row[an[f]] = GLYPHS["ans"]
        row[d[f]] = GLYPHS["defect"]
        lines.append(f"{int(trace.times[f]):>{width}} " + "".join(row))
    return "\n".join(lines) + "\n"


def render_rgb(trace: Trace) -> np.ndarray:
    """``(frames, size, 3)`` uint8 image."""
    d, fw, bw, an, st, data = _layers(trace)
    img = np.empty(d.shape + (3,), dtype=np.uint8)
    img[:] = COLORS["empty"]
    img[data] = COLORS["data"]
    top = max(int(st.max()) if st.size else 0, 1)
    frac = (st / top)[..., None]
    shade = (_STACK_LOW + frac * (_STACK_HIGH - _STACK_LOW)).astype(np.uint8)
    img[st > 0] = shade[st > 0]
    img[fw] = COLORS["fws"]
    img[bw] = COLORS["bws"]
    img[an] = COLORS["ans"]
    img[d] = COLORS["defect"]
    return img


def render_ppm(trace: Trace) -> bytes:
    """Binary PPM (P6): width = number of sites, height = number of frames."""
    img = render_rgb(trace)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode() + img.tobytes()


def render_svg(trace: Trace, cell: int = 6) -> str:
    """SVG with one rectangle per non-blank cell."""
    img = render_rgb(trace)
    h, w = img.shape[:2]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * cell}" height="{h * cell}" '
             f'viewBox="0 0 {w * cell} {h * cell}">',
             f'<rect width="{w * cell}" height="{h * cell}" fill="rgb{COLORS["empty"]}"/>']
    blank = np.all(img == np.array(COLORS["empty"], dtype=np.uint8), axis=-1)
    for y, x in zip(*np.nonzero(~blank)):
        r, g, b = (int(v) for v in img[y, x])
        parts.append(f'<rect x="{x * cell}" y="{y * cell}" width="{cell}" height="{cell}" fill="rgb({r},{g},{b})"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render(trace: Trace, fmt: str = "text"):
    if len(trace) == 0:
        raise ValueError("trace has no snapshots")
    if fmt == "text":
        return render_text(trace)
    if fmt == "ppm":
        return render_ppm(trace)
    if fmt == "svg":
        return render_svg(trace)
    raise ValueError(f"unknown format {fmt!r}")

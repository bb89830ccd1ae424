"""Dependency-free SVG line/bar panels and gnuplot data files."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 640, 160
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 24, 30


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _ticks(lo, hi):
    return [lo + (hi - lo) * k / 4 for k in range(5)]


def _panel(y0, title, t, series, bars=False):
    """One panel at vertical offset ``y0``; ``series`` is a list of
    (label, values, colour)."""
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    ymin = min(0.0, min(float(np.min(v)) for _, v, _ in series))
    ymax = max(float(np.max(v)) for _, v, _ in series)
    if ymax <= ymin:
        ymax = ymin + 1.0
    t0, t1 = float(t[0]), float(t[-1])

    def X(s):
        return MARGIN_L + (s - t0) / (t1 - t0) * w

    def Y(v):
        return y0 + MARGIN_T + h - (v - ymin) / (ymax - ymin) * h

    out = [f'<g class="panel"><text x="{MARGIN_L}" y="{y0 + 16}" '
           f'font-size="12">{escape(title)}</text>',
           f'<rect x="{MARGIN_L}" y="{y0 + MARGIN_T}" width="{w}" height="{h}" '
           'fill="none" stroke="#888"/>']
    for v in _ticks(ymin, ymax):
        out.append(f'<text x="{MARGIN_L - 4}" y="{_fmt(Y(v) + 4)}" font-size="9" '
                   f'text-anchor="end">{_fmt(v)}</text>')
    for s in _ticks(t0, t1):
        out.append(f'<text x="{_fmt(X(s))}" y="{y0 + PANEL_H - 14}" font-size="9" '
                   f'text-anchor="middle">{_fmt(s)}</text>')
    for i, (label, v, colour) in enumerate(series):
        v = np.asarray(v, dtype=float)
        if bars:
            # piecewise-constant values on [t_k, t_k+1), one filled step outline
            pts = [(X(t[0]), Y(0.0))]
            for k, val in enumerate(v):
                pts += [(X(t[k]), Y(val)), (X(t[k + 1]), Y(val))]
            pts.append((X(t[len(v)]), Y(0.0)))
            out.append('<polygon points="' + " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
                       + f'" fill="{colour}" stroke="none"/>')
        else:
            pts = " ".join(f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in zip(t, v))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" '
                       'stroke-width="1.2"/>')
        out.append(f'<text x="{PANEL_W - MARGIN_R - 4}" y="{y0 + 16 + 12 * i}" '
                   f'font-size="10" text-anchor="end" fill="{colour}">'
                   f'{escape(label)}</text>')
    out.append("</g>")
    return out


COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def trajectory_svg(traj, path, per_compartment=True, title="") -> None:
    """Time-series SVG.  With ``per_compartment`` one panel per state plus a
    control panel; otherwise a control panel above a shared state panel."""
    t = traj.t
    u = traj.control.values
    panels = []
    if per_compartment:
        for i, name in enumerate(traj.names):
            panels.append((name, [(name, traj.states[:, i], COLOURS[i % 5])], False))
    else:
        panels.append(("states", [(n, traj.states[:, i], COLOURS[i % 5])
                                  for i, n in enumerate(traj.names)], False))
    control = ("release rate u", [("u", u, "#555555")], True)
    if per_compartment:
        panels.append(control)
    else:
        panels.insert(0, control)

    height = PANEL_H * len(panels) + (20 if title else 0)
    body = []
    y = 20 if title else 0
    for name, series, bars in panels:
        body += _panel(y, name, t, series, bars)
        y += PANEL_H
    head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" '
            f'height="{height}" viewBox="0 0 {PANEL_W} {height}">',
            '<rect width="100%" height="100%" fill="white"/>']
    if title:
        head.append(f'<text x="{PANEL_W // 2}" y="14" font-size="13" '
                    f'text-anchor="middle">{escape(title)}</text>')
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(head + body + ["</svg>"]) + "\n")


def write_gnuplot_dat(traj, path) -> None:
    """Whitespace-separated columns with a commented header."""
    u = traj.control.values
    u_nodes = np.append(u, u[-1])
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("# " + " ".join(("t",) + tuple(traj.names) + ("u",)) + "\n")
        for k, tk in enumerate(traj.t):
            row = [tk, *traj.states[k], u_nodes[k]]
            fh.write(" ".join(format(float(v), ".10g") for v in row) + "\n")

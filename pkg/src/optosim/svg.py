"""Self-contained SVG line charts of witnesses against the squeezing parameter."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PANELS = (
    ("delta_ent", "delta_ent_err", "entanglement  Δ_ent"),
    ("E_m_c", "E_m_c_err", "steering  E_m|c"),
    ("E_c_m", "E_c_m_err", "steering  E_c|m"),
)
COLORS = {"positive_p": "#1f5fa8", "wigner": "#c8502a"}
MARKERS = {"positive_p": "circle", "wigner": "square"}

W, H = 330, 280
ML, MR, MT, MB = 52, 14, 30, 44


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        if v >= lo - 1e-9 * step:
            ticks.append(round(v, 10))
        v += step
    return ticks


def _fmt(v):
    return f"{v:.3g}"


def _marker(kind, x, y, color):
    if kind == "square":
        return f'<rect x="{x - 3:.2f}" y="{y - 3:.2f}" width="6" height="6" fill="{color}"/>'
    return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3.2" fill="{color}"/>'


def _panel(rows_by_rep, key, err_key, title, x0):
    pts = [(r, v, e) for rows in rows_by_rep.values() for (r, v, e) in
           ((row["r"], row[key], row[err_key]) for row in rows) if math.isfinite(v)]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    lo_y = min([p[1] - p[2] for p in pts] + [1.0])
    hi_y = max([p[1] + p[2] for p in pts] + [1.0])
    pad = 0.06 * (hi_y - lo_y or 1.0)
    lo_y, hi_y = max(0.0, lo_y - pad), hi_y + pad
    lo_x, hi_x = min(xs + [0.0]), max(xs)
    if hi_x <= lo_x:
        hi_x = lo_x + 1.0
    pw, ph = W - ML - MR, H - MT - MB

    def sx(x):
        return x0 + ML + (x - lo_x) / (hi_x - lo_x) * pw

    def sy(y):
        return MT + ph - (y - lo_y) / (hi_y - lo_y) * ph

    out = [f'<g class="panel" data-witness="{key}">',
           f'<rect x="{x0 + ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
           f'<text x="{x0 + ML + pw / 2:.1f}" y="{MT - 10}" text-anchor="middle" '
           f'font-size="13">{escape(title)}</text>']
    for t in _nice_ticks(lo_x, hi_x):
        out.append(f'<line x1="{sx(t):.2f}" y1="{MT + ph}" x2="{sx(t):.2f}" y2="{MT + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{MT + ph + 16}" text-anchor="middle" font-size="10">{_fmt(t)}</text>')
    for t in _nice_ticks(lo_y, hi_y):
        out.append(f'<line x1="{x0 + ML - 4}" y1="{sy(t):.2f}" x2="{x0 + ML}" y2="{sy(t):.2f}" stroke="#444"/>')
        out.append(f'<text x="{x0 + ML - 7}" y="{sy(t) + 3:.2f}" text-anchor="end" font-size="10">{_fmt(t)}</text>')
    out.append(f'<text x="{x0 + ML + pw / 2:.1f}" y="{H - 8}" text-anchor="middle" font-size="11">r</text>')
    # unity reference
    out.append(f'<line class="unity" x1="{x0 + ML}" y1="{sy(1.0):.2f}" x2="{x0 + ML + pw}" '
               f'y2="{sy(1.0):.2f}" stroke="#888" stroke-dasharray="5,4"/>')
    for rep, rows in rows_by_rep.items():
        color = COLORS.get(rep, "#333")
        good = [row for row in rows if math.isfinite(row[key])]
        if not good:
            continue
        path = " ".join(f"{'M' if i == 0 else 'L'}{sx(row['r']):.2f},{sy(row[key]):.2f}"
                        for i, row in enumerate(good))
        out.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.4"/>')
        for row in good:
            x, y, e = sx(row["r"]), row[key], row[err_key]
            if math.isfinite(e) and e > 0:
                out.append(f'<line class="errorbar" x1="{x:.2f}" y1="{sy(y - e):.2f}" x2="{x:.2f}" '
                           f'y2="{sy(y + e):.2f}" stroke="{color}"/>')
            out.append(_marker(MARKERS.get(rep, "circle"), x, sy(y), color))
    out.append("</g>")
    return out


def witness_chart(rows_by_rep: dict, title="") -> str:
    """SVG document with one panel per witness.

    ``rows_by_rep`` maps a representation name to a list of mappings with
    the CSV column names (``r``, ``delta_ent``, ``delta_ent_err``, ...).
    """
    width = W * len(PANELS)
    height = H + 26
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f'<title>{escape(title)}</title>')
    for i, (key, err_key, label) in enumerate(PANELS):
        out += _panel(rows_by_rep, key, err_key, label, i * W)
    lx = 12
    for rep in rows_by_rep:
        color = COLORS.get(rep, "#333")
        out.append(_marker(MARKERS.get(rep, "circle"), lx + 4, H + 12, color))
        out.append(f'<text x="{lx + 12}" y="{H + 16}" font-size="11">{escape(rep)}</text>')
        lx += 110
    out.append(f'<line x1="{lx}" y1="{H + 12}" x2="{lx + 22}" y2="{H + 12}" stroke="#888" stroke-dasharray="5,4"/>')
    out.append(f'<text x="{lx + 28}" y="{H + 16}" font-size="11">unity bound</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

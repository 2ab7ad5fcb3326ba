"""Output files: polyline snapshots, CSV tables and small SVG plots.

Every writer goes through :func:`atomic_write`, so a file either appears
complete or not at all.
"""

import csv
import io as _io
import math
import os
import tempfile
from contextlib import contextmanager

import numpy as np

from .curve import Curve

FLOAT_FMT = "{:.16e}"

CONVERGE_COLUMNS = ("h_f", "h_Gamma_M", "bulk_error", "curve_error", "K_Omega_M", "K",
                    "v_Delta_M", "wall_time")


def fmt(x):
    """Full-precision scientific notation for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT.format(float(x))
    return str(x)


@contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary file next to ``path`` and rename on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --------------------------------------------------------------------------
# polylines


def format_polylines(curve):
    out = _io.StringIO()
    for c in range(curve.n_loops):
        if c:
            out.write("\n")
        loop = curve.loop(c)
        out.write(f"# component {c}, {len(loop)} vertices, closed\n")
        for x, y in loop:
            out.write(f"{fmt(x)} {fmt(y)}\n")
    return out.getvalue()


def write_polylines(path, curve):
    with atomic_write(path) as fh:
        fh.write(format_polylines(curve))


def read_polylines(path):
    """Inverse of :func:`write_polylines`; loop orientation is kept as stored."""
    loops, cur = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                if cur:
                    loops.append(cur)
                cur = []
            elif line:
                cur.append([float(v) for v in line.split()])
    if cur:
        loops.append(cur)
    return Curve.from_loops([np.array(l) for l in loops], orient=False)


# --------------------------------------------------------------------------
# tables


def write_csv(path, header, rows):
    with atomic_write(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_diagnostics(path, diagnostics):
    from .stepper import StepDiagnostics

    write_csv(path, StepDiagnostics.FIELDS, (d.row() for d in diagnostics))


def read_csv(path):
    """Columns of a numeric CSV as a dict of float arrays."""
    with open(path) as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return {h: data[:, i] for i, h in enumerate(header)}


# --------------------------------------------------------------------------
# SVG

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b",
            "#e377c2", "#7f7f7f", "#bcbd22")


def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def curves_svg(curves, labels=None, size=600, margin=20):
    """Overlay of closed polylines, each in its own colour, equal axis scaling."""
    pts = np.concatenate([c.points for c in curves])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = max(hi - lo) or 1.0
    scale = (size - 2 * margin) / span

    def tx(p):
        x = margin + (p[:, 0] - lo[0]) * scale
        y = size - margin - (p[:, 1] - lo[1]) * scale
        return x, y

    parts = [_svg_header(size, size)]
    for i, c in enumerate(curves):
        color = _PALETTE[i % len(_PALETTE)]
        for k in range(c.n_loops):
            x, y = tx(c.loop(k))
            coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(x, y))
            parts.append(f'<polygon points="{coords}" fill="none" stroke="{color}" '
                         f'stroke-width="1"/>\n')
        if labels:
            parts.append(f'<text x="{margin}" y="{margin + 14 * (i + 1)}" font-size="12" '
                         f'fill="{color}">{labels[i]}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def series_svg(x, series, width=640, height=360, margin=50, title=""):
    """Line chart of one or more named series against ``x``."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()] or [np.zeros(1)])
    ylo, yhi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xlo, xhi = (x.min(), x.max()) if x.size else (0.0, 1.0)
    if xhi == xlo:
        xhi = xlo + 1.0
    w, h = width - 2 * margin, height - 2 * margin

    def px(v):
        return margin + (v - xlo) / (xhi - xlo) * w

    def py(v):
        return height - margin - (v - ylo) / (yhi - ylo) * h

    parts = [_svg_header(width, height)]
    parts.append(f'<rect x="{margin}" y="{margin}" width="{w}" height="{h}" fill="none" '
                 f'stroke="black"/>\n')
    parts.append(f'<text x="{margin}" y="{margin - 10}" font-size="13">{title}</text>\n')
    for val, anchor_y in ((ylo, height - margin), (yhi, margin + 10)):
        parts.append(f'<text x="4" y="{anchor_y}" font-size="10">{val:.6g}</text>\n')
    parts.append(f'<text x="{margin}" y="{height - margin + 15}" font-size="10">{xlo:.6g}</text>\n')
    parts.append(f'<text x="{width - margin - 30}" y="{height - margin + 15}" '
                 f'font-size="10">{xhi:.6g}</text>\n')
    for i, (name, y) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        ok = np.isfinite(y)
        coords = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.2"/>\n')
        parts.append(f'<text x="{width - margin - 150}" y="{margin + 14 * (i + 1)}" '
                     f'font-size="11" fill="{color}">{name}</text>\n')
    parts.append("</svg>\n")
    return "".join(parts)


def write_text(path, text):
    with atomic_write(path) as fh:
        fh.write(text)


def snapshot_name(t):
    """File stem for a snapshot at time ``t``, sortable and free of dots."""
    return "curve_t" + f"{t:012.6f}".replace(".", "_")


def nan_if_none(x):
    return math.nan if x is None else x

"""Result files: CSV, JSON, two-column plot data and optional SVG line plots.

Every file starts with (or contains) the tool version and the config hash.
Nothing time-dependent is written, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .. import __version__

CSV_COLUMNS = ["experiment_id", "h", "n_interior", "E", "eigen_residual", "quantity_name", "value",
               "below_floor_flag"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def sanitize(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def header(digest):
    return {"tool": "qmbounds", "version": __version__, "config_hash": digest}


def write_csv(path: Path, records, digest):
    with open(path, "w", newline="") as fh:
        fh.write(f"# qmbounds {__version__} config_hash={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(r.get(c)) if c not in ("experiment_id", "quantity_name") else r.get(c)
                        for c in CSV_COLUMNS])


def write_json(path: Path, payload, digest):
    doc = {**header(digest), **sanitize(payload)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _slug(name):
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", name)


def write_series(out_dir: Path, series, digest, svg=False):
    paths = []
    for s in series:
        if not s.x:
            continue
        p = out_dir / f"plot_{_slug(s.name)}.dat"
        with open(p, "w") as fh:
            fh.write(f"# qmbounds {__version__} config_hash={digest}\n")
            fh.write(f"# series {s.name}: columns 1/h  log(y)\n")
            for x, y in zip(s.x, s.logy):
                fh.write(f"{x!r} {y!r}\n")
        paths.append(p)
        if svg:
            q = p.with_suffix(".svg")
            q.write_text(svg_plot(s, digest))
            paths.append(q)
    return paths


def svg_plot(s, digest, width=480, height=320, pad=48):
    """Self-contained SVG polyline of ``log y`` against ``1/h`` with min/max tick labels."""
    x = np.asarray(s.x, dtype=float)
    y = np.asarray(s.logy, dtype=float)
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    px = pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    py = height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    dots = "".join(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3"/>' for a, b in zip(px, py))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">\n'
        f"<!-- qmbounds {__version__} config_hash={digest} -->\n"
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>\n'
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>\n'
        f'<g fill="steelblue">{dots}</g>\n'
        f'<text x="{pad}" y="{height - pad + 16}">{x0:.4g}</text>\n'
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end">{x1:.4g}</text>\n'
        f'<text x="{pad - 4}" y="{height - pad}" text-anchor="end">{y0:.4g}</text>\n'
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{y1:.4g}</text>\n'
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">1/h</text>\n'
        f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle">log {s.name}</text>\n'
        "</svg>\n"
    )

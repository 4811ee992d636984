"""CSV, SVG and JSON result output."""

import csv
import datetime as _dt
import io as _io
import json

import numpy as np

from . import __version__

TOOL = "cstsim"


class DataError(ValueError):
    """Malformed input data; the message names the row and column."""


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header, rows):
    """CSV with a header row, ``,`` separator and LF line endings."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def spectrum_csv(spectrum, x_name="B_mT", y_name="dPL_over_PL"):
    return csv_text([x_name, y_name], zip(spectrum.x, spectrum.y))


def read_xy_csv(path_or_text, *, is_text=False):
    """Read a two-column numeric CSV with a header row.

    Returns
    -------
    (x, y) : ndarray
    """
    if is_text:
        text = path_or_text
    else:
        try:
            with open(path_or_text, encoding="utf-8", newline="") as fh:
                text = fh.read()
        except OSError as exc:
            raise DataError(f"cannot read {path_or_text}: {exc}") from None
    rows = list(csv.reader(_io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty CSV")
    header, body = rows[0], rows[1:]
    if len(header) < 2:
        raise DataError("row 1: expected a header with two columns")
    xs, ys = [], []
    for i, r in enumerate(body, start=2):
        if len(r) < 2:
            raise DataError(f"row {i}: expected 2 columns, got {len(r)}")
        vals = []
        for j, c in enumerate(r[:2], start=1):
            try:
                v = float(c)
            except ValueError:
                raise DataError(f"row {i}, column {j}: not a number: {c!r}") from None
            if not np.isfinite(v):
                raise DataError(f"row {i}, column {j}: non-finite value")
            vals.append(v)
        xs.append(vals[0])
        ys.append(vals[1])
    return np.array(xs), np.array(ys)


def svg_polyline(x, y, *, width=640, height=400, x_label="B (mT)", y_label="dPL/PL", title=""):
    """Minimal SVG line plot: frame, zero line, tick labels and one polyline."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    y0, y1 = (float(y.min()), float(y.max())) if y.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) or 1.0
        y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if y0 < 0 < y1:
        out.append(f'<line x1="{ml}" y1="{sy(0):.2f}" x2="{ml + pw}" y2="{sy(0):.2f}" stroke="#999" stroke-dasharray="4 3"/>')
    for v in np.linspace(x0, x1, 6):
        out.append(f'<text x="{sx(v):.2f}" y="{mt + ph + 18}" font-size="11" text-anchor="middle">{v:.4g}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{ml - 6}" y="{sy(v) + 4:.2f}" font-size="11" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" font-size="13" text-anchor="middle">{x_label}</text>')
    out.append(
        f'<text x="16" y="{mt + ph / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {mt + ph / 2})">{y_label}</text>'
    )
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="{mt - 10}" font-size="13" text-anchor="middle">{title}</text>')
    if x.size:
        out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.5" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def envelope(command, cfg, payload, timestamp=None):
    """Result record: tool, version, config echo (hash and text), timestamp, payload."""
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config": {"sha256": cfg.digest(), "text": cfg.canonical_text()},
        "timestamp": timestamp,
        "payload": _jsonable(payload),
    }


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"

"""Deterministic CSV / JSON / SVG output.

Numbers are written with 15 significant digits (``.15g``, then the shortest
repr of the rounded float), so re-parsing and re-emitting gives the same
bytes.  Files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__

FORMATS = ("csv", "json")


def round_number(x: float) -> float:
    x = float(x)
    r = float(format(x, ".15g"))
    # rounding up near the largest double overflows; keep the finite value
    return x if math.isinf(r) and math.isfinite(x) else r


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(round_number(value))
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return round_number(value) if math.isfinite(value) else None
    if isinstance(value, Mapping):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return str(value)


def to_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> str:
    columns = list(columns or rows[0].keys())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(col)) for col in columns])
    return buf.getvalue()


def to_json(rows: Sequence[Mapping[str, Any]], meta: Mapping[str, Any],
            columns: Sequence[str] | None = None) -> str:
    columns = list(columns or rows[0].keys())
    payload = {
        "meta": _json_value(dict(meta)),
        "rows": [{col: _json_value(row.get(col)) for col in columns} for row in rows],
    }
    return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def make_meta(command: str, seed: int | None = None, tolerances: Mapping[str, float] | None = None,
              **extra: Any) -> dict:
    meta = {"version": __version__, "command": command, "seed": seed,
            "tolerances": dict(tolerances or {})}
    meta.update(extra)
    return meta


def emit(rows: Sequence[Mapping[str, Any]], fmt: str | None, path: str | Path | None,
         meta: Mapping[str, Any] | None = None, columns: Sequence[str] | None = None) -> str:
    """Render rows as CSV (default) or JSON; write to ``path`` if given.

    Returns the rendered text.  Raises ``OSError`` if the path is unwritable.
    """
    if not rows:
        raise ValueError("nothing to emit: results are empty")
    fmt = (fmt or "csv").lower()
    if fmt not in FORMATS:
        raise ValueError(f"unknown output format {fmt!r}; choose csv or json")
    text = to_csv(rows, columns) if fmt == "csv" else to_json(rows, meta or make_meta("unknown"), columns)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str) -> tuple[list[str], list[dict]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = [dict(zip(header, (_parse_cell(c) for c in rec))) for rec in reader]
    return header, rows


def read_json(text: str) -> tuple[list[str], list[dict], dict]:
    data = json.loads(text)
    rows = data["rows"]
    columns = list(rows[0].keys()) if rows else []
    return columns, rows, data["meta"]


def svg_line_chart(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], title: str = "",
                   xlabel: str = "", ylabel: str = "", width: int = 640, height: int = 400,
                   ytick_labels: Mapping[float, str] | None = None) -> str:
    """Minimal static SVG line chart; one polyline per named series."""
    xs = [x for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv if math.isfinite(y)]
    if not xs or not ys:
        raise ValueError("no finite data to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 70, 20, 30, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="15" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 15 {height / 2:.1f})">{ylabel}</text>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 15}" text-anchor="middle" '
                   f'font-size="10">{xv:.4g}</text>')
    ticks = ytick_labels or {y0 + (y1 - y0) * k / 4: f"{y0 + (y1 - y0) * k / 4:.4g}" for k in range(5)}
    for yv, lab in sorted(ticks.items()):
        out.append(f'<text x="{left - 5}" y="{sy(yv) + 3:.1f}" text-anchor="end" font-size="10">{lab}</text>')
    for idx, (name, (xv, yv)) in enumerate(series.items()):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xv, yv) if math.isfinite(y))
        color = colors[idx % len(colors)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 10}" y="{top + 15 + 14 * idx}" font-size="11" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def phase_rows(points: Iterable, dimension: int) -> list[dict]:
    """Rows for sweep output: ``lambda, t[, theta, phi], label, energy``."""
    rows = []
    for p in points:
        row = {"lambda": p.lam}
        params = p.params.params if p.params is not None else (math.nan,) * (1 if dimension == 2 else 3)
        names = ("t",) if dimension == 2 else ("t", "theta", "phi")
        row.update(dict(zip(names, (float(v) for v in params))))
        if dimension == 3:
            offd = p.offdiag or (math.nan,) * 3
            row.update({"c12": offd[0], "c13": offd[1], "c23": offd[2]})
        row["label"] = p.label
        row["energy"] = p.energy
        rows.append(row)
    return rows

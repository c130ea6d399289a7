"""Study reports and their CSV / JSON / SVG renderings."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json", "svg")


@dataclass
class StudyReport:
    kind: str
    columns: list
    grid: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    env: dict = field(default_factory=dict)
    plot: dict = field(default_factory=dict)    # {"x": col, "y": [cols], "group": col|None, "logx": b, "logy": b}

    @property
    def passed(self) -> bool:
        return not self.failures

    def add_row(self, **values):
        missing = set(self.columns) - set(values)
        if missing:
            raise KeyError(f"row misses columns {sorted(missing)}")
        self.rows.append({c: _plain(values[c]) for c in self.columns})

    def column(self, name) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, doc) -> "StudyReport":
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: _csv_cell(v) for k, v in r.items()})
        return buf.getvalue()


def environment(seed) -> dict:
    return {"seed": seed, "precision": "float64", "numpy": np.__version__, "python": platform.python_version()}


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def load_report(path) -> StudyReport:
    return StudyReport.from_dict(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------ svg

_W, _H, _PAD = 640, 420, 60
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _series(report: StudyReport):
    spec = report.plot
    if not spec or not report.rows:
        return []
    x, ys, group = spec["x"], spec["y"], spec.get("group")
    out = []
    keys = [None] if group is None else sorted({r[group] for r in report.rows}, key=str)
    for key in keys:
        rows = [r for r in report.rows if group is None or r[group] == key]
        for y in ys:
            pts = [(r[x], r[y]) for r in rows if r[x] is not None and r[y] is not None]
            label = y if group is None else f"{y} {group}={key}"
            out.append((label, pts))
    return out


def to_svg(report: StudyReport) -> str:
    spec = report.plot or {}
    logx, logy = spec.get("logx", False), spec.get("logy", True)
    series = _series(report)

    def tx(v):
        return math.log10(v) if logx else v

    def ty(v):
        return math.log10(v) if logy else v

    usable = [(label, [(tx(a), ty(b)) for a, b in pts if (a > 0 or not logx) and (b > 0 or not logy)])
              for label, pts in series]
    xs = [a for _, pts in usable for a, _ in pts]
    ys = [b for _, pts in usable for _, b in pts]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return _PAD + (v - x0) / (x1 - x0) * (_W - 2 * _PAD)

    def py(v):
        return _H - _PAD - (v - y0) / (y1 - y0) * (_H - 2 * _PAD)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
             f'<title>{report.kind}</title>',
             f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
             f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
             f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>']
    xl = ("log10 " if logx else "") + spec.get("x", "")
    yl = "log10 value" if logy else "value"
    parts.append(f'<text x="{_W / 2:.1f}" y="{_H - 15}" text-anchor="middle" font-size="12">{xl}</text>')
    parts.append(f'<text x="15" y="{_H / 2:.1f}" transform="rotate(-90 15 {_H / 2:.1f})" '
                 f'text-anchor="middle" font-size="12">{yl}</text>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        parts.append(f'<text x="{px(v):.1f}" y="{_H - _PAD + 15}" text-anchor="{anchor}" font-size="10">{v:.3g}</text>')
    for v in (y0, y1):
        parts.append(f'<text x="{_PAD - 5}" y="{py(v):.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for i, (label, pts) in enumerate(usable):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}">'
                     f'<title>{label}</title></polyline>')
        parts.append(f'<text x="{_W - _PAD + 5}" y="{_PAD + 14 * i}" font-size="10" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(report: StudyReport, fmt: str, out_dir, stem: str | None = None) -> Path:
    """Write the report in one format; returns the file path."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem or report.kind}.{fmt}"
    text = {"csv": report.to_csv, "json": report.to_json, "svg": lambda: to_svg(report)}[fmt]()
    path.write_text(text)
    return path

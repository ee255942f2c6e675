"""Report files: JSON dump, CSV tables and small SVG charts.

Everything here is a pure function of its inputs (no clocks, no host data),
so identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

from ..certify import GuaranteeCertificate

EXPERIMENT_COLUMNS = ["experiment", "status", "K", "essential", "passes", "investment", "gamma",
                      "objective", "epsilon", "epsilon_hat", "violations", "trials", "selected"]
SWEEP_COLUMNS = ["budget", "gamma", "investment", "essential", "epsilon", "certified", "epsilon_hat",
                 "violations", "trials"]
CERTIFY_COLUMNS = ["mode", "k", "beta", "K", "epsilon"]


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _clean(obj):
    # JSON has no NaN/inf; keep the dump strictly standard
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def to_json(doc) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def certify_rows(certs: list[GuaranteeCertificate]) -> list[dict]:
    return [{"mode": c.mode.value, "k": c.k_or_d, "beta": c.beta, "K": c.K, "epsilon": c.epsilon} for c in certs]


def experiment_rows(report) -> list[dict]:
    out = []
    for r in report.rows:
        row = {"experiment": r.index, "status": r.status.split(":")[0], "passes": len(r.history),
               "selected": r.index == report.selected}
        if r.run is not None:
            row.update({"K": r.run.K, "essential": r.run.essential.cardinality, "investment": r.investment,
                        "gamma": r.run.solution.gamma, "objective": r.run.solution.objective,
                        "epsilon": r.run.certificate.epsilon})
        if r.risk is not None:
            row.update({"epsilon_hat": r.risk.epsilon_hat, "violations": r.risk.violations,
                        "trials": r.risk.trials})
        out.append(row)
    return out


def sweep_rows(sweep) -> list[dict]:
    return [{"budget": p.budget, "gamma": p.gamma, "investment": p.investment, "essential": p.essential,
             "epsilon": p.certificate.epsilon, "certified": p.certified, "epsilon_hat": p.risk.epsilon_hat,
             "violations": p.risk.violations, "trials": p.risk.trials} for p in sweep.points]


# --- SVG ---

_W, _H, _PAD = 640, 360, 56


def _num(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.4g}"


class _Axes:
    def __init__(self, n: int, lo: float, hi: float):
        if not hi > lo:
            hi = lo + 1.0
        self.n, self.lo, self.hi = n, lo, hi

    def x(self, i: float) -> float:
        span = _W - 2 * _PAD
        return _PAD + (span * (i + 0.5) / self.n if self.n else 0.0)

    def y(self, v: float) -> float:
        return _H - _PAD - (_H - 2 * _PAD) * (v - self.lo) / (self.hi - self.lo)


def _frame(title: str, ax: _Axes, xlabels: list[str], ylabel: str) -> list[str]:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="14" y="{_H // 2}" font-size="12" transform="rotate(-90 14 {_H // 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    for i, lab in enumerate(xlabels):
        x = _num(ax.x(i))
        parts.append(f'<line class="xtick" x1="{x}" y1="{_H - _PAD}" x2="{x}" y2="{_H - _PAD + 5}" stroke="black"/>')
        parts.append(f'<text x="{x}" y="{_H - _PAD + 18}" font-size="11" text-anchor="middle">{escape(lab)}</text>')
    for j in range(5):
        v = ax.lo + (ax.hi - ax.lo) * j / 4
        y = _num(ax.y(v))
        parts.append(f'<line x1="{_PAD - 5}" y1="{y}" x2="{_PAD}" y2="{y}" stroke="black"/>')
        parts.append(f'<text x="{_PAD - 8}" y="{y}" font-size="10" text-anchor="end">{_label(v)}</text>')
    return parts


def _ref_line(ax: _Axes, value: float, label: str) -> list[str]:
    y = _num(ax.y(value))
    return [f'<line class="reference" x1="{_PAD}" y1="{y}" x2="{_W - _PAD}" y2="{y}" stroke="red" '
            f'stroke-dasharray="6 4"/>',
            f'<text x="{_W - _PAD}" y="{y}" dy="-4" font-size="11" text-anchor="end" fill="red">'
            f'{escape(label)}</text>']


def bar_chart(title: str, labels: list[str], values: list[float], ylabel: str,
              highlight: int | None = None) -> str:
    vals = [0.0 if v is None or math.isnan(v) else v for v in values]
    ax = _Axes(len(vals), 0.0, max(vals, default=1.0) * 1.1 or 1.0)
    parts = _frame(title, ax, labels, ylabel)
    width = 0.6 * (_W - 2 * _PAD) / max(len(vals), 1)
    for i, v in enumerate(vals):
        y0, y1 = ax.y(0.0), ax.y(v)
        color = "#d95f02" if i == highlight else "#1b9e77"
        parts.append(f'<rect class="bar" x="{_num(ax.x(i) - width / 2)}" y="{_num(y1)}" width="{_num(width)}" '
                     f'height="{_num(y0 - y1)}" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart(title: str, labels: list[str], series: dict[str, list[float]], ylabel: str,
               reference: tuple[float, str] | None = None) -> str:
    colors = ["#1b9e77", "#7570b3", "#e7298a", "#66a61e"]
    allv = [v for s in series.values() for v in s if v is not None and not math.isnan(v)]
    if reference is not None:
        allv.append(reference[0])
    hi = max(allv, default=1.0)
    ax = _Axes(len(labels), 0.0, hi * 1.1 if hi > 0 else 1.0)
    parts = _frame(title, ax, labels, ylabel)
    for c, (name, vals) in enumerate(series.items()):
        pts = [(ax.x(i), ax.y(v)) for i, v in enumerate(vals) if v is not None and not math.isnan(v)]
        color = colors[c % len(colors)]
        if pts:
            path = " ".join(f"{_num(x)},{_num(y)}" for x, y in pts)
            parts.append(f'<polyline class="series" points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            for x, y in pts:
                parts.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{_PAD + 8}" y="{_PAD + 14 * (c + 1)}" font-size="11" fill="{color}">'
                     f'{escape(name)}</text>')
    if reference is not None:
        parts.extend(_ref_line(ax, *reference))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- emitters ---

def emit_experiments(report, out_dir: str | Path) -> list[Path]:
    """``report.json``, ``experiments.csv`` (one row per run plus a summary row),
    ``certify.csv`` and, when there is at least one run, two charts."""
    out = Path(out_dir)
    rows = experiment_rows(report)
    table = csv_text(EXPERIMENT_COLUMNS, rows)
    if rows:
        ok = [r for r in rows if r["status"] == "ok"]
        summary = {"experiment": "summary", "status": f"{len(ok)}/{len(rows)} ok",
                   "selected": report.selected if report.selected is not None else "none"}
        if report.selected is not None:
            sel = rows[report.selected]
            summary.update({k: sel.get(k) for k in ("K", "essential", "investment", "gamma", "epsilon",
                                                      "epsilon_hat")})
        table += csv_text(EXPERIMENT_COLUMNS, [summary]).split("\n", 1)[1]
    certs = [r.run.certificate for r in report.rows if r.run is not None]
    files = [
        atomic_write(out / "report.json", to_json(report.to_dict())),
        atomic_write(out / "experiments.csv", table),
        atomic_write(out / "certify.csv", csv_text(CERTIFY_COLUMNS, certify_rows(certs))),
    ]
    if rows:
        labels = [str(r["experiment"]) for r in rows]
        files.append(atomic_write(out / "investment.svg", bar_chart(
            "Investment per experiment", labels, [r.get("investment") for r in rows], "$ per year",
            report.selected)))
        files.append(atomic_write(out / "risk.svg", line_chart(
            "Out-of-sample violation rate", labels, {"epsilon_hat": [r.get("epsilon_hat") for r in rows]},
            "violation rate", (report.config.eps_bar, f"eps_bar = {report.config.eps_bar:g}"))))
    return files


def emit_sweep(sweep, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    rows = sweep_rows(sweep)
    files = [
        atomic_write(out / "sweep.json", to_json(sweep.to_dict())),
        atomic_write(out / "sweep.csv", csv_text(SWEEP_COLUMNS, rows)),
        atomic_write(out / "certify.csv", csv_text(CERTIFY_COLUMNS,
                                                   certify_rows([p.certificate for p in sweep.points]))),
    ]
    if rows:
        labels = [_label(r["budget"]) for r in rows]
        files.append(atomic_write(out / "sweep_gamma.svg", line_chart(
            "Worst-case curtailment vs budget", labels, {"gamma": [r["gamma"] for r in rows]}, "MWh")))
        files.append(atomic_write(out / "sweep_risk.svg", line_chart(
            "Out-of-sample violation rate vs budget", labels,
            {"epsilon_hat": [r["epsilon_hat"] for r in rows]}, "violation rate",
            (sweep.config.eps_bar, f"eps_bar = {sweep.config.eps_bar:g}"))))
    return files

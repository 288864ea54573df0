"""Tables, per-run dumps and SVG figures for finished experiments.

Every plotted number also appears in ``matrix.csv``, ``runs.json`` or
``kstudy.json``; the figures are views over those files. CSV and JSON carry
full ``repr`` precision so they parse back exactly, while the markdown table
uses fixed 6-decimal, round-half-even formatting of each value's shortest
decimal representation.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

from ._version import __version__
from ._accel import backend_name
from .errors import MSCRError, ValidationError
from .experiment import (AccuracyMatrix, ExperimentPlan, ExperimentResult, KStudyResult, RunRecord,
                         optima_report, tradeoff_curve)
from .metrics import CI_METHOD, MetricSummary
from .separation import SeparationResult

CSV_COLUMNS = ["model_id", "eps_train", "metric", "eps_test", "mean", "ci95_half_width", "n_runs",
               "single_run"]
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"]
_SIX = Decimal("0.000001")


def fmt6(x):
    """Six decimals, round-half-even, e.g. 0.1234565 -> '0.123456'."""
    if x is None:
        return "n/a"
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    s = str(Decimal(repr(x)).quantize(_SIX, rounding=ROUND_HALF_EVEN))
    return s[1:] if s.startswith("-") and Decimal(s) == 0 else s


def _num(x):
    return "" if x is None else repr(float(x))


@dataclass
class ReportBundle:
    out_dir: Path
    files: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __getitem__(self, name):
        return self.files[name]


# ---------------------------------------------------------------- data files

def matrix_rows(matrix):
    """One row per summary: clean, robust per eps_test > 0, and MSCR.

    Robust accuracy at eps_test = 0 is the clean accuracy and is not repeated.
    """
    rows = []
    for model_id, e_tr in matrix.columns():
        c = matrix.cell(model_id, e_tr)
        rows.append((model_id, e_tr, "clean", None, c.clean))
        for e in matrix.eps_test:
            if e > 0:
                rows.append((model_id, e_tr, "robust", e, c.robust[e]))
        if c.mscr is not None:
            rows.append((model_id, e_tr, "mscr", matrix.eps_min, c.mscr))
    return rows


def matrix_csv(matrix):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for model_id, e_tr, metric, e_te, s in matrix_rows(matrix):
        w.writerow([model_id, _num(e_tr), metric, _num(e_te), _num(s.mean), _num(s.ci95_half_width),
                    s.n_runs, int(s.single_run)])
    return buf.getvalue()


def read_matrix_csv(path):
    """Parse ``matrix.csv`` back into dicts with float fields."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append({
                "model_id": row["model_id"],
                "eps_train": float(row["eps_train"]),
                "metric": row["metric"],
                "eps_test": float(row["eps_test"]) if row["eps_test"] else None,
                "mean": float(row["mean"]),
                "ci95_half_width": float(row["ci95_half_width"]),
                "n_runs": int(row["n_runs"]),
            })
    return out


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def runs_json(result):
    return {
        "plan": result.plan.to_json(),
        "separation": result.separation.to_json(),
        "dataset_fingerprint": result.dataset_fingerprint,
        "eps_train": list(result.matrix.eps_train),
        "eps_test": list(result.matrix.eps_test),
        "records": [r.to_json() for r in result.records],
    }


def result_from_json(doc):
    plan = ExperimentPlan.from_json(doc["plan"])
    sep = SeparationResult.from_json(doc["separation"])
    records = [RunRecord.from_json(r) for r in doc["records"]]
    matrix = AccuracyMatrix.from_records(records, [m.id for m in plan.models], doc["eps_train"],
                                         doc["eps_test"], sep.epsilon_min)
    return ExperimentResult(plan, sep, matrix, records, doc["dataset_fingerprint"])


def load_result(path):
    """Rebuild an ExperimentResult from ``runs.json`` (or a directory holding one)."""
    path = Path(path)
    if path.is_dir():
        path = path / "runs.json"
    try:
        return result_from_json(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError as exc:
        raise ValidationError(f"no experiment output at {path}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: not a runs.json file ({exc})") from exc


def kstudy_json(study):
    return {
        "k_values": study.k_values, "eps_train": study.eps_train, "eps_test": study.eps_test,
        "model_id": study.model_id,
        "summaries": [[k, study.summaries[k].to_json()] for k in study.k_values],
        "per_run": [[k, study.per_run[k]] for k in study.k_values],
    }


def kstudy_from_json(doc):
    summaries = {int(k): MetricSummary(s["mean"], s["ci95_half_width"], s["n_runs"])
                 for k, s in doc["summaries"]}
    per_run = {int(k): list(v) for k, v in doc["per_run"]}
    return KStudyResult([int(k) for k in doc["k_values"]], float(doc["eps_train"]),
                        float(doc["eps_test"]), doc["model_id"], summaries, per_run)


def load_kstudy(path):
    path = Path(path)
    if path.is_dir():
        path = path / "kstudy.json"
    try:
        return kstudy_from_json(json.loads(path.read_text(encoding="utf-8")))
    except FileNotFoundError as exc:
        raise ValidationError(f"no k-study output at {path}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: not a kstudy.json file ({exc})") from exc


def config_hash(plan):
    blob = json.dumps(plan.to_json(), sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def metadata(result=None, kstudy=None):
    meta = {"toolkit_version": __version__, "backend": backend_name(), "ci_method": CI_METHOD}
    if result is not None:
        meta.update({
            "config_hash": config_hash(result.plan),
            "dataset_fingerprint": result.dataset_fingerprint,
            "epsilon_min": result.eps_min,
            "two_r": result.separation.two_r,
            "norm": result.separation.norm.label,
            "runs": result.plan.runs,
            "master_seed": result.plan.master_seed,
        })
    if kstudy is not None:
        meta["kstudy"] = {"model_id": kstudy.model_id, "eps_train": kstudy.eps_train,
                          "eps_test": kstudy.eps_test, "k_values": kstudy.k_values}
    return meta


def markdown_table(matrix):
    """Robust accuracy per eps_test row, best column per row in bold, MSCR last."""
    cols = matrix.columns()
    best = matrix.best_per_row()
    head = ["eps_test"] + [f"{m} @ eps_train={fmt6(e)}" for m, e in cols]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for e in matrix.eps_test:
        cells = []
        for col in cols:
            s = matrix.cell(*col).robust[e]
            txt = f"{fmt6(s.mean)} ± {fmt6(s.ci95_half_width)}"
            cells.append(f"**{txt}**" if best[e] == col else txt)
        label = fmt6(e) + (" (eps_min)" if e == matrix.eps_min else "")
        lines.append("| " + " | ".join([label] + cells) + " |")
    if matrix.mscr_requested:
        cells = []
        for col in cols:
            s = matrix.cell(*col).mscr
            cells.append("undefined" if s is None else f"{fmt6(s.mean)} ± {fmt6(s.ci95_half_width)}")
        lines.append("| " + " | ".join(["MSCR"] + cells) + " |")
    out = "\n".join(lines) + "\n"
    for m in matrix.model_ids:
        rows = optima_report(matrix, m)
        out += f"\nOptimal eps_train per eps_test for {m}:\n\n"
        for r in rows:
            note = f" (off-diagonal, {r.direction})" if r.deviates else ""
            out += f"- eps_test {fmt6(r.eps_test)}: eps_train {fmt6(r.best_eps_train)}, " \
                   f"accuracy {fmt6(r.best_mean)}{note}\n"
    return out


# ---------------------------------------------------------------------- SVG

def _f(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:.4g}"


def nice_ticks(lo, hi, n=5):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9)
    ticks = []
    i = start
    while i * step <= hi + step * 1e-9:
        ticks.append(round(i * step, 12))
        i += 1
    return ticks


def _padded(lo, hi, frac=0.08):
    if hi <= lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


class Svg:
    def __init__(self, width, height, title):
        self.width, self.height = width, height
        self.parts = [f'<title>{escape(title)}</title>',
                      f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>']

    def add(self, tag, text=None, **attrs):
        items = []
        for k, v in attrs.items():
            k = k.rstrip("_").replace("_", "-")
            items.append(f"{k}={quoteattr(_f(v) if isinstance(v, float) else str(v))}")
        body = " ".join(items)
        if text is None:
            self.parts.append(f"<{tag} {body}/>")
        else:
            self.parts.append(f"<{tag} {body}>{escape(text)}</{tag}>")

    def text(self, x, y, s, size=11, anchor="middle", **attrs):
        self.add("text", s, x=float(x), y=float(y), font_size=size, text_anchor=anchor,
                 font_family="sans-serif", **attrs)

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1, **attrs):
        self.add("line", x1=float(x1), y1=float(y1), x2=float(x2), y2=float(y2), stroke=stroke,
                 stroke_width=width, **attrs)

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, *self.parts, "</svg>"]) + "\n"


class Axes:
    """Linear (or log10 on x) mapping of a data box onto a pixel box, with ticks."""

    def __init__(self, svg, box, xlim, ylim, xlabel="", ylabel="", title="", xlog=False, xticks=None):
        self.svg, (self.x0, self.y0, self.w, self.h) = svg, box
        self.xlog = xlog
        self.xlim = tuple(math.log10(v) for v in xlim) if xlog else xlim
        self.ylim = ylim
        x0, y0, w, h = box
        svg.add("rect", x=float(x0), y=float(y0), width=float(w), height=float(h), fill="none",
                stroke="#444444", stroke_width=1)
        for t in nice_ticks(*ylim):
            y = self.sy(t)
            svg.line(x0, y, x0 + w, y, stroke="#e6e6e6")
            svg.line(x0 - 4, y, x0, y)
            svg.text(x0 - 6, y + 4, _label(t), size=10, anchor="end")
        if xticks is None:
            xticks = nice_ticks(*xlim) if not xlog else []
        for t in xticks:
            x = self.sx(t)
            svg.line(x, y0 + h, x, y0 + h + 4)
            svg.text(x, y0 + h + 16, _label(t), size=10)
        if xlabel:
            svg.text(x0 + w / 2, y0 + h + 34, xlabel, size=12)
        if ylabel:
            cx, cy = x0 - 48, y0 + h / 2
            svg.text(cx, cy, ylabel, size=12, transform=f"rotate(-90 {_f(cx)} {_f(cy)})")
        if title:
            svg.text(x0 + w / 2, y0 - 10, title, size=13, font_weight="bold")

    def sx(self, v):
        if self.xlog:
            v = math.log10(v)
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * self.w

    def sy(self, v):
        lo, hi = self.ylim
        return self.y0 + self.h - (v - lo) / (hi - lo) * self.h

    def errbar(self, x, mean, half, color):
        y1, y2 = self.sy(mean - half), self.sy(mean + half)
        self.svg.line(x, y1, x, y2, stroke=color)
        self.svg.line(x - 3, y1, x + 3, y1, stroke=color)
        self.svg.line(x - 3, y2, x + 3, y2, stroke=color)


def _legend(svg, x, y, names):
    for i, name in enumerate(names):
        svg.add("rect", x=float(x), y=float(y + 16 * i), width=10.0, height=10.0,
                fill=PALETTE[i % len(PALETTE)])
        svg.text(x + 14, y + 16 * i + 9, name, size=11, anchor="start")


def kstudy_svg(study):
    svg = Svg(560, 380, f"Robust accuracy vs k ({study.model_id})")
    ks = study.k_values
    lows = [study.summaries[k].low for k in ks]
    highs = [study.summaries[k].high for k in ks]
    ylim = _padded(min(lows), max(highs))
    xlog = len(ks) > 1 and ks[-1] / ks[0] >= 10
    xlim = (ks[0] / 1.3, ks[-1] * 1.3) if xlog else _padded(ks[0], ks[-1])
    ax = Axes(svg, (80, 40, 450, 280), xlim, ylim, "k (samples per test point)", "robust accuracy",
              f"{study.model_id}: eps_train={_label(study.eps_train)}, eps_test={_label(study.eps_test)}",
              xlog=xlog, xticks=ks)
    pts = [(ax.sx(k), ax.sy(study.summaries[k].mean)) for k in ks]
    svg.add("polyline", points=" ".join(f"{_f(x)},{_f(y)}" for x, y in pts), fill="none",
            stroke=PALETTE[0], stroke_width=1.5)
    for k, (x, y) in zip(ks, pts):
        s = study.summaries[k]
        ax.errbar(x, s.mean, s.ci95_half_width, PALETTE[0])
        svg.add("circle", cx=x, cy=y, r=3.5, fill=PALETTE[0], data_k=k, data_value=repr(s.mean),
                data_ci95=repr(s.ci95_half_width))
    return svg.render()


def models_svg(matrix):
    """Clean accuracy and MSCR per eps_train, one bar per model."""
    panels = [("clean accuracy", lambda c: c.clean)]
    if matrix.mscr_requested:
        panels.append(("MSCR", lambda c: c.mscr))
    eps = sorted({e for _, e in matrix.columns()})
    models = matrix.model_ids
    height = 60 + 300 * len(panels)
    svg = Svg(720, height, "Model comparison across eps_train")
    for p, (name, get) in enumerate(panels):
        vals = [(m, e, get(matrix.cell(m, e))) for m in models for e in eps if (m, e) in matrix.cells]
        vals = [v for v in vals if v[2] is not None]
        lo = min([0.0] + [s.low for *_, s in vals])
        hi = max([0.0] + [s.high for *_, s in vals])
        if name == "clean accuracy" and vals:
            lo = min(s.low for *_, s in vals)
        ylim = _padded(lo, hi)
        ax = Axes(svg, (80, 40 + 300 * p, 500, 220), (0, len(eps)), ylim, "eps_train", name, name,
                  xticks=[])
        group_w = 500 / max(1, len(eps))
        bar_w = group_w * 0.8 / len(models)
        base = min(max(0.0, ylim[0]), ylim[1]) if name == "MSCR" else ylim[0]
        for gi, e in enumerate(eps):
            gx = ax.x0 + gi * group_w
            svg.text(gx + group_w / 2, ax.y0 + ax.h + 16, _label(e), size=10)
            for mi, m in enumerate(models):
                cell = matrix.cells.get((m, e))
                s = None if cell is None else get(cell)
                if s is None:
                    continue
                x = gx + group_w * 0.1 + mi * bar_w
                y_top, y_base = ax.sy(max(s.mean, base)), ax.sy(min(s.mean, base))
                color = PALETTE[mi % len(PALETTE)]
                svg.add("rect", x=x, y=y_top, width=bar_w, height=max(0.0, y_base - y_top), fill=color,
                        fill_opacity=0.8, data_model=m, data_eps_train=repr(e), data_value=repr(s.mean),
                        data_ci95=repr(s.ci95_half_width))
                ax.errbar(x + bar_w / 2, s.mean, s.ci95_half_width, "#000000")
        if name == "MSCR" and ylim[0] < 0 < ylim[1]:
            svg.line(ax.x0, ax.sy(0.0), ax.x0 + ax.w, ax.sy(0.0), stroke="#000000", stroke_dasharray="4 3")
    _legend(svg, 600, 50, models)
    return svg.render()


def tradeoff_svg(matrix, model_ids=None):
    """Clean accuracy against MSCR, one path per model ordered by eps_train."""
    curves = {}
    for m in model_ids or matrix.model_ids:
        try:
            curves[m] = tradeoff_curve(matrix, m)
        except ValidationError:
            continue
    if not curves:
        return None
    pts = [p for c in curves.values() for p in c]
    xlim = _padded(min(p.mscr.low for p in pts), max(p.mscr.high for p in pts))
    ylim = _padded(min(p.clean.low for p in pts), max(p.clean.high for p in pts))
    svg = Svg(640, 460, "Clean accuracy vs MSCR")
    ax = Axes(svg, (80, 40, 420, 360), xlim, ylim, "MSCR", "clean accuracy",
              "Clean accuracy vs MSCR by eps_train")
    placed = []
    for mi, (m, curve) in enumerate(curves.items()):
        color = PALETTE[mi % len(PALETTE)]
        xy = [(ax.sx(p.mscr.mean), ax.sy(p.clean.mean)) for p in curve]
        svg.add("polyline", points=" ".join(f"{_f(x)},{_f(y)}" for x, y in xy), fill="none",
                stroke=color, stroke_width=1.2)
        for p, (x, y) in zip(curve, xy):
            base = p.eps_train == 0.0
            svg.add("circle", cx=x, cy=y, r=5.5 if base else 3.5,
                    fill="#ffffff" if p.contradicts_tradeoff else color, stroke=color, stroke_width=1.5,
                    data_model=m, data_eps_train=repr(p.eps_train), data_clean=repr(p.clean.mean),
                    data_mscr=repr(p.mscr.mean), data_beats_baseline=int(p.contradicts_tradeoff))
            # skip labels that would land on top of one already drawn
            if all(abs(x - px) > 40 or abs(y - py) > 11 for px, py in placed):
                placed.append((x, y))
                svg.text(x + 6, y - 6, _label(p.eps_train), size=9, anchor="start", fill=color)
    _legend(svg, 515, 50, list(curves))
    svg.text(515, 50 + 16 * len(curves) + 14, "large: eps_train = 0", size=10, anchor="start")
    svg.text(515, 50 + 16 * len(curves) + 28, "hollow: beats baseline", size=10, anchor="start")
    return svg.render()


def _shade(t):
    t = min(1.0, max(0.0, t))
    r, g, b = (int(round(a + (z - a) * t)) for a, z in ((247, 8), (251, 48), (255, 107)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_value(matrix, model_id, eps_train, eps_test):
    c = matrix.cell(model_id, eps_train)
    return c.clean.mean if eps_test == 0 else c.robust[eps_test].mean


def heatmap_svg(matrix, model_id):
    cols = sorted(e for m, e in matrix.columns() if m == model_id)
    rows = list(matrix.eps_test)
    optima = {r.eps_test: r.best_eps_train for r in optima_report(matrix, model_id)}
    values = {(et, er): heatmap_value(matrix, model_id, et, er) for et in cols for er in rows}
    lo, hi = min(values.values()), max(values.values())
    cw, ch = max(40, min(90, 560 // len(cols))), max(24, min(50, 400 // len(rows)))
    x0, y0 = 110, 50
    svg = Svg(x0 + cw * len(cols) + 40, y0 + ch * len(rows) + 70, f"Robust accuracy heatmap ({model_id})")
    svg.text(x0 + cw * len(cols) / 2, 24, f"{model_id}: accuracy by eps_train (x) and eps_test (y)",
             size=13, font_weight="bold")
    for ri, er in enumerate(rows):
        y = y0 + ri * ch
        svg.text(x0 - 6, y + ch / 2 + 4, _label(er), size=10, anchor="end")
        for ci, et in enumerate(cols):
            x = x0 + ci * cw
            v = values[(et, er)]
            t = 0.5 if hi == lo else (v - lo) / (hi - lo)
            diag = AccuracyMatrix.is_diagonal(et, er)
            svg.add("rect", x=float(x), y=float(y), width=float(cw), height=float(ch), fill=_shade(t),
                    stroke="#000000" if diag else "#ffffff", stroke_width=2 if diag else 1,
                    data_eps_train=repr(et), data_eps_test=repr(er), data_value=repr(v),
                    data_diagonal=int(diag))
            svg.text(x + cw / 2, y + ch / 2 + 4, f"{v:.3f}", size=9, fill="#000000" if t < 0.6 else "#ffffff")
            if optima[er] == et:
                svg.add("circle", cx=float(x + cw - 7), cy=float(y + 7), r=4.0, fill="#ff7f0e",
                        stroke="#000000", stroke_width=0.8, data_optimum=1, data_eps_train=repr(et),
                        data_eps_test=repr(er))
    for ci, et in enumerate(cols):
        svg.text(x0 + ci * cw + cw / 2, y0 + ch * len(rows) + 16, _label(et), size=10)
    svg.text(x0 + cw * len(cols) / 2, y0 + ch * len(rows) + 36, "eps_train", size=12)
    svg.text(x0 + cw * len(cols) / 2, y0 + ch * len(rows) + 54,
             "outlined: eps_train = eps_test; dot: best eps_train for the row", size=10)
    return svg.render()


# ------------------------------------------------------------------- render

def _write(path, text):
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def render(result=None, out_dir=".", kstudy=None):
    """Write every table, dump and figure for ``result`` and/or ``kstudy``."""
    if result is None and kstudy is None:
        raise ValidationError("nothing to render: pass an experiment result and/or a k-study")
    if result is not None and not result.matrix.cells:
        raise ValidationError("cannot render an empty accuracy matrix")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise MSCRError(f"output directory {out} is not writable: {exc}") from exc

    bundle = ReportBundle(out)
    files = bundle.files
    files["metadata.json"] = _write(out / "metadata.json", _dump(metadata(result, kstudy)))
    if result is not None:
        m = result.matrix
        files["matrix.csv"] = _write(out / "matrix.csv", matrix_csv(m))
        files["runs.json"] = _write(out / "runs.json", _dump(runs_json(result)))
        files["table.md"] = _write(out / "table.md", markdown_table(m))
        files["models.svg"] = _write(out / "models.svg", models_svg(m))
        trade = tradeoff_svg(m)
        if trade is None:
            bundle.flags.append("tradeoff plot skipped: needs eps_train = 0 plus another value and MSCR")
        else:
            files["tradeoff.svg"] = _write(out / "tradeoff.svg", trade)
        for model_id in m.model_ids:
            n_cols = sum(1 for mm, _ in m.columns() if mm == model_id)
            if n_cols * len(m.eps_test) <= 1:
                bundle.flags.append(f"heatmap skipped for {model_id}: 1x1 matrix")
                continue
            name = f"heatmap_{_safe(model_id)}.svg"
            files[name] = _write(out / name, heatmap_svg(m, model_id))
        if any(c.mscr is not None and c.mscr.single_run for c in m.cells.values()) or \
                any(c.clean.single_run for c in m.cells.values()):
            bundle.flags.append("single run: confidence intervals have zero width")
        undefined = sum(c.runs_without_mscr for c in m.cells.values())
        if undefined:
            bundle.flags.append(f"MSCR undefined (clean accuracy 0) in {undefined} run(s)")
    if kstudy is not None:
        files["kstudy.json"] = _write(out / "kstudy.json", _dump(kstudy_json(kstudy)))
        files["kstudy.svg"] = _write(out / "kstudy.svg", kstudy_svg(kstudy))
    if bundle.flags:
        files["flags.txt"] = _write(out / "flags.txt", "\n".join(bundle.flags) + "\n")
    return bundle

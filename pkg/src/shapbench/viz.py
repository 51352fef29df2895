"""Dependency-free SVG plots with CSV companions, built from BenchmarkReports only.

Every plot is a standalone SVG 1.1 document with width, height and viewBox and
no external references. Output depends only on report data, so equal reports
give byte-identical files. Each explainer keeps one colour across all plots.
Files are named ``<kind>_<dataset>[_<option>].svg`` plus a matching ``.csv``.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
SHAPES = ("circle", "square", "diamond")
KNOWN_ORDER = ("ground-truth", "exact", "kernelshap", "unbiased-ks", "monte-carlo",
               "fastshap", "expected-grad")
GROUND_TRUTH = "ground-truth"

WIDTH, HEIGHT = 720, 420
LEGEND_W = 170
MARGIN = dict(left=70, right=20, top=40, bottom=60)


class PlotError(ValueError):
    pass


def series_style(name: str, index: int | None = None) -> tuple[str, str]:
    """(colour, marker) for a series. Known explainers have fixed slots."""
    base = name.split(":")[0]
    if base in KNOWN_ORDER:
        slot = KNOWN_ORDER.index(base)
    else:
        slot = len(KNOWN_ORDER) + (sum(base.encode()) if index is None else index)
    return PALETTE[slot % len(PALETTE)], SHAPES[(slot // len(PALETTE)) % len(SHAPES)]


def explainer_color(name: str) -> str:
    return series_style(name)[0]


def _n(v: float) -> str:
    """Fixed two-decimal coordinates keep the SVG text deterministic."""
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _tick(v: float) -> str:
    return format(v, ".3g")


class Svg:
    def __init__(self, title: str, width: int = WIDTH, height: int = HEIGHT):
        self.w, self.h = width, height
        self.parts: list[str] = []
        self.text(width / 2, 22, title, size=14)

    def add(self, s: str) -> None:
        self.parts.append(s)

    def text(self, x, y, s, anchor="middle", size=12, rotate=False, color="#000000"):
        rot = f' transform="rotate(-90 {_n(x)} {_n(y)})"' if rotate else ""
        self.add(f'<text x="{_n(x)}" y="{_n(y)}" font-size="{size}" text-anchor="{anchor}" '
                 f'fill="{color}"{rot}>{escape(str(s))}</text>')

    def marker(self, x, y, name, r=4.0):
        color, shape = series_style(name)
        if shape == "circle":
            self.add(f'<circle cx="{_n(x)}" cy="{_n(y)}" r="{_n(r)}" fill="{color}"/>')
        elif shape == "square":
            self.add(f'<rect x="{_n(x - r)}" y="{_n(y - r)}" width="{_n(2 * r)}" height="{_n(2 * r)}" fill="{color}"/>')
        else:
            pts = f"{_n(x)},{_n(y - r)} {_n(x + r)},{_n(y)} {_n(x)},{_n(y + r)} {_n(x - r)},{_n(y)}"
            self.add(f'<polygon points="{pts}" fill="{color}"/>')

    def legend(self, entries: list[tuple[str, str]], x: float, y: float = 50):
        for i, (name, label) in enumerate(entries):
            yy = y + 18 * i
            self.marker(x + 5, yy - 4, name)
            self.text(x + 15, yy, label, anchor="start", size=11)

    def render(self) -> str:
        head = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.w}" height="{self.h}" '
            f'viewBox="0 0 {self.w} {self.h}" font-family="sans-serif">',
            f'<rect x="0" y="0" width="{self.w}" height="{self.h}" fill="#ffffff"/>',
        ]
        return "\n".join(head + self.parts + ["</svg>"]) + "\n"


class Axes:
    """A plotting panel at (x, y, w, h) in SVG coordinates."""

    def __init__(self, svg: Svg, box, xlim, ylim, log_x=False, log_y=False):
        self.svg = svg
        self.bx, self.by, self.bw, self.bh = box
        self.log_x, self.log_y = log_x, log_y
        self.x0, self.x1 = self._lim(xlim, log_x)
        self.y0, self.y1 = self._lim(ylim, log_y)

    @staticmethod
    def _lim(lim, log):
        lo, hi = float(lim[0]), float(lim[1])
        if log:
            lo, hi = math.log10(max(lo, 1e-300)), math.log10(max(hi, 1e-300))
        if hi <= lo:
            pad = abs(lo) * 0.1 or 1.0
            lo, hi = lo - pad, hi + pad
        return lo, hi

    def px(self, x: float) -> float:
        v = math.log10(max(x, 1e-300)) if self.log_x else x
        return self.bx + (v - self.x0) / (self.x1 - self.x0) * self.bw

    def py(self, y: float) -> float:
        v = math.log10(max(y, 1e-300)) if self.log_y else y
        return self.by + self.bh - (v - self.y0) / (self.y1 - self.y0) * self.bh

    def frame(self, xlabel: str, ylabel: str, xticks: bool = True):
        s = self.svg
        s.add(f'<rect x="{_n(self.bx)}" y="{_n(self.by)}" width="{_n(self.bw)}" height="{_n(self.bh)}" '
              f'fill="none" stroke="#333333"/>')
        for i in range(5):
            t = i / 4
            yv = self.y0 + t * (self.y1 - self.y0)
            y = self.by + self.bh - t * self.bh
            s.add(f'<line x1="{_n(self.bx - 4)}" y1="{_n(y)}" x2="{_n(self.bx)}" y2="{_n(y)}" stroke="#333333"/>')
            s.text(self.bx - 6, y + 4, _tick(10 ** yv if self.log_y else yv), anchor="end", size=10)
            if xticks:
                xv = self.x0 + t * (self.x1 - self.x0)
                x = self.bx + t * self.bw
                s.add(f'<line x1="{_n(x)}" y1="{_n(self.by + self.bh)}" x2="{_n(x)}" '
                      f'y2="{_n(self.by + self.bh + 4)}" stroke="#333333"/>')
                s.text(x, self.by + self.bh + 16, _tick(10 ** xv if self.log_x else xv), size=10)
        s.text(self.bx + self.bw / 2, self.by + self.bh + 40, xlabel)
        s.text(self.bx - 50, self.by + self.bh / 2, ylabel, rotate=True)


def _plot_box(n_panels: int = 1, index: int = 0, legend: bool = True):
    usable = WIDTH - (LEGEND_W if legend else 0)
    pw = usable / n_panels
    x = pw * index + MARGIN["left"]
    w = pw - MARGIN["left"] - MARGIN["right"]
    return x, MARGIN["top"], w, HEIGHT - MARGIN["top"] - MARGIN["bottom"]


def _padded(vals) -> tuple[float, float]:
    vals = [float(v) for v in vals if v is not None and math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(out_dir, stem: str, svg: str, header: list[str], rows: list[list]) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    svg_path, csv_path = out_dir / f"{stem}.svg", out_dir / f"{stem}.csv"
    svg_path.write_text(svg, encoding="utf-8")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return [svg_path, csv_path]


def _ok_cells(ds: dict) -> dict:
    return {n: c for n, c in ds["explainers"].items() if c["status"] == "ok"}


# -- bar plot -----------------------------------------------------------------

def bar_plot(report, dataset: str, scope="global", out_dir=None) -> list[Path]:
    """Grouped bars per feature, ground truth first then each explainer.

    ``scope`` is "global" (mean of per-sample attributions) or a sample
    position for a local plot.
    """
    ds = report.dataset(dataset)
    gt = np.asarray(ds["ground_truth"]["phi"], dtype=np.float64)
    cells = _ok_cells(ds)
    if scope == "global":
        pick = lambda a: np.asarray(a, dtype=np.float64).mean(axis=0)
        option = "global"
    else:
        i = int(scope)
        if not 0 <= i < gt.shape[0]:
            raise PlotError(f"sample index {i} out of range (0..{gt.shape[0] - 1})")
        pick = lambda a: np.asarray(a, dtype=np.float64)[i]
        option = f"sample{i}"
    series = {GROUND_TRUTH: pick(gt)}
    for n, c in cells.items():
        series[n] = pick(c["phi"])
    names = list(series)
    feats = ds["feature_names"]
    svg = Svg(f"{option} attributions on {dataset}")
    box = _plot_box()
    vals = [v for s in series.values() for v in s] + [0.0]
    ax = Axes(svg, box, (0, len(feats)), _padded(vals))
    ax.frame("feature", "attribution", xticks=False)
    zero = ax.py(0.0)
    svg.add(f'<line x1="{_n(box[0])}" y1="{_n(zero)}" x2="{_n(box[0] + box[2])}" y2="{_n(zero)}" stroke="#999999"/>')
    group = box[2] / len(feats)
    bw = group * 0.8 / len(names)
    for j, f in enumerate(feats):
        gx = box[0] + group * j + group * 0.1
        for k, n in enumerate(names):
            v = float(series[n][j])
            y = ax.py(v)
            svg.add(f'<rect x="{_n(gx + k * bw)}" y="{_n(min(y, zero))}" width="{_n(bw)}" '
                    f'height="{_n(abs(zero - y))}" fill="{explainer_color(n)}"/>')
        svg.text(gx + group * 0.4, box[1] + box[3] + 16, f, size=10)
    svg.legend([(n, n) for n in names], WIDTH - LEGEND_W + 10)
    rows = [[f, n, float(series[n][j]), float(series[n][j] - series[GROUND_TRUTH][j])]
            for j, f in enumerate(feats) for n in names]
    return _write(out_dir, f"bar_{dataset}_{option}", svg.render(), ["feature", "explainer", "phi", "delta"], rows)


# -- quadrant plot ------------------------------------------------------------

def quadrant_points(report, dataset: str, metric: str, cost: str = "rows") -> dict[str, tuple[float, float]]:
    """Explainer -> (cost, P). ``cost`` is "rows" (black-box rows evaluated, training
    included) or "time" (wall seconds, training plus inference, from timing data)."""
    ds = report.dataset(dataset)
    p = ds.get("P", {}).get(metric)
    if p is None:
        raise PlotError(f"no P scores for metric {metric!r} on {dataset}")
    times = report.timing.get("datasets", {}).get(dataset, {}).get("explainers", {})
    out = {}
    for n, score in p["scores"].items():
        c = ds["explainers"][n]
        if cost == "time":
            if n not in times:
                continue
            x = times[n]["training_seconds"] + times[n]["inference_seconds"]
        else:
            x = float(c["cost"]["training_rows"] + c["cost"]["inference_rows"])
        out[n] = (max(float(x), 1e-12), float(score))
    return out


def quadrant_plot(report, dataset: str, metric: str, out_dir=None, cost: str = "rows") -> list[Path]:
    """Overall cost (log x) against P (y in [0,1]); gridlines at both medians.

    Upper left is cheap and accurate. The default cost axis is rows evaluated so
    the plot is deterministic; ``cost="time"`` uses measured wall seconds.
    """
    ds = report.dataset(dataset)
    pts = quadrant_points(report, dataset, metric, cost)
    if len(pts) < 2:
        raise PlotError("quadrant plot needs at least two explainers with results")
    degenerate = bool(ds["P"][metric]["degenerate"])
    xlabel = "black-box rows evaluated (log)" if cost == "rows" else "overall time, s (log)"
    names = list(pts)
    xs = [pts[n][0] for n in names]
    svg = Svg(f"cost vs P({metric}) on {dataset}")
    box = _plot_box()
    ax = Axes(svg, box, (min(xs) / 2, max(xs) * 2), (0.0, 1.0), log_x=True)
    mx = float(np.median(xs))
    my = float(np.median([pts[n][1] for n in names]))
    qx, qy = ax.px(mx), ax.py(my)
    svg.add(f'<rect x="{_n(box[0])}" y="{_n(box[1])}" width="{_n(qx - box[0])}" height="{_n(qy - box[1])}" fill="#e8f4e8"/>')
    svg.add(f'<line x1="{_n(qx)}" y1="{_n(box[1])}" x2="{_n(qx)}" y2="{_n(box[1] + box[3])}" stroke="#999999" stroke-dasharray="4 3"/>')
    svg.add(f'<line x1="{_n(box[0])}" y1="{_n(qy)}" x2="{_n(box[0] + box[2])}" y2="{_n(qy)}" stroke="#999999" stroke-dasharray="4 3"/>')
    ax.frame(xlabel, f"P({metric})")
    for n in names:
        x, y = ax.px(pts[n][0]), ax.py(pts[n][1])
        svg.marker(x, y, n, 5)
        svg.text(x + 7, y - 7, n, anchor="start", size=10)
    if degenerate:
        svg.text(box[0] + box[2] / 2, box[1] + 16, "degenerate: all distances equal, P set to 1", size=11, color="#d62728")
    svg.legend([(n, n) for n in names], WIDTH - LEGEND_W + 10)
    col = "rows" if cost == "rows" else "time_s"
    rows = [[n, pts[n][0], pts[n][1]] for n in names]
    option = metric if cost == "rows" else f"{metric}_time"
    return _write(out_dir, f"quadrant_{dataset}_{option}", svg.render(), ["explainer", col, "P"], rows)


# -- sweep curves -------------------------------------------------------------

def sweep_series(report, sweep: str, cost: str = "rows") -> tuple[dict, str, str]:
    """Explainer -> (xs, ys) for one sweep; also the x label and dataset tag."""
    sw = report.data.get("sweeps", {}).get(sweep)
    if sw is None:
        raise PlotError(f"report has no {sweep} sweep")
    out = {}
    if cost == "time":
        for n, recs in report.timing.get("sweeps", {}).get(sweep, {}).items():
            key = "n_samples" if sweep == "samples" else "n_features"
            out[n] = ([r[key] for r in recs], [r["wall_seconds"] for r in recs])
    elif sweep == "samples":
        out = {n: (list(sw["counts"]), list(v["inference_rows"])) for n, v in sw["series"].items()}
    else:
        out = {n: (list(v["m"]), list(v["inference_rows"])) for n, v in sw["series"].items()}
    if sweep == "samples":
        return out, "instances explained", sw["dataset"]
    return out, "number of features M", "synthetic"


def time_curves(report, sweep: str, out_dir=None, cost: str = "rows") -> list[Path]:
    """One polyline per explainer over a sweep. Features sweep uses log y.

    Series with fewer than two points are skipped and listed on the plot.
    """
    series, xlabel, tag = sweep_series(report, sweep, cost)
    ylabel = "black-box rows evaluated" if cost == "rows" else "inference time, s"
    log_y = sweep == "features"
    kept = {n: s for n, s in series.items() if len(s[0]) >= 2}
    skipped = [n for n in series if n not in kept]
    svg = Svg(f"{ylabel} vs {xlabel}")
    box = _plot_box()
    xs = [x for sx, _ in kept.values() for x in sx]
    ys = [y for _, sy in kept.values() for y in sy]
    if log_y:
        pos = [y for y in ys if y > 0] or [1.0]
        ylim = (min(pos) / 2, max(pos) * 2)
    else:
        ylim = _padded(ys + [0.0])
    ax = Axes(svg, box, _padded(xs) if xs else (0, 1), ylim, log_y=log_y)
    ax.frame(xlabel, ylabel + (" (log)" if log_y else ""))
    for n, (sx, sy) in kept.items():
        pts = [(ax.px(x), ax.py(y)) for x, y in zip(sx, sy) if y > 0 or not log_y]
        path = " ".join(f"{_n(a)},{_n(b)}" for a, b in pts)
        svg.add(f'<polyline points="{path}" fill="none" stroke="{explainer_color(n)}" stroke-width="2"/>')
        for a, b in pts:
            svg.marker(a, b, n, 3)
    for i, n in enumerate(skipped):
        svg.text(box[0] + 8, box[1] + 16 + 14 * i, f"{n}: fewer than 2 points, skipped", anchor="start", size=10)
    svg.legend([(n, n) for n in kept], WIDTH - LEGEND_W + 10)
    option = sweep if cost == "rows" else f"{sweep}_time"
    kind = "time_vs_samples" if sweep == "samples" else "time_vs_features"
    rows = [[n, x, y] for n, (sx, sy) in series.items() for x, y in zip(sx, sy)]
    xcol = "n_samples" if sweep == "samples" else "n_features"
    ycol = "rows_evaluated" if cost == "rows" else "wall_seconds"
    return _write(out_dir, f"{kind}_{tag}" + ("" if cost == "rows" else "_time"), svg.render(),
                  ["explainer", xcol, ycol], rows)


# -- AUC curves ---------------------------------------------------------------

def auc_curves(report, dataset: str, out_dir=None) -> list[Path]:
    """Mean exclusion (left) and inclusion (right) curves over fraction of features."""
    ds = report.dataset(dataset)
    cells = {n: c for n, c in _ok_cells(ds).items() if "auc" in c}
    if not cells:
        raise PlotError(f"no AUC data for {dataset}")
    svg = Svg(f"exclusion and inclusion curves on {dataset}")
    rows = []
    allv = [v for c in cells.values() for k in ("inclusion", "exclusion") for v in c["auc"][k]["mean_curve"]]
    for panel, kind in enumerate(("exclusion", "inclusion")):
        ax = Axes(svg, _plot_box(2, panel), (0.0, 1.0), _padded(allv))
        ax.frame("fraction of features", "mean predicted-class probability")
        svg.text(ax.bx + ax.bw / 2, ax.by - 6, kind, size=12)
        for n, c in cells.items():
            ys = c["auc"][kind]["mean_curve"]
            m = len(ys) - 1
            pts = [(ax.px(k / m), ax.py(y)) for k, y in enumerate(ys)]
            path = " ".join(f"{_n(a)},{_n(b)}" for a, b in pts)
            svg.add(f'<polyline points="{path}" fill="none" stroke="{explainer_color(n)}" stroke-width="2"/>')
            rows += [[n, kind, k / m, float(y)] for k, y in enumerate(ys)]
    legend = [(n, f"{n} exc {c['auc']['exclusion']['mean_auc']:.3f} inc {c['auc']['inclusion']['mean_auc']:.3f}")
              for n, c in cells.items()]
    svg.legend(legend, WIDTH - LEGEND_W + 10, y=HEIGHT - 20 - 18 * len(legend))
    return _write(out_dir, f"auc_curves_{dataset}", svg.render(), ["explainer", "curve", "fraction", "value"], rows)


def plots_from_report(report, out_dir, with_wall_time: bool = False) -> list[Path]:
    """Every standard plot for a run. Cost axes use rows evaluated unless ``with_wall_time``
    adds the (non-deterministic) wall-time variants as well."""
    made: list[Path] = []
    metrics = report.data["config"]["metrics"]
    for name, ds in report.data["datasets"].items():
        if not _ok_cells(ds):
            continue
        made += bar_plot(report, name, "global", out_dir)
        made += bar_plot(report, name, 0, out_dir)
        for metric in metrics:
            if len(ds.get("P", {}).get(metric, {}).get("scores", {})) >= 2:
                made += quadrant_plot(report, name, metric, out_dir)
                if with_wall_time:
                    made += quadrant_plot(report, name, metric, out_dir, cost="time")
        if any("auc" in c for c in _ok_cells(ds).values()):
            made += auc_curves(report, name, out_dir)
    for sweep in ("samples", "features"):
        if sweep in report.data.get("sweeps", {}):
            made += time_curves(report, sweep, out_dir)
            if with_wall_time:
                made += time_curves(report, sweep, out_dir, cost="time")
    return made

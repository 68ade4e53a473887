"""Deterministic standalone SVG rendering for instability reports and simulations.

Every document has one ``<svg>`` root with a ``viewBox``, no external
references, and coordinates written with fixed precision, so identical
inputs give byte-identical output. Elements carry ``class`` attributes
(``identity-line``, ``curve original``, ``curve bootstrap``, ``point`` ...)
that tests and stylesheets can target.
"""

from xml.sax.saxutils import escape, quoteattr

import numpy as np

RENDERER_VERSION = "1"
MAX_POINTS = 200_000
MAX_CURVES = 200

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 64, 20, 36, 52


def _f(v):
    return f"{v:.2f}"


class Canvas:
    """A single chart panel with linear axes."""

    def __init__(self, title, xlabel, ylabel, xlim, ylim, kind):
        self.xlim = tuple(float(v) for v in xlim)
        self.ylim = tuple(float(v) for v in ylim)
        if self.xlim[1] <= self.xlim[0]:
            self.xlim = (self.xlim[0] - 0.5, self.xlim[0] + 0.5)
        if self.ylim[1] <= self.ylim[0]:
            self.ylim = (self.ylim[0] - 0.5, self.ylim[0] + 0.5)
        self.kind = kind
        self.body = []
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.xticks = None

    def sx(self, x):
        lo, hi = self.xlim
        return _ML + (np.asarray(x, dtype=float) - lo) / (hi - lo) * (_W - _ML - _MR)

    def sy(self, y):
        lo, hi = self.ylim
        return _H - _MB - (np.asarray(y, dtype=float) - lo) / (hi - lo) * (_H - _MT - _MB)

    def line(self, x0, y0, x1, y1, cls, **style):
        self.body.append(
            f'<line class="{cls}" x1="{_f(self.sx(x0))}" y1="{_f(self.sy(y0))}" '
            f'x2="{_f(self.sx(x1))}" y2="{_f(self.sy(y1))}"{_style(style)}/>'
        )

    def polyline(self, xs, ys, cls, **style):
        px, py = self.sx(xs), self.sy(ys)
        if px.size == 1:
            # a single-point curve still needs a visible segment
            px = np.array([px[0] - 1.0, px[0] + 1.0])
            py = np.array([py[0], py[0]])
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(px, py))
        self.body.append(f'<polyline class="{cls}" fill="none" points="{pts}"{_style(style)}/>')

    def points(self, xs, ys, cls="point", r=1.5, **style):
        px, py = self.sx(xs), self.sy(ys)
        # one <path> of zero-length round-capped segments keeps large clouds compact
        d = "".join(f"M{_f(a)} {_f(b)}h0" for a, b in zip(px, py))
        self.body.append(
            f'<path class="{cls}" d="{d}" stroke-linecap="round" stroke-width="{_f(2 * r)}"{_style(style)}/>'
        )

    def rect(self, x0, x1, y0, y1, cls, **style):
        ax, bx = self.sx(x0), self.sx(x1)
        top, bot = self.sy(y1), self.sy(y0)
        self.body.append(
            f'<rect class="{cls}" x="{_f(ax)}" y="{_f(top)}" width="{_f(bx - ax)}" '
            f'height="{_f(bot - top)}"{_style(style)}/>'
        )

    def render(self):
        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" class="plot {self.kind}" data-renderer="{RENDERER_VERSION}">',
            f'<rect class="background" x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
            f'<text class="title" x="{_W / 2:.2f}" y="22" text-anchor="middle" font-size="14" '
            f'font-family="sans-serif">{escape(self.title)}</text>',
        ]
        out.extend(self._axes())
        out.append('<g class="data" fill="none" stroke="black">')
        out.extend(self.body)
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _axes(self):
        x0, x1 = _ML, _W - _MR
        y0, y1 = _H - _MB, _MT
        out = [
            '<g class="axes" stroke="black" fill="black" font-size="11" font-family="sans-serif">',
            f'<line class="axis x-axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>',
            f'<line class="axis y-axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>',
        ]
        xt = self.xticks or [(v, _tick_label(v)) for v in np.linspace(*self.xlim, 6)]
        for v, label in xt:
            px = _f(self.sx(v))
            out.append(f'<line class="tick" x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 4}"/>')
            out.append(f'<text class="tick-label" x="{px}" y="{y0 + 16}" text-anchor="middle" '
                       f'stroke="none">{escape(label)}</text>')
        for v in np.linspace(*self.ylim, 6):
            py = _f(self.sy(v))
            out.append(f'<line class="tick" x1="{x0 - 4}" y1="{py}" x2="{x0}" y2="{py}"/>')
            out.append(f'<text class="tick-label" x="{x0 - 7}" y="{py}" text-anchor="end" '
                       f'dominant-baseline="middle" stroke="none">{escape(_tick_label(v))}</text>')
        out.append(f'<text class="axis-label" x="{(x0 + x1) / 2:.2f}" y="{_H - 12}" text-anchor="middle" '
                   f'stroke="none">{escape(self.xlabel)}</text>')
        out.append(f'<text class="axis-label" x="14" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" '
                   f'stroke="none" transform="rotate(-90 14 {(y0 + y1) / 2:.2f})">{escape(self.ylabel)}</text>')
        out.append("</g>")
        return out


def _style(style):
    return "".join(f" {k.replace('_', '-')}={quoteattr(str(v))}" for k, v in sorted(style.items()))


def _tick_label(v):
    return f"{v:.3g}" if abs(v) >= 1e-12 else "0"


def _pad(lo, hi, frac=0.05):
    span = hi - lo
    if span <= 0:
        span = max(abs(hi), 1e-3)
    return lo - frac * span, hi + frac * span


def _sample(total, k, seed):
    """Sorted indices of ``k`` of ``total`` items, reproducible under ``seed``."""
    if total <= k:
        return np.arange(total)
    return np.sort(np.random.default_rng(seed).choice(total, size=k, replace=False))


# ---- bootstrap report plots ------------------------------------------------

def render_prediction_instability(report, max_points=MAX_POINTS, seed=0):
    """Bootstrap risks against original risks, identity line and smoothed 95% band.

    When N*B exceeds ``max_points`` a reproducible uniform sample of the
    (individual, replicate) pairs is drawn; the CSV outputs keep every point.
    """
    bp, band = report.predictions, report.band
    c = Canvas("Prediction instability", "Estimated risk from original model",
               "Estimated risk from bootstrap models", (0, 1), (0, 1), "prediction_instability")
    xs = np.repeat(bp.original, bp.B)
    ys = bp.bootstrap.ravel()
    keep = _sample(xs.size, max_points, seed)
    c.points(xs[keep], ys[keep], "point bootstrap", r=1.2, stroke_opacity=0.3)
    c.line(0, 0, 1, 1, "identity-line", stroke="grey", stroke_dasharray="4 3")
    c.polyline(band.grid, band.lower_smooth, "band lower", stroke="red", stroke_width=1.5)
    c.polyline(band.grid, band.upper_smooth, "band upper", stroke="red", stroke_width=1.5)
    return c.render()


def render_calibration_instability(report, max_curves=MAX_CURVES, seed=0, opacity=0.25):
    """Original calibration curve over a reproducible sample of bootstrap curves."""
    c = Canvas("Calibration instability", "Estimated risk", "Observed proportion", (0, 1), (0, 1),
               "calibration_instability")
    c.line(0, 0, 1, 1, "reference-line", stroke="grey", stroke_dasharray="4 3")
    for k in _sample(len(report.calibration_bootstrap), max_curves, seed):
        cv = report.calibration_bootstrap[k]
        c.polyline(cv.x, cv.y, "curve bootstrap", stroke="steelblue", stroke_opacity=opacity)
    cv = report.calibration_original
    c.polyline(cv.x, cv.y, "curve original", stroke="black", stroke_width=2)
    return c.render()


def render_mape_instability(report):
    mape = report.mape_per_individual
    top = float(mape.max()) if mape.size else 0.0
    c = Canvas("MAPE instability", "Estimated risk from original model", "MAPE", (0, 1),
               (0, top * 1.05 if top > 0 else 0.01), "mape_instability")
    c.points(report.predictions.original, mape, "point", r=1.5, stroke_opacity=0.6)
    return c.render()


def render_classification_instability(report):
    if report.classification_index is None:
        raise ValueError("report was built without a threshold; no classification index to plot")
    c = Canvas("Classification instability", "Estimated risk from original model",
               "Classification instability index", (0, 1), (0, 1), "classification_instability")
    c.points(report.predictions.original, report.classification_index, "point", r=1.5, stroke_opacity=0.6)
    c.line(report.threshold, 0, report.threshold, 1, "threshold-line", stroke="grey", stroke_dasharray="4 3")
    return c.render()


def render_decision_instability(report, max_curves=MAX_CURVES, seed=0, opacity=0.25):
    if report.decision_original is None:
        raise ValueError("report was built without a threshold; no decision curves to plot")
    d0 = report.decision_original
    curves = [d0.model.y, d0.treat_all.y] + [d.model.y for d in report.decision_bootstrap]
    hi = max(float(np.max(v)) for v in curves)
    lo = max(min(float(np.min(v)) for v in curves), -0.1)
    ylim = _pad(min(lo, 0.0), max(hi, 0.01))
    c = Canvas("Decision curve instability", "Threshold probability", "Net benefit",
               (d0.model.x[0], d0.model.x[-1]), ylim, "decision_instability")
    clip = lambda v: np.clip(v, ylim[0], ylim[1])
    for k in _sample(len(report.decision_bootstrap), max_curves, seed):
        d = report.decision_bootstrap[k]
        c.polyline(d.model.x, clip(d.model.y), "curve bootstrap", stroke="steelblue", stroke_opacity=opacity)
    c.polyline(d0.treat_all.x, clip(d0.treat_all.y), "reference treat-all", stroke="grey")
    c.polyline(d0.treat_none.x, clip(d0.treat_none.y), "reference treat-none", stroke="grey",
               stroke_dasharray="4 3")
    c.polyline(d0.model.x, clip(d0.model.y), "curve original", stroke="black", stroke_width=2)
    return c.render()


def render_c_stat_histogram(report, bins=20):
    if report.c_statistic_bootstrap is None:
        raise ValueError("C-statistics need both outcome classes")
    cb = report.c_statistic_bootstrap
    lo, hi = float(min(cb.min(), report.c_statistic_original)), float(max(cb.max(), report.c_statistic_original))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.005, hi + 0.005
    counts, edges = np.histogram(cb, bins=bins, range=(lo, hi))
    c = Canvas("Bootstrap C-statistics", "C-statistic", "Number of bootstrap models", _pad(lo, hi),
               (0, counts.max() * 1.1), "c_stat_histogram")
    for n, a, b in zip(counts, edges[:-1], edges[1:]):
        if n:
            c.rect(a, b, 0, n, "bar", fill="lightsteelblue", stroke="steelblue")
    c.line(report.c_statistic_original, 0, report.c_statistic_original, counts.max() * 1.1,
           "original-line", stroke="black", stroke_width=2)
    return c.render()


CORE_PLOTS = {
    "prediction_instability": render_prediction_instability,
    "calibration_instability": render_calibration_instability,
    "mape_instability": render_mape_instability,
    "c_stat_histogram": render_c_stat_histogram,
}
THRESHOLD_PLOTS = {
    "classification_instability": render_classification_instability,
    "decision_instability": render_decision_instability,
}


def render_report(report):
    """All applicable plots for a bootstrap report, keyed by plot kind."""
    out = {}
    for name, fn in CORE_PLOTS.items():
        if name == "c_stat_histogram" and report.c_statistic_bootstrap is None:
            continue
        out[name] = fn(report)
    if report.threshold is not None:
        for name, fn in THRESHOLD_PLOTS.items():
            out[name] = fn(report)
    return out


# ---- simulation plots --------------------------------------------------------

def _strip(title, ylabel, kind, sizes, values, ranges, ylim=(0, 1)):
    c = Canvas(title, "Development sample size", ylabel, (-0.5, len(sizes) - 0.5), ylim, kind)
    c.xticks = [(i, str(n)) for i, n in enumerate(sizes)]
    for i, (v, (lo, hi)) in enumerate(zip(values, ranges)):
        # spread replicates deterministically by rank across the category width
        off = (np.argsort(np.argsort(v, kind="stable"), kind="stable") / max(v.size - 1, 1) - 0.5) * 0.5
        c.points(i + off, v, "point", r=1.5, stroke_opacity=0.4)
        c.line(i - 0.35, lo, i + 0.35, lo, "range lower", stroke="red", stroke_width=2)
        c.line(i - 0.35, hi, i + 0.35, hi, "range upper", stroke="red", stroke_width=2)
    return c


def render_sim_level1(result, tables):
    sizes = sorted(result.cells)
    t = tables["level1"].set_index("n_dev")
    c = _strip("Level 1: mean estimated risk", "Mean estimated risk", "sim_level1", sizes,
               [result.cells[n].mean_risk for n in sizes], [(t.loc[n, "lo"], t.loc[n, "hi"]) for n in sizes])
    return c.render()


def render_sim_level2(result, tables):
    sizes = sorted(result.cells)
    t = tables["level2"].set_index("n_dev")
    top = max(float(result.cells[n].mape.max()) for n in sizes)
    c = _strip("Level 2: MAPE against true risk", "MAPE", "sim_level2", sizes,
               [result.cells[n].mape for n in sizes],
               [(t.loc[n, "mape_q25"], t.loc[n, "mape_q75"]) for n in sizes], ylim=(0, top * 1.05 or 0.01))
    return c.render()


def render_sim_level2_calibration(result, n_dev, max_curves=MAX_CURVES, seed=0, opacity=0.25):
    cell = result.cells[n_dev]
    c = Canvas(f"Level 2: calibration, n = {n_dev}", "Estimated risk", "Observed proportion", (0, 1), (0, 1),
               "sim_level2")
    c.line(0, 0, 1, 1, "reference-line", stroke="grey", stroke_dasharray="4 3")
    if cell.calibration_x is not None:
        for k in _sample(cell.calibration_x.shape[0], max_curves, seed):
            c.polyline(cell.calibration_x[k], cell.calibration_y[k], "curve replicate", stroke="steelblue",
                       stroke_opacity=opacity)
    return c.render()


def render_sim_level3(result, tables):
    sizes = sorted(result.cells)
    t = tables["level3"].set_index("n_dev")
    c = _strip("Level 3: subgroup mean risk", "Mean estimated risk in subgroup", "sim_level3", sizes,
               [result.cells[n].subgroup_mean for n in sizes], [(t.loc[n, "lo"], t.loc[n, "hi"]) for n in sizes])
    return c.render()


def render_sim_level4(result, tables, n_dev):
    cell = result.cells[n_dev]
    c = Canvas(f"Level 4: individual risks, n = {n_dev}", "True risk", "Estimated risk", (0, 1), (0, 1),
               "sim_level4")
    c.line(0, 0, 1, 1, "identity-line", stroke="grey", stroke_dasharray="4 3")
    for k, tr in enumerate(result.tracked_true_risk):
        v = cell.tracked[:, k]
        c.points(np.full(v.size, tr), v, "point", r=1.5, stroke_opacity=0.3)
    return c.render()


def render_simulation(result, tables):
    """Figure analogues for a simulation, keyed by file stem."""
    out = {
        "sim_level1": render_sim_level1(result, tables),
        "sim_level2": render_sim_level2(result, tables),
        "sim_level3": render_sim_level3(result, tables),
    }
    for n in sorted(result.cells):
        if result.experiment.calibration:
            out[f"sim_level2_calibration_n{n}"] = render_sim_level2_calibration(result, n)
        out[f"sim_level4_n{n}"] = render_sim_level4(result, tables, n)
    return out

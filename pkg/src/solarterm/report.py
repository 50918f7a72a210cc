"""Report artifacts: tables as CSV, Markdown and JSON, plus distribution figures.

Every table is a :class:`Table` holding machine rows (full precision), a
human rendering for Markdown and a JSON payload.  JSON is written with sorted
keys and without NaN, so identical results give identical bytes.

Artifact names are fixed:

====================================  =========================================
``terms_calendar``                    term instants and aligned trading days
``table1_per_term_stats``             per-term moments, t test, Shapiro-Wilk
``table4_overall_stats``              the same for all returns
``table2_inter_panels``               reference-term regressions with VIF
``table3_eba``                        extreme bounds of the reference terms
``table5_full_mean``                  AR(1) mean model with all 24 dummies
``table6_refined_mean``               the mean model with the kept dummies
``table7_arch_test``                  ARCH-LM test of the mean residuals
``table8_full_vol``                   IGARCH variance dummies, pruned
``table9_turn_r1``                    turn-of-term windows, radius 1
``table10_turn_r2``                   turn-of-term windows, radius 2
``figures/fig1_term_distributions``   per-term histograms with kernel density
``figures/fig2_return_distribution``  histogram of all returns
====================================  =========================================
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calendar import TermEvent
from .descstats import SampleStats
from .dummyreg import Panel
from .errors import OutputError
from .igarch import ArchTestResult, GarchFit, MeanFit

__all__ = [
    "FORMATS",
    "Table",
    "stars",
    "fmt_num",
    "to_jsonable",
    "dumps_json",
    "write_table",
    "emit_report",
    "terms_table",
    "per_term_table",
    "overall_table",
    "panels_table",
    "eba_table",
    "mean_table",
    "arch_table",
    "vol_table",
    "garch_payload",
    "render_figures",
    "write_text",
]

FORMATS = ("csv", "md", "json")

STAR_NOTE = "* 10% level significance, ** 5% level, *** 1% level."


def stars(p) -> str:
    """Significance stars: ``***`` below 0.01, ``**`` below 0.05, ``*`` below 0.10."""
    if p is None or not math.isfinite(p):
        return ""
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def fmt_num(x, digits: int = 4) -> str:
    """Human formatting: fixed point, switching to scientific for tiny values."""
    if x is None:
        return "-"
    x = float(x)
    if not math.isfinite(x):
        return "-"
    if x != 0.0 and abs(x) < 10.0 ** (-digits + 1):
        return f"{x:.{digits - 1}e}"
    return f"{x:.{digits}f}"


def _none_if_bad(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def to_jsonable(obj):
    """Recursively convert numpy, dates and non-finite floats into JSON values."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _none_if_bad(obj)
    if isinstance(obj, (date, datetime)):
        return obj.isoformat()
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class Table:
    name: str
    title: str
    header: list[str]
    rows: list[list]
    md_header: list[str] | None = None
    md_rows: list[list[str]] | None = None
    notes: list[str] = field(default_factory=list)
    payload: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_csv_cell(c) for c in row])
        return buf.getvalue()

    def markdown(self, preamble: Sequence[str] = ()) -> str:
        head = self.md_header or self.header
        body = self.md_rows if self.md_rows is not None else [
            [_md_cell(c) for c in row] for row in self.rows
        ]
        lines = [f"# {self.title}", ""]
        if preamble:
            lines += [f"_{p}_" for p in preamble] + [""]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "|".join("---" for _ in head) + "|")
        lines += ["| " + " | ".join(r) + " |" for r in body]
        if self.notes:
            lines.append("")
            lines += self.notes
        return "\n".join(lines) + "\n"

    def json_text(self, preamble: Sequence[str] = ()) -> str:
        doc = {
            "artifact": self.name,
            "title": self.title,
            "columns": self.header,
            "rows": self.rows,
            "notes": self.notes,
            "context": list(preamble),
            "result": self.payload,
        }
        return dumps_json(doc)


def _csv_cell(c) -> str:
    if c is None:
        return ""
    if isinstance(c, (float, np.floating)):
        return repr(float(c)) if math.isfinite(c) else ""
    if isinstance(c, (bool, np.bool_)):
        return "true" if c else "false"
    return str(c)


def _md_cell(c) -> str:
    if c is None:
        return "-"
    if isinstance(c, (float, np.floating)):
        return fmt_num(c)
    return str(c)


def write_table(table: Table, outdir, formats: Iterable[str] = FORMATS,
                preamble: Sequence[str] = ()) -> list[Path]:
    """Write ``table`` as ``<outdir>/<name>.<fmt>`` for each format."""
    outdir = Path(outdir)
    written = []
    for fmt in formats:
        if fmt not in FORMATS:
            raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
        text = {
            "csv": table.csv_text,
            "md": lambda: table.markdown(preamble),
            "json": lambda: table.json_text(preamble),
        }[fmt]()
        path = outdir / f"{table.name}.{fmt}"
        write_text(path, text)
        written.append(path)
    return written


def write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None


def emit_report(tables: Sequence[Table], outdir, formats: Iterable[str] = FORMATS,
                preamble: Sequence[str] = ()) -> list[Path]:
    """Write every table; raises :class:`OutputError` if ``outdir`` is unusable."""
    outdir = Path(outdir)
    if outdir.exists() and not outdir.is_dir():
        raise OutputError(f"output path {outdir} exists and is not a directory")
    if outdir.exists() and not os.access(outdir, os.W_OK):
        raise OutputError(f"output directory {outdir} is not writable")
    formats = tuple(formats)
    paths = []
    for t in tables:
        paths += write_table(t, outdir, formats, preamble)
    return paths


# ---------------------------------------------------------------------------
# table builders


def terms_table(events: Sequence[TermEvent], near_midnight_flags: Sequence[bool] = ()) -> Table:
    header = ["year", "order", "name", "instant_utc8", "trading_day"]
    rows = []
    for ev in events:
        rows.append([
            ev.year,
            ev.order,
            ev.term.name,
            ev.instant.replace(microsecond=0).isoformat(),
            ev.trading_day.isoformat() if ev.trading_day else None,
        ])
    flagged = [r for r, f in zip(rows, near_midnight_flags) if f]
    payload = {
        "events": len(rows),
        "aligned": sum(1 for r in rows if r[4] is not None),
        "near_midnight": [{"year": r[0], "order": r[1], "instant_utc8": r[3]} for r in flagged],
    }
    notes = ["Instants in UTC+8 without daylight saving; empty trading_day means the "
             "term date is not a trading day and the term is excluded."]
    if flagged:
        notes.append(f"{len(flagged)} instants lie within one hour of midnight; their "
                     "date could move under a different time-zone convention.")
    return Table("terms_calendar", "Solar-term calendar", header, rows, notes=notes, payload=payload)


_STATS_HEADER = ["term", "n", "mean", "std", "skewness", "kurtosis", "t_stat", "t_p",
                 "sw_W", "sw_p", "flag"]

_MOMENT_NOTE = ("Skewness m3/m2^1.5 and kurtosis m4/m2^2 (non-excess, normal is 3) use "
                "biased moment estimators; std uses n-1. t test: H1 mean != 0. "
                "Shapiro-Wilk (Royston approximation): H1 not normal.")


def _stats_row(s: SampleStats) -> list:
    return [s.term, s.n, s.mean, s.std, s.skewness, s.kurtosis, s.t_stat, s.t_p,
            s.sw_W, s.sw_p, s.flag or None]


def _stats_md(s: SampleStats, label: str) -> list[str]:
    t = "-" if s.t_stat is None else f"{s.t_stat:.4f}{stars(s.t_p)} ({s.t_p:.4f})"
    w = "-" if s.sw_W is None else f"{s.sw_W:.4f}{stars(s.sw_p)} ({s.sw_p:.4f})"
    return [label, str(s.n), fmt_num(s.mean) + stars(s.t_p), t, fmt_num(s.std),
            fmt_num(s.skewness), fmt_num(s.kurtosis), w, s.flag or ""]


_STATS_MD = ["Term", "n", "Mean", "t-test (p)", "Std", "Skewness", "Kurtosis",
             "Shapiro-Wilk W (p)", "Flag"]


def per_term_table(rows: Sequence[SampleStats]) -> Table:
    return Table(
        "table1_per_term_stats",
        "Statistics of term-day returns",
        _STATS_HEADER,
        [_stats_row(s) for s in rows],
        _STATS_MD,
        [_stats_md(s, str(s.term)) for s in rows],
        [_MOMENT_NOTE, STAR_NOTE],
        {"terms": [_stats_row(s) for s in rows]},
    )


def overall_table(s: SampleStats) -> Table:
    row = _stats_row(s)
    row[0] = "all"
    return Table(
        "table4_overall_stats",
        "Statistics of all daily returns",
        _STATS_HEADER,
        [row],
        _STATS_MD,
        [_stats_md(s, "all")],
        [_MOMENT_NOTE, STAR_NOTE],
        {"overall": row},
    )


def _label(col: str, ref: int | None = None) -> str:
    if col == "const":
        return f"No.{ref} (reference)"
    return "No." + col[2:] if col.startswith("ST") else col


def panels_table(panels: Sequence[Panel], nobs: int | None = None) -> Table:
    header = ["ref", "watchlist", "column", "coef", "se", "t", "p", "ci95_low", "ci95_high",
              "tolerance", "vif", "shown"]
    rows, md = [], []
    payload = []
    for pan in panels:
        f = pan.fit
        vmap = {c: (tol, v) for c, tol, v in pan.vif}
        tag = " (watchlist)" if pan.watchlist else ""
        md.append([f"**Panel ref {pan.ref}{tag}**"] + [""] * 5)
        for j, col in enumerate(f.columns):
            tol, v = vmap.get(col, (None, None))
            shown = j == 0 or col in pan.shown
            rows.append([pan.ref, pan.watchlist, col, f.coef[j], f.se[j], f.t[j], f.p[j],
                         f.ci95[j, 0], f.ci95[j, 1], tol, v, shown])
            if shown:
                md.append([
                    _label(col, pan.ref),
                    f"{fmt_num(f.coef[j])}{stars(f.p[j])} ({fmt_num(f.se[j])})",
                    fmt_num(f.ci95[j, 0]), fmt_num(f.ci95[j, 1]),
                    "-" if tol is None else fmt_num(tol), "-" if v is None else fmt_num(v),
                ])
        payload.append({
            "ref": pan.ref,
            "watchlist": pan.watchlist,
            "intercept_p": pan.intercept_p,
            "shown": pan.shown,
            "columns": f.columns,
            "coef": f.coef,
            "se": f.se,
            "p": f.p,
            "nobs": f.nobs,
        })
    notes = ["Reference-term panels on term-day returns; only relative terms with "
             "p below the display threshold are shown in Markdown (CSV has all).",
             f"obs {nobs if nobs is not None else '-'}", STAR_NOTE]
    return Table("table2_inter_panels", "Inter-term regressions", header, rows,
                 ["Term", "Coefficient (se)", "Lower 95%", "Upper 95%", "Tolerance", "VIF"],
                 md, notes, {"panels": payload})


def eba_table(panels: Sequence[Panel]) -> Table:
    header = ["ref", "watchlist", "estimate", "eba_se", "low95", "high95", "low90", "high90",
              "classification"]
    rows, md = [], []
    for pan in panels:
        r = pan.eba.row("const")
        lo95, hi95 = r.bounds[0.95]
        lo90, hi90 = r.bounds[0.90]
        rows.append([pan.ref, pan.watchlist, r.estimate, r.eba_se, lo95, hi95, lo90, hi90,
                     r.classification])
        mark = {"robust-95": "**", "robust-90": "*"}.get(r.classification, "")
        md.append([f"No.{pan.ref} (reference)", f"{fmt_num(r.estimate)}{mark} ({fmt_num(r.eba_se)})",
                   fmt_num(lo95), fmt_num(hi95), fmt_num(lo90), fmt_num(hi90), r.classification])
    return Table(
        "table3_eba", "Extreme bounds of reference terms", header, rows,
        ["Term", "Estimate (EBA se)", "Lower 95%", "Upper 95%", "Lower 90%", "Upper 90%", "Class"],
        md,
        ["Bounds are estimate +/- u * HC3 se with u the standard-normal quantile "
         "(1.960 at 95%, 1.645 at 90%).",
         "** robust at 95%, * robust at 90%."],
        {"rows": [dict(zip(header, r)) for r in rows]},
    )


def _mean_label(col: str) -> str:
    return {"const": "mu", "R(t-1)": "r"}.get(col, "alpha_" + col[2:] if col.startswith("ST") else col)


def mean_table(fit: MeanFit, name: str, title: str) -> Table:
    header = ["column", "estimate", "se", "t", "p"]
    rows = [[c, fit.coef[j], fit.se[j], fit.t[j], fit.p[j]] for j, c in enumerate(fit.columns)]
    md = [[_mean_label(c), fmt_num(fit.coef[j]), fmt_num(fit.se[j]), f"{fit.t[j]:.4f}",
           f"{fit.p[j]:.4f}{stars(fit.p[j])}"] for j, c in enumerate(fit.columns)]
    md.append(["obs", str(fit.n_obs), "", "", ""])
    notes = [STAR_NOTE]
    if fit.dropped:
        notes.append("Dropped (no labeled days): " + ", ".join(f"ST{k}" for k in fit.dropped))
    payload = {"columns": fit.columns, "coef": fit.coef, "se": fit.se, "t": fit.t, "p": fit.p,
               "n_obs": fit.n_obs, "dropped": fit.dropped,
               "resid_mean": float(np.mean(fit.resid))}
    return Table(name, title, header, rows, ["Coefficient", "Estimate", "Std error", "t", "p"],
                 md, notes, payload)


def arch_table(res: ArchTestResult) -> Table:
    header = ["lag", "lm", "p", "nobs", "reject_1pct"]
    rows = [[q, lm, p, n, rj] for q, lm, p, n, rj in zip(res.lags, res.lm, res.p, res.nobs, res.reject)]
    md = [[str(q), f"{lm:.1f}{stars(p)}", f"{p:.4f}"] for q, lm, p in zip(res.lags, res.lm, res.p)]
    return Table("table7_arch_test", "ARCH-LM test of mean-model residuals", header, rows,
                 ["Lag", "LM (chi-squared)", "p"], md,
                 ["Null hypothesis: no ARCH effect. LM = n_eff * R^2, chi-squared(q).", STAR_NOTE],
                 {"lags": res.lags, "lm": res.lm, "p": res.p, "nobs": res.nobs, "level": res.level})


def garch_payload(fit: GarchFit, trace: Sequence[dict] = ()) -> dict:
    return {
        "dist": fit.dist,
        "mean_columns": fit.mean_columns,
        "mean_coef": fit.mean_coef,
        "mean_se": fit.mean_se,
        "gamma": fit.gamma,
        "beta": fit.beta,
        "gamma_se": fit.gamma_se,
        "gamma_p": fit.gamma_p,
        "var_terms": fit.var_terms,
        "var_coef": fit.var_coef,
        "var_se": fit.var_se,
        "var_p": fit.var_p,
        "dist_param": fit.dist_param,
        "dist_param_se": fit.dist_param_se,
        "lambda": fit.lam,
        "loglik": fit.loglik,
        "nobs": fit.nobs,
        "n_floor": fit.n_floor,
        "valid": fit.valid,
        "se_method": fit.se_method,
        "grad_check": fit.grad_check,
        "restarts": fit.restarts,
        "two_step": fit.two_step,
        "warnings": fit.warnings,
        "theta": fit.theta,
        "pruning_trace": list(trace),
    }


def _cell(est, se, p) -> str:
    if est is None:
        return "-"
    s = "-" if se is None or not math.isfinite(se) else fmt_num(se, 6)
    pv = "-" if p is None or not math.isfinite(p) else f"{p:.4f}"
    return f"{fmt_num(est, 6)}{stars(p)} ({s}) [{pv}]"


def vol_table(fits: dict, traces: dict, name: str, title: str,
              summary: dict | None = None) -> Table:
    """IGARCH results, one CSV row per (distribution, parameter) and one
    Markdown column per distribution."""
    header = ["dist", "parameter", "estimate", "se", "p"]
    rows = []
    dists = list(fits)
    terms = sorted({k for f in fits.values() for k in f.var_terms})
    for d in dists:
        f = fits[d]
        rows.append([d, "gamma", f.gamma, f.gamma_se, f.gamma_p])
        rows.append([d, "beta", f.beta, f.gamma_se, f.gamma_p])
        for k, c, s, p in zip(f.var_terms, f.var_coef, f.var_se, f.var_p):
            rows.append([d, f"ST{k}", c, s, p])
        if f.dist_param is not None:
            rows.append([d, "dist_param", f.dist_param, f.dist_param_se, f.dist_param_p])
        rows.append([d, "loglik", f.loglik, None, None])
        rows.append([d, "obs", f.nobs, None, None])

    md = []
    md.append(["gamma"] + [_cell(fits[d].gamma, fits[d].gamma_se, fits[d].gamma_p) for d in dists])
    md.append(["beta"] + [_cell(fits[d].beta, fits[d].gamma_se, fits[d].gamma_p) for d in dists])
    for k in terms:
        cells = []
        for d in dists:
            f = fits[d]
            if k in f.var_terms:
                j = f.var_terms.index(k)
                cells.append(_cell(f.var_coef[j], f.var_se[j], f.var_p[j]))
            else:
                cells.append("-")
        md.append([f"alpha_{k}"] + cells)
    md.append(["dist. parameter"] + [
        _cell(fits[d].dist_param, fits[d].dist_param_se, fits[d].dist_param_p)
        if fits[d].dist_param is not None else "-" for d in dists])
    md.append(["log-likelihood"] + [f"{fits[d].loglik:.4f}" for d in dists])
    md.append(["obs"] + [str(fits[d].nobs) for d in dists])

    notes = ["Standard errors in parentheses, p values in brackets. gamma + beta = 1 by "
             "construction; beta shares the standard error of gamma.", STAR_NOTE]
    for d in dists:
        for w in fits[d].warnings:
            notes.append(f"{d}: {w}")
    payload = {"fits": {d: garch_payload(fits[d], traces.get(d, ())) for d in dists}}
    if summary is not None:
        payload.update(summary)
        if "strongly_efficient" in summary:
            notes.append("Significant under every distribution: "
                         + (", ".join(map(str, summary["strongly_efficient"])) or "none"))
    return Table(name, title, header, rows, ["Coefficient"] + dists, md, notes, payload)


# ---------------------------------------------------------------------------
# figures


def _hist(x: np.ndarray, bins: int):
    counts, edges = np.histogram(x, bins=bins)
    width = np.diff(edges)
    dens = counts / (counts.sum() * width) if counts.sum() else np.zeros_like(width)
    return counts, edges, dens


def _kde(x: np.ndarray, grid: np.ndarray):
    from scipy.stats import gaussian_kde

    if x.size < 3 or np.ptp(x) == 0:
        return None
    return gaussian_kde(x)(grid)


def render_figures(labeled, outdir, image: bool = True) -> list[Path]:
    """Term-day and overall return distributions as CSV data and PNG images.

    The CSVs hold histogram bins and kernel-density points so the figures can
    be redrawn elsewhere; the PNGs are drawn with matplotlib's Agg backend.
    """
    outdir = Path(outdir) / "figures"
    y = np.asarray(labeled.y, dtype=float)
    written = []

    hist_rows, kde_rows = [], []
    per_term = {}
    lo, hi = float(np.min(y)), float(np.max(y))
    grid = np.linspace(lo, hi, 201)
    for k in range(24):
        xk = y[labeled.dummies[:, k] == 1]
        per_term[k + 1] = xk
        if xk.size == 0:
            continue
        counts, edges, dens = _hist(xk, 10)
        for c, a, b, d in zip(counts, edges[:-1], edges[1:], dens):
            hist_rows.append([k + 1, a, b, int(c), d])
        kd = _kde(xk, grid)
        if kd is not None:
            kde_rows += [[k + 1, g, v] for g, v in zip(grid, kd)]
    t1 = Table("fig1_term_histograms", "", ["term", "bin_left", "bin_right", "count", "density"], hist_rows)
    t2 = Table("fig1_term_kde", "", ["term", "x", "density"], kde_rows)

    counts, edges, dens = _hist(y, 100)
    mu, sd = float(np.mean(y)), float(np.std(y, ddof=1))
    centers = 0.5 * (edges[:-1] + edges[1:])
    normal = np.exp(-0.5 * ((centers - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)) if sd > 0 else np.zeros_like(centers)
    t3 = Table("fig2_return_histogram", "",
               ["bin_left", "bin_right", "count", "density", "normal_density"],
               [[a, b, int(c), d, nd] for a, b, c, d, nd in zip(edges[:-1], edges[1:], counts, dens, normal)])
    for t in (t1, t2, t3):
        path = outdir / f"{t.name}.csv"
        write_text(path, t.csv_text())
        written.append(path)

    if image:
        written += _draw(per_term, grid, y, edges, dens, centers, normal, outdir)
    return written


def _draw(per_term, grid, y, edges, dens, centers, normal, outdir: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    meta = {"Software": None}
    with plt.rc_context({"font.size": 7, "axes.titlesize": 8, "figure.dpi": 100}):
        fig, axes = plt.subplots(4, 6, figsize=(12, 8), sharex=True)
        for k, ax in zip(range(1, 25), axes.ravel()):
            xk = per_term[k]
            ax.set_title(f"Term {k} (n={xk.size})")
            if xk.size:
                ax.hist(xk, bins=10, density=True, color="0.75", edgecolor="0.4", linewidth=0.5)
                kd = _kde(xk, grid)
                if kd is not None:
                    ax.plot(grid, kd, color="C0", linewidth=1.0)
            ax.axvline(0.0, color="0.3", linewidth=0.5, linestyle=":")
        fig.supxlabel("daily return")
        fig.tight_layout()
        p = outdir / "fig1_term_distributions.png"
        fig.savefig(p, metadata=meta)
        plt.close(fig)
        paths.append(p)

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.stairs(dens, edges, fill=True, color="0.8", label="returns")
        ax.plot(centers, normal, color="C3", linewidth=1.0, label="normal, same mean/std")
        ax.set_xlabel("daily return")
        ax.set_ylabel("density")
        ax.legend(frameon=False)
        fig.tight_layout()
        p = outdir / "fig2_return_distribution.png"
        fig.savefig(p, metadata=meta)
        plt.close(fig)
        paths.append(p)
    return paths

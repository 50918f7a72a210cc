"""End-to-end analysis runs: from a price (or return) file to a report bundle."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .calendar import MAX_YEAR, MIN_YEAR, near_midnight, term_calendar
from .descstats import per_term_stats, sample_stats
from .dummyreg import significant_panels
from .errors import DataError, EstimationError, SolarTermError
from .igarch import (
    DISTS,
    _dist_name,
    ar1_dummy_fit,
    arch_lm_test,
    igarch_fit,
    prune_insignificant,
    refined_mean_fit,
    strongly_efficient,
    turn_of_term_fit,
)
from .report import (
    FORMATS,
    Table,
    arch_table,
    dumps_json,
    emit_report,
    eba_table,
    mean_table,
    overall_table,
    panels_table,
    per_term_table,
    render_figures,
    terms_table,
    vol_table,
    write_text,
)
from .returns import (
    ReturnSeries,
    build_labeled,
    compute_returns,
    fingerprint,
    parse_price_csv,
    parse_returns_csv,
)

__all__ = ["ANALYSES", "RunConfig", "ReportBundle", "run_pipeline", "load_returns"]

log = logging.getLogger(__name__)

ANALYSES = ("terms", "describe", "inter", "full-mean", "full-vol", "turn1", "turn2")

_HINTS = {
    DataError: "check the input columns, date format and year range",
    EstimationError: "inspect the data for degenerate terms or try fewer distributions",
}


@dataclass
class RunConfig:
    """Everything that determines a run.  Paths are echoed verbatim in the manifest."""

    input: Optional[str] = None
    date_col: str = "date"
    close_col: str = "close"
    returns_col: Optional[str] = None
    date_format: Optional[str] = None
    return_method: str = "log"
    years: Optional[tuple[int, int]] = None
    analyses: tuple[str, ...] = ANALYSES
    ref_p: float = 0.10
    display_p: float = 0.10
    watch_p: float = 0.25
    prune_p: float = 0.10
    dists: tuple[str, ...] = DISTS
    seed: int = 0
    out: str = "report"
    formats: tuple[str, ...] = FORMATS
    two_step: bool = False
    figures: bool = True

    def validate(self) -> "RunConfig":
        if not self.analyses:
            raise ValueError("select at least one analysis")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad:
            raise ValueError(f"unknown analyses {bad}; choose from {ANALYSES}")
        for name in ("ref_p", "display_p", "watch_p", "prune_p"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.years is not None:
            a, b = self.years
            if not (MIN_YEAR <= a <= b <= MAX_YEAR):
                raise ValueError(f"year range must satisfy {MIN_YEAR} <= A <= B <= {MAX_YEAR}")
        if self.return_method not in ("log", "simple"):
            raise ValueError("return method must be 'log' or 'simple'")
        self.dists = tuple(_dist_name(d) for d in self.dists)
        if not self.dists:
            raise ValueError("select at least one distribution")
        for f in self.formats:
            if f not in FORMATS:
                raise ValueError(f"unknown format {f!r}; choose from {FORMATS}")
        if self.input is None and self.analyses != ("terms",):
            raise ValueError("an input file is required for every analysis except 'terms'")
        if self.input is None and self.years is None:
            raise ValueError("'terms' without an input file needs a year range")
        return self

    def echo(self) -> dict:
        d = asdict(self)
        d["analyses"] = list(self.analyses)
        d["dists"] = list(self.dists)
        d["formats"] = list(self.formats)
        d["years"] = list(self.years) if self.years else None
        return d


@dataclass
class ReportBundle:
    manifest: dict
    tables: list[Table] = field(default_factory=list)
    paths: list[Path] = field(default_factory=list)
    results: dict = field(default_factory=dict)

    @property
    def incomplete(self) -> bool:
        return bool(self.manifest.get("incomplete"))


def load_returns(cfg: RunConfig):
    """Read the configured input; returns (ReturnSeries, trading days, fingerprint, n rows)."""
    try:
        raw = Path(cfg.input).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read input {cfg.input}: {exc.strerror or exc}") from None
    if cfg.returns_col:
        rs = parse_returns_csv(raw, cfg.date_col, cfg.returns_col, cfg.date_format)
        days = list(rs.dates)
        fp = fingerprint(rs)
        nrows = len(rs)
    else:
        prices = parse_price_csv(raw, cfg.date_col, cfg.close_col, cfg.date_format,
                                 source_id=str(cfg.input))
        rs = compute_returns(prices, cfg.return_method)
        days = list(prices.dates)
        fp = fingerprint(prices)
        nrows = len(prices)
    if cfg.years is not None:
        rs = rs.between(*cfg.years)
        days = [d for d in days if cfg.years[0] <= d.year <= cfg.years[1]]
        if len(rs) == 0:
            raise DataError(f"no returns inside years {cfg.years[0]}:{cfg.years[1]}")
    return rs, days, fp, nrows


def _seed(base: int, analysis: str, dist: str = "") -> int:
    key = [base, ANALYSES.index(analysis), DISTS.index(dist) + 1 if dist else 0]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _vol_fits(labeled, cfg: RunConfig, analysis: str, terms=None):
    fits, traces = {}, {}
    for d in cfg.dists:
        seed = _seed(cfg.seed, analysis, d)
        if analysis == "full-vol":
            def fit_fn(ts, start, d=d, seed=seed):
                return igarch_fit(labeled, dist=d, dummy_terms=ts, start=start, seed=seed,
                                  two_step=cfg.two_step)

            fits[d], traces[d] = prune_insignificant(fit_fn, range(1, 25), cfg.prune_p)
        else:
            fits[d], traces[d] = turn_of_term_fit(labeled, d, cfg.prune_p, seed=seed,
                                                  two_step=cfg.two_step)
    return fits, traces


def run_pipeline(cfg: RunConfig, write: bool = True) -> ReportBundle:
    """Run the selected analyses in dependency order and write the bundle.

    On a package error the bundle written so far is kept, the manifest is
    marked incomplete, and the error is re-raised with an ``analysis``
    attribute naming the failing stage.
    """
    cfg.validate()
    selected = [a for a in ANALYSES if a in cfg.analyses]
    manifest = {
        "software": {"name": "solarterm", "version": __version__},
        "config": cfg.echo(),
        "analyses": {},
        "warnings": [],
        "incomplete": False,
    }
    bundle = ReportBundle(manifest)
    preamble: list[str] = []
    outdir = Path(cfg.out)
    stage = "load"
    try:
        if cfg.input is not None:
            rs, days, fp, nrows = load_returns(cfg)
            manifest["data"] = {
                "fingerprint": fp,
                "rows": nrows,
                "returns": len(rs),
                "first_date": rs.dates[0],
                "last_date": rs.dates[-1],
                "return_method": rs.method,
            }
            y0, y1 = rs.dates[0].year, rs.dates[-1].year
            if cfg.years is not None:
                y0, y1 = max(y0, cfg.years[0]), min(y1, cfg.years[1])
            preamble = [
                f"returns: {rs.method}; {len(rs)} observations {rs.dates[0]} to {rs.dates[-1]}",
                "index type (price or total return) is whatever the input supplies",
            ]
        else:
            rs, days = None, None
            y0, y1 = cfg.years
            manifest["data"] = None
        events = term_calendar(y0, y1)
        term_lab = build_labeled(rs, events, None, trading_days=days) if rs is not None else None
        if term_lab is not None:
            events = list(term_lab.events)

        def done(name, tables, extra=None):
            bundle.tables += tables
            entry = {"status": "ok", "artifacts": [t.name for t in tables]}
            if extra:
                entry.update(extra)
            manifest["analyses"][name] = entry

        for stage in selected:
            log.info("running %s", stage)
            if stage == "terms":
                flags = [near_midnight(ev) for ev in events]
                for ev, f in zip(events, flags):
                    if f:
                        manifest["warnings"].append(
                            f"term {ev.order} of {ev.year} at {ev.instant.replace(microsecond=0).isoformat()} "
                            "is within one hour of midnight (UTC+8)")
                done(stage, [terms_table(events, flags)])
            elif stage == "describe":
                rows = per_term_stats(term_lab)
                overall = sample_stats(rs.values)
                for s in rows:
                    if s.flag:
                        manifest["warnings"].append(f"term {s.term}: {s.flag}")
                if overall.flag:
                    manifest["warnings"].append(f"overall returns: {overall.flag}")
                bundle.results["describe"] = {"per_term": rows, "overall": overall}
                done(stage, [per_term_table(rows), overall_table(overall)])
                if cfg.figures:
                    bundle.paths += render_figures(term_lab, outdir) if write else []
            elif stage == "inter":
                panels = significant_panels(term_lab, cfg.ref_p, cfg.display_p, cfg.watch_p)
                bundle.results["inter"] = {"panels": panels}
                nobs = len(term_lab.term_days())
                done(stage, [panels_table(panels, nobs), eba_table(panels)],
                     {"reference_terms": [p.ref for p in panels if not p.watchlist],
                      "watchlist": [p.ref for p in panels if p.watchlist]})
            elif stage == "full-mean":
                full = ar1_dummy_fit(term_lab)
                for k in full.dropped:
                    manifest["warnings"].append(f"full-mean: ST{k} dropped (no labeled days)")
                keep = [int(c[2:]) for c, p in zip(full.columns, full.p)
                        if c.startswith("ST") and p < cfg.prune_p]
                refined = refined_mean_fit(term_lab, keep)
                arch = arch_lm_test(full.resid)
                bundle.results["full-mean"] = {"full": full, "refined": refined, "arch": arch}
                done(stage, [
                    mean_table(full, "table5_full_mean", "AR(1) mean model with all term dummies"),
                    mean_table(refined, "table6_refined_mean", "AR(1) mean model with refined term dummies"),
                    arch_table(arch),
                ], {"refined_terms": keep})
            elif stage == "full-vol":
                fits, traces = _vol_fits(term_lab, cfg, stage)
                _fit_warnings(manifest, stage, fits)
                bundle.results[stage] = {"fits": fits, "traces": traces}
                surv = {d: f.var_terms for d, f in fits.items()}
                done(stage, [vol_table(fits, traces, "table8_full_vol",
                                       "IGARCH(1,1) variance model with refined term dummies",
                                       {"surviving": surv})], {"surviving": surv})
            else:
                radius = 1 if stage == "turn1" else 2
                win = build_labeled(rs, events, radius, trading_days=days)
                fits, traces = _vol_fits(win, cfg, stage)
                _fit_warnings(manifest, stage, fits)
                strong = strongly_efficient(fits, cfg.prune_p)
                bundle.results[stage] = {"fits": fits, "traces": traces, "strongly_efficient": strong}
                name = "table9_turn_r1" if radius == 1 else "table10_turn_r2"
                done(stage, [vol_table(fits, traces, name,
                                       f"Turn-of-term IGARCH(1,1), {radius}-day range",
                                       {"radius": radius, "strongly_efficient": strong})],
                     {"strongly_efficient": strong})
        stage = "write"
    except SolarTermError as exc:
        manifest["incomplete"] = True
        hint = next((h for cls, h in _HINTS.items() if isinstance(exc, cls)), "")
        manifest["analyses"][stage] = {"status": "failed", "error": str(exc), "hint": hint}
        exc.analysis = stage
        if write:
            _write(bundle, cfg, outdir, preamble)
        raise
    if write:
        _write(bundle, cfg, outdir, preamble)
    return bundle


def _fit_warnings(manifest, stage, fits) -> None:
    for d, f in fits.items():
        for w in f.warnings:
            manifest["warnings"].append(f"{stage} ({d}): {w}")


def _write(bundle: ReportBundle, cfg: RunConfig, outdir: Path, preamble) -> None:
    bundle.paths = emit_report(bundle.tables, outdir, cfg.formats, preamble) + bundle.paths
    path = outdir / "manifest.json"
    write_text(path, dumps_json(bundle.manifest))
    bundle.paths.append(path)

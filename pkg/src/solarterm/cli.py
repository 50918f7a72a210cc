"""Command line: ``solarterm <subcommand> [options]``.

Exit codes: 0 success, 1 usage (bad arguments, unwritable output), 2 data
error, 3 estimation failure.

A ``--config FILE`` holds ``key = value`` lines using the long option names
(``prune-p = 0.05``, ``dist = t ged``, ``two-step = true``); blank lines and
``#`` comments are ignored.  Options given on the command line win.
"""
from __future__ import annotations

import argparse
import logging
import shlex
import sys
from pathlib import Path

from . import __version__
from .errors import DataError, EstimationError, OutputError, SolarTermError
from .igarch import DISTS
from .pipeline import ANALYSES, RunConfig, run_pipeline
from .report import FORMATS
from .synth import SynthSpec, synth_generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 1, 2, 3

_SUBCOMMANDS = {
    "terms": ("terms",),
    "describe": ("describe",),
    "inter": ("inter",),
    "full-mean": ("full-mean",),
    "full-vol": ("full-vol",),
    "turn": None,  # resolved from --radius
    "run": ANALYSES,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 by default
        raise UsageError(f"{self.prog}: error: {message}")


def _years(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    return a, b


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"threshold must lie in (0, 1), got {text}")
    return v


def _injection(text: str) -> tuple[int, float]:
    try:
        k, v = text.split("=")
        return int(k), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected TERM=VALUE, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("input")
    g.add_argument("--input", help="CSV with a date column and closing prices (or returns)")
    g.add_argument("--date-col", default="date")
    g.add_argument("--close-col", default="close")
    g.add_argument("--returns-col", help="read pre-computed returns from this column")
    g.add_argument("--date-format", help="strptime format; ISO-8601 when omitted")
    g.add_argument("--return-method", choices=("log", "simple"), default="log")
    g.add_argument("--years", type=_years, metavar="A:B", help="restrict to these calendar years")
    g = p.add_argument_group("analysis")
    g.add_argument("--dist", nargs="+", choices=DISTS + ("student_t",), default=list(DISTS))
    g.add_argument("--ref-p", type=_prob, default=0.10, help="reference-term panel threshold")
    g.add_argument("--display-p", type=_prob, default=0.10, help="relative-term display threshold")
    g.add_argument("--watch-p", type=_prob, default=0.25, help="watchlist panel threshold")
    g.add_argument("--prune-p", type=_prob, default=0.10, help="dummy pruning threshold")
    g.add_argument("--two-step", action="store_true", help="OLS mean first, then variance MLE")
    g.add_argument("--seed", type=int, default=0)
    g = p.add_argument_group("output")
    g.add_argument("--out", default="report", metavar="DIR")
    g.add_argument("--format", nargs="+", choices=FORMATS, default=list(FORMATS))
    g.add_argument("--no-figures", action="store_true", help="skip PNG and figure data files")
    g.add_argument("--config", metavar="FILE", help="key = value defaults file")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="solarterm", description="Solar-term anomalies in daily returns.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common()
    helps = {
        "terms": "term calendar for the input's years (or --years)",
        "describe": "per-term and overall descriptive statistics",
        "inter": "reference-term regressions with HC3 extreme bounds",
        "full-mean": "AR(1) mean model with term dummies and ARCH test",
        "full-vol": "IGARCH variance model with pruned term dummies",
        "turn": "turn-of-term window IGARCH",
        "run": "every analysis",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        if name == "turn":
            sp.add_argument("--radius", type=int, choices=(1, 2), required=True)
    sp = sub.add_parser("synth", help="write a synthetic price CSV and its ground truth")
    sp.add_argument("--out", required=True, metavar="CSV")
    sp.add_argument("--n-years", type=int, default=28)
    sp.add_argument("--start-year", type=int, default=1995)
    sp.add_argument("--base-mean", type=float, default=0.0)
    sp.add_argument("--base-std", type=float, default=0.015)
    sp.add_argument("--ar", type=float, default=0.0)
    sp.add_argument("--gamma", type=float, default=0.0)
    sp.add_argument("--mean-inj", type=_injection, action="append", default=[], metavar="TERM=RET")
    sp.add_argument("--var-inj", type=_injection, action="append", default=[], metavar="TERM=FACTOR")
    sp.add_argument("--var-radius", type=int, choices=(0, 1, 2), default=1)
    sp.add_argument("--seed", type=int, default=0)
    return parser


def read_config(path) -> dict:
    """Parse a ``key = value`` file into argparse destinations."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror or exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser, argv, args):
    """Re-parse with config values injected ahead of the explicit arguments."""
    cfg = read_config(args.config)
    known = {a.dest: a for a in parser._subparsers._group_actions[0].choices[args.command]._actions}
    extra = []
    for key, value in cfg.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        flag = action.option_strings[-1]
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"config key {key!r} expects true/false")
        else:
            extra += [flag] + shlex.split(value)
    # argparse keeps the last occurrence, so the command line overrides the file
    return parser.parse_args([argv[0]] + extra + argv[1:])


def _run_config(args) -> RunConfig:
    if args.command == "turn":
        analyses = (f"turn{args.radius}",)
    else:
        analyses = _SUBCOMMANDS[args.command]
    return RunConfig(
        input=args.input,
        date_col=args.date_col,
        close_col=args.close_col,
        returns_col=args.returns_col,
        date_format=args.date_format,
        return_method=args.return_method,
        years=args.years,
        analyses=tuple(analyses),
        ref_p=args.ref_p,
        display_p=args.display_p,
        watch_p=args.watch_p,
        prune_p=args.prune_p,
        dists=tuple(dict.fromkeys(args.dist)),
        seed=args.seed,
        out=args.out,
        formats=tuple(dict.fromkeys(args.format)),
        two_step=args.two_step,
        figures=not args.no_figures,
    )


def _synth(args) -> int:
    spec = SynthSpec(
        n_years=args.n_years, start_year=args.start_year, base_mean=args.base_mean,
        base_std=args.base_std, ar=args.ar, gamma=args.gamma,
        mean_inj=dict(args.mean_inj), var_inj=dict(args.var_inj),
        var_radius=args.var_radius, seed=args.seed,
    )
    res = synth_generate(spec)
    out = Path(args.out)
    truth = out.with_name(out.stem + ".truth.json")
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(res.csv, encoding="utf-8")
        truth.write_text(res.truth_json(), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc.strerror or exc}") from None
    print(f"wrote {out} ({len(res.dates) + 1} prices) and {truth}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(parser, argv, args)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "synth":
            return _synth(args)
        cfg = _run_config(args)
        try:
            cfg.validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        bundle = run_pipeline(cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        stage = getattr(exc, "analysis", None)
        print(f"data error{f' in {stage}' if stage else ''}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        stage = getattr(exc, "analysis", None)
        print(f"estimation failed{f' in {stage}' if stage else ''}: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except SolarTermError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    log = logging.getLogger("solarterm")
    warnings = bundle.manifest["warnings"]
    midnight = [w for w in warnings if "of midnight" in w]
    for w in warnings:
        if w not in midnight or args.verbose:
            log.warning(w)
    if midnight and not args.verbose:
        log.warning("%d term instants fall within one hour of midnight; see manifest.json "
                    "(or -v) and validate those dates", len(midnight))
    print(f"wrote {len(bundle.paths)} files to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

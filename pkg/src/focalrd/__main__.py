"""Entry point for focalrd."""

import argparse
import logging
import sys
from typing import NoReturn

from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from . import config, sweeps
from .errors import EXIT_VALIDATION, FocalRDError, ValidationError, exit_code_for
from .fx_opt import FxSearchConfig
from .sources import parse_source_spec

log = logging.getLogger("focalrd")

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors are validation errors: exit 1, leaving 2 to the oracle guard rail."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _setup_logging(level: str, console: Console) -> None:
    level = level.upper()
    if level not in _LEVELS:
        raise ValidationError(f"--log-level must be one of {', '.join(_LEVELS)}, got {level!r}")
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _print_timings(console: Console) -> None:
    history = sweeps.fetch_eval_history(limit=300)
    table = Table(title="evaluations")
    for column in ("count", "failures", "mean ms", "max ms"):
        table.add_column(column, justify="right")
    latencies = [s.latency_ms for s in history]
    mean = sum(latencies) / len(latencies) if latencies else 0.0
    table.add_row(
        str(len(history)),
        str(sum(1 for s in history if not s.ok)),
        f"{mean:.1f}",
        str(max(latencies, default=0)),
    )
    console.print(table)


# ---------------------------------------------------------------------------
# Sub-commands
# ---------------------------------------------------------------------------

def _fx_search(cfg: dict) -> FxSearchConfig:
    return FxSearchConfig.from_config(cfg["fx_search"])


def _source(args: argparse.Namespace):
    return parse_source_spec(args.source, renormalize=args.renormalize)


def _cmd_point(args: argparse.Namespace, cfg: dict) -> None:
    source = _source(args)
    rows = [
        sweeps.report_row(
            sweeps.run_point(source, args.m, g, args.fx, args.seed, _fx_search(cfg), renormalize=args.renormalize)
        )
        for g in sweeps.parse_gamma_grid(args.gamma)
    ]
    sweeps.write_csv(args.out, sweeps.REPORT_HEADER, rows, cfg["output"]["digits"])


def _cmd_sweep(args: argparse.Namespace, cfg: dict) -> None:
    sweep = sweeps.SweepConfig(
        figure=args.figure,
        source_spec=args.source,
        m_grid=sweeps.parse_int_grid(args.m) if args.m else (),
        gamma_grid=args.gamma,
        fx_mode=args.fx,
        seed=args.seed,
        output_path=args.out,
        alt_p=args.alt_p,
        workers=args.workers or int(config.get("sweep", "workers", cfg)),
        digits=int(cfg["output"]["digits"]),
        fx_search=_fx_search(cfg),
        oracle_settings=cfg["oracle"],
        renormalize=args.renormalize,
    )
    sweeps.run_sweep(sweep, audit_settings=cfg["audit"])


def _cmd_oracle(args: argparse.Namespace, cfg: dict) -> None:
    header, rows = sweeps.oracle_table(
        _source(args), args.m, sweeps.parse_gamma_grid(args.gamma), args.seed, cfg["oracle"]
    )
    sweeps.write_csv(args.out, header, rows, cfg["output"]["digits"])


def _cmd_code_dump(args: argparse.Namespace, cfg: dict) -> None:
    header, rows = sweeps.code_dump_table(_source(args), args.m, args.fx, renormalize=args.renormalize)
    sweeps.write_csv(args.out, header, rows, cfg["output"]["digits"])


def _cmd_hgamma(args: argparse.Namespace, cfg: dict) -> None:
    sizes = sweeps.parse_int_grid(args.size, what="alphabet size")
    header, rows = sweeps.hgamma_table(sizes, sweeps.parse_gamma_grid(args.gamma))
    sweeps.write_csv(args.out, header, rows, cfg["output"]["digits"])


def _cmd_asymptotic(args: argparse.Namespace, cfg: dict) -> None:
    header, rows = sweeps.asymptotic_table(
        _source(args),
        args.rate,
        sweeps.parse_int_grid(args.n, what="blocklength"),
        sweeps.parse_gamma_grid(args.gamma),
        workers=int(config.get("sweep", "workers", cfg)),
    )
    sweeps.write_csv(args.out, header, rows, cfg["output"]["digits"])


def _cmd_audit(args: argparse.Namespace, cfg: dict) -> None:
    result = sweeps.audit_fig4(p_stated=args.p, settings=cfg["audit"])
    sweeps.write_csv(args.out, sweeps.AUDIT_HEADER, [result.row()], cfg["output"]["digits"])


def _cmd_config(args: argparse.Namespace, cfg: dict) -> None:
    if args.set:
        dotted, sep, raw = args.set.partition("=")
        if not sep:
            raise ValidationError(f"--set expects section.key=value, got {args.set!r}")
        try:
            config.update(config.coerce_setting(dotted.strip(), raw.strip()))
        except (KeyError, ValueError) as exc:
            raise ValidationError(str(exc)) from None
        cfg = config.load()
    table = Table(title="focalrd config")
    for column in ("section", "key", "value"):
        table.add_column(column)
    for section in config.SECTIONS:
        for key, value in cfg[section].items():
            table.add_row(section, key, str(value))
    Console().print(table)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _build_parser(cfg: dict) -> argparse.ArgumentParser:
    seed_default = int(config.get("sweep", "seed", cfg))
    parser = _ArgumentParser(
        prog="focalrd",
        description="Rate-distortion bounds for lossy source coding under focal loss",
    )
    parser.add_argument("--log-level", default=str(cfg["output"]["log_level"]), metavar="LEVEL")
    parser.add_argument("--timings", action="store_true", help="Print evaluation timings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, source_required: bool = True) -> None:
        p.add_argument("--source", required=source_required, default="", metavar="SPEC",
                       help="uniform:K, bernoulli:P, binomial:N:P, pmf:V1,..., pmf-file:PATH [:q=...]")
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", default="", metavar="PATH", help="CSV destination (default stdout)")
        p.add_argument("--renormalize", action="store_true", help="Rescale PMF files that do not sum to 1")

    p = sub.add_parser("point", help="All bounds at one M, for one gamma or a gamma grid")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--gamma", required=True, metavar="GRID", help="a value, start:stop:count or a comma list")
    p.add_argument("--fx", default="source", metavar="MODE", help="source, uniform, file:PATH or optimize")
    p.set_defaults(handler=_cmd_point)

    p = sub.add_parser("sweep", help="Reproduce a figure or run a custom grid")
    common(p, source_required=False)
    p.add_argument("--figure", required=True, choices=sweeps.FIGURES)
    p.add_argument("--m", default="", metavar="GRID", help="M, a:b or a comma list")
    p.add_argument("--gamma", default="", metavar="GRID", help="start:stop:count or a comma list")
    p.add_argument("--fx", default="source", metavar="MODE")
    p.add_argument("--alt-p", default="", metavar="auto|P", help="fig4: also evaluate binomial(100, P)")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(handler=_cmd_sweep)

    p = sub.add_parser("oracle", help="Exhaustive d*(M; gamma) on a small alphabet")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--gamma", required=True, metavar="GRID")
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("code-dump", help="Print the greedy code table")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--fx", default="source", metavar="MODE")
    p.set_defaults(handler=_cmd_code_dump)

    p = sub.add_parser("hgamma", help="h_gamma over alphabet sizes")
    p.add_argument("--size", required=True, metavar="K|a:b")
    p.add_argument("--gamma", required=True, metavar="GRID")
    p.add_argument("--out", default="", metavar="PATH")
    p.set_defaults(handler=_cmd_hgamma)

    p = sub.add_parser("asymptotic", help="Per-letter bounds against blocklength")
    common(p)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--n", default="25,50,100,200", metavar="LIST")
    p.add_argument("--gamma", required=True, metavar="GRID")
    p.set_defaults(handler=_cmd_asymptotic)

    p = sub.add_parser("audit", help="Check the binomial example's parameter against its curves")
    p.add_argument("--p", type=float, default=sweeps.FIG4_P)
    p.add_argument("--out", default="", metavar="PATH")
    p.set_defaults(handler=_cmd_audit)

    p = sub.add_parser("config", help="Show or change ~/.config/focalrd/config.toml")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--show", action="store_true")
    group.add_argument("--set", default="", metavar="SECTION.KEY=VALUE")
    p.set_defaults(handler=_cmd_config)

    return parser


def main() -> None:
    cfg = config.load()
    args = _build_parser(cfg).parse_args()
    err_console = Console(stderr=True)
    try:
        _setup_logging(args.log_level, err_console)
        args.handler(args, cfg)
    except (FocalRDError, OSError) as exc:
        err_console.print(f"[bold red]error:[/bold red] {escape(str(exc))}")
        raise SystemExit(exit_code_for(exc)) from None
    finally:
        if args.timings:
            _print_timings(err_console)
    sys.stdout.flush()


if __name__ == "__main__":
    main()

"""Experiment drivers: single points, figure sweeps, oracle runs, asymptotics, the source audit.

Every driver returns ``(header, rows)``; ``write_csv`` renders them with a fixed
number of significant digits so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import logging
import math
import sys
from collections import deque
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from time import monotonic
from typing import TypeVar

import numpy as np

from .bounds import (
    BoundReport,
    ach_bound_n_letter,
    asymptotic_distortion_rate,
    bound_report,
    converse_bound,
    converse_n_letter,
)
from .codes import build_code, exact_code_distortion
from .errors import ValidationError
from .focal import focal_entropy_max
from .fx_opt import FxSearchConfig, optimize_fx
from .oracle import exhaustive_dstar
from .prob import Source, binomial_pmf, shannon_entropy
from .sources import parse_fx_mode, parse_source_spec, resolve_fx

log = logging.getLogger(__name__)

T = TypeVar("T")
Row = tuple
Table = tuple[tuple[str, ...], list[Row]]

FIGURES = ("fig1", "fig2", "fig3", "fig4", "custom")
FIG1_SIZES = tuple(range(2, 51))
FIG2_SOURCES = ("pmf:1/3,1/3,1/3", "pmf:2/3,1/4,1/12")
FIG4_TRIALS = 100
FIG4_P = 0.1

_FIGURE_DEFAULTS: dict[str, tuple[str, tuple[int, ...], str]] = {
    "fig1": ("", (), "0.5,1,20,100"),
    "fig2": ("", (2,), "0:10:20"),
    "fig3": ("binomial:100:0.5", (2, 4, 8, 16, 32, 64), "0.1,1,2,4"),
    "fig4": (f"binomial:{FIG4_TRIALS}:{FIG4_P}", (8,), "0:10:40"),
    "custom": ("", (), ""),
}

REPORT_HEADER = ("m", "gamma", "converse", "ach_eq16", "ach_eq17", "exact_code", "fx_optimized")


# ---------------------------------------------------------------------------
# Evaluation telemetry
# ---------------------------------------------------------------------------

@dataclass
class EvalStat:
    label: str
    ok: bool
    latency_ms: int
    error: str = ""


_EVAL_HISTORY: deque[EvalStat] = deque(maxlen=300)


def _record_eval(label: str, ok: bool, latency_ms: int, error: str = "") -> None:
    _EVAL_HISTORY.append(EvalStat(label=label, ok=ok, latency_ms=latency_ms, error=error))


def fetch_eval_history(limit: int = 100) -> list[EvalStat]:
    if limit <= 0:
        return []
    return list(_EVAL_HISTORY)[-limit:]


def _timed(label: str, fn: Callable[[], T]) -> T:
    start = monotonic()
    try:
        result = fn()
    except Exception as exc:
        _record_eval(label, ok=False, latency_ms=int((monotonic() - start) * 1000), error=str(exc))
        raise
    _record_eval(label, ok=True, latency_ms=int((monotonic() - start) * 1000))
    log.debug("evaluated %s in %.1f ms", label, (monotonic() - start) * 1000)
    return result


# ---------------------------------------------------------------------------
# Grid parsing
# ---------------------------------------------------------------------------

def parse_gamma_grid(text: str) -> tuple[float, ...]:
    """``start:stop:count`` (inclusive linspace), a comma list, or one value."""
    text = text.strip()
    try:
        if text.count(":") == 2:
            start, stop, count = text.split(":")
            n = int(count)
            if n < 1:
                raise ValidationError(f"gamma grid count must be >= 1, got {n}")
            values = tuple(np.linspace(float(start), float(stop), n).tolist())
        else:
            values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"cannot parse gamma grid {text!r}") from None
    if not values:
        raise ValidationError("gamma grid is empty")
    if any(not (g >= 0.0 and math.isfinite(g)) for g in values):
        raise ValidationError(f"gamma values must be finite and >= 0: {text!r}")
    return values


def parse_int_grid(text: str, what: str = "M") -> tuple[int, ...]:
    """``a:b`` (inclusive range) or a comma list of positive integers."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            values = tuple(range(lo, hi + 1))
        else:
            values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"cannot parse {what} grid {text!r}") from None
    if not values or min(values) < 1:
        raise ValidationError(f"{what} grid needs positive integers, got {text!r}")
    return values


def row_seeds(seed: int, count: int) -> list[int]:
    """Independent per-row seeds derived from (seed, row index)."""
    return [int(np.random.SeedSequence([seed, row]).generate_state(1)[0]) for row in range(count)]


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def format_value(value: object, digits: int = 15) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{digits}g}"
    return str(value)


def write_csv(path: str | Path | None, header: Sequence[str], rows: Iterable[Row], digits: int = 15) -> None:
    """Write to ``path``, or to stdout when path is empty or ``-``."""
    if path in (None, "", "-"):
        _write_rows(sys.stdout, header, rows, digits)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as fh:
        _write_rows(fh, header, rows, digits)


def _write_rows(fh, header: Sequence[str], rows: Iterable[Row], digits: int) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v, digits) for v in row])


def report_row(report: BoundReport) -> Row:
    return (
        report.m,
        report.gamma,
        report.converse,
        report.ach_log,
        report.ach_linear,
        report.exact_code,
        report.fx_optimized,
    )


# ---------------------------------------------------------------------------
# Single point
# ---------------------------------------------------------------------------

def _as_source(source: Source | str, renormalize: bool = False) -> Source:
    return parse_source_spec(source, renormalize) if isinstance(source, str) else source


def run_point(
    source: Source | str,
    m: int,
    gamma: float,
    fx_mode: str = "source",
    seed: int = 0,
    fx_search: FxSearchConfig | None = None,
    renormalize: bool = False,
) -> BoundReport:
    """Every bound at one (M, gamma); the optimised-F value only for ``fx_mode='optimize'``."""
    src = _as_source(source, renormalize)
    choice = parse_fx_mode(fx_mode)
    f = resolve_fx(choice, src, renormalize)
    fx_value = None
    if choice.optimize:
        search = replace(fx_search or FxSearchConfig(), seed=seed)
        _, fx_value = optimize_fx(src.r, m, gamma, search)
    return bound_report(src.r, f, m, gamma, fx_optimized=fx_value).check()


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    figure: str
    source_spec: str = ""
    m_grid: tuple[int, ...] = ()
    gamma_grid: str = ""
    n_grid: tuple[int, ...] = ()
    fx_mode: str = "source"
    seed: int = 0
    output_path: str = ""
    alt_p: str = ""
    workers: int = 4
    digits: int = 15
    fx_search: FxSearchConfig = field(default_factory=FxSearchConfig)
    oracle_settings: dict = field(default_factory=dict)
    renormalize: bool = False

    def __post_init__(self) -> None:
        if self.figure not in FIGURES:
            raise ValidationError(f"unknown figure {self.figure!r}; choose from {', '.join(FIGURES)}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        parse_fx_mode(self.fx_mode)
        if self.figure == "custom" and not (self.source_spec and self.m_grid and self.gamma_grid):
            raise ValidationError("custom sweeps need --source, --m and --gamma")
        self.gammas()

    def resolved(self) -> SweepConfig:
        source, m_grid, gamma_grid = _FIGURE_DEFAULTS[self.figure]
        return replace(
            self,
            source_spec=self.source_spec or source,
            m_grid=self.m_grid or m_grid,
            gamma_grid=self.gamma_grid or gamma_grid,
        )

    def gammas(self) -> tuple[float, ...]:
        return parse_gamma_grid(self.gamma_grid or _FIGURE_DEFAULTS[self.figure][2])


def _map(config: SweepConfig, fn: Callable[[T], Row], tasks: Sequence[T]) -> list[Row]:
    """Evaluate tasks concurrently; results come back in task order."""
    if config.workers == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(fn, tasks))


def _fig1(config: SweepConfig) -> Table:
    tasks = [(g, k) for g in config.gammas() for k in FIG1_SIZES]

    def row(task: tuple[float, int]) -> Row:
        g, k = task
        return (k, g, _timed(f"h_gamma k={k} gamma={g:g}", lambda: focal_entropy_max(k, g).value))

    return ("alphabet_size", "gamma", "h_gamma"), _map(config, row, tasks)


def _oracle_kwargs(settings: dict) -> dict:
    keys = ("starts", "grid_points", "max_alphabet", "max_functions")
    return {k: int(settings[k]) for k in keys if k in settings}


def _fig2(config: SweepConfig) -> Table:
    sources = [parse_source_spec(spec) for spec in FIG2_SOURCES]
    m = config.m_grid[0]
    kwargs = _oracle_kwargs(config.oracle_settings)

    def row(g: float) -> Row:
        values = [
            _timed(f"oracle {src.name} gamma={g:g}",
                   lambda src=src: exhaustive_dstar(src.r, m, g, seed=config.seed, **kwargs).value)
            for src in sources
        ]
        return (g, *values)

    return ("gamma", "dstar_source1", "dstar_source2"), _map(config, row, list(config.gammas()))


def _bound_rows(config: SweepConfig, src: Source, with_m: bool, with_opt: bool) -> list[Row]:
    choice = parse_fx_mode(config.fx_mode)
    f = resolve_fx(choice, src, config.renormalize)
    tasks = [(g, m) for g in config.gammas() for m in config.m_grid]
    seeds = row_seeds(config.seed, len(tasks))

    def row(i: int) -> Row:
        g, m = tasks[i]

        def evaluate() -> BoundReport:
            fx_value = None
            if choice.optimize:
                search = replace(config.fx_search, seed=seeds[i])
                _, fx_value = optimize_fx(src.r, m, g, search)
            return bound_report(src.r, f, m, g, fx_optimized=fx_value).check()

        rep = _timed(f"bounds {src.name} M={m} gamma={g:g}", evaluate)
        head = (g, m) if with_m else (g,)
        tail = (rep.fx_optimized,) if with_opt else ()
        return (*head, rep.converse, rep.ach_linear, rep.ach_log, rep.exact_code, *tail)

    return _map(config, row, list(range(len(tasks))))


_BOUND_COLUMNS = ("converse", "ach_eq17", "ach_eq16", "ach_exact")


def _fig3(config: SweepConfig) -> Table:
    src = parse_source_spec(config.source_spec, config.renormalize)
    return ("gamma", "m", *_BOUND_COLUMNS), _bound_rows(config, src, with_m=True, with_opt=False)


def _fig4(config: SweepConfig, source_spec: str | None = None) -> Table:
    src = parse_source_spec(source_spec or config.source_spec, config.renormalize)
    return ("gamma", *_BOUND_COLUMNS, "ach_exact_optfx"), _bound_rows(config, src, with_m=False, with_opt=True)


def _custom(config: SweepConfig) -> Table:
    src = parse_source_spec(config.source_spec, config.renormalize)
    return ("gamma", "m", *_BOUND_COLUMNS, "ach_exact_optfx"), _bound_rows(config, src, with_m=True, with_opt=True)


_SWEEPS: dict[str, Callable[[SweepConfig], Table]] = {
    "fig1": _fig1,
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig4,
    "custom": _custom,
}


def sweep_table(config: SweepConfig) -> Table:
    config = config.resolved()
    log.info("sweep %s: %d gamma values", config.figure, len(config.gammas()))
    return _SWEEPS[config.figure](config)


def resolve_alt_p(alt_p: str, audit_settings: dict | None = None) -> float:
    if alt_p == "auto":
        return audit_fig4(settings=audit_settings).p_closest
    try:
        p = float(alt_p)
    except ValueError:
        raise ValidationError(f"--alt-p must be 'auto' or a probability, got {alt_p!r}") from None
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"--alt-p must lie in [0, 1], got {p}")
    return p


def run_sweep(config: SweepConfig, audit_settings: dict | None = None) -> Table:
    """Evaluate the sweep and write its CSV; fig4 with ``alt_p`` also writes ``<out>.alt.csv``."""
    alt = bool(config.alt_p) and config.figure == "fig4"
    if alt and config.output_path in ("", "-"):
        raise ValidationError("--alt-p needs --out so the alternate table has a file to go to")
    header, rows = sweep_table(config)
    write_csv(config.output_path, header, rows, config.digits)
    if alt:
        p = resolve_alt_p(config.alt_p, audit_settings)
        log.info("fig4 alternate source parameter p=%g", p)
        alt_header, alt_rows = _fig4(config.resolved(), f"binomial:{FIG4_TRIALS}:{p!r}")
        write_csv(f"{config.output_path}.alt.csv", alt_header, alt_rows, config.digits)
    log.info("sweep %s: wrote %d rows", config.figure, len(rows))
    return header, rows


# ---------------------------------------------------------------------------
# Other drivers
# ---------------------------------------------------------------------------

def oracle_table(
    source: Source | str,
    m: int,
    gammas: Sequence[float],
    seed: int = 0,
    oracle_settings: dict | None = None,
) -> Table:
    """Exhaustive d* next to the converse and the greedy code for each gamma."""
    src = _as_source(source)
    kwargs = _oracle_kwargs(oracle_settings or {})
    rows = []
    for g in gammas:
        res = _timed(f"oracle {src.name} M={m} gamma={g:g}",
                     lambda g=g: exhaustive_dstar(src.r, m, g, seed=seed, **kwargs))
        rows.append((
            g,
            m,
            res.value,
            res.certified,
            converse_bound(src.r, m, g),
            exact_code_distortion(src.r, src.r, m, g),
            "|".join("".join(str(a) for a in cell) for cell in res.cells()),
        ))
    return ("gamma", "m", "dstar", "certified", "converse", "ach_exact", "partition"), rows


def code_dump_table(source: Source | str, m: int, fx_mode: str = "source", renormalize: bool = False) -> Table:
    src = _as_source(source, renormalize)
    choice = parse_fx_mode(fx_mode)
    if choice.optimize:
        raise ValidationError("code-dump needs a fixed F: source, uniform or file:PATH")
    f = resolve_fx(choice, src, renormalize)
    return ("symbol", "message", "f_mass", "reconstruction_prob"), build_code(f, m).dump_rows(f)


def hgamma_table(sizes: Sequence[int], gammas: Sequence[float]) -> Table:
    rows = []
    for g in gammas:
        for k in sizes:
            hmax = focal_entropy_max(k, float(g))
            rows.append((k, g, hmax.value, hmax.d_star, hmax.q_star))
    return ("alphabet_size", "gamma", "h_gamma", "d_star", "q_star"), rows


def asymptotic_table(
    source: Source | str,
    rate: float,
    n_grid: Sequence[int],
    gammas: Sequence[float],
    workers: int = 4,
) -> Table:
    """Per-letter converse and achievability at each blocklength, next to [H - R]^+."""
    src = _as_source(source)
    r = src.r
    limit = asymptotic_distortion_rate(r, rate)
    tasks = [(g, n) for g in gammas for n in n_grid]

    def row(task: tuple[float, int]) -> Row:
        g, n = task
        ach = _timed(f"n-letter n={n} gamma={g:g}", lambda: ach_bound_n_letter(r, r, n, rate, g))
        return (g, n, rate, converse_n_letter(r, n, rate, g), ach, limit)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(row, tasks))
    return ("gamma", "n", "rate", "converse_n_letter", "ach_n_letter", "limit"), rows


# ---------------------------------------------------------------------------
# Source-parameter audit for the binomial example
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditResult:
    p_stated: float
    entropy_stated: float
    entropy_implied: float
    gap: float
    flagged: bool
    p_closest: float
    entropy_closest: float

    def row(self) -> Row:
        return (
            self.p_stated,
            self.entropy_stated,
            self.entropy_implied,
            self.gap,
            self.flagged,
            self.p_closest,
            self.entropy_closest,
        )


AUDIT_HEADER = ("p_stated", "entropy_stated", "entropy_implied", "gap", "flagged", "p_closest", "entropy_closest")

_AUDIT_DEFAULTS = {
    "p_min": 0.05,
    "p_max": 0.5,
    "p_step": 0.005,
    "implied_entropy": 3.86897353302468,
    "flag_gap": 0.1,
}


def audit_fig4(trials: int = FIG4_TRIALS, p_stated: float = FIG4_P, settings: dict | None = None) -> AuditResult:
    """Compare the stated binomial parameter with the entropy the published curves imply."""
    s = {**_AUDIT_DEFAULTS, **(settings or {})}
    implied = float(s["implied_entropy"])
    stated = shannon_entropy(binomial_pmf(trials, p_stated))
    n_points = int(round((s["p_max"] - s["p_min"]) / s["p_step"])) + 1
    grid = np.linspace(s["p_min"], s["p_max"], n_points)
    entropies = np.array([shannon_entropy(binomial_pmf(trials, float(p))) for p in grid])
    i = int(np.argmin(np.abs(entropies - implied)))
    gap = abs(stated - implied)
    result = AuditResult(
        p_stated=p_stated,
        entropy_stated=stated,
        entropy_implied=implied,
        gap=gap,
        flagged=gap > float(s["flag_gap"]),
        p_closest=float(grid[i]),
        entropy_closest=float(entropies[i]),
    )
    if result.flagged:
        log.warning(
            "binomial(%d, %g) has entropy %.6f bits, %.3f away from the %.6f the published curves imply; "
            "closest parameter on the scan is p=%g",
            trials, p_stated, stated, gap, implied, result.p_closest,
        )
    return result

"""Converse and achievability bounds on d*(M; gamma), single-shot and per-letter."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .codes import exact_code_distortion
from .errors import BoundOrderError, ValidationError
from .focal import check_gamma, focal_entropy_max, focal_entropy_upper
from .prob import INF, Pmf, iid_spectrum, information_values, shannon_entropy

log = logging.getLogger(__name__)

ORDER_SLACK = 1e-12


@dataclass(frozen=True)
class BoundReport:
    """All bound values at one (M, gamma) point."""

    m: int
    gamma: float
    alphabet_size: int
    converse: float
    ach_log: float
    ach_linear: float
    exact_code: float
    fx_optimized: float | None = None

    def violations(self, slack: float = ORDER_SLACK) -> list[str]:
        def above(a: float, b: float) -> bool:
            return a > b + slack * max(1.0, abs(b)) if math.isfinite(b) else False

        problems = []
        if self.converse < 0.0:
            problems.append(f"converse {self.converse!r} < 0")
        if above(self.converse, self.exact_code):
            problems.append(f"converse {self.converse!r} > exact {self.exact_code!r}")
        if self.alphabet_size > self.m:
            if above(self.exact_code, self.ach_log):
                problems.append(f"exact {self.exact_code!r} > log bound {self.ach_log!r}")
            if above(self.ach_log, self.ach_linear):
                problems.append(f"log bound {self.ach_log!r} > linear bound {self.ach_linear!r}")
        if self.fx_optimized is not None:
            if above(self.fx_optimized, self.exact_code):
                problems.append(f"optimised F {self.fx_optimized!r} > exact {self.exact_code!r}")
            if above(self.converse, self.fx_optimized):
                problems.append(f"converse {self.converse!r} > optimised F {self.fx_optimized!r}")
        return problems

    def check(self, slack: float = ORDER_SLACK) -> BoundReport:
        problems = self.violations(slack)
        if problems:
            raise BoundOrderError(
                f"bound chain broken at M={self.m}, gamma={self.gamma!r}: " + "; ".join(problems),
                report=self,
            )
        return self


def _check_m(m: float) -> None:
    if not m >= 1:
        raise ValidationError(f"code size M must be >= 1, got {m}")


def converse_bound(r: Pmf, m: int, gamma: float) -> float:
    """[H(r) - log2 M - h_gamma(|X|)]^+."""
    _check_m(m)
    check_gamma(gamma)
    if len(r) < 2:
        return 0.0
    h = focal_entropy_max(len(r), float(gamma)).value
    return max(0.0, shannon_entropy(r) - math.log2(m) - h)


def converse_n_letter(r: Pmf, n: int, rate: float, gamma: float) -> float:
    """Per-letter converse at blocklength n using the alphabet-free h_gamma ceiling."""
    if n < 1:
        raise ValidationError(f"blocklength must be >= 1, got {n}")
    if rate < 0:
        raise ValidationError(f"rate must be >= 0, got {rate}")
    return max(0.0, n * shannon_entropy(r) - n * rate - focal_entropy_upper(gamma)) / n


def _event_terms(r: Pmf, f: Pmf, m: int) -> tuple[np.ndarray, np.ndarray] | None:
    """(r, iota - log2 M) over symbols with iota > log2 M; None if one has iota infinite."""
    if len(r) != len(f):
        raise ValidationError(f"source and F have different lengths ({len(r)} vs {len(f)})")
    _check_m(m)
    iota = information_values(f)
    in_event = (r.probs > 0) & (iota > math.log2(m))
    excess = iota[in_event] - math.log2(m)
    if np.any(np.isinf(excess)):
        return None
    return r.probs[in_event], excess


def ach_bound_log(r: Pmf, f: Pmf, m: int, gamma: float) -> float:
    """E[1_A (t/(1+t))^gamma log2(1+t)] with t = 2^(iota_F(X) - log2 M)."""
    check_gamma(gamma)
    terms = _event_terms(r, f, m)
    if terms is None:
        return INF
    mass, excess = terms
    t = np.exp2(excess)
    return float(np.sum(mass * (t / (t + 1.0)) ** gamma * np.log2(1.0 + t)))


def _linear_terms(excess: np.ndarray, gamma: float) -> np.ndarray:
    return (1.0 - 0.5 * np.exp2(-excess)) ** gamma * (excess + 1.0)


def ach_bound_linear(r: Pmf, f: Pmf, m: int, gamma: float) -> float:
    """E[1_A (1 - 2^(log2 M - iota)/2)^gamma (iota - log2 M + 1)]."""
    check_gamma(gamma)
    terms = _event_terms(r, f, m)
    if terms is None:
        return INF
    mass, excess = terms
    return float(np.sum(mass * _linear_terms(excess, gamma)))


def ach_bound_n_letter(r: Pmf, f: Pmf, n: int, rate: float, gamma: float) -> float:
    """Linear achievability bound at blocklength n with M = 2^(n rate), per letter."""
    check_gamma(gamma)
    if not rate > 0:
        raise ValidationError(f"rate must be > 0, got {rate}")
    spectrum = iid_spectrum(r, f, n)
    threshold = n * rate
    above = spectrum.values > threshold
    excess = spectrum.values[above] - threshold
    return float(np.sum(spectrum.masses[above] * _linear_terms(excess, gamma))) / n


def asymptotic_distortion_rate(r: Pmf, rate: float) -> float:
    """D(R; gamma) = [H(r) - R]^+, the same for every gamma."""
    if rate < 0:
        raise ValidationError(f"rate must be >= 0, got {rate}")
    return max(0.0, shannon_entropy(r) - rate)


def bound_report(
    r: Pmf,
    f: Pmf,
    m: int,
    gamma: float,
    fx_optimized: float | None = None,
) -> BoundReport:
    report = BoundReport(
        m=m,
        gamma=float(gamma),
        alphabet_size=len(r),
        converse=converse_bound(r, m, gamma),
        ach_log=ach_bound_log(r, f, m, gamma),
        ach_linear=ach_bound_linear(r, f, m, gamma),
        exact_code=exact_code_distortion(r, f, m, gamma),
        fx_optimized=fx_optimized,
    )
    if math.isinf(report.ach_log):
        log.warning("achievability bounds are vacuous at M=%d gamma=%g: F misses source mass", m, gamma)
    return report

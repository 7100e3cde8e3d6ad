"""Probability primitives: validated PMFs, re-weighted sources, entropy, information spectra."""

from __future__ import annotations

import math
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError

SUM_TOL = 1e-9
MERGE_TOL = 1e-9
INF = math.inf


# ---------------------------------------------------------------------------
# Pmf
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over symbol ids 0..k-1 (read-only array)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("a Pmf needs at least one entry")
        bad = np.flatnonzero(~np.isfinite(arr) | (arr < 0))
        if bad.size:
            i = int(bad[0])
            raise ValidationError(f"invalid probability at index {i}: {arr[i]!r}")
        total = float(arr.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, expected 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return int(self.probs.size)

    def __getitem__(self, x: int) -> float:
        return float(self.probs[x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def tolist(self) -> list[float]:
        return self.probs.tolist()

    @classmethod
    def uniform(cls, k: int) -> Pmf:
        if k < 1:
            raise ValidationError(f"uniform alphabet size must be >= 1, got {k}")
        return cls(np.full(k, 1.0 / k))

    @classmethod
    def point_mass(cls, k: int, x: int) -> Pmf:
        arr = np.zeros(k)
        arr[x] = 1.0
        return cls(arr)


def pmf_from_values(values: Sequence[float] | np.ndarray, renormalize: bool = False) -> Pmf:
    """Validate raw values into a Pmf, optionally dividing by their sum."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("expected a non-empty list of values")
    bad = np.flatnonzero(~np.isfinite(arr) | (arr < 0))
    if bad.size:
        i = int(bad[0])
        raise ValidationError(f"negative or non-finite value at index {i}: {arr[i]!r}")
    total = float(arr.sum())
    if total <= 0.0:
        raise ValidationError("values have zero total mass")
    if renormalize:
        arr = arr / total
    return Pmf(arr)


def uniform_pmf(k: int) -> Pmf:
    return Pmf.uniform(k)


def bernoulli_pmf(success_prob: float) -> Pmf:
    """Two-symbol source; symbol 1 carries ``success_prob``."""
    if not 0.0 <= success_prob <= 1.0:
        raise ValidationError(f"success probability must lie in [0, 1], got {success_prob}")
    return Pmf(np.array([1.0 - success_prob, success_prob]))


def binomial_pmf(trials: int, success_prob: float) -> Pmf:
    """Binomial(trials, success_prob) evaluated in log space via log-gamma."""
    if trials < 0:
        raise ValidationError(f"trials must be >= 0, got {trials}")
    if not 0.0 <= success_prob <= 1.0:
        raise ValidationError(f"success probability must lie in [0, 1], got {success_prob}")
    if success_prob in (0.0, 1.0):
        return Pmf.point_mass(trials + 1, 0 if success_prob == 0.0 else trials)
    i = np.arange(trials + 1, dtype=float)
    log_pmf = (
        gammaln(trials + 1.0)
        - gammaln(i + 1.0)
        - gammaln(trials - i + 1.0)
        + i * math.log(success_prob)
        + (trials - i) * math.log1p(-success_prob)
    )
    return pmf_from_values(np.exp(log_pmf), renormalize=True)


# ---------------------------------------------------------------------------
# Re-weighted sources
# ---------------------------------------------------------------------------

def _check_same_length(a: Pmf, b: Pmf, what: str) -> None:
    if len(a) != len(b):
        raise ValidationError(f"{what}: length mismatch ({len(a)} vs {len(b)})")


def weight_function(p: Pmf, q: Pmf) -> np.ndarray:
    """omega(x) = Q(x) / sum_a P(a) Q(a)."""
    _check_same_length(p, q, "weight")
    denom = float(np.dot(p.probs, q.probs))
    if denom <= 0.0:
        raise ValidationError("source and weight distribution have disjoint support")
    return q.probs / denom


def reweight(p: Pmf, q: Pmf) -> Pmf:
    """R_X(x) = P(x) Q(x) / sum_a P(a) Q(a)."""
    return pmf_from_values(p.probs * weight_function(p, q), renormalize=True)


@dataclass(frozen=True, eq=False)
class Source:
    """Raw source P_X, optional weight distribution Q and the cached R_X."""

    p: Pmf
    q: Pmf | None = None
    name: str = ""
    r: Pmf = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", self.p if self.q is None else reweight(self.p, self.q))

    def __len__(self) -> int:
        return len(self.p)


# ---------------------------------------------------------------------------
# Entropy and information
# ---------------------------------------------------------------------------

def shannon_entropy(p: Pmf) -> float:
    """Entropy in bits; zero-probability symbols contribute nothing."""
    s = p.probs[p.probs > 0]
    return max(0.0, float(-np.sum(s * np.log2(s))))


def information(f: Pmf, x: int) -> float:
    """iota_f(x) = log2(1/f(x)); INF when f(x) = 0."""
    fx = f[x]
    if fx == 0.0:
        return INF
    return math.log2(1.0 / fx)


def information_values(f: Pmf) -> np.ndarray:
    """Vector of iota_f(x) for every symbol, INF where f(x) = 0."""
    out = np.full(len(f), INF)
    pos = f.probs > 0
    out[pos] = np.log2(1.0 / f.probs[pos])
    return out


# ---------------------------------------------------------------------------
# Information spectrum
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Spectrum:
    """Distribution of an information sum as (value, mass) atoms, values increasing."""

    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        masses = np.array(self.masses, dtype=float)
        if values.shape != masses.shape or values.ndim != 1 or values.size == 0:
            raise ValidationError("spectrum needs matching, non-empty value and mass arrays")
        if np.any(masses < 0) or abs(float(masses.sum()) - 1.0) > SUM_TOL:
            raise ValidationError("spectrum masses must be non-negative and sum to 1")
        if np.any(np.diff(values) <= MERGE_TOL):
            raise ValidationError("spectrum values must be strictly increasing beyond the merge tolerance")
        values.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return int(self.values.size)

    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.masses.tolist()))

    def mean(self) -> float:
        return float(np.dot(self.values, self.masses))

    def tail_mass(self, threshold: float) -> float:
        """Mass strictly above ``threshold``."""
        return float(self.masses[self.values > threshold].sum())

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.masses, fn(self.values)))


def _merge_atoms(values: np.ndarray, masses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v = values[order]
    m = masses[order]
    starts = np.flatnonzero(np.r_[True, np.diff(v) > MERGE_TOL])
    return v[starts], np.add.reduceat(m, starts)


def _single_letter_atoms(r: Pmf, f: Pmf) -> tuple[np.ndarray, np.ndarray]:
    _check_same_length(r, f, "spectrum")
    carried = r.probs > 0
    if np.any(carried & (f.probs == 0)):
        x = int(np.flatnonzero(carried & (f.probs == 0))[0])
        raise ValidationError(f"symbol {x} has positive source mass but infinite information")
    return _merge_atoms(information_values(f)[carried], r.probs[carried])


def iid_spectrum(r: Pmf, f: Pmf, n: int) -> Spectrum:
    """Exact law of sum_i iota_f(X_i) for X_1..X_n i.i.d. ~ r, by repeated convolution."""
    if n < 1:
        raise ValidationError(f"blocklength must be >= 1, got {n}")
    base_v, base_m = _single_letter_atoms(r, f)
    values, masses = base_v, base_m
    for _ in range(n - 1):
        values, masses = _merge_atoms(
            (values[:, None] + base_v[None, :]).ravel(),
            (masses[:, None] * base_m[None, :]).ravel(),
        )
    return Spectrum(values, masses)


# ---------------------------------------------------------------------------
# PMF text files
# ---------------------------------------------------------------------------

_SEPARATORS = re.compile(r"[,\s]+")


def parse_pmf_text(text: str) -> list[float]:
    """One value per line or comma/whitespace separated; '#' lines ignored.

    Values may be decimals or fractions such as ``2/3``.
    """
    values: list[float] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for token in _SEPARATORS.split(line):
            if not token:
                continue
            try:
                values.append(float(Fraction(token)))
            except (ValueError, ZeroDivisionError):
                raise ValidationError(f"cannot parse probability value {token!r}") from None
    if not values:
        raise ValidationError("no probability values found")
    return values


def read_pmf_file(path: str | Path, renormalize: bool = False) -> Pmf:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read PMF file {path}: {exc.strerror or exc}") from exc
    return pmf_from_values(parse_pmf_text(text), renormalize=renormalize)

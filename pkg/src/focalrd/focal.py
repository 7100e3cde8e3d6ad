"""Focal-loss distortion, expected code distortion and the entropy-like H_gamma family."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ValidationError
from .prob import INF, Pmf

if TYPE_CHECKING:
    from .codes import Code

Q_GRID_POINTS = 10_001
INFLECTION_TOL = 1e-12

_Q_GRID = np.linspace(0.0, 1.0, Q_GRID_POINTS)
_Q_GRID.setflags(write=False)


@dataclass(frozen=True)
class FocalParams:
    gamma: float = 0.0

    def __post_init__(self) -> None:
        check_gamma(self.gamma)


@dataclass(frozen=True)
class HGammaMax:
    """Maximum of H_gamma over an alphabet and the (d, q) that attains it."""

    value: float
    d_star: int
    q_star: float


def check_gamma(gamma: float) -> None:
    if not (gamma >= 0.0 and math.isfinite(gamma)):
        raise ValidationError(f"focus parameter gamma must be a finite value >= 0, got {gamma!r}")


# ---------------------------------------------------------------------------
# Pointwise quantities
# ---------------------------------------------------------------------------

def focal_power(t: float | np.ndarray, gamma: float) -> float | np.ndarray:
    """t ** ((1 - t) ** gamma), continuous at t = 0 (-> 0) and t = 1 (-> 1)."""
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.where(arr >= 1.0, 1.0, 0.0)
    inner = (arr > 0.0) & (arr < 1.0)
    ti = arr[inner]
    out[inner] = np.exp2((1.0 - ti) ** gamma * np.log2(ti))
    return float(out[0]) if scalar else out


def focal_loss_values(t: np.ndarray, gamma: float) -> np.ndarray:
    """(1 - t)^gamma * log2(1/t) elementwise; 0 at t = 1, INF at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    out[t <= 0.0] = INF
    inner = (t > 0.0) & (t < 1.0)
    ti = t[inner]
    out[inner] = (1.0 - ti) ** gamma * np.log2(1.0 / ti)
    return out


def focal_distortion(x: int, phat: Pmf, gamma: float) -> float:
    """Focal loss of symbol ``x`` against soft reconstruction ``phat`` (weight absorbed)."""
    check_gamma(gamma)
    t = phat[x]
    if t >= 1.0:
        return 0.0
    if t <= 0.0:
        return INF
    return (1.0 - t) ** gamma * math.log2(1.0 / t)


def weighted_focal_distortion(x: int, phat: Pmf, gamma: float, omega: np.ndarray) -> float:
    """omega(x) * focal loss; a zero weight silences even an infinite loss."""
    w = float(omega[x])
    if w == 0.0:
        return 0.0
    return w * focal_distortion(x, phat, gamma)


def expected_distortion(r: Pmf, code: Code, gamma: float) -> float:
    """E_r[d(X; g(f(X)))] for a hard compressor and soft decompressor."""
    check_gamma(gamma)
    if len(r) != code.alphabet_size:
        raise ValidationError(
            f"source has {len(r)} symbols but the code covers {code.alphabet_size}"
        )
    carried = r.probs > 0
    t = code.reconstruction_probs()[carried]
    if np.any(t <= 0.0):
        return INF
    return float(np.sum(r.probs[carried] * focal_loss_values(t, gamma)))


# ---------------------------------------------------------------------------
# H_gamma and its alphabet maximum
# ---------------------------------------------------------------------------

def focal_entropy(p: Pmf, gamma: float) -> float:
    """H_gamma(p) = log2 sum_x p(x)^((1-p(x))^gamma)."""
    check_gamma(gamma)
    if gamma == 0.0:
        return 0.0
    s = p.probs[p.probs > 0]
    return float(np.log2(np.sum(focal_power(s, gamma))))


def _structured_objective(q: float | np.ndarray, d: int, gamma: float) -> float | np.ndarray:
    """log2((1-q)^(q^gamma) + d (q/d)^((1-q/d)^gamma))."""
    q = np.asarray(q, dtype=float)
    total = focal_power(1.0 - q, gamma) + d * focal_power(q / d, gamma)
    if q.ndim == 0:
        return math.log2(total)
    return np.log2(total)


@lru_cache(maxsize=65536)
def _best_q(d: int, gamma: float) -> tuple[float, float]:
    grid = _Q_GRID
    vals = _structured_objective(grid, d, gamma)
    i = int(np.argmax(vals))
    q_best, v_best = float(grid[i]), float(vals[i])
    lo, hi = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])
    res = minimize_scalar(
        lambda q: -_structured_objective(q, d, gamma),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    q_ref = float(res.x)
    v_ref = _structured_objective(q_ref, d, gamma)
    if v_ref > v_best:
        return q_ref, v_ref
    return q_best, v_best


@lru_cache(maxsize=4096)
def focal_entropy_max(alphabet_size: int, gamma: float) -> HGammaMax:
    """h_gamma(|X|): maximise over d in [1, |X|-1] and q in [0, 1]; lowest d wins ties."""
    if alphabet_size < 2:
        raise ValidationError(f"alphabet size must be >= 2, got {alphabet_size}")
    check_gamma(gamma)
    best = HGammaMax(value=-INF, d_star=1, q_star=0.0)
    for d in range(1, alphabet_size):
        q, v = _best_q(d, gamma)
        if v > best.value:
            best = HGammaMax(value=v, d_star=d, q_star=q)
    return best


def structured_maximizer(alphabet_size: int, hmax: HGammaMax) -> Pmf:
    """Pmf with one atom 1-q, d atoms q/d and zeros elsewhere."""
    probs = np.zeros(alphabet_size)
    probs[0] = 1.0 - hmax.q_star
    probs[1 : hmax.d_star + 1] = hmax.q_star / hmax.d_star
    return Pmf(probs)


def focal_entropy_upper(gamma: float) -> float:
    """Alphabet-free ceiling log2(1 + e^(max(1, gamma)/e)) on h_gamma."""
    check_gamma(gamma)
    return math.log2(1.0 + math.exp(max(1.0, gamma) / math.e))


def inflection_count(gamma: float, grid_size: int = 10_000) -> int:
    """Sign changes of the second difference of t^((1-t)^gamma) on [1e-4, 1-1e-4]."""
    check_gamma(gamma)
    if grid_size < 100:
        raise ValidationError(f"grid_size must be >= 100, got {grid_size}")
    x = np.linspace(1e-4, 1.0 - 1e-4, grid_size)
    f = focal_power(x, gamma)
    d2 = f[:-2] - 2.0 * f[1:-1] + f[2:]
    signs = np.sign(d2[np.abs(d2) >= INFLECTION_TOL])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))

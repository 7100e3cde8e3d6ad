"""Exhaustive d*(M; gamma) on small alphabets and a brute-force simplex search for h_gamma."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .codes import Code
from .errors import InstanceTooLargeError, ValidationError
from .focal import check_gamma, focal_loss_values, focal_power
from .prob import Pmf

log = logging.getLogger(__name__)

MAX_ALPHABET = 10
MAX_FUNCTIONS = 10**6
CELL_STARTS = 50
GRID_POINTS = 2001
EDGE = 1e-9
REFINE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class OracleResult:
    """Best partition found, its per-cell reconstructions and total distortion.

    ``certified`` is False when a cell of three or more symbols was solved by
    multi-start descent at gamma > 1, where only a best-found value is known.
    """

    value: float
    best_partition: tuple[int, ...]
    best_reconstructions: tuple[Pmf, ...]
    certified: bool = True

    def cells(self) -> list[tuple[int, ...]]:
        n_cells = len(self.best_reconstructions)
        return [
            tuple(a for a, c in enumerate(self.best_partition) if c == cell)
            for cell in range(n_cells)
        ]

    def as_code(self) -> Code:
        k = len(self.best_partition)
        return Code(
            m=len(self.best_reconstructions),
            compressor=np.asarray(self.best_partition, dtype=int),
            decompressor=self.best_reconstructions,
            order=np.arange(k),
        )


# ---------------------------------------------------------------------------
# Per-cell reconstruction
# ---------------------------------------------------------------------------

def _cell_objective(t: np.ndarray, w: np.ndarray, gamma: float) -> float:
    return float(np.sum(w * focal_loss_values(t, gamma)))


def _phi_grad(t: np.ndarray, gamma: float) -> np.ndarray:
    """d/dt of (1-t)^gamma log2(1/t) for t in (0, 1)."""
    u = 1.0 - t
    lead = gamma * u ** (gamma - 1.0) * np.log2(t) if gamma > 0 else 0.0
    return lead - u**gamma / (t * math.log(2.0))


def _solve_pair(w: np.ndarray, gamma: float, grid_points: int) -> tuple[np.ndarray, float]:
    def objective(s: float) -> float:
        return _cell_objective(np.array([s, 1.0 - s]), w, gamma)

    grid = np.linspace(EDGE, 1.0 - EDGE, grid_points)
    pair = np.stack([grid, 1.0 - grid], axis=1)
    vals = np.sum(w * focal_loss_values(pair, gamma), axis=1)

    cond = float(w[0] / w.sum())
    candidates = [(cond, objective(cond))]
    for i in np.argsort(vals, kind="stable")[:3].tolist():
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                              options={"xatol": REFINE_TOL})
        candidates.append((float(grid[i]), float(vals[i])))
        candidates.append((float(res.x), objective(float(res.x))))
    s, v = min(candidates, key=lambda sv: sv[1])
    return np.array([s, 1.0 - s]), v


def _starting_points(w: np.ndarray, starts: int, seed: int) -> list[np.ndarray]:
    size = w.size
    points = [w / w.sum(), np.full(size, 1.0 / size)]
    rng = np.random.default_rng(seed)
    points.extend(rng.dirichlet(np.ones(size), size=max(starts - 2, 0)))
    return points[:starts]


def _solve_simplex(w: np.ndarray, gamma: float, starts: int, seed: int) -> tuple[np.ndarray, float]:
    size = w.size
    lo, hi = 1e-12, 1.0 - 1e-12

    def fun(t: np.ndarray) -> float:
        return _cell_objective(np.clip(t, lo, hi), w, gamma)

    def jac(t: np.ndarray) -> np.ndarray:
        return w * _phi_grad(np.clip(t, lo, hi), gamma)

    constraint = {"type": "eq", "fun": lambda t: np.sum(t) - 1.0, "jac": lambda t: np.ones(size)}
    best_t, best_v = None, math.inf
    for x0 in _starting_points(w, starts, seed):
        v0 = _cell_objective(x0, w, gamma)
        if v0 < best_v:
            best_t, best_v = x0, v0
        res = minimize(fun, x0, jac=jac, method="SLSQP", bounds=[(lo, hi)] * size,
                       constraints=[constraint], options={"ftol": 1e-14, "maxiter": 500})
        t = np.clip(res.x, 0.0, None)
        if t.sum() <= 0:
            continue
        t = t / t.sum()
        v = _cell_objective(t, w, gamma)
        if v < best_v:
            best_t, best_v = t, v
    return best_t, best_v


def optimal_cell_reconstruction(
    weights: Sequence[tuple[int, float]],
    gamma: float,
    *,
    starts: int = CELL_STARTS,
    grid_points: int = GRID_POINTS,
    seed: int = 0,
) -> tuple[Pmf, float]:
    """Reconstruction over the cell (in the given order) minimising sum r(a) d(a; t)."""
    check_gamma(gamma)
    if not weights:
        raise ValidationError("a cell needs at least one symbol")
    w_all = np.array([mass for _, mass in weights], dtype=float)
    if np.any(w_all < 0) or not np.all(np.isfinite(w_all)):
        raise ValidationError("cell masses must be finite and non-negative")
    size = w_all.size
    live = np.flatnonzero(w_all > 0)
    t_all = np.zeros(size)
    if live.size == 0:
        return Pmf(np.full(size, 1.0 / size)), 0.0
    if live.size == 1:
        t_all[live[0]] = 1.0
        return Pmf(t_all), 0.0
    w = w_all[live]
    if live.size == 2:
        t, v = _solve_pair(w, gamma, grid_points)
    else:
        t, v = _solve_simplex(w, gamma, starts, seed)
    t_all[live] = t
    return Pmf(t_all / t_all.sum()), v


# ---------------------------------------------------------------------------
# Exhaustive search over partitions
# ---------------------------------------------------------------------------

def restricted_growth_strings(k: int, max_blocks: int) -> Iterator[tuple[int, ...]]:
    """Set partitions of range(k) into at most ``max_blocks`` blocks, lexicographic."""
    rgs = [0] * k

    def extend(i: int, used: int) -> Iterator[tuple[int, ...]]:
        if i == k:
            yield tuple(rgs)
            return
        for label in range(min(used + 1, max_blocks)):
            rgs[i] = label
            yield from extend(i + 1, max(used, label + 1))

    if k == 0:
        return iter(())
    rgs[0] = 0
    return extend(1, 1)


def check_guard_rail(k: int, m: int, max_alphabet: int = MAX_ALPHABET,
                     max_functions: int = MAX_FUNCTIONS) -> None:
    if k > max_alphabet or m**k > max_functions:
        raise InstanceTooLargeError(
            f"exhaustive search refused: alphabet {k} with M={m} "
            f"(limits: alphabet <= {max_alphabet}, M^alphabet <= {max_functions})"
        )


def exhaustive_dstar(
    r: Pmf,
    m: int,
    gamma: float,
    *,
    starts: int = CELL_STARTS,
    grid_points: int = GRID_POINTS,
    seed: int = 0,
    max_alphabet: int = MAX_ALPHABET,
    max_functions: int = MAX_FUNCTIONS,
) -> OracleResult:
    """Minimum average focal distortion over every M-message deterministic code."""
    if m < 1:
        raise ValidationError(f"code size M must be >= 1, got {m}")
    check_gamma(gamma)
    k = len(r)
    check_guard_rail(k, m, max_alphabet, max_functions)

    solved: dict[tuple[int, ...], tuple[Pmf, float]] = {}

    def solve(cell: tuple[int, ...]) -> tuple[Pmf, float]:
        if cell not in solved:
            solved[cell] = optimal_cell_reconstruction(
                [(a, r[a]) for a in cell], gamma,
                starts=starts, grid_points=grid_points, seed=seed,
            )
        return solved[cell]

    best_value, best_rgs = math.inf, None
    for rgs in restricted_growth_strings(k, m):
        cells = _cells_of(rgs)
        value = 0.0
        for cell in cells:
            value += solve(cell)[1]
        if value < best_value:
            best_value, best_rgs = value, rgs

    cells = _cells_of(best_rgs)
    recons = []
    for cell in cells:
        local, _ = solve(cell)
        full = np.zeros(k)
        full[list(cell)] = local.probs
        recons.append(Pmf(full))
    multi = [cell for cell in cells if np.count_nonzero(r.probs[list(cell)]) >= 3]
    certified = not multi or gamma <= 1.0
    if not certified:
        log.warning("oracle value at M=%d gamma=%g is best-found, not certified", m, gamma)
    log.debug("exhaustive d*: M=%d gamma=%g value=%.15g cells=%s", m, gamma, best_value, cells)
    return OracleResult(
        value=float(best_value),
        best_partition=best_rgs,
        best_reconstructions=tuple(recons),
        certified=certified,
    )


def _cells_of(rgs: tuple[int, ...]) -> list[tuple[int, ...]]:
    n_cells = max(rgs) + 1
    return [tuple(a for a, c in enumerate(rgs) if c == cell) for cell in range(n_cells)]


# ---------------------------------------------------------------------------
# Simplex lattice search for the maximum of H_gamma
# ---------------------------------------------------------------------------

def simplex_grid_max_focal_entropy(alphabet_size: int, gamma: float, step: float) -> float:
    """Largest H_gamma over the lattice of the simplex with spacing ``step``."""
    if alphabet_size not in (2, 3, 4):
        raise ValidationError(f"alphabet_size must be 2, 3 or 4, got {alphabet_size}")
    if step < 0.005:
        raise ValidationError(f"step must be >= 0.005, got {step}")
    check_gamma(gamma)
    if gamma == 0.0:
        return 0.0
    n = int(round(1.0 / step))
    best = -math.inf
    for head in itertools.product(range(n + 1), repeat=alphabet_size - 2):
        rest = n - sum(head)
        if rest < 0:
            continue
        i = np.arange(rest + 1)
        cols = [np.full(i.size, h / n) for h in head] + [i / n, (rest - i) / n]
        points = np.stack(cols, axis=1)
        totals = np.sum(focal_power(points, gamma), axis=1)
        best = max(best, float(np.max(np.log2(totals))))
    return best

"""Greedy mass-balancing codes: compressor, cell-normalised decompressor, exact distortion."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .focal import check_gamma
from .prob import INF, Pmf


@dataclass(frozen=True, eq=False)
class Code:
    """Compressor symbol -> message and one reconstruction Pmf per message.

    ``m`` counts the messages actually used; the trivial identity code for an
    alphabet no larger than the budget uses one message per symbol.
    """

    m: int
    compressor: np.ndarray
    decompressor: tuple[Pmf, ...]
    order: np.ndarray

    @property
    def alphabet_size(self) -> int:
        return int(self.compressor.size)

    def cells(self) -> list[tuple[int, ...]]:
        return [tuple(np.flatnonzero(self.compressor == msg).tolist()) for msg in range(self.m)]

    def reconstruction_probs(self) -> np.ndarray:
        """g(f(a))(a) for every symbol a."""
        return np.array(
            [self.decompressor[msg][a] for a, msg in enumerate(self.compressor.tolist())]
        )

    def dump_rows(self, f_dist: Pmf) -> list[tuple[int, int, float, float]]:
        t = self.reconstruction_probs()
        return [
            (a, int(msg), f_dist[a], float(t[a]))
            for a, msg in enumerate(self.compressor.tolist())
        ]


def sorted_order(f_dist: Pmf | np.ndarray) -> np.ndarray:
    """Symbols by decreasing mass, ties by ascending id."""
    probs = f_dist.probs if isinstance(f_dist, Pmf) else f_dist
    return np.lexsort((np.arange(probs.size), -probs))


def _assign(f_probs: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Greedy compressor: next symbol joins the lightest message, lowest id on ties."""
    k = f_probs.size
    order = sorted_order(f_probs)
    mass = f_probs.tolist()
    compressor = np.empty(k, dtype=int)
    bins: list[tuple[float, int]] = []
    for msg, a in enumerate(order[:m].tolist()):
        compressor[a] = msg
        bins.append((mass[a], msg))
    heapq.heapify(bins)
    for a in order[m:].tolist():
        load, msg = heapq.heappop(bins)
        compressor[a] = msg
        heapq.heappush(bins, (load + mass[a], msg))
    return compressor, order


def _check_budget(m: int) -> None:
    if m < 1:
        raise ValidationError(f"code size M must be >= 1, got {m}")


def build_code(f_dist: Pmf, m: int) -> Code:
    _check_budget(m)
    k = len(f_dist)
    if k <= m:
        return Code(
            m=k,
            compressor=np.arange(k),
            decompressor=tuple(Pmf.point_mass(k, a) for a in range(k)),
            order=np.arange(k),
        )
    compressor, order = _assign(f_dist.probs, m)
    decompressor = []
    for msg in range(m):
        cell = compressor == msg
        weights = np.where(cell, f_dist.probs, 0.0)
        total = float(weights.sum())
        if total > 0.0:
            decompressor.append(Pmf(weights / total))
        else:
            # cell carries no F-mass: spread uniformly over its symbols
            decompressor.append(Pmf(cell / float(cell.sum())))
    return Code(m=m, compressor=compressor, decompressor=tuple(decompressor), order=order)


def exact_code_distortion(r: Pmf, f_dist: Pmf, m: int, gamma: float) -> float:
    """Average focal distortion of the greedy code built from ``f_dist``, cell by cell."""
    _check_budget(m)
    check_gamma(gamma)
    k = len(f_dist)
    if len(r) != k:
        raise ValidationError(f"source and F have different lengths ({len(r)} vs {k})")
    if k <= m:
        return 0.0
    compressor, _ = _assign(f_dist.probs, m)
    cell_mass = np.bincount(compressor, weights=f_dist.probs, minlength=m)
    cell_size = np.bincount(compressor, minlength=m)
    total = 0.0
    for a in np.flatnonzero(r.probs > 0).tolist():
        msg = compressor[a]
        p_cell = float(cell_mass[msg])
        fa = float(f_dist.probs[a])
        if p_cell > 0.0:
            if fa == 0.0:
                return INF
            ratio = fa / p_cell
            if ratio >= 1.0:
                continue
            total += r.probs[a] * math.log2(p_cell / fa) * (1.0 - ratio) ** gamma
        else:
            n_cell = int(cell_size[msg])
            if n_cell > 1:
                total += r.probs[a] * math.log2(n_cell) * (1.0 - 1.0 / n_cell) ** gamma
    return float(total)

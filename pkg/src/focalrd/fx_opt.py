"""Search over the auxiliary distribution F_X for the smallest exact code distortion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .codes import exact_code_distortion
from .errors import ValidationError
from .focal import check_gamma
from .prob import Pmf

log = logging.getLogger(__name__)

MIN_STEP = 1e-4
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class FxSearchConfig:
    starts: int = 32
    iterations: int = 400
    seed: int = 0
    step_decay: float = 0.9
    initial_step: float = 0.5

    def __post_init__(self) -> None:
        if self.starts < 1:
            raise ValidationError(f"starts must be >= 1, got {self.starts}")
        if self.iterations < 1:
            raise ValidationError(f"iterations must be >= 1, got {self.iterations}")
        if not 0.0 < self.step_decay < 1.0:
            raise ValidationError(f"step_decay must lie in (0, 1), got {self.step_decay}")
        if not self.initial_step > 0.0:
            raise ValidationError(f"initial_step must be > 0, got {self.initial_step}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def from_config(cls, section: dict, seed: int = 0) -> FxSearchConfig:
        return cls(
            starts=int(section.get("starts", cls.starts)),
            iterations=int(section.get("iterations", cls.iterations)),
            seed=seed,
            step_decay=float(section.get("step_decay", cls.step_decay)),
            initial_step=float(section.get("initial_step", cls.initial_step)),
        )


def _search_from(
    r: Pmf,
    m: int,
    gamma: float,
    theta: np.ndarray,
    rng: np.random.Generator,
    config: FxSearchConfig,
) -> tuple[Pmf, float]:
    """Perturb log-coordinates, keep strict improvements, shrink the step on rejection."""
    f = Pmf(softmax(theta))
    value = exact_code_distortion(r, f, m, gamma)
    step = config.initial_step
    for _ in range(config.iterations):
        proposal = theta + step * rng.standard_normal(theta.size)
        cand = Pmf(softmax(proposal))
        cand_value = exact_code_distortion(r, cand, m, gamma)
        if cand_value < value:
            theta, f, value = proposal, cand, cand_value
        else:
            step *= config.step_decay
            if step < MIN_STEP:
                step = config.initial_step
    return f, value


def optimize_fx(r: Pmf, m: int, gamma: float, config: FxSearchConfig | None = None) -> tuple[Pmf, float]:
    """Best (F, exact distortion) found; F = r is always among the candidates."""
    config = config or FxSearchConfig()
    check_gamma(gamma)
    best_f, best_value = r, exact_code_distortion(r, r, m, gamma)
    if len(r) <= m or best_value == 0.0:
        return best_f, best_value
    base = np.log(np.maximum(r.probs, LOG_FLOOR))
    for start in range(config.starts):
        rng = np.random.default_rng([config.seed, start])
        theta = base if start == 0 else base + config.initial_step * rng.standard_normal(base.size)
        f, value = _search_from(r, m, gamma, theta, rng, config)
        if value < best_value:
            best_f, best_value = f, value
        log.debug("F search start %d: %.15g (best %.15g)", start, value, best_value)
    if not math.isfinite(best_value):
        log.warning("F search found no finite distortion at M=%d gamma=%g", m, gamma)
    return best_f, best_value

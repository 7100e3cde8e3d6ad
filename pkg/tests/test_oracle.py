"""Exhaustive d*(M; gamma), per-cell reconstructions and the simplex lattice search."""
from __future__ import annotations

import math

import numpy as np
import pytest

from focalrd.bounds import converse_bound
from focalrd.codes import exact_code_distortion
from focalrd.errors import InstanceTooLargeError, ValidationError
from focalrd.focal import expected_distortion, focal_entropy, focal_entropy_max, structured_maximizer
from focalrd.oracle import (
    exhaustive_dstar,
    optimal_cell_reconstruction,
    restricted_growth_strings,
    simplex_grid_max_focal_entropy,
)
from focalrd.prob import pmf_from_values, shannon_entropy, uniform_pmf


def _random_instances(count: int = 25, seed: int = 20240611):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        k = int(rng.integers(2, 7))
        m = int(rng.integers(1, 4))
        gamma = float(rng.uniform(0.0, 4.0))
        r = pmf_from_values(rng.dirichlet(np.ones(k)), renormalize=True)
        yield r, m, gamma


# ── optimal_cell_reconstruction ──────────────────────────────────────────────

@pytest.mark.parametrize("gamma", [0.0, 2.0, 9.0])
def test_single_symbol_cell(gamma):
    t, value = optimal_cell_reconstruction([(4, 0.3)], gamma)
    assert t.tolist() == [1.0]
    assert value == 0.0


def test_pair_equal_masses_log_loss():
    t, value = optimal_cell_reconstruction([(0, 1 / 3), (1, 1 / 3)], 0.0)
    assert t.tolist() == pytest.approx([0.5, 0.5], abs=1e-6)
    assert value == pytest.approx(2 / 3, abs=1e-12)


def test_pair_conditional_is_log_loss_optimum():
    t, value = optimal_cell_reconstruction([(1, 1 / 4), (2, 1 / 12)], 0.0)
    assert t.tolist() == pytest.approx([0.75, 0.25], abs=1e-6)
    assert value == pytest.approx(0.270426041486378, abs=1e-12)


def test_zero_mass_symbols_get_no_reconstruction_mass():
    t, value = optimal_cell_reconstruction([(0, 0.5), (1, 0.0), (2, 0.5)], 1.0)
    assert t[1] == 0.0
    assert value == pytest.approx(0.5, abs=1e-9)


def test_empty_cell_rejected():
    with pytest.raises(ValidationError):
        optimal_cell_reconstruction([], 1.0)


@pytest.mark.parametrize("gamma", [0.5, 3.0])
def test_triple_cell_beats_its_conditional(gamma):
    weights = [(0, 0.5), (1, 0.3), (2, 0.2)]
    t, value = optimal_cell_reconstruction(weights, gamma, starts=12)
    masses = np.array([w for _, w in weights])
    conditional = masses / masses.sum()
    baseline = float(np.sum(masses * (1 - conditional) ** gamma * np.log2(1 / conditional)))
    assert value <= baseline + 1e-12
    assert float(np.sum(masses * (1 - t.probs) ** gamma * np.log2(1 / t.probs))) == pytest.approx(value, abs=1e-12)


def test_triple_cell_gamma_zero_is_entropy():
    weights = [(0, 0.2), (1, 0.2), (2, 0.1)]
    _, value = optimal_cell_reconstruction(weights, 0.0, starts=6)
    conditional = pmf_from_values([0.4, 0.4, 0.2])
    assert value == pytest.approx(0.5 * shannon_entropy(conditional), abs=1e-9)


# ── partitions ───────────────────────────────────────────────────────────────

@pytest.mark.parametrize("k, m, count", [(3, 2, 4), (4, 2, 8), (5, 3, 41), (4, 4, 15), (6, 1, 1)])
def test_restricted_growth_string_counts(k, m, count):
    strings = list(restricted_growth_strings(k, m))
    assert len(strings) == count
    assert strings == sorted(strings)
    assert all(s[0] == 0 and max(s) < m for s in strings)


# ── exhaustive_dstar ─────────────────────────────────────────────────────────

def test_uniform_three_gamma_zero(uniform3_source):
    res = exhaustive_dstar(uniform3_source.r, 2, 0.0)
    assert res.value == pytest.approx(0.6667, abs=5e-4)
    assert res.value == pytest.approx(2 / 3, abs=1e-9)
    assert res.certified


def test_uniform_three_gamma_ten(uniform3_source):
    res = exhaustive_dstar(uniform3_source.r, 2, 10.0)
    assert res.value == pytest.approx(0.0007, abs=5e-4)


def test_skewed_three_gamma_zero(skewed3_source):
    res = exhaustive_dstar(skewed3_source.r, 2, 0.0)
    assert res.value == pytest.approx(0.270426041486378, abs=1e-4)
    assert res.cells() == [(0,), (1, 2)]


def test_skewed_three_gamma_ten_not_worse_than_published(skewed3_source):
    res = exhaustive_dstar(skewed3_source.r, 2, 10.0)
    assert 0.0 < res.value <= 0.000325520833333333 + 1e-12


def test_result_reproduces_its_value(skewed3_source):
    res = exhaustive_dstar(skewed3_source.r, 2, 2.5)
    assert expected_distortion(skewed3_source.r, res.as_code(), 2.5) == pytest.approx(res.value, abs=1e-9)
    for recon, cell in zip(res.best_reconstructions, res.cells()):
        outside = np.setdiff1d(np.arange(3), cell)
        assert np.all(recon.probs[outside] == 0.0)


def test_guard_rail_alphabet():
    with pytest.raises(InstanceTooLargeError):
        exhaustive_dstar(uniform_pmf(11), 2, 1.0)


def test_guard_rail_function_count():
    with pytest.raises(InstanceTooLargeError, match="M\\^alphabet"):
        exhaustive_dstar(uniform_pmf(10), 4, 1.0)


def test_budget_covering_alphabet_is_free():
    res = exhaustive_dstar(pmf_from_values([0.2, 0.3, 0.5]), 3, 4.0)
    assert res.value == 0.0


@pytest.mark.parametrize("r, m, gamma", list(_random_instances()))
def test_sandwich(r, m, gamma):
    res = exhaustive_dstar(r, m, gamma, starts=4)
    assert converse_bound(r, m, gamma) <= res.value + 1e-9
    assert res.value <= exact_code_distortion(r, r, m, gamma) + 1e-9


def _conditional_entropy_optimum(r, m) -> float:
    best = math.inf
    for rgs in restricted_growth_strings(len(r), m):
        total = 0.0
        for cell in range(max(rgs) + 1):
            masses = np.array([r[a] for a, c in enumerate(rgs) if c == cell])
            if masses.sum() > 0:
                total += masses.sum() * shannon_entropy(pmf_from_values(masses, renormalize=True))
        best = min(best, total)
    return best


@pytest.mark.parametrize("values, m", [([0.1, 0.2, 0.3, 0.4], 2), ([0.05, 0.15, 0.3, 0.2, 0.3], 2), ([0.5, 0.1, 0.1, 0.3], 3)])
def test_gamma_zero_matches_conditional_entropy(values, m):
    r = pmf_from_values(values)
    res = exhaustive_dstar(r, m, 0.0, starts=6)
    assert res.value == pytest.approx(_conditional_entropy_optimum(r, m), abs=1e-9)


def test_non_increasing_in_m():
    r = pmf_from_values([0.1, 0.2, 0.3, 0.4])
    values = [exhaustive_dstar(r, m, 1.5, starts=6).value for m in (1, 2, 3, 4)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] == 0.0


@pytest.mark.parametrize("fixture_name", ["uniform3_source", "skewed3_source"])
def test_non_increasing_in_gamma(request, fixture_name):
    r = request.getfixturevalue(fixture_name).r
    values = [exhaustive_dstar(r, 2, g, starts=10).value for g in np.linspace(0.0, 10.0, 6)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


# ── simplex lattice search ───────────────────────────────────────────────────

def test_lattice_binary_gamma_one():
    value = simplex_grid_max_focal_entropy(2, 1.0, 0.01)
    assert 0.5 - 1e-3 <= value <= 0.5 + 1e-12


def test_lattice_ternary_gamma_one():
    value = simplex_grid_max_focal_entropy(3, 1.0, 0.01)
    target = math.log2(3) / 3
    assert target - 5e-3 <= value <= target + 1e-12


def test_lattice_gamma_zero():
    assert simplex_grid_max_focal_entropy(3, 0.0, 0.01) == 0.0


@pytest.mark.parametrize("size", [3, 4])
@pytest.mark.parametrize("gamma", [0.5, 2.0, 7.0])
def test_structured_maximum_dominates_lattice(size, gamma):
    hmax = focal_entropy_max(size, gamma)
    lattice = simplex_grid_max_focal_entropy(size, gamma, 0.01)
    assert lattice <= hmax.value + 5e-3
    assert focal_entropy(structured_maximizer(size, hmax), gamma) == pytest.approx(hmax.value, abs=1e-10)


def test_lattice_rejects_out_of_range():
    with pytest.raises(ValidationError):
        simplex_grid_max_focal_entropy(5, 1.0, 0.01)
    with pytest.raises(ValidationError):
        simplex_grid_max_focal_entropy(3, 1.0, 0.001)


# ── two-source curves over the 20-point gamma grid ───────────────────────────

PUBLISHED_UNIFORM3 = [
    0.6667, 0.4629, 0.3214, 0.2232, 0.1549, 0.1076, 0.0747, 0.0519, 0.0360, 0.0250,
    0.0174, 0.0121, 0.0084, 0.0058, 0.0040, 0.0028, 0.0019, 0.0014, 0.0009, 0.0007,
]
PUBLISHED_SKEWED3 = [
    0.270426041486378, 0.193270123296634, 0.147236206978196, 0.111575341768706,
    0.0774696129173672, 0.0537891332478085, 0.0373471706724107, 0.0259310956138338,
    0.0180046227767001, 0.0125010699956052, 0.0086798125666515, 0.00602661581918083,
    0.00418443347170251, 0.00290535916083735, 0.00201726515920138, 0.00140063878414086,
    0.000972499323993806, 0.000675231148727989, 0.000468830253105065, 0.000325520833333333,
]


@pytest.mark.parametrize("index, gamma", list(enumerate(np.linspace(0.0, 10.0, 20).tolist())))
def test_two_source_curves(uniform3_source, skewed3_source, index, gamma):
    d1 = exhaustive_dstar(uniform3_source.r, 2, gamma, starts=10).value
    d2 = exhaustive_dstar(skewed3_source.r, 2, gamma, starts=10).value
    assert d1 == pytest.approx(PUBLISHED_UNIFORM3[index], abs=5e-4)
    # the published second curve keeps the conditional reconstruction, which is not optimal for gamma > 0
    assert d2 <= PUBLISHED_SKEWED3[index] + 1e-12
    if gamma == 0.0:
        assert d2 == pytest.approx(PUBLISHED_SKEWED3[0], abs=1e-4)

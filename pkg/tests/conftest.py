"""Shared pytest fixtures for focalrd tests."""
from __future__ import annotations

import pytest
from focalrd import config
from focalrd.fx_opt import FxSearchConfig
from focalrd.prob import Source, binomial_pmf, pmf_from_values


@pytest.fixture
def temp_config(monkeypatch, tmp_path):
    """Provide an isolated config directory so tests don't touch ~/.config/focalrd."""
    monkeypatch.setattr(config, "_CONFIG_FILE", tmp_path / "config.toml")
    monkeypatch.setattr(config, "_CONFIG_DIR", tmp_path)
    return tmp_path


@pytest.fixture
def uniform3_source() -> Source:
    """First source of the two-source oracle example."""
    return Source(p=pmf_from_values([1 / 3, 1 / 3, 1 / 3]), name="pmf:1/3,1/3,1/3")


@pytest.fixture
def skewed3_source() -> Source:
    """Second source of the two-source oracle example."""
    return Source(p=pmf_from_values([2 / 3, 1 / 4, 1 / 12]), name="pmf:2/3,1/4,1/12")


@pytest.fixture
def binomial_source() -> Source:
    return Source(p=binomial_pmf(100, 0.1), name="binomial:100:0.1")


@pytest.fixture
def fast_search() -> FxSearchConfig:
    return FxSearchConfig(starts=4, iterations=60, seed=0)

"""Shared fixtures for the redlab test suite."""

from __future__ import annotations

import pytest

from redlab.model import CopyMode, SystemConfig


@pytest.fixture
def mm1_config() -> SystemConfig:
    """Single server at half load: every estimate has a textbook value."""
    return SystemConfig(K=1, d=1, lam=0.5, mu=1.0, copy_mode=CopyMode.IID,
                        policy="fcfs", seed=1234)


@pytest.fixture
def small_identical_ps() -> SystemConfig:
    return SystemConfig(K=3, d=2, lam=0.9, mu=1.0, copy_mode=CopyMode.IDENTICAL,
                        policy="ps", seed=1234)

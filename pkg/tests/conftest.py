"""Shared fixtures: domains are session-scoped (operator setup dominates)."""

import numpy as np
import pytest

import wall2wall as w2w


@pytest.fixture(scope="session")
def dom_small():
    """M = 4, N_z = 33: the workhorse for solver identity checks."""
    return w2w.build_domain(2.0 * np.pi, 4, 33)


@pytest.fixture(scope="session")
def dom_medium():
    """M = 8, N_z = 65: roomy enough for design exactness checks."""
    return w2w.build_domain(2.0 * np.pi, 8, 65)


@pytest.fixture(scope="session")
def dom_coarse():
    """M = 4, N_z = 17: the dense-oracle grid."""
    return w2w.build_domain(2.0 * np.pi, 4, 17)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)

"""Shared fixtures for the engine tests."""

import numpy as np
import pytest

from src.phase_engine.bath import DiscreteBath, SpectralModel, SystemParams, discretize
from src.phase_engine.validation import ohmic_model, qbm_validation_model


@pytest.fixture
def params() -> SystemParams:
    return SystemParams(omega0=1.0, mass=1.0)


@pytest.fixture
def ohmic() -> SpectralModel:
    """Ohmic exponential bath at unit coupling, w_c = 10."""
    return SpectralModel(eta=1.0, s=1.0, omega_c=10.0)


@pytest.fixture
def rabi_bath() -> DiscreteBath:
    """One mode resonant with the system, C = 0.1."""
    return DiscreteBath(omegas=np.array([1.0]), couplings=np.array([0.1]))


@pytest.fixture
def weak_bath(params: SystemParams) -> DiscreteBath:
    """64 modes at half the critical coupling."""
    return discretize(ohmic_model(0.5, params, omega_c=10.0), 64)


@pytest.fixture
def small_bath() -> DiscreteBath:
    """Eight weakly coupled modes below w = 10; stable under position coupling."""
    return discretize(qbm_validation_model(), 8, omega_max_factor=5.0)

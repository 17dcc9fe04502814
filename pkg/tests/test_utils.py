"""Tests for the shared numerical helpers."""

import warnings

import numpy as np
import pytest

from src.phase_engine.errors import DomainError
from src.phase_engine.utils import (
    bose_occupation,
    chunks,
    steps_on_grid,
    thermal_factor,
    time_index,
    trapezoid_weights,
    uniform_times,
)


class TestThermalHelpers:
    """Test cases for Bose occupations and thermal factors."""

    def test_zero_temperature(self):
        """Test T = 0 gives no occupation."""
        np.testing.assert_array_equal(bose_occupation([0.5, 2.0], 0.0), [0.0, 0.0])
        np.testing.assert_array_equal(thermal_factor([0.5, 2.0], 0.0), [1.0, 1.0])

    def test_matches_closed_form(self):
        """Test n(w) = 1/(e^(w/T) - 1) and 1 + 2n = coth(w/2T)."""
        omegas = np.array([0.1, 1.0, 3.0])
        np.testing.assert_allclose(
            bose_occupation(omegas, 0.7),
            1.0 / (np.exp(omegas / 0.7) - 1.0),
            rtol=1e-13,
        )
        np.testing.assert_allclose(
            thermal_factor(omegas, 0.7),
            1.0 / np.tanh(omegas / 1.4),
            rtol=1e-13,
        )

    def test_deep_cold_bath_does_not_overflow(self):
        """Test w/T far beyond the exp range gives zero without a RuntimeWarning."""
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            occupation = bose_occupation([1.0, 40.0], 1e-4)
            factor = thermal_factor([1.0, 40.0], 1e-4)
        np.testing.assert_array_equal(occupation, [0.0, 0.0])
        np.testing.assert_array_equal(factor, [1.0, 1.0])

    def test_just_below_cap_is_finite(self):
        """Test an exponent below the cap keeps its tiny positive value."""
        occupation = bose_occupation([690.0], 1.0)
        assert 0.0 < occupation[0] < 1e-299


class TestTimeGrids:
    """Test cases for stored-time grids and quadrature weights."""

    def test_trapezoid_weights(self):
        """Test the end points carry half weight."""
        np.testing.assert_allclose(trapezoid_weights(4, 0.5), [0.25, 0.5, 0.5, 0.25])
        np.testing.assert_array_equal(trapezoid_weights(1, 0.5), [0.0])

    def test_trapezoid_needs_a_sample(self):
        """Test an empty grid is a domain error."""
        with pytest.raises(DomainError):
            trapezoid_weights(0, 0.1)

    def test_uniform_times_and_steps(self):
        """Test stored times land on the step grid."""
        times = uniform_times(1.0, 0.1, store_every=3)
        np.testing.assert_allclose(times, [0.0, 0.3, 0.6, 0.9])
        np.testing.assert_array_equal(steps_on_grid(times, 0.1), [0, 3, 6, 9])
        assert time_index(times, 0.6) == 2

    def test_off_grid_time_refused(self):
        """Test a time that is not a multiple of dt is refused."""
        with pytest.raises(DomainError):
            steps_on_grid(np.array([0.0, 0.25]), 0.1)
        with pytest.raises(DomainError):
            time_index(np.array([0.0, 0.5]), 0.25)

    def test_chunks_cover_range(self):
        """Test slices tile the index range in order."""
        assert list(chunks(5, 2)) == [slice(0, 2), slice(2, 4), slice(4, 5)]

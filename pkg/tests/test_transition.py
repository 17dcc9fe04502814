"""Tests for the bound-state pole, the residue weight and coupling sweeps."""

from unittest.mock import patch

import numpy as np
import pytest

from src.phase_engine import transition
from src.phase_engine.bath import DiscreteBath, SpectralModel, critical_coupling, discretize
from src.phase_engine.dynamics import one_excitation_spectrum
from src.phase_engine.errors import DomainError
from src.phase_engine.oracle import ground_state
from src.phase_engine.transition import (
    Phase,
    find_bound_state,
    pole_function,
    pole_report,
    residue_weight,
    transition_report,
)


@pytest.fixture
def eta_c(ohmic, params):
    return critical_coupling(ohmic, params)


class TestFindBoundState:
    """Test cases for the isolated pole below the bath spectrum."""

    @pytest.mark.parametrize("fraction", [0.5, 0.99])
    def test_no_pole_below_critical(self, ohmic, params, eta_c, fraction):
        """Test eta < eta_c leaves the mode in the normal phase."""
        assert find_bound_state(ohmic.with_eta(fraction * eta_c), params) is None

    @pytest.mark.parametrize("fraction", [1.01, 2.0])
    def test_pole_above_critical(self, ohmic, params, eta_c, fraction):
        """Test eta > eta_c gives a negative pole solving e - w0 + D(e) = 0."""
        model = ohmic.with_eta(fraction * eta_c)
        e1 = find_bound_state(model, params)
        assert e1 is not None and e1 < 0.0
        assert abs(pole_function(model, params, e1)) < 1e-9

    def test_zero_coupling(self, params):
        """Test eta = 0 has no pole."""
        assert find_bound_state(SpectralModel(eta=0.0), params) is None

    def test_two_level_discrete_bath(self, params):
        """Test a single strongly coupled mode: e1 = -1 matches H_1's lowest level."""
        bath = DiscreteBath(omegas=np.array([1.0]), couplings=np.array([2.0]))
        e1 = find_bound_state(bath, params)
        assert e1 == pytest.approx(-1.0, abs=1e-10)
        eigs = one_excitation_spectrum(bath, params)
        assert e1 == pytest.approx(eigs.energies[0], abs=1e-10)

    def test_pole_function_increasing(self, ohmic, params):
        """Test g(e) increases on the negative axis."""
        values = [pole_function(ohmic, params, e) for e in (-3.0, -2.0, -1.0, -0.1)]
        assert all(later > earlier for earlier, later in zip(values, values[1:]))


class TestResidueWeight:
    """Test cases for c0^2 = 1 / (1 + D'(e1))."""

    def test_rabi_example(self, rabi_bath, params):
        """Test D'(0.9) = 1 for C = 0.1, w = 1 gives c0^2 = 1/2."""
        assert residue_weight(rabi_bath, params, 0.9) == pytest.approx(0.5, rel=1e-12)

    def test_matches_ground_vector_weight(self, params):
        """Test the residue equals the system weight of H_1's lowest eigenvector."""
        bath = DiscreteBath(omegas=np.array([1.0]), couplings=np.array([2.0]))
        eigs = one_excitation_spectrum(bath, params)
        weight = residue_weight(bath, params, find_bound_state(bath, params))
        assert weight == pytest.approx(eigs.weights[0], abs=1e-9)

    def test_continuum_needs_negative_energy(self, ohmic, params):
        """Test e1 >= 0 is a domain error for the continuum."""
        with pytest.raises(DomainError):
            residue_weight(ohmic, params, 0.0)

    def test_discrete_needs_energy_below_band(self, rabi_bath, params):
        """Test e1 >= min w_i is a domain error for a discrete bath."""
        with pytest.raises(DomainError):
            residue_weight(rabi_bath, params, 1.0)


class TestPoleReport:
    """Test cases for the per-coupling report."""

    def test_normal_phase_populations(self, params):
        """Test eta = 0 reports the normal phase with rho_inf = (1, 0)."""
        report = pole_report(SpectralModel(eta=0.0), params)
        assert report.phase is Phase.NORMAL
        assert report.rho_inf_diag == (1.0, 0.0)
        assert not report.boundary

    def test_bound_state_populations(self, ohmic, params, eta_c):
        """Test the bound phase reports (1 - c0^4, c0^4)."""
        report = pole_report(ohmic.with_eta(2.0 * eta_c), params)
        assert report.phase is Phase.BOUND_STATE
        assert 0.0 < report.c0sq < 1.0
        ground, excited = report.rho_inf_diag
        assert excited == pytest.approx(report.c0sq**2, rel=1e-14)
        assert ground + excited == pytest.approx(1.0, rel=1e-14)

    def test_residue_grows_away_from_threshold(self, ohmic, params, eta_c):
        """Test c0^2 near eta_c is smaller than deep in the bound phase."""
        near = pole_report(ohmic.with_eta(1.01 * eta_c), params)
        deep = pole_report(ohmic.with_eta(2.0 * eta_c), params)
        assert near.c0sq < deep.c0sq

    def test_boundary_flag(self, ohmic, params, eta_c):
        """Test eta = eta_c is flagged and treated as normal."""
        report = pole_report(ohmic.with_eta(eta_c), params)
        assert report.boundary
        assert report.phase is Phase.NORMAL
        assert report.e1 is None


class TestTransitionReport:
    """Test cases for coupling sweeps."""

    def test_keeps_input_order(self, ohmic, params, eta_c):
        """Test reports come back in the order the couplings were given."""
        fractions = [1.2, 0.5, 0.9, 1.1, 2.0]
        reports = transition_report(ohmic, params, [f * eta_c for f in fractions])
        assert [r.eta for r in reports] == pytest.approx([f * eta_c for f in fractions])
        assert [r.phase for r in reports] == [
            Phase.BOUND_STATE,
            Phase.NORMAL,
            Phase.NORMAL,
            Phase.BOUND_STATE,
            Phase.BOUND_STATE,
        ]

    def test_single_phase_change_along_sorted_sweep(self, ohmic, params, eta_c):
        """Test the phase flips exactly once as eta crosses eta_c."""
        reports = transition_report(ohmic, params, np.linspace(0.1, 3.0, 12) * eta_c)
        phases = [r.phase for r in reports]
        flips = sum(1 for a, b in zip(phases, phases[1:]) if a != b)
        assert flips == 1
        assert phases[0] is Phase.NORMAL and phases[-1] is Phase.BOUND_STATE

    def test_logs_bound_state_count(self, ohmic, params, eta_c, caplog):
        """Test the sweep summary counts the bound-state entries."""
        with caplog.at_level("INFO"):
            transition_report(ohmic, params, [0.5 * eta_c, 1.5 * eta_c, 2.0 * eta_c])
        assert "2 of 3 couplings are in the bound-state phase" in caplog.text

    def test_empty_sweep(self, ohmic, params):
        """Test no couplings gives no reports."""
        assert transition_report(ohmic, params, []) == []

    def test_failing_entry_carries_error(self, ohmic, params):
        """Test one failing coupling does not abort the sweep."""
        real = transition.pole_report

        def flaky(model, system):
            if model.eta == 0.3:
                raise DomainError("bracket failed")
            return real(model, system)

        with patch.object(transition, "pole_report", side_effect=flaky):
            reports = transition_report(ohmic, params, [0.1, 0.3, 0.5])

        assert reports[1].error == "bracket failed"
        assert reports[1].phase is None
        assert reports[1].rho_inf_diag is None
        assert reports[0].error is None and reports[2].error is None


class TestEigenvalueConvergence:
    """Test cases for the pole against exact diagonalization of finite baths."""

    @pytest.mark.slow
    def test_error_shrinks_with_bath_size(self, ohmic, params, eta_c):
        """Test |e1 - lowest eigenvalue| decreases monotonically over N_B = 256, 1024, 4096."""
        strong = ohmic.with_eta(2.0 * eta_c)
        e1 = find_bound_state(strong, params)
        errors = [
            abs(e1 - ground_state(discretize(strong, n), params)[0]) for n in (256, 1024, 4096)
        ]
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 1e-6

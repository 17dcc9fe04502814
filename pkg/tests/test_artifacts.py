"""Tests for artifact writers and readers."""

import numpy as np
import pytest

from src.phase_engine.artifacts import (
    MOMENTS_HEADER,
    ArtifactWriter,
    MomentsRow,
    dump_json,
    read_bath,
    read_json,
    read_moments,
    read_spectrum,
    read_sweep,
    read_wigner,
)
from src.phase_engine.dynamics import CovarianceMatrix, one_excitation_spectrum
from src.phase_engine.transition import Phase, PoleReport
from src.phase_engine.wigner import GridSpec, WignerGrid


@pytest.fixture
def wigner_grid():
    spec = GridSpec(-1.0, 1.0, -2.0, 2.0, 3, 4)
    return WignerGrid(spec, np.arange(12, dtype=float).reshape(3, 4) / 7.0 - 0.5)


class TestMoments:
    """Test cases for moments.csv."""

    def test_header_and_values(self, tmp_path):
        """Test the header order and exact float reprs."""
        row = MomentsRow(
            t=0.5,
            u=0.0 - 0.5j,
            v=0.125,
            cov=CovarianceMatrix(0.5, 0.1, 0.75),
            occupation=0.36,
            purity=0.9,
        )
        path = ArtifactWriter(tmp_path).write_moments([row])
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(MOMENTS_HEADER)
        assert lines[1] == "0.5,0.0,-0.5,0.5,0.125,0.5,0.1,0.75,0.36,0.9"
        assert read_moments(path) == [row]

    def test_missing_propagator_columns(self, tmp_path):
        """Test QBM rows leave u and v empty."""
        row = MomentsRow(0.0, None, None, CovarianceMatrix(0.5, 0.0, 0.5), 0.0, 1.0)
        path = ArtifactWriter(tmp_path).write_moments([row])
        assert path.read_text().splitlines()[1].startswith("0.0,,,,,")
        loaded = read_moments(path)[0]
        assert loaded.u is None and loaded.v is None

    def test_header_mismatch(self, tmp_path):
        """Test a foreign CSV is refused."""
        path = tmp_path / "moments.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_moments(path)


class TestWigner:
    """Test cases for Wigner grid files."""

    def test_csv_rows_run_p_fastest(self, tmp_path, wigner_grid):
        """Test rows list every p for the first q before moving on."""
        path = ArtifactWriter(tmp_path).write_wigner(0, wigner_grid)
        assert path.name == "wigner_t0.csv"
        rows = path.read_text().splitlines()[1:]
        assert len(rows) == 12
        assert [row.split(",")[0] for row in rows[:4]] == ["-1.0"] * 4
        np.testing.assert_array_equal(read_wigner(path).values, wigner_grid.values)

    def test_json_layout(self, tmp_path, wigner_grid):
        """Test the JSON form carries the grid and row-major values."""
        path = ArtifactWriter(tmp_path, fmt="json").write_wigner(3, wigner_grid)
        assert path.name == "wigner_t3.json"
        data = read_json(path)
        assert data["grid"]["n_p"] == 4
        assert data["values"][:4] == list(wigner_grid.values[0])
        np.testing.assert_array_equal(read_wigner(path).values, wigner_grid.values)


class TestSweep:
    """Test cases for sweep.csv."""

    def test_error_entry(self, tmp_path):
        """Test failing couplings are labelled and keep empty fields."""
        reports = [
            PoleReport(eta=0.5, eta_c=1.0, phase=Phase.NORMAL),
            PoleReport(eta=2.0, eta_c=1.0, phase=Phase.BOUND_STATE, e1=-0.5, c0sq=0.5),
            PoleReport(eta=3.0, eta_c=None, phase=None, error="bracket failed"),
        ]
        rows = read_sweep(ArtifactWriter(tmp_path).write_sweep(reports))
        assert [row.phase for row in rows] == ["normal", "bound_state", "error"]
        assert (rows[0].p0_inf, rows[0].p1_inf) == (1.0, 0.0)
        assert (rows[1].p0_inf, rows[1].p1_inf) == (0.75, 0.25)
        assert rows[2].eta_c is None and rows[2].p0_inf is None

    def test_unknown_phase(self, tmp_path):
        """Test an unknown phase label is refused."""
        path = tmp_path / "sweep.csv"
        path.write_text("eta,eta_c,phase,e1,c0sq,p0_inf,p1_inf\n1.0,1.0,frozen,,,,\n")
        with pytest.raises(ValueError):
            read_sweep(path)


class TestSpectrum:
    """Test cases for bath.csv and spectrum.csv."""

    def test_written_values(self, tmp_path, params, rabi_bath):
        """Test the bath and the avoided-crossing levels are written exactly."""
        eigs = one_excitation_spectrum(rabi_bath, params)
        writer = ArtifactWriter(tmp_path)
        bath_path, spectrum_path = writer.write_spectrum(rabi_bath, eigs)
        loaded = read_bath(bath_path)
        np.testing.assert_array_equal(loaded.omegas, rabi_bath.omegas)
        np.testing.assert_array_equal(loaded.couplings, rabi_bath.couplings)
        energies, weights = read_spectrum(spectrum_path)
        np.testing.assert_array_equal(energies, eigs.energies)
        np.testing.assert_array_equal(weights, eigs.weights)
        assert writer.written == [bath_path, spectrum_path]


class TestJson:
    """Test cases for canonical JSON."""

    def test_sorted_with_trailing_newline(self):
        """Test keys are sorted and the text ends with a newline."""
        text = dump_json({"b": 1, "a": [0.1, None]})
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith("}\n")

    def test_rejects_nan(self):
        """Test NaN cannot be written."""
        with pytest.raises(ValueError):
            dump_json({"x": float("nan")})

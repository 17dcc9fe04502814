"""Tests for run-config parsing, overrides and environment settings."""

import json
from unittest.mock import patch

import pytest

from src.phase_engine.config import (
    RunConfig,
    _parse_threads,
    apply_overrides,
    config_hash,
    load_config,
    parse_config_text,
    serialize_config,
)
from src.phase_engine.errors import ConfigError
from src.phase_engine.wigner import Cat, Fock, initial_state_from_config

SAMPLE = """
# weakly coupled Ohmic bath
system.omega0 = 1.0
bath.eta = 0.25
bath.n_modes = 128
bath.temperature = 0.5
initial.kind = "coherent"
initial.parameters.q = 1.5
output.emit = ["spectrum", "moments"]
"""


class TestParseConfigText:
    """Test cases for the dotted key = value format."""

    def test_parses_sample(self):
        """Test every key lands in its section."""
        config = parse_config_text(SAMPLE)
        assert config.bath.eta == 0.25
        assert config.bath.n_modes == 128
        assert config.initial.kind == "coherent"
        assert config.initial.resolved() == {"q": 1.5, "p": 0.0}
        assert config.output.emit == ["spectrum", "moments"]

    def test_unknown_key_is_named(self):
        """Test an unknown key is reported by its dotted name."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("bath.lambda = 1.0")
        assert excinfo.value.key == "bath.lambda"

    def test_constraint_violation_is_named(self):
        """Test a value outside its range names the key."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("bath.eta = -1.0")
        assert excinfo.value.key == "bath.eta"

    def test_line_without_equals(self):
        """Test a malformed line is reported by number."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text("system.omega0 = 1.0\nbath.eta 2.0")
        assert excinfo.value.key == "line 2"

    def test_value_used_as_section(self):
        """Test a key nested under a scalar is refused."""
        with pytest.raises(ConfigError):
            parse_config_text("bath.eta = 1.0\nbath.eta.x = 2.0")

    def test_serialization_is_inverted(self):
        """Test a non-default config survives serialize then parse."""
        config = parse_config_text(SAMPLE)
        assert parse_config_text(serialize_config(config)) == config


class TestInitialSection:
    """Test cases for initial-state parameters."""

    def test_unknown_parameter(self):
        """Test a parameter the kind does not take is refused."""
        with pytest.raises(ConfigError):
            parse_config_text('initial.kind = "thermal"\ninitial.parameters.q = 1.0')

    def test_fractional_fock_number(self):
        """Test a non-integer Fock occupation is refused."""
        with pytest.raises(ConfigError):
            parse_config_text('initial.kind = "fock"\ninitial.parameters.n = 1.5')

    def test_cat_parity(self):
        """Test cat parity must be +1 or -1."""
        with pytest.raises(ConfigError):
            parse_config_text('initial.kind = "cat"\ninitial.parameters.parity = 0')

    def test_maps_to_states(self):
        """Test sections build the matching initial states."""
        fock = parse_config_text('initial.kind = "fock"\ninitial.parameters.n = 3')
        assert initial_state_from_config(fock.initial) == Fock(n=3)
        cat = parse_config_text(
            'initial.kind = "cat"\ninitial.parameters.alpha_im = 0.5\n'
            "initial.parameters.parity = -1",
        )
        assert initial_state_from_config(cat.initial) == Cat(alpha=1.0 + 0.5j, parity=-1)


class TestCrossSectionRules:
    """Test cases for constraints spanning two sections."""

    def test_trapezoid_needs_s_at_least_one(self):
        """Test the closed trapezoid rule is refused for a sub-Ohmic bath."""
        with pytest.raises(ConfigError) as excinfo:
            parse_config_text('bath.s = 0.5\nbath.scheme = "trapezoid"')
        assert excinfo.value.key == "bath.scheme"

    def test_trapezoid_allowed_for_ohmic(self):
        """Test s = 1 keeps the trapezoid rule."""
        config = parse_config_text('bath.s = 1.0\nbath.scheme = "trapezoid"')
        assert config.bath.scheme == "trapezoid"

    @pytest.mark.parametrize("kind", ["fock", "collective_fock1"])
    def test_non_gaussian_state_needs_resonant_model(self, kind):
        """Test one-excitation states are refused under position coupling."""
        with pytest.raises(ConfigError) as excinfo:
            apply_overrides(RunConfig(), {"coupling.model": "qbm", "initial.kind": kind})
        assert excinfo.value.key == "initial.kind"

    def test_fock_vacuum_allowed_under_qbm(self):
        """Test the n = 0 Fock state is Gaussian and runs under position coupling."""
        config = apply_overrides(
            RunConfig(),
            {"coupling.model": "qbm", "initial.kind": "fock", "initial.parameters": {"n": 0}},
        )
        assert config.coupling.model == "qbm"

    def test_collective_state_needs_zero_temperature(self):
        """Test the collective one-excitation state is refused at T > 0."""
        with pytest.raises(ConfigError) as excinfo:
            apply_overrides(
                RunConfig(),
                {"initial.kind": "collective_fock1", "bath.temperature": 0.5},
            )
        assert excinfo.value.key == "bath.temperature"


class TestLoadConfig:
    """Test cases for reading config files."""

    def test_dotted_file(self, tmp_path):
        """Test a dotted text file loads."""
        path = tmp_path / "run.cfg"
        path.write_text(SAMPLE)
        assert load_config(path) == parse_config_text(SAMPLE)

    def test_json_file(self, tmp_path):
        """Test a nested JSON file loads."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"bath": {"eta": 2.0}, "sweep": {"relative": False}}))
        config = load_config(path)
        assert config.bath.eta == 2.0
        assert config.sweep.relative is False

    def test_invalid_json(self, tmp_path):
        """Test broken JSON is a config error."""
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        """Test an unreadable path is a config error."""
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")


class TestOverrides:
    """Test cases for dotted-key overrides."""

    def test_string_values_are_parsed(self):
        """Test CLI-style string values become typed values."""
        config = apply_overrides(RunConfig(), {"bath.eta": "1.2", "grid.auto": "false"})
        assert config.bath.eta == 1.2
        assert config.grid.auto is False

    def test_unknown_section(self):
        """Test an override outside every section is refused."""
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig(), {"solver.order": 4})

    def test_original_untouched(self):
        """Test overrides return a new config."""
        base = RunConfig()
        apply_overrides(base, {"bath.eta": 3.0})
        assert base.bath.eta == 0.5

    def test_hash_tracks_content(self):
        """Test equal configs hash alike and a change alters the hash."""
        assert config_hash(RunConfig()) == config_hash(RunConfig())
        changed = apply_overrides(RunConfig(), {"bath.eta": 0.7})
        assert config_hash(changed) != config_hash(RunConfig())


class TestThreadSetting:
    """Test cases for PHASE_ENGINE_THREADS parsing."""

    def test_unset_uses_cpu_count(self):
        """Test an unset variable falls back to the CPU count."""
        with patch("os.cpu_count", return_value=6):
            assert _parse_threads(None) == 6

    def test_positive_integer(self):
        """Test a positive integer is taken as is."""
        assert _parse_threads("4") == 4

    @pytest.mark.parametrize("raw", ["0", "-2", "many"])
    def test_rejects_invalid(self, raw):
        """Test zero, negative and non-numeric values are refused."""
        with pytest.raises(ValueError):
            _parse_threads(raw)

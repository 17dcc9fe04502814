"""Engine configuration, numerical constants and the run-config schema."""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)

# Environment variables
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()
_threads_raw = os.getenv("PHASE_ENGINE_THREADS")


def _parse_threads(raw: str | None) -> int:
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        raise ValueError(
            f"PHASE_ENGINE_THREADS must be a positive integer, got {raw!r}",
        )
    return value


PHASE_ENGINE_THREADS = _parse_threads(_threads_raw)

# Bath discretization
DEFAULT_OMEGA_MAX_FACTOR: dict[str, float] = {
    "exponential": 40.0,
    "gaussian": 6.0,
    "hard": 1.0,
}

# Time stepping (units of 1/omega0)
DEFAULT_DT = 1e-3
DT_PER_OMEGA_MAX = 0.05

# Tolerances
SUM_RULE_TOL = 1e-8
SUM_RULE_MAX_MODES = 512
ROUTE_AGREEMENT_TOL = 1e-6
DRIFT_TOL = 1e-6
CANONICAL_TOL = 1e-6
NORM_WARN_TOL = 1e-3
SINGULAR_DET = 1e-15
BOUNDARY_REL_TOL = 1e-9
BISECTION_XTOL = 1e-12
NEWTON_POLISH_STEPS = 2
QUAD_EPSREL = 1e-12

# Wigner grids
DEFAULT_GRID_POINTS = 201
DEFAULT_GRID_SIGMAS = 6.0
DEFAULT_K_POINTS = 64

# Oracles and long-time windows
ORACLE_MAX_MODES = 64
ORACLE_EIG_MODES = 4096
DENSE_EIG_MODES = 1024
LONG_TIME_WINDOW = (80.0, 100.0)
LONG_TIME_SAMPLES = 2001

CutoffName = Literal["exponential", "gaussian", "hard"]
SchemeName = Literal["gauss_legendre", "midpoint", "trapezoid"]
InitialKind = Literal[
    "vacuum",
    "coherent",
    "thermal",
    "quench_thermal",
    "fock",
    "cat",
    "collective_fock1",
]
EmitTarget = Literal["spectrum", "moments", "wigner", "transition", "validate"]

# Accepted initial-state parameters per kind, with defaults
INITIAL_PARAMETERS: dict[str, dict[str, float]] = {
    "vacuum": {},
    "coherent": {"q": 0.0, "p": 0.0},
    "thermal": {"n_bar": 0.0},
    "quench_thermal": {"omega_init": 1.0, "t_init": 0.0},
    "fock": {"n": 1},
    "cat": {"alpha_re": 1.0, "alpha_im": 0.0, "parity": 1},
    "collective_fock1": {},
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SystemSection(_Section):
    omega0: float = Field(1.0, gt=0)
    mass: float = Field(1.0, gt=0)


class BathSection(_Section):
    eta: float = Field(0.5, ge=0)
    s: float = Field(1.0, gt=0)
    omega_c: float = Field(10.0, gt=0)
    cutoff: CutoffName = "exponential"
    n_modes: int = Field(256, ge=1)
    omega_max_factor: float | None = Field(None, gt=0)
    temperature: float = Field(0.0, ge=0)
    scheme: SchemeName = "gauss_legendre"


class CouplingSection(_Section):
    model: Literal["resonant", "qbm"] = "resonant"


class InitialSection(_Section):
    kind: InitialKind = "fock"
    parameters: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_parameters(self) -> "InitialSection":
        allowed = INITIAL_PARAMETERS[self.kind]
        for key in self.parameters:
            if key not in allowed:
                raise ValueError(
                    f"unknown parameter '{key}' for initial kind '{self.kind}'",
                )
        merged = {**allowed, **self.parameters}
        if self.kind == "fock" and (merged["n"] < 0 or merged["n"] != int(merged["n"])):
            raise ValueError("fock occupation n must be a non-negative integer")
        if self.kind == "cat" and merged["parity"] not in (1, -1):
            raise ValueError("cat parity must be +1 or -1")
        if self.kind == "thermal" and merged["n_bar"] < 0:
            raise ValueError("thermal n_bar must be >= 0")
        if self.kind == "quench_thermal" and (
            merged["omega_init"] <= 0 or merged["t_init"] < 0
        ):
            raise ValueError("quench needs omega_init > 0 and t_init >= 0")
        return self

    def resolved(self) -> dict[str, float]:
        """Parameters with per-kind defaults filled in."""
        return {**INITIAL_PARAMETERS[self.kind], **self.parameters}


class EvolutionSection(_Section):
    t_max: float = Field(50.0, gt=0)
    dt: float | None = Field(None, gt=0)
    store_every: int = Field(100, ge=1)
    method: Literal["diagonalization", "volterra"] = "diagonalization"


class GridSection(_Section):
    q_min: float = -5.0
    q_max: float = 5.0
    p_min: float = -5.0
    p_max: float = 5.0
    n_q: int = Field(DEFAULT_GRID_POINTS, ge=2)
    n_p: int = Field(DEFAULT_GRID_POINTS, ge=2)
    auto: bool = True

    @model_validator(mode="after")
    def _check_bounds(self) -> "GridSection":
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise ValueError("grid bounds must be strictly ordered")
        return self


class OutputSection(_Section):
    format: Literal["csv", "json"] = "csv"
    path: str = "results"
    emit: list[EmitTarget] = Field(default_factory=lambda: ["moments"])


class SweepSection(_Section):
    eta_values: list[float] = Field(default_factory=lambda: [0.5, 0.99, 1.01, 2.0])
    relative: bool = True

    @model_validator(mode="after")
    def _check_values(self) -> "SweepSection":
        if any(value < 0 for value in self.eta_values):
            raise ValueError("sweep couplings must be >= 0")
        return self


class RunConfig(_Section):
    """Full run configuration; every section rejects unknown keys."""

    system: SystemSection = Field(default_factory=SystemSection)
    bath: BathSection = Field(default_factory=BathSection)
    coupling: CouplingSection = Field(default_factory=CouplingSection)
    initial: InitialSection = Field(default_factory=InitialSection)
    evolution: EvolutionSection = Field(default_factory=EvolutionSection)
    grid: GridSection = Field(default_factory=GridSection)
    output: OutputSection = Field(default_factory=OutputSection)
    sweep: SweepSection = Field(default_factory=SweepSection)

    @model_validator(mode="after")
    def _check_cross_section(self) -> "RunConfig":
        # ConfigError is not a ValueError, so pydantic lets it through unwrapped
        if self.bath.scheme == "trapezoid" and self.bath.s < 1:
            raise ConfigError(
                "bath.scheme",
                f"trapezoid places a node at w=0, which diverges for s={self.bath.s} < 1",
            )
        kind = self.initial.kind
        non_gaussian = kind == "collective_fock1" or (
            kind == "fock" and self.initial.resolved()["n"] > 0
        )
        if non_gaussian and self.coupling.model == "qbm":
            raise ConfigError(
                "initial.kind",
                f"'{kind}' needs coupling.model = resonant",
            )
        if kind == "collective_fock1" and self.bath.temperature > 0:
            raise ConfigError("bath.temperature", "'collective_fock1' needs T = 0")
        return self


def _error_key(error: dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def build_config(tree: dict[str, Any]) -> RunConfig:
    """Validate a nested mapping into a RunConfig, naming the first bad key."""
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_error_key(first), first["msg"]) from e


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _set_dotted(tree: dict[str, Any], key: str, value: Any) -> None:
    parts = key.split(".")
    node = tree
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(key, f"'{part}' is a value, not a section")
        node = child
    node[parts[-1]] = value


def parse_config_text(text: str) -> RunConfig:
    """Parse the dotted ``key = value`` format."""
    tree: dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {number}", "expected 'key = value'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError(f"line {number}", "empty key")
        _set_dotted(tree, key, _parse_value(raw))
    return build_config(tree)


def _flatten(prefix: str, value: Any, out: list[tuple[str, Any]]) -> None:
    if isinstance(value, dict):
        for key in sorted(value):
            _flatten(f"{prefix}.{key}" if prefix else key, value[key], out)
    else:
        out.append((prefix, value))


def serialize_config(config: RunConfig) -> str:
    """Canonical dotted text for a config; parse_config_text inverts it."""
    pairs: list[tuple[str, Any]] = []
    dumped = config.model_dump(mode="json")
    for section in RunConfig.model_fields:
        _flatten(section, dumped[section], pairs)
    lines = [f"{key} = {json.dumps(value)}" for key, value in pairs]
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> RunConfig:
    """Load a config file (dotted text, or JSON for a ``.json`` suffix)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError("--config", f"cannot read {path}: {e}") from e
    if path.suffix == ".json":
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"invalid JSON: {e}") from e
        return build_config(tree)
    return parse_config_text(text)


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Return a new config with dotted-key overrides applied on top."""
    tree = config.model_dump(mode="json")
    for key, value in overrides.items():
        section = key.split(".", 1)[0]
        if section not in RunConfig.model_fields:
            raise ConfigError(key, "unknown section")
        if isinstance(value, str):
            value = _parse_value(value)
        _set_dotted(tree, key, value)
    return build_config(tree)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()

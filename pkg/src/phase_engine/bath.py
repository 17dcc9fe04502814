"""Continuum spectral densities, bath discretization and the self-energy.

The resonant coupling is completely determined by the spectral function
``S(w) = 2 pi sum_i C_i^2 delta(w - w_i)``. In the continuum limit it is
modelled as ``S(w) = eta w^s f(w / w_c)`` with support on ``w > 0`` only.
"""

import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from .config import DEFAULT_OMEGA_MAX_FACTOR, QUAD_EPSREL
from .errors import DomainError

logger = logging.getLogger(__name__)


class Cutoff(str, Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    HARD = "hard"


class Scheme(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    MIDPOINT = "midpoint"
    TRAPEZOID = "trapezoid"


@dataclass(frozen=True)
class SpectralModel:
    """Continuum bath law ``S(w) = eta w^s f(w/w_c)``."""

    eta: float
    s: float = 1.0
    omega_c: float = 10.0
    cutoff: Cutoff = Cutoff.EXPONENTIAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "cutoff", Cutoff(self.cutoff))
        if self.eta < 0:
            raise DomainError(f"eta must be >= 0, got {self.eta}")
        if self.s <= 0:
            raise DomainError(f"s must be > 0, got {self.s}")
        if self.omega_c <= 0:
            raise DomainError(f"omega_c must be > 0, got {self.omega_c}")

    def cutoff_function(self, x: NDArray) -> NDArray:
        if self.cutoff is Cutoff.EXPONENTIAL:
            return np.exp(-x)
        if self.cutoff is Cutoff.GAUSSIAN:
            return np.exp(-(x**2))
        return np.where(x <= 1.0, 1.0, 0.0)

    def with_eta(self, eta: float) -> "SpectralModel":
        return dataclasses.replace(self, eta=eta)

    @property
    def default_omega_max_factor(self) -> float:
        return DEFAULT_OMEGA_MAX_FACTOR[self.cutoff.value]

    @property
    def support_max(self) -> float:
        """Largest frequency with ``S > 0``."""
        return self.omega_c if self.cutoff is Cutoff.HARD else np.inf


@dataclass(frozen=True)
class SystemParams:
    """Frequency and mass of the system mode."""

    omega0: float = 1.0
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.omega0 <= 0 or self.mass <= 0:
            raise DomainError(
                f"omega0 and mass must be > 0, got {self.omega0}, {self.mass}",
            )

    @property
    def m_omega(self) -> float:
        return self.mass * self.omega0


@dataclass(frozen=True, eq=False)
class DiscreteBath:
    """Finite set of bath modes ``{w_i, C_i, m_i}`` at temperature ``T``."""

    omegas: NDArray
    couplings: NDArray
    masses: NDArray | None = None
    temperature: float = 0.0

    def __post_init__(self) -> None:
        omegas = np.array(self.omegas, dtype=float, ndmin=1)
        couplings = np.array(self.couplings, dtype=float, ndmin=1)
        masses = (
            np.ones_like(omegas)
            if self.masses is None
            else np.array(self.masses, dtype=float, ndmin=1)
        )
        if not (omegas.shape == couplings.shape == masses.shape) or omegas.ndim != 1:
            raise DomainError("omegas, couplings and masses must have equal length")
        if omegas.size == 0:
            raise DomainError("a bath needs at least one mode")
        if np.any(omegas <= 0):
            raise DomainError("bath frequencies must be > 0")
        if omegas.size > 1 and np.any(np.diff(omegas) <= 0):
            raise DomainError("bath frequencies must be strictly increasing")
        if np.any(couplings < 0):
            raise DomainError("couplings must be >= 0")
        if np.any(masses <= 0):
            raise DomainError("bath masses must be > 0")
        if self.temperature < 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")
        for array in (omegas, couplings, masses):
            array.setflags(write=False)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "masses", masses)

    @property
    def n_modes(self) -> int:
        return int(self.omegas.size)

    @property
    def total_weight(self) -> float:
        """``sum_i C_i^2``, the discrete counterpart of ``int S dw / 2 pi``."""
        return float(np.sum(self.couplings**2))

    def qbm_couplings(self, params: SystemParams) -> NDArray:
        """Position couplings ``g_i = 2 C_i sqrt(m w0 m_i w_i)``."""
        return 2.0 * self.couplings * np.sqrt(params.m_omega * self.masses * self.omegas)

    def with_temperature(self, temperature: float) -> "DiscreteBath":
        return dataclasses.replace(self, temperature=temperature)


def eval_spectral(model: SpectralModel, omega: ArrayLike) -> NDArray | float:
    """``S(w)``; zero for ``w <= 0``."""
    omega_arr = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega_arr)
    positive = omega_arr > 0
    w = omega_arr[positive]
    out[positive] = model.eta * w**model.s * model.cutoff_function(w / model.omega_c)
    if out.ndim == 0:
        return float(out)
    return out


def _quadrature(scheme: Scheme, n_modes: int, upper: float) -> tuple[NDArray, NDArray]:
    if scheme is Scheme.GAUSS_LEGENDRE:
        x, w = special.roots_legendre(n_modes)
        return (x + 1.0) * upper / 2.0, w * upper / 2.0
    h = upper / n_modes
    if scheme is Scheme.MIDPOINT:
        return (np.arange(n_modes) + 0.5) * h, np.full(n_modes, h)
    # the node at w = 0 carries S(0) = 0 and is dropped
    nodes = np.arange(1, n_modes + 1) * h
    weights = np.full(n_modes, h)
    weights[-1] = h / 2.0
    return nodes, weights


def discretize(
    model: SpectralModel,
    n_modes: int,
    omega_max_factor: float | None = None,
    scheme: Scheme | str = Scheme.GAUSS_LEGENDRE,
    temperature: float = 0.0,
) -> DiscreteBath:
    """Quadrature discretization with ``C_i^2 = S(w_i) w_i / 2 pi``."""
    scheme = Scheme(scheme)
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if omega_max_factor is None:
        omega_max_factor = model.default_omega_max_factor
    if omega_max_factor <= 0:
        raise DomainError(f"omega_max_factor must be > 0, got {omega_max_factor}")
    if scheme is Scheme.TRAPEZOID and model.s < 1:
        raise DomainError(
            "trapezoid places a node at w=0; use an open rule for s < 1",
        )

    upper = min(omega_max_factor * model.omega_c, model.support_max)
    nodes, weights = _quadrature(scheme, n_modes, upper)
    couplings = np.sqrt(eval_spectral(model, nodes) * weights / (2.0 * np.pi))
    logger.debug(
        f"Discretized {model.cutoff.value} bath: {n_modes} modes on (0, {upper}] "
        f"with {scheme.value}",
    )
    return DiscreteBath(omegas=nodes, couplings=couplings, temperature=temperature)


def _continuum_integral(model: SpectralModel, e: float, power: int) -> float:
    """``int S(w) / (2 pi (w - e)^power) dw`` with the substitution ``w = x^(1/s)``."""
    s = model.s
    inv_s = 1.0 / s

    def integrand(x: float) -> float:
        w = x**inv_s
        # w / (w - e) -> 1 as w -> 0 when e = 0
        ratio = 1.0 if (e == 0.0 and power == 1) else w / (w - e) ** power
        cutoff = float(model.cutoff_function(np.asarray(w / model.omega_c)))
        return model.eta * ratio * cutoff / s

    split = model.omega_c**s
    pieces = [(0.0, split)]
    if model.cutoff is not Cutoff.HARD:
        pieces.append((split, np.inf))
    total = 0.0
    for lower, upper in pieces:
        value, _ = integrate.quad(
            integrand,
            lower,
            upper,
            epsabs=0.0,
            epsrel=QUAD_EPSREL,
            limit=400,
        )
        total += value
    return total / (2.0 * np.pi)


def self_energy_real(source: SpectralModel | DiscreteBath, e: float) -> float:
    """``D(e) = int S(w) / (2 pi (w - e)) dw``, so that ``Sigma(-i e) = -i D(e)``."""
    if isinstance(source, DiscreteBath):
        if e >= source.omegas[0]:
            raise DomainError(
                f"e={e} must lie below the lowest bath frequency {source.omegas[0]}",
            )
        return float(np.sum(source.couplings**2 / (source.omegas - e)))
    if e > 0:
        raise DomainError(f"e={e} must be <= 0 for a continuum bath")
    if source.eta == 0:
        return 0.0
    return _continuum_integral(source, e, power=1)


def self_energy_derivative(source: SpectralModel | DiscreteBath, e: float) -> float:
    """``D'(e) = int S(w) / (2 pi (w - e)^2) dw``."""
    if isinstance(source, DiscreteBath):
        if e >= source.omegas[0]:
            raise DomainError(
                f"e={e} must lie below the lowest bath frequency {source.omegas[0]}",
            )
        return float(np.sum(source.couplings**2 / (source.omegas - e) ** 2))
    if e >= 0:
        raise DomainError(f"e={e} must be < 0 for the continuum derivative")
    if source.eta == 0:
        return 0.0
    return _continuum_integral(source, e, power=2)


def critical_coupling(model: SpectralModel, params: SystemParams) -> float:
    """``eta_c = w0 / D(0)|_{eta=1}``, the coupling where the bound state appears."""
    d0 = self_energy_real(model.with_eta(1.0), 0.0)
    return params.omega0 / d0

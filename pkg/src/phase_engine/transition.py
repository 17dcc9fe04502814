"""Bound-state detection, residue weight and coupling sweeps."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

from numpy.typing import ArrayLike
from scipy import optimize

from . import config
from .bath import (
    DiscreteBath,
    SpectralModel,
    SystemParams,
    critical_coupling,
    self_energy_derivative,
    self_energy_real,
)
from .config import BISECTION_XTOL, BOUNDARY_REL_TOL, NEWTON_POLISH_STEPS
from .errors import DomainError, PhaseEngineError

logger = logging.getLogger(__name__)

MAX_BRACKET_DOUBLINGS = 200


class Phase(str, Enum):
    NORMAL = "normal"
    BOUND_STATE = "bound_state"


@dataclass(frozen=True)
class PoleReport:
    """Outcome of the pole analysis at one coupling."""

    eta: float
    eta_c: float | None
    phase: Phase | None
    e1: float | None = None
    c0sq: float | None = None
    boundary: bool = False
    error: str | None = None

    @property
    def rho_inf_diag(self) -> tuple[float, float] | None:
        """Asymptotic populations ``(1 - c0^4, c0^4)`` of the system mode."""
        if self.phase is None:
            return None
        if self.phase is Phase.NORMAL or self.c0sq is None:
            return (1.0, 0.0)
        p1 = self.c0sq**2
        return (1.0 - p1, p1)


def pole_function(
    source: SpectralModel | DiscreteBath,
    params: SystemParams,
    e: float,
) -> float:
    """``g(e) = e - w0 + D(e)``, strictly increasing below the bath spectrum."""
    return e - params.omega0 + self_energy_real(source, e)


def is_boundary(model: SpectralModel, params: SystemParams) -> bool:
    eta_c = critical_coupling(model, params)
    return abs(model.eta - eta_c) / eta_c < BOUNDARY_REL_TOL


def find_bound_state(
    source: SpectralModel | DiscreteBath,
    params: SystemParams,
) -> float | None:
    """Energy ``e1 < 0`` of the isolated pole, or ``None`` in the normal phase."""
    if isinstance(source, SpectralModel) and source.eta > 0 and is_boundary(source, params):
        logger.debug(f"eta={source.eta} sits on the critical coupling; no pole reported")
        return None

    def g(e: float) -> float:
        return pole_function(source, params, e)

    if g(0.0) <= 0.0:
        return None

    e_low = -(params.omega0 + self_energy_real(source, -params.omega0) + 1.0)
    doublings = 0
    while g(e_low) >= 0.0:
        e_low *= 2.0
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise DomainError("could not bracket the pole equation")
    if doublings:
        logger.debug(f"Extended pole bracket {doublings} times to e_low={e_low}")

    e1 = float(optimize.bisect(g, e_low, 0.0, xtol=BISECTION_XTOL))
    for _ in range(NEWTON_POLISH_STEPS):
        if e1 >= 0.0:
            break
        step = g(e1) / (1.0 + self_energy_derivative(source, e1))
        candidate = e1 - step
        if candidate >= 0.0:
            break
        e1 = candidate
    return e1


def residue_weight(
    source: SpectralModel | DiscreteBath,
    params: SystemParams,
    e1: float,
) -> float:
    """``c0^2 = 1 / (1 + D'(e1))``, the system weight of the bound state."""
    if isinstance(source, SpectralModel) and e1 >= 0.0:
        raise DomainError(f"e1={e1} must be < 0 for a continuum bath")
    if isinstance(source, DiscreteBath) and e1 >= source.omegas[0]:
        raise DomainError(
            f"e1={e1} must lie below the lowest bath frequency {source.omegas[0]}",
        )
    return 1.0 / (1.0 + self_energy_derivative(source, e1))


def pole_report(model: SpectralModel, params: SystemParams) -> PoleReport:
    eta_c = critical_coupling(model, params)
    boundary = model.eta > 0 and is_boundary(model, params)
    e1 = find_bound_state(model, params)
    if e1 is None:
        return PoleReport(eta=model.eta, eta_c=eta_c, phase=Phase.NORMAL, boundary=boundary)
    return PoleReport(
        eta=model.eta,
        eta_c=eta_c,
        phase=Phase.BOUND_STATE,
        e1=e1,
        c0sq=residue_weight(model, params, e1),
    )


def _safe_report(model: SpectralModel, eta: float, params: SystemParams) -> PoleReport:
    try:
        return pole_report(model.with_eta(eta), params)
    except PhaseEngineError as e:
        logger.error(f"Error analysing eta={eta}: {e}")
        return PoleReport(eta=eta, eta_c=None, phase=None, error=str(e))


def transition_report(
    model: SpectralModel,
    params: SystemParams,
    eta_values: ArrayLike,
) -> list[PoleReport]:
    """One report per coupling, in input order; failing entries carry ``error``."""
    etas = [float(eta) for eta in eta_values]  # type: ignore[union-attr]
    if not etas:
        return []
    workers = max(1, min(config.PHASE_ENGINE_THREADS, len(etas)))
    logger.info(f"Sweeping {len(etas)} couplings with {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda eta: _safe_report(model, eta, params), etas))
    bound = sum(1 for report in reports if report.phase is Phase.BOUND_STATE)
    logger.info(f"{bound} of {len(reports)} couplings are in the bound-state phase")
    return reports

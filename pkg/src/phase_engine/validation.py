"""Numerical invariant checks behind the ``validate`` subcommand."""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import special

from . import config
from .bath import Cutoff, SpectralModel, SystemParams, critical_coupling, discretize
from .config import (
    CANONICAL_TOL,
    ROUTE_AGREEMENT_TOL,
    SUM_RULE_TOL,
    RunConfig,
)
from .dynamics import (
    build_record,
    canonical_deviation,
    one_excitation_spectrum,
    propagator_u,
    qbm_propagate,
    qbm_sigma,
    thermal_covariance,
)
from .errors import PhaseEngineError
from .oracle import (
    ground_state,
    me_solution_coherent,
    population_time_average,
    qbm_full_covariance,
    qbm_full_propagator,
    symplectic_deviation,
)
from .transition import find_bound_state, residue_weight
from .utils import uniform_times
from .wigner import (
    Cat,
    Coherent,
    CollectiveFock1,
    Fock,
    GridSpec,
    QuenchThermal,
    Thermal,
    Vacuum,
    asymptotic_wigner,
    coherent_amplitude,
    default_grid,
    evolve_wigner,
    state_moments,
)

logger = logging.getLogger(__name__)

Status = Literal["pass", "fail", "info"]

PHASE_TOL = 1e-10
E1_ORACLE_TOL = 1e-6
RELAXATION_TOL = 1e-2
VACUUM_RELAXATION_MAX = 1e-2
ME_TOL = 1e-8
QBM_TOL = 1e-6
FULL_SYMPLECTIC_TOL = 1e-8
NORM_TOL = 1e-4
PURITY_SLACK = 1e-9
HEISENBERG_SLACK = 1e-9
FOCK_ORIGIN_TOL = 1e-12
ASYMPTOTIC_TOL = 2e-2

LONG_TIME_OMEGA_MAX_FACTOR = 10.0

ME_NOTE = (
    "The master-equation comparison uses the coherent-state solution "
    "W = (Omega/pi) exp(-Omega |alpha - u gamma|^2) with Omega = 2/(1 + 2v)."
)


@dataclass(frozen=True)
class CheckResult:
    check_name: str
    status: Status
    max_error: float | None
    tolerance: float | None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "status": self.status,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationReport:
    checks: list[CheckResult]
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.status != "fail" for check in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [check for check in self.checks if check.status == "fail"]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
            "notes": list(self.notes),
        }


def _result(name: str, error: float, tolerance: float, detail: str = "") -> CheckResult:
    status: Status = "pass" if error < tolerance else "fail"
    return CheckResult(name, status, float(error), tolerance, detail)


def ohmic_model(eta_rel: float, params: SystemParams, omega_c: float) -> SpectralModel:
    """Ohmic exponential bath at ``eta_rel`` times its critical coupling."""
    unit = SpectralModel(eta=1.0, s=1.0, omega_c=omega_c, cutoff=Cutoff.EXPONENTIAL)
    return unit.with_eta(eta_rel * critical_coupling(unit, params))


def check_sum_rule(params: SystemParams, omega_c: float) -> CheckResult:
    worst = 0.0
    for eta_rel in (0.5, 2.0):
        bath = discretize(ohmic_model(eta_rel, params, omega_c), 256)
        record = build_record(bath, params, t_max=50.0 / params.omega0, dt=0.05 / params.omega0)
        worst = max(worst, float(record.sum_rule_residual().max()))
    return _result("sum_rule", worst, SUM_RULE_TOL, "N_B=256, eta in {0.5, 2} eta_c")


def check_route_agreement(params: SystemParams) -> CheckResult:
    model = ohmic_model(0.5, params, omega_c=5.0)
    bath = discretize(model, 64, omega_max_factor=LONG_TIME_OMEGA_MAX_FACTOR)
    dt = 1e-3 / params.omega0
    times = uniform_times(50.0 / params.omega0, dt, store_every=100)
    u_diag = propagator_u(bath, params, times, method="diagonalization")
    u_volterra = propagator_u(bath, params, times, method="volterra", dt=dt)
    error = float(np.max(np.abs(u_diag - u_volterra)))
    return _result("route_agreement", error, ROUTE_AGREEMENT_TOL, "N_B=64, dt=1e-3")


def check_phase_transition(params: SystemParams, omega_c: float) -> CheckResult:
    unit = SpectralModel(eta=1.0, s=1.0, omega_c=omega_c)
    eta_c = critical_coupling(unit, params)
    analytic = 2.0 * np.pi * params.omega0 / (omega_c * special.gamma(1.0))
    error_eta = abs(eta_c - analytic)

    below = find_bound_state(unit.with_eta(0.99 * eta_c), params)
    above = find_bound_state(unit.with_eta(1.01 * eta_c), params)
    strong = unit.with_eta(2.0 * eta_c)
    e1 = find_bound_state(strong, params)
    if below is not None or above is None or e1 is None:
        return CheckResult(
            "phase_transition",
            "fail",
            None,
            PHASE_TOL,
            f"pole below={below}, above={above}, at 2 eta_c={e1}",
        )
    e1_oracle, _ = ground_state(discretize(strong, 4096), params)
    error_e1 = abs(e1 - e1_oracle)
    status: Status = "pass" if error_eta < PHASE_TOL and error_e1 < E1_ORACLE_TOL else "fail"
    return CheckResult(
        "phase_transition",
        status,
        float(max(error_eta, error_e1)),
        E1_ORACLE_TOL,
        f"|eta_c - 2 pi w0/w_c|={error_eta:.3e}, |e1 - eig(N=4096)|={error_e1:.3e}",
    )


def check_relaxation(params: SystemParams, omega_c: float) -> CheckResult:
    window = (80.0 / params.omega0, 100.0 / params.omega0)
    strong = discretize(
        ohmic_model(2.0, params, omega_c),
        1024,
        omega_max_factor=LONG_TIME_OMEGA_MAX_FACTOR,
    )
    e1 = find_bound_state(strong, params)
    if e1 is None:
        return CheckResult("relaxation", "fail", None, RELAXATION_TOL, "no bound state at 2 eta_c")
    c0sq = residue_weight(strong, params, e1)
    average = population_time_average(one_excitation_spectrum(strong, params), window)
    error = abs(average - c0sq**2)

    weak = discretize(
        ohmic_model(0.5, params, omega_c),
        1024,
        omega_max_factor=LONG_TIME_OMEGA_MAX_FACTOR,
    )
    residual = population_time_average(one_excitation_spectrum(weak, params), window)
    status: Status = (
        "pass" if error < RELAXATION_TOL and residual < VACUUM_RELAXATION_MAX else "fail"
    )
    return CheckResult(
        "relaxation",
        status,
        float(error),
        RELAXATION_TOL,
        f"c0^4={c0sq**2:.6f}, <P1>={average:.6f}, <P1> at 0.5 eta_c={residual:.2e}",
    )


def check_master_equation(params: SystemParams, omega_c: float) -> CheckResult:
    model = ohmic_model(0.5, params, omega_c)
    grid = GridSpec(-5.0, 5.0, -5.0, 5.0)
    state = Coherent(q=1.0, p=0.5)
    alpha = coherent_amplitude(state.q, state.p, params)
    worst = 0.0
    for temperature in (0.0, params.omega0 / np.log(2.0)):
        bath = discretize(model, 64, temperature=temperature)
        record = build_record(bath, params, t_max=20.0 / params.omega0, dt=0.5 / params.omega0)
        for t in record.times[::8][:5]:
            engine = evolve_wigner(state, record, params, float(t), grid)
            reference = me_solution_coherent(alpha, record, float(t), grid)
            worst = max(worst, float(np.abs(engine.values - reference.values).max()))
    return _result("master_equation_resonant", worst, ME_TOL, "T in {0, n(w0)=1}")


def qbm_validation_model() -> SpectralModel:
    """Weak Ohmic bath well inside the QBM stability bound."""
    return SpectralModel(eta=0.05, s=1.0, omega_c=2.0)


def check_qbm(params: SystemParams) -> CheckResult:
    dt = 1e-3 / params.omega0
    base = discretize(qbm_validation_model(), 32, omega_max_factor=5.0)
    times = uniform_times(20.0 / params.omega0, dt, store_every=2000)
    propagation = qbm_propagate(base, params, times, dt)
    initial = thermal_covariance(0.5, params)
    worst = 0.0
    for temperature in (0.0, params.omega0):
        bath = base.with_temperature(temperature)
        sigma = qbm_sigma(bath, params, propagation.fine_phi, dt, times)
        for k, t in enumerate(times):
            phi = propagation.phi[k]
            engine = phi @ initial.as_array() @ phi.T + sigma[k]
            oracle = qbm_full_covariance(bath, params, initial, float(t)).as_array()
            worst = max(worst, float(np.abs(engine - oracle).max()))
    worst_form = max(
        symplectic_deviation(qbm_full_propagator(base, params, float(t))) for t in times
    )
    status: Status = "pass" if worst < QBM_TOL and worst_form < FULL_SYMPLECTIC_TOL else "fail"
    return CheckResult(
        "master_equation_qbm",
        status,
        worst,
        QBM_TOL,
        f"N_B=32, T in {{0, w0}}; full-system symplectic error={worst_form:.2e}",
    )


def _integrity_states(params: SystemParams) -> dict[str, object]:
    return {
        "vacuum": Vacuum(),
        "coherent": Coherent(q=1.0, p=0.5),
        "thermal": Thermal(n_bar=0.5),
        "quench_thermal": QuenchThermal(omega_init=2.0 * params.omega0, t_init=0.5),
        "fock1": Fock(n=1),
        "fock3": Fock(n=3),
        "cat": Cat(alpha=1.5, parity=1),
        "collective_fock1": CollectiveFock1(),
    }


def check_wigner_integrity(params: SystemParams, omega_c: float) -> CheckResult:
    bath = discretize(ohmic_model(0.5, params, omega_c), 64)
    record = build_record(bath, params, t_max=20.0 / params.omega0, dt=5.0 / params.omega0)
    worst_norm = 0.0
    worst_purity = 0.0
    worst_det = 0.0
    worst_origin = 0.0
    for name, state in _integrity_states(params).items():
        for t in record.times:
            moments = state_moments(state, record, params, float(t))  # type: ignore[arg-type]
            grid = evolve_wigner(state, record, params, float(t), default_grid(moments))  # type: ignore[arg-type]
            worst_norm = max(worst_norm, abs(grid.norm() - 1.0))
            worst_purity = max(worst_purity, moments.purity - 1.0)
            worst_det = max(worst_det, 0.25 - moments.cov.det)
            if name == "fock1":
                u2 = abs(record.u[record.index(float(t))]) ** 2
                centre = grid.values[grid.n_q // 2, grid.n_p // 2]
                worst_origin = max(worst_origin, abs(centre + (2.0 * u2 - 1.0) / np.pi))
    failed = (
        worst_norm >= NORM_TOL
        or worst_purity > PURITY_SLACK
        or worst_det > HEISENBERG_SLACK
        or worst_origin >= FOCK_ORIGIN_TOL
    )
    return CheckResult(
        "wigner_integrity",
        "fail" if failed else "pass",
        float(worst_norm),
        NORM_TOL,
        f"purity excess={worst_purity:.2e}, det deficit={worst_det:.2e}, "
        f"Fock-1 origin error={worst_origin:.2e}",
    )


def check_asymptotic_wigner(
    params: SystemParams,
    omega_c: float,
    sizes: tuple[int, ...] = (256, 1024, 4096),
) -> CheckResult:
    model = ohmic_model(2.0, params, omega_c)
    grid = GridSpec(-4.0, 4.0, -4.0, 4.0)
    t_final = 100.0 / params.omega0
    errors = []
    for n_modes in sizes:
        bath = discretize(model, n_modes, omega_max_factor=LONG_TIME_OMEGA_MAX_FACTOR)
        e1 = find_bound_state(bath, params)
        if e1 is None:
            return CheckResult("asymptotic_wigner", "fail", None, ASYMPTOTIC_TOL, "no bound state")
        c0sq = residue_weight(bath, params, e1)
        record = build_record(bath, params, t_max=t_final, dt=t_final)
        evolved = evolve_wigner(Fock(n=1), record, params, t_final, grid)
        target = asymptotic_wigner(c0sq, grid, params)
        errors.append(float(np.abs(evolved.values - target.values).max()))
    monotone = all(b <= a for a, b in zip(errors, errors[1:], strict=False))
    detail = ", ".join(f"N={n}: {e:.2e}" for n, e in zip(sizes, errors, strict=True))
    detail += "; monotone" if monotone else "; not monotone"
    status: Status = "pass" if monotone and errors[-1] < ASYMPTOTIC_TOL else "fail"
    return CheckResult("asymptotic_wigner", status, errors[-1], ASYMPTOTIC_TOL, detail)


def check_c0_scaling(
    params: SystemParams,
    omega_c: float,
    sizes: tuple[int, ...] = (64, 128, 256, 512),
) -> CheckResult:
    """Log-log slope of the lowest-state system weight versus N_B in the normal phase."""
    model = ohmic_model(0.5, params, omega_c)
    weights = []
    for n_modes in sizes:
        _, c0sq = ground_state(discretize(model, n_modes), params)
        weights.append(c0sq)
    slope = float(np.polyfit(np.log(sizes), np.log(weights), 1)[0])
    return CheckResult(
        "c0_scaling",
        "info",
        None,
        None,
        f"c0^2 ~ N_B^{slope:.3f} at 0.5 eta_c",
    )


def check_canonical_form(params: SystemParams) -> CheckResult:
    """``Phi J Phi^T + sum M J M^T = J`` along a QBM trajectory."""
    dt = 1e-3 / params.omega0
    bath = discretize(qbm_validation_model(), 32, omega_max_factor=5.0)
    times = uniform_times(20.0 / params.omega0, dt, store_every=1000)
    propagation = qbm_propagate(bath, params, times, dt)
    error = float(canonical_deviation(propagation.phi, propagation.m_i).max())
    return _result("qbm_canonical_form", error, CANONICAL_TOL)


def _run_check(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    logger.info(f"Running check '{name}'")
    try:
        result = check()
    except PhaseEngineError as e:
        logger.error(f"Check '{name}' raised: {e}")
        return CheckResult(name, "fail", None, None, f"raised {type(e).__name__}: {e}")
    logger.info(f"Check '{name}': {result.status}")
    return result


def run_validation(run_config: RunConfig) -> ValidationReport:
    """Run every invariant check with the configured system parameters."""
    params = SystemParams(run_config.system.omega0, run_config.system.mass)
    omega_c = run_config.bath.omega_c
    checks: dict[str, Callable[[], CheckResult]] = {
        "sum_rule": lambda: check_sum_rule(params, omega_c),
        "route_agreement": lambda: check_route_agreement(params),
        "phase_transition": lambda: check_phase_transition(params, omega_c),
        "relaxation": lambda: check_relaxation(params, omega_c),
        "master_equation_resonant": lambda: check_master_equation(params, omega_c),
        "master_equation_qbm": lambda: check_qbm(params),
        "qbm_canonical_form": lambda: check_canonical_form(params),
        "wigner_integrity": lambda: check_wigner_integrity(params, omega_c),
        "asymptotic_wigner": lambda: check_asymptotic_wigner(params, omega_c),
        "c0_scaling": lambda: check_c0_scaling(params, omega_c),
    }
    workers = max(1, min(config.PHASE_ENGINE_THREADS, len(checks)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda item: _run_check(*item), checks.items()))
    report = ValidationReport(checks=results, notes=[ME_NOTE])
    logger.info(
        f"Validation finished: {len(report.failures)} of {len(results)} checks failed",
    )
    return report

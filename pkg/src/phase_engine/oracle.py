"""Brute-force references used to validate the closed forms.

- exact diagonalization of the one-excitation sector,
- full-system Gaussian propagation of the QBM model,
- the master-equation solution for a coherent initial state.
"""

import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from .bath import DiscreteBath, SystemParams
from .config import (
    DENSE_EIG_MODES,
    LONG_TIME_SAMPLES,
    LONG_TIME_WINDOW,
    ORACLE_EIG_MODES,
    ORACLE_MAX_MODES,
)
from .dynamics import (
    CovarianceMatrix,
    OneExcitationEigensystem,
    PropagatorRecord,
    one_excitation_matrix,
    one_excitation_spectrum,
    qbm_generator,
)
from .errors import DomainError
from .utils import chunks, thermal_factor
from .wigner import GridSpec, WignerGrid

logger = logging.getLogger(__name__)

__all__ = [
    "OneExcitationEigensystem",
    "one_excitation_spectrum",
    "ground_state",
    "sparse_one_excitation_matrix",
    "brute_force_population",
    "population_time_average",
    "infinite_time_population",
    "population_series",
    "me_solution_coherent",
    "qbm_full_propagator",
    "qbm_full_covariance",
    "symplectic_form",
    "symplectic_deviation",
]

PAIR_CHUNK = 512


def sparse_one_excitation_matrix(bath: DiscreteBath, params: SystemParams) -> sparse.csr_matrix:
    """``H_1`` in CSR form: ``3 N_B + 1`` non-zeros instead of ``(N_B + 1)^2``."""
    size = bath.n_modes + 1
    modes = np.arange(1, size)
    rows = np.concatenate(([0], modes, np.zeros(bath.n_modes, dtype=int), modes))
    cols = np.concatenate(([0], modes, modes, np.zeros(bath.n_modes, dtype=int)))
    values = np.concatenate(([params.omega0], bath.omegas, bath.couplings, bath.couplings))
    return sparse.csr_matrix((values, (rows, cols)), shape=(size, size))


def ground_state(bath: DiscreteBath, params: SystemParams) -> tuple[float, float]:
    """Lowest eigenvalue of ``H_1`` and the squared system component of its eigenvector.

    Baths above ``DENSE_EIG_MODES`` go through Lanczos on the sparse arrow matrix.
    """
    if bath.n_modes > ORACLE_EIG_MODES:
        logger.warning(f"Ground-state oracle on {bath.n_modes} modes; this may be slow")
    if bath.n_modes > DENSE_EIG_MODES:
        start = np.full(bath.n_modes + 1, 1.0 / np.sqrt(bath.n_modes + 1))
        try:
            energies, vectors = sparse_linalg.eigsh(
                sparse_one_excitation_matrix(bath, params),
                k=1,
                which="SA",
                v0=start,
                tol=0.0,
            )
            return float(energies[0]), float(vectors[0, 0] ** 2)
        except sparse_linalg.ArpackNoConvergence:
            logger.warning(f"Lanczos did not converge on {bath.n_modes} modes; using eigh")
    energies, vectors = linalg.eigh(
        one_excitation_matrix(bath, params),
        subset_by_index=[0, 0],
    )
    return float(energies[0]), float(vectors[0, 0] ** 2)


def brute_force_population(eigs: OneExcitationEigensystem, t: float) -> float:
    """``<1|rho(t)|1> = sum_jk c_0j^2 c_0k^2 cos((e_j - e_k) t)``, all cross terms kept."""
    weights = eigs.weights
    energies = eigs.energies
    total = 0.0
    for rows in chunks(energies.size, PAIR_CHUNK):
        gaps = np.subtract.outer(energies[rows], energies)
        total += float(weights[rows] @ np.cos(gaps * t) @ weights)
    return total


def population_time_average(
    eigs: OneExcitationEigensystem,
    window: tuple[float, float] = LONG_TIME_WINDOW,
    samples: int = LONG_TIME_SAMPLES,
) -> float:
    """Mean of ``|sum_j c_0j^2 exp(-i e_j t)|^2`` over uniformly sampled ``window``."""
    times = np.linspace(window[0], window[1], samples)
    total = 0.0
    for block in chunks(times.size, PAIR_CHUNK):
        u = np.exp(-1j * np.outer(times[block], eigs.energies)) @ eigs.weights
        total += float(np.sum(np.abs(u) ** 2))
    return total / times.size


def infinite_time_population(eigs: OneExcitationEigensystem) -> float:
    """Infinite-time average ``sum_j c_0j^4`` for a non-degenerate spectrum."""
    return float(np.sum(eigs.weights**2))


def me_solution_coherent(
    alpha: complex,
    record: PropagatorRecord,
    t: float,
    grid: GridSpec,
) -> WignerGrid:
    """Master-equation Wigner function ``(Omega/pi) exp(-Omega |a - u gamma|^2)`` in ``(q, p)``.

    ``Omega = 2 / (1 + 2v)``; the factor 1/2 converts the density from ``d^2 a``
    to ``dq dp``.
    """
    if not isinstance(record, PropagatorRecord):
        raise DomainError("the master-equation solution needs a resonant record")
    params = record.params
    k = record.index(t)
    omega = 2.0 / (1.0 + 2.0 * record.v[k])
    centre = record.u[k] * complex(alpha)
    q, p = grid.mesh()
    a = q * np.sqrt(params.m_omega / 2.0) + 1j * p / np.sqrt(2.0 * params.m_omega)
    values = 0.5 * omega / np.pi * np.exp(-omega * np.abs(a - centre) ** 2)
    return WignerGrid(grid, values)


def _require_oracle_size(bath: DiscreteBath) -> None:
    if bath.n_modes > ORACLE_MAX_MODES:
        raise DomainError(
            f"full-system oracle supports at most {ORACLE_MAX_MODES} modes, "
            f"got {bath.n_modes}",
        )


def symplectic_form(n_modes: int) -> NDArray:
    """Block-diagonal ``J`` for the system plus ``n_modes`` bath oscillators."""
    return np.kron(np.eye(n_modes + 1), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_deviation(propagator: NDArray) -> float:
    """``max |R J R^T - J|`` for a full-system propagator ``R``."""
    form = symplectic_form(propagator.shape[0] // 2 - 1)
    return float(np.abs(propagator @ form @ propagator.T - form).max())


def qbm_full_propagator(
    bath: DiscreteBath,
    params: SystemParams,
    t: float,
) -> NDArray:
    """``expm(A t)`` of the full ``2(N_B + 1)``-dimensional linear system."""
    _require_oracle_size(bath)
    return linalg.expm(qbm_generator(bath, params) * t)


def qbm_full_covariance(
    bath: DiscreteBath,
    params: SystemParams,
    initial_sys: CovarianceMatrix,
    t: float,
    temperature: float | None = None,
) -> CovarianceMatrix:
    """System block of ``R C R^T`` with a thermal product state for the bath."""
    _require_oracle_size(bath)
    initial_sys.require_positive_definite()
    temperature = bath.temperature if temperature is None else temperature
    factors = thermal_factor(bath.omegas, temperature)
    m_omega = bath.masses * bath.omegas
    blocks = [initial_sys.as_array()] + [
        factor * np.diag([1.0 / (2.0 * mw), mw / 2.0])
        for factor, mw in zip(factors, m_omega, strict=True)
    ]
    full = linalg.block_diag(*blocks)
    propagator = qbm_full_propagator(bath, params, t)
    evolved = propagator @ full @ propagator.T
    return CovarianceMatrix.from_array(evolved[:2, :2])


def population_series(eigs: OneExcitationEigensystem, times: ArrayLike) -> NDArray:
    """``brute_force_population`` at several times."""
    return np.array([brute_force_population(eigs, float(t)) for t in np.asarray(times)])

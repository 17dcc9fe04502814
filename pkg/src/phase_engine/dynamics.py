"""Exact propagators for the system mode: u(t), Phi(t), M_i(t), v(t) and sigma(t).

Resonant model: the Heisenberg solution is ``a(t) = u(t) a + sum_i alpha_i(t) b_i``
with ``alpha_i = -i I_i``. Both follow from the one-excitation eigenproblem or,
independently, from the memory equation for ``u``.

QBM model: the top row block ``[Phi, M_1, ..., M_N]`` of the full linear
propagator is integrated with a fixed-step RK4 scheme.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .bath import DiscreteBath, SystemParams
from .config import (
    CANONICAL_TOL,
    DEFAULT_DT,
    DT_PER_OMEGA_MAX,
    SINGULAR_DET,
    SUM_RULE_MAX_MODES,
    SUM_RULE_TOL,
)
from .errors import DomainError, NumericalInstabilityError
from .utils import (
    bose_occupation,
    check_time_grid,
    chunks,
    rk4_step,
    steps_on_grid,
    thermal_factor,
    time_index,
    uniform_times,
)

logger = logging.getLogger(__name__)

Method = Literal["diagonalization", "volterra"]

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
U_DRIFT_TOL = 1e-6
TIME_CHUNK = 1024
FOURIER_CHUNK_ELEMENTS = 2_000_000


# ---------------------------------------------------------------------------
# Covariance matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceMatrix:
    """Second cumulants of ``(q, p)``; symmetric by construction."""

    c_qq: float
    c_qp: float
    c_pp: float

    @classmethod
    def from_array(cls, matrix: ArrayLike) -> "CovarianceMatrix":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (2, 2):
            raise DomainError(f"covariance must be 2x2, got shape {matrix.shape}")
        return cls(
            c_qq=float(matrix[0, 0]),
            c_qp=float(0.5 * (matrix[0, 1] + matrix[1, 0])),
            c_pp=float(matrix[1, 1]),
        )

    def as_array(self) -> NDArray:
        return np.array([[self.c_qq, self.c_qp], [self.c_qp, self.c_pp]])

    @property
    def det(self) -> float:
        return self.c_qq * self.c_pp - self.c_qp**2

    def is_positive_definite(self) -> bool:
        return self.c_qq > 0 and self.det > 0

    @property
    def symplectic_eigenvalue(self) -> float:
        """``sqrt(det)``; at least 1/2 for a physical single-mode state."""
        return float(np.sqrt(max(self.det, 0.0)))

    @property
    def purity(self) -> float:
        return 1.0 / (2.0 * self.symplectic_eigenvalue)

    def require_positive_definite(self) -> None:
        if not self.is_positive_definite():
            raise DomainError(f"covariance is not positive-definite: {self}")

    def require_invertible(self) -> None:
        if self.det < SINGULAR_DET:
            raise DomainError(f"covariance is singular (det={self.det:.3e})")


def coherent_covariance(params: SystemParams) -> CovarianceMatrix:
    """Vacuum/coherent covariance ``A_0 = diag(1/(2 m w0), m w0 / 2)``."""
    return CovarianceMatrix(1.0 / (2.0 * params.m_omega), 0.0, params.m_omega / 2.0)


def thermal_covariance(n_bar: float, params: SystemParams) -> CovarianceMatrix:
    if n_bar < 0:
        raise DomainError(f"n_bar must be >= 0, got {n_bar}")
    a0 = coherent_covariance(params)
    scale = 1.0 + 2.0 * n_bar
    return CovarianceMatrix(scale * a0.c_qq, 0.0, scale * a0.c_pp)


def quench_covariance(
    omega_init: float,
    t_init: float,
    params: SystemParams,
) -> CovarianceMatrix:
    """Thermal state of the mode at frequency ``omega_init`` and temperature ``t_init``."""
    if omega_init <= 0 or t_init < 0:
        raise DomainError("quench needs omega_init > 0 and t_init >= 0")
    factor = float(thermal_factor(omega_init, t_init))
    m_omega = params.mass * omega_init
    return CovarianceMatrix(factor / (2.0 * m_omega), 0.0, factor * m_omega / 2.0)


# ---------------------------------------------------------------------------
# One-excitation sector
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OneExcitationEigensystem:
    """Eigenpairs of ``H_1``; columns of ``vectors`` are orthonormal."""

    energies: NDArray
    vectors: NDArray

    @property
    def overlaps(self) -> NDArray:
        """``c_0j``, the system component of each eigenvector."""
        return self.vectors[0]

    @property
    def weights(self) -> NDArray:
        return self.vectors[0] ** 2

    @property
    def ground_vector(self) -> NDArray:
        return self.vectors[:, 0]


def one_excitation_matrix(bath: DiscreteBath, params: SystemParams) -> NDArray:
    """Arrow matrix with ``w0`` and ``w_i`` on the diagonal, ``C_i`` on the border."""
    size = bath.n_modes + 1
    h1 = np.zeros((size, size))
    h1[0, 0] = params.omega0
    h1[0, 1:] = h1[1:, 0] = bath.couplings
    h1[np.arange(1, size), np.arange(1, size)] = bath.omegas
    return h1


def one_excitation_spectrum(
    bath: DiscreteBath,
    params: SystemParams,
) -> OneExcitationEigensystem:
    h1 = one_excitation_matrix(bath, params)
    logger.debug(f"Diagonalizing one-excitation matrix of size {h1.shape[0]}")
    energies, vectors = linalg.eigh(h1)
    # fix the sign so that c_0j >= 0
    signs = np.where(vectors[0] < 0, -1.0, 1.0)
    return OneExcitationEigensystem(energies=energies, vectors=vectors * signs)


def default_dt(bath: DiscreteBath, params: SystemParams) -> float:
    """``min(1e-3, 0.05 w0 / w_max) / w0``."""
    omega_max = max(float(bath.omegas[-1]), params.omega0)
    return min(DEFAULT_DT, DT_PER_OMEGA_MAX * params.omega0 / omega_max) / params.omega0


def memory_kernel(bath: DiscreteBath, times: ArrayLike, derivative: int = 0) -> NDArray:
    """``K(t) = sum_i C_i^2 exp(-i w_i t)``, or its ``derivative``-th time derivative."""
    times = np.asarray(times, dtype=float)
    out = np.empty(times.shape, dtype=complex)
    flat = out.reshape(-1)
    flat_times = times.reshape(-1)
    weights = bath.couplings**2 * (-1j * bath.omegas) ** derivative
    for block in chunks(flat_times.size, TIME_CHUNK):
        flat[block] = np.exp(-1j * np.outer(flat_times[block], bath.omegas)) @ weights
    return out


def _spectral_sum(
    energies: NDArray,
    amplitudes: NDArray,
    times: NDArray,
) -> NDArray:
    """``sum_j amplitudes[..., j] exp(-i e_j t)`` for every time, chunked."""
    out = np.empty(amplitudes.shape[:-1] + (times.size,), dtype=complex)
    for block in chunks(times.size, TIME_CHUNK):
        phases = np.exp(-1j * np.outer(energies, times[block]))
        out[..., block] = amplitudes @ phases
    return out


def _u_diagonalization(
    eigs: OneExcitationEigensystem,
    times: NDArray,
) -> NDArray:
    u = _spectral_sum(eigs.energies, eigs.weights, times)
    # sum_j c_0j^2 = 1 only up to eigensolver round-off
    u[times == 0.0] = 1.0
    return u


def _volterra(
    bath: DiscreteBath,
    params: SystemParams,
    times: NDArray,
    dt: float,
) -> tuple[NDArray, NDArray]:
    """RK4 on ``du/dt = -i w0 u - int_0^t K(t - tau) u(tau) dtau``.

    At step ``n`` the memory integral splits into the history on ``[0, t_n]``,
    an end-corrected trapezoid over the stored fine grid, and the piece inside
    the current stage, Simpson's rule on the quadratic through ``u_n``,
    ``u'(t_n)`` and the stage value. Returns ``u`` at ``times`` and on every
    fine step.
    """
    steps = steps_on_grid(times, dt)
    n_total = int(steps[-1])
    omega0 = params.omega0

    lags = np.arange(n_total + 2) * dt
    kernel = memory_kernel(bath, lags)
    kernel_dot = memory_kernel(bath, lags, derivative=1)
    half = memory_kernel(bath, lags + 0.5 * dt)
    half_dot = memory_kernel(bath, lags + 0.5 * dt, derivative=1)
    kernel_quarter = complex(memory_kernel(bath, [0.25 * dt])[0])
    # reversed copies turn the convolution sums into contiguous dot products
    kernel_rev = kernel[::-1].copy()
    half_rev = half[::-1].copy()
    size = kernel.size

    u = np.empty(n_total + 1, dtype=complex)
    u[0] = 1.0
    du0 = -1j * omega0

    def slope(n: int) -> complex:
        if n == 0:
            return du0
        if n == 1:
            return 2.0 * (u[1] - u[0]) / dt - du0
        return (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dt)

    def history(
        total: complex,
        values: NDArray,
        values_dot: NDArray,
        ends: tuple[int, int],
        n: int,
        du_n: complex,
    ) -> complex:
        """Trapezoid of ``g(tau) = K(s - tau) u(tau)`` on ``[0, t_n]`` minus ``dt^2/12 [g']``."""
        start, end = ends
        trapezoid = dt * (total - 0.5 * (values[start] * u[0] + values[end] * u[n]))
        g_end = -values_dot[end] * u[n] + values[end] * du_n
        g_start = -values_dot[start] * u[0] + values[start] * du0
        return trapezoid - dt**2 / 12.0 * (g_end - g_start)

    def stage_rhs(
        stage: complex,
        memory: complex,
        window: tuple[float, complex, complex],
        anchor: tuple[complex, complex],
    ) -> complex:
        """Right-hand side at ``t_n + theta`` with the in-step piece done by Simpson."""
        theta, k_theta, k_mid = window
        u_n, k1 = anchor
        mid = 0.75 * u_n + 0.25 * stage + 0.25 * theta * k1
        inner = theta / 6.0 * (k_theta * u_n + 4.0 * k_mid * mid + kernel[0] * stage)
        return -1j * omega0 * stage - memory - inner

    logger.debug(f"Volterra convolution over {n_total} steps of dt={dt}")
    # sum_{j <= n} K(t_n - t_j) u_j
    total_now = kernel[0] * u[0]
    for n in range(n_total):
        u_n = u[n]
        du_n = slope(n)
        total_half = np.dot(half_rev[size - 1 - n :], u[: n + 1])
        total_next = np.dot(kernel_rev[size - 2 - n : size - 1], u[: n + 1])
        k1 = -1j * omega0 * u_n - history(total_now, kernel, kernel_dot, (n, 0), n, du_n)
        anchor = (u_n, k1)
        memory_half = history(total_half, half, half_dot, (n, 0), n, du_n)
        memory_full = history(total_next, kernel, kernel_dot, (n + 1, 1), n, du_n)
        half_step = (0.5 * dt, half[0], kernel_quarter)
        k2 = stage_rhs(u_n + 0.5 * dt * k1, memory_half, half_step, anchor)
        k3 = stage_rhs(u_n + 0.5 * dt * k2, memory_half, half_step, anchor)
        k4 = stage_rhs(u_n + dt * k3, memory_full, (dt, kernel[1], half[0]), anchor)

        u[n + 1] = u_n + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if abs(u[n + 1]) > 1.0 + U_DRIFT_TOL:
            logger.error(f"Volterra step rejected at t={(n + 1) * dt}: |u|={abs(u[n + 1])}")
            raise NumericalInstabilityError(
                f"|u| drifted to {abs(u[n + 1]):.9f} at t={(n + 1) * dt}; reduce dt={dt}",
            )
        total_now = total_next + kernel[0] * u[n + 1]
    return u[steps], u


def propagator_u(
    bath: DiscreteBath,
    params: SystemParams,
    times: ArrayLike,
    method: Method = "diagonalization",
    dt: float | None = None,
) -> NDArray:
    """System Green function ``u(t)`` at the given times."""
    times = check_time_grid(times)
    if method == "diagonalization":
        return _u_diagonalization(one_excitation_spectrum(bath, params), times)
    if method == "volterra":
        dt = default_dt(bath, params) if dt is None else dt
        u, _ = _volterra(bath, params, times, dt)
        return u
    raise DomainError(f"unknown propagator method '{method}'")


# ---------------------------------------------------------------------------
# Response integrals and Heisenberg-picture matrices
# ---------------------------------------------------------------------------


def _cumulative_fourier(
    samples: NDArray,
    omegas: NDArray,
    sign: float,
    dt: float,
    steps: NDArray,
) -> NDArray:
    """``int_0^{t_k} f(s) exp(sign i w s) ds`` on a uniform grid.

    Composite trapezoid with the first endpoint correction
    ``-dt^2/12 (g'(t_k) - g'(0))``, derivatives taken by second-order
    finite differences. Returns shape ``(n_omegas, n_steps, *f.shape[1:])``.
    """
    trailing = samples.shape[1:]
    f = samples.reshape(samples.shape[0], -1).astype(complex)
    width = f.shape[1]
    if f.shape[0] >= 3:
        f_dot = np.gradient(f, dt, axis=0, edge_order=2)
    else:
        f_dot = np.zeros_like(f)

    n_omegas = omegas.size
    out = np.zeros((n_omegas, steps.size, width), dtype=complex)
    g0 = np.broadcast_to(f[0], (n_omegas, width))
    g0_dot = f_dot[0][None, :] + sign * 1j * omegas[:, None] * f[0][None, :]

    running = np.zeros((n_omegas, width), dtype=complex)
    last = int(steps[-1]) if steps.size else -1
    chunk = max(1, FOURIER_CHUNK_ELEMENTS // max(1, n_omegas * width))
    pending = 0
    for block in chunks(last + 1, chunk):
        t_block = np.arange(block.start, block.stop) * dt
        phase = np.exp(sign * 1j * np.outer(t_block, omegas))
        g = phase[:, :, None] * f[block][:, None, :]
        cumulative = np.cumsum(g, axis=0) + running
        running = cumulative[-1]
        while pending < steps.size and steps[pending] < block.stop:
            local = int(steps[pending]) - block.start
            gk = g[local]
            gk_dot = phase[local][:, None] * (
                f_dot[steps[pending]][None, :]
                + sign * 1j * omegas[:, None] * f[steps[pending]][None, :]
            )
            out[:, pending] = dt * (cumulative[local] - 0.5 * (g0 + gk)) - (
                dt**2 / 12.0
            ) * (gk_dot - g0_dot)
            pending += 1
    return out.reshape((n_omegas, steps.size) + trailing)


def response_integrals(
    bath: DiscreteBath,
    u: ArrayLike,
    dt: float,
    steps: ArrayLike | None = None,
) -> NDArray:
    """``I_i(t) = C_i int_0^t u(t - tau) exp(-i w_i tau) dtau`` from a sampled ``u``.

    ``u`` is sampled on the uniform grid ``k * dt``; the result has shape
    ``(N_B, n_steps)`` for the requested step indices (all by default).
    """
    u = np.asarray(u, dtype=complex)
    steps = (
        np.arange(u.size) if steps is None else np.asarray(steps, dtype=np.int64)
    )
    if steps.size and (steps.min() < 0 or steps.max() >= u.size):
        raise DomainError("requested steps lie outside the sampled u-series")
    integral = _cumulative_fourier(u, bath.omegas, +1.0, dt, steps)
    t_steps = steps * dt
    return (
        bath.couplings[:, None]
        * np.exp(-1j * np.outer(bath.omegas, t_steps))
        * integral
    )


def response_integrals_exact(
    eigs: OneExcitationEigensystem,
    times: ArrayLike,
) -> NDArray:
    """``I_i(t) = i sum_j V_ij V_0j exp(-i e_j t)`` from the eigendata."""
    times = np.asarray(times, dtype=float)
    amplitudes = eigs.vectors[1:] * eigs.overlaps[None, :]
    response = 1j * _spectral_sum(eigs.energies, amplitudes, times)
    # orthogonality of V gives I_i(0) = 0; drop the round-off
    response[:, times == 0.0] = 0.0
    return response


def thermal_v(
    bath: DiscreteBath,
    u: ArrayLike,
    times: ArrayLike,
    response: NDArray | None = None,
) -> NDArray:
    """``v(t) = sum_i n(w_i) |I_i(t)|^2``; zero at ``T = 0``."""
    times = check_time_grid(times)
    if bath.temperature == 0.0:
        return np.zeros(times.size)
    if response is None:
        dt = float(times[1] - times[0]) if times.size > 1 else 1.0
        steps_on_grid(times, dt)
        response = response_integrals(bath, u, dt)
    occupation = bose_occupation(bath.omegas, bath.temperature)
    return occupation @ np.abs(response) ** 2


def resonant_phi(u: ArrayLike, params: SystemParams) -> NDArray:
    """``Phi = [[Re u, -Im u/(m w0)], [m w0 Im u, Re u]]`` for each sample."""
    u = np.asarray(u, dtype=complex)
    mw = params.m_omega
    phi = np.empty(u.shape + (2, 2))
    phi[..., 0, 0] = u.real
    phi[..., 0, 1] = -u.imag / mw
    phi[..., 1, 0] = mw * u.imag
    phi[..., 1, 1] = u.real
    return phi


def resonant_m_matrices(
    bath: DiscreteBath,
    response: NDArray,
    params: SystemParams,
) -> NDArray:
    """``M_i`` mapping bath quadratures into the system ones; shape ``(N_B, n, 2, 2)``."""
    alpha = -1j * np.asarray(response)
    c = 1.0 / np.sqrt(2.0 * params.m_omega)
    d = np.sqrt(params.m_omega / 2.0)
    m_omega_i = bath.masses * bath.omegas
    c_i = (1.0 / np.sqrt(2.0 * m_omega_i))[:, None]
    d_i = np.sqrt(m_omega_i / 2.0)[:, None]
    out = np.empty(alpha.shape + (2, 2))
    out[..., 0, 0] = 2.0 * c * d_i * alpha.real
    out[..., 0, 1] = -2.0 * c * c_i * alpha.imag
    out[..., 1, 0] = 2.0 * d * d_i * alpha.imag
    out[..., 1, 1] = 2.0 * d * c_i * alpha.real
    return out


def canonical_deviation(phi: NDArray, m_matrices: NDArray) -> NDArray:
    """``max |Phi J Phi^T + sum_i M_i J M_i^T - J|`` per stored time."""
    total = phi @ J @ np.swapaxes(phi, -1, -2)
    if m_matrices.size:
        total = total + np.einsum("nkab,bc,nkdc->kad", m_matrices, J, m_matrices)
    return np.abs(total - J).max(axis=(-2, -1))


# ---------------------------------------------------------------------------
# Propagator records
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PropagatorRecord:
    """Resonant-model propagator sampled at ``times``."""

    times: NDArray
    u: NDArray
    response: NDArray
    v: NDArray
    phi: NDArray
    params: SystemParams
    bath: DiscreteBath
    method: Method = "diagonalization"
    m_i: NDArray | None = None

    @property
    def temperature(self) -> float:
        return self.bath.temperature

    def index(self, t: float) -> int:
        return time_index(self.times, t)

    def phi_at(self, t: float) -> NDArray:
        return self.phi[self.index(t)]

    def noise_at(self, t: float) -> NDArray:
        """``(1 + 2v - |u|^2) A_0``."""
        k = self.index(t)
        scale = 1.0 + 2.0 * self.v[k] - abs(self.u[k]) ** 2
        return scale * coherent_covariance(self.params).as_array()

    def sum_rule_residual(self) -> NDArray:
        return np.abs(
            1.0 - np.abs(self.u) ** 2 - np.sum(np.abs(self.response) ** 2, axis=0),
        )


def build_record(
    bath: DiscreteBath,
    params: SystemParams,
    t_max: float,
    dt: float | None = None,
    store_every: int = 1,
    method: Method = "diagonalization",
    with_m: bool = False,
) -> PropagatorRecord:
    """Propagate the resonant model and store every ``store_every``-th step."""
    dt = default_dt(bath, params) if dt is None else dt
    times = uniform_times(t_max, dt, store_every)
    logger.info(
        f"Building {method} record: N_B={bath.n_modes}, dt={dt}, "
        f"{times.size} stored times up to t={times[-1]}",
    )

    if method == "diagonalization":
        eigs = one_excitation_spectrum(bath, params)
        u = _u_diagonalization(eigs, times)
        response = response_integrals_exact(eigs, times)
    elif method == "volterra":
        u, fine_u = _volterra(bath, params, times, dt)
        response = response_integrals(bath, fine_u, dt, steps_on_grid(times, dt))
    else:
        raise DomainError(f"unknown propagator method '{method}'")

    v = thermal_v(bath, u, times, response=response)
    record = PropagatorRecord(
        times=times,
        u=u,
        response=response,
        v=v,
        phi=resonant_phi(u, params),
        params=params,
        bath=bath,
        method=method,
        m_i=resonant_m_matrices(bath, response, params) if with_m else None,
    )

    if method == "diagonalization" and bath.n_modes <= SUM_RULE_MAX_MODES:
        worst = float(record.sum_rule_residual().max())
        logger.debug(f"Sum-rule residual {worst:.3e}")
        if worst > SUM_RULE_TOL:
            logger.error(f"Sum rule violated: residual {worst:.3e}")
            raise NumericalInstabilityError(
                f"|u|^2 + sum |I_i|^2 deviates from 1 by {worst:.3e}",
            )
    return record


def covariance_evolve(
    initial: CovarianceMatrix,
    record: "PropagatorRecord | QBMRecord",
    params: SystemParams,
    t: float,
) -> CovarianceMatrix:
    """``A_t = Phi A_S Phi^T + N(t)`` with the record's propagator noise."""
    initial.require_positive_definite()
    phi = record.phi_at(t)
    evolved = phi @ initial.as_array() @ phi.T + record.noise_at(t)
    return CovarianceMatrix.from_array(evolved)


# ---------------------------------------------------------------------------
# Quantum Brownian motion (position coupling, no rotating-wave approximation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QBMPropagation:
    """Top row block of the full propagator: ``Phi`` on the fine grid, ``M_i`` at stored steps."""

    dt: float
    steps: NDArray
    fine_phi: NDArray
    m_i: NDArray

    @property
    def times(self) -> NDArray:
        return self.steps * self.dt

    @property
    def phi(self) -> NDArray:
        return self.fine_phi[self.steps]


def qbm_generator(bath: DiscreteBath, params: SystemParams) -> NDArray:
    """Generator ``A`` of ``d/dt (q, p, q_1, p_1, ...) = A (q, p, q_1, p_1, ...)``."""
    size = 2 * (bath.n_modes + 1)
    g = bath.qbm_couplings(params)
    a = np.zeros((size, size))
    a[0, 1] = 1.0 / params.mass
    a[1, 0] = -params.mass * params.omega0**2
    rows_q = 2 * np.arange(1, bath.n_modes + 1)
    a[rows_q, rows_q + 1] = 1.0 / bath.masses
    a[rows_q + 1, rows_q] = -bath.masses * bath.omegas**2
    a[1, rows_q] = -g
    a[rows_q + 1, 0] = -g
    return a


def check_qbm_stability(bath: DiscreteBath, params: SystemParams) -> bool:
    """Warn when the uncompensated frequency shift makes the mode unstable."""
    d0 = float(np.sum(bath.couplings**2 / bath.omegas))
    stable = 4.0 * d0 < params.omega0
    if not stable:
        logger.warning(
            f"QBM coupling above the stability bound: 4 D(0) = {4.0 * d0:.4f} "
            f">= w0 = {params.omega0}",
        )
    return stable


def qbm_propagate(
    bath: DiscreteBath,
    params: SystemParams,
    times: ArrayLike,
    dt: float | None = None,
) -> QBMPropagation:
    """RK4 on ``R' = R A`` for the system row block ``R = [Phi, M_1, ..., M_N]``."""
    times = check_time_grid(times)
    dt = default_dt(bath, params) if dt is None else dt
    steps = steps_on_grid(times, dt)
    check_qbm_stability(bath, params)

    n_modes = bath.n_modes
    mass, omega0 = params.mass, params.omega0
    g = bath.qbm_couplings(params)
    inv_m = 1.0 / bath.masses
    spring = bath.masses * bath.omegas**2

    # y[:, :, 0] is Phi, y[:, :, i] is M_i
    def rhs(_t: float, y: NDArray) -> NDArray:
        out = np.empty_like(y)
        phi, m = y[:, :, 0], y[:, :, 1:]
        out[:, 0, 0] = -mass * omega0**2 * phi[:, 1] - m[:, 1, :] @ g
        out[:, 1, 0] = phi[:, 0] / mass
        out[:, 0, 1:] = -g[None, :] * phi[:, 1][:, None] - spring[None, :] * m[:, 1, :]
        out[:, 1, 1:] = inv_m[None, :] * m[:, 0, :]
        return out

    y = np.zeros((2, 2, n_modes + 1))
    y[:, :, 0] = np.eye(2)
    last = int(steps[-1])
    fine_phi = np.empty((last + 1, 2, 2))
    fine_phi[0] = np.eye(2)
    m_stored = np.zeros((n_modes, steps.size, 2, 2))
    pending = 1 if steps[0] == 0 else 0
    for step in range(1, last + 1):
        y = rk4_step(rhs, (step - 1) * dt, y, dt)
        fine_phi[step] = y[:, :, 0]
        if pending < steps.size and steps[pending] == step:
            m_stored[:, pending] = np.moveaxis(y[:, :, 1:], -1, 0)
            pending += 1

    deviation = canonical_deviation(fine_phi[steps], m_stored)
    worst = float(deviation.max())
    logger.debug(f"QBM canonical-form deviation {worst:.3e} over {last} steps")
    if worst > CANONICAL_TOL:
        logger.error(f"QBM canonical form drifted by {worst:.3e}")
        raise NumericalInstabilityError(
            f"canonical form violated by {worst:.3e}; reduce dt={dt}",
        )
    return QBMPropagation(dt=dt, steps=steps, fine_phi=fine_phi, m_i=m_stored)


def qbm_sigma(
    bath: DiscreteBath,
    params: SystemParams,
    phi: NDArray,
    dt: float,
    t: float | ArrayLike,
    temperature: float | None = None,
) -> NDArray:
    """Propagator covariance ``sigma(t)`` from ``Phi`` sampled on the uniform ``dt`` grid.

    The double integral over the noise kernel factorizes per mode into
    ``lambda_i (c_i c_i^T + s_i s_i^T)`` with
    ``c_i + i s_i = int_0^t Phi(t - tau) e_p exp(i w_i tau) dtau``.
    """
    temperature = bath.temperature if temperature is None else temperature
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    steps = steps_on_grid(t_arr, dt)
    if steps.size and steps.max() >= phi.shape[0]:
        raise DomainError("sigma requested beyond the sampled Phi grid")

    g = bath.qbm_couplings(params)
    weights = g**2 * thermal_factor(bath.omegas, temperature) / (
        2.0 * bath.masses * bath.omegas
    )
    order = np.argsort(steps, kind="stable")
    column = phi[: int(steps.max()) + 1, :, 1]
    integral = _cumulative_fourier(column, bath.omegas, -1.0, dt, steps[order])
    rotated = np.exp(1j * np.outer(bath.omegas, t_arr[order]))[:, :, None] * integral
    sigma_sorted = np.einsum(
        "i,ika,ikb->kab",
        weights,
        rotated.real,
        rotated.real,
    ) + np.einsum("i,ika,ikb->kab", weights, rotated.imag, rotated.imag)
    sigma = np.empty_like(sigma_sorted)
    sigma[order] = sigma_sorted
    return sigma[0] if scalar else sigma


@dataclass(frozen=True, eq=False)
class QBMRecord:
    """QBM propagator at stored times: ``Phi``, ``sigma`` and optionally ``M_i``."""

    times: NDArray
    phi: NDArray
    sigma: NDArray
    params: SystemParams
    bath: DiscreteBath
    m_i: NDArray | None = None

    @property
    def temperature(self) -> float:
        return self.bath.temperature

    def index(self, t: float) -> int:
        return time_index(self.times, t)

    def phi_at(self, t: float) -> NDArray:
        return self.phi[self.index(t)]

    def noise_at(self, t: float) -> NDArray:
        return self.sigma[self.index(t)]


def build_qbm_record(
    bath: DiscreteBath,
    params: SystemParams,
    t_max: float,
    dt: float | None = None,
    store_every: int = 1,
    with_m: bool = False,
) -> QBMRecord:
    dt = default_dt(bath, params) if dt is None else dt
    times = uniform_times(t_max, dt, store_every)
    logger.info(
        f"Building QBM record: N_B={bath.n_modes}, dt={dt}, {times.size} stored times",
    )
    propagation = qbm_propagate(bath, params, times, dt)
    sigma = qbm_sigma(bath, params, propagation.fine_phi, dt, times)
    return QBMRecord(
        times=times,
        phi=propagation.phi,
        sigma=sigma,
        params=params,
        bath=bath,
        m_i=propagation.m_i if with_m else None,
    )

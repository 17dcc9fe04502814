"""Wigner functions, RDM elements and observables for the supported initial states.

Gaussian-type states (vacuum, coherent, thermal, quench, cat) are finite sums of
Gaussian terms with possibly complex means; evolution maps each term as
``mean -> Phi mean`` and ``cov -> Phi cov Phi^T + N(t)``. Fock and collective
one-excitation states use Laguerre closed forms.
"""

import logging
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .bath import DiscreteBath, SystemParams
from .config import (
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_SIGMAS,
    DEFAULT_K_POINTS,
    NORM_WARN_TOL,
    InitialSection,
)
from .dynamics import (
    CovarianceMatrix,
    PropagatorRecord,
    QBMRecord,
    coherent_covariance,
    one_excitation_spectrum,
    quench_covariance,
    thermal_covariance,
)
from .errors import DomainError, UnsupportedStateError
from .utils import trapezoid_weights

logger = logging.getLogger(__name__)

Record = PropagatorRecord | QBMRecord

K_WINDOW_SIGMAS = 8.0


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Rectangular phase-space grid; ``values[i, j]`` sits at ``(q_i, p_j)``."""

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int = DEFAULT_GRID_POINTS
    n_p: int = DEFAULT_GRID_POINTS

    def __post_init__(self) -> None:
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise DomainError("grid bounds must be strictly ordered")
        if self.n_q < 2 or self.n_p < 2:
            raise DomainError("grid needs at least two points per axis")

    @property
    def q_axis(self) -> NDArray:
        return np.linspace(self.q_min, self.q_max, self.n_q)

    @property
    def p_axis(self) -> NDArray:
        return np.linspace(self.p_min, self.p_max, self.n_p)

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / (self.n_q - 1)

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    def mesh(self) -> tuple[NDArray, NDArray]:
        return np.meshgrid(self.q_axis, self.p_axis, indexing="ij")


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """Sampled Wigner function; values may be negative."""

    spec: GridSpec
    values: NDArray

    def __post_init__(self) -> None:
        if self.values.shape != (self.spec.n_q, self.spec.n_p):
            raise DomainError(
                f"values shape {self.values.shape} does not match the grid "
                f"({self.spec.n_q}, {self.spec.n_p})",
            )

    @property
    def q_min(self) -> float:
        return self.spec.q_min

    @property
    def q_max(self) -> float:
        return self.spec.q_max

    @property
    def p_min(self) -> float:
        return self.spec.p_min

    @property
    def p_max(self) -> float:
        return self.spec.p_max

    @property
    def n_q(self) -> int:
        return self.spec.n_q

    @property
    def n_p(self) -> int:
        return self.spec.n_p

    def norm(self) -> float:
        return float(self.values.sum() * self.spec.dq * self.spec.dp)

    def marginal_q(self) -> NDArray:
        """Position density ``int W dp``."""
        return self.values.sum(axis=1) * self.spec.dp


def default_grid(
    moments: "Moments",
    n_q: int = DEFAULT_GRID_POINTS,
    n_p: int = DEFAULT_GRID_POINTS,
    sigmas: float = DEFAULT_GRID_SIGMAS,
) -> GridSpec:
    """Window of ``sigmas`` standard deviations around the state's mean."""
    half_q = sigmas * np.sqrt(moments.cov.c_qq)
    half_p = sigmas * np.sqrt(moments.cov.c_pp)
    return GridSpec(
        q_min=moments.q_mean - half_q,
        q_max=moments.q_mean + half_q,
        p_min=moments.p_mean - half_p,
        p_max=moments.p_mean + half_p,
        n_q=n_q,
        n_p=n_p,
    )


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vacuum:
    pass


@dataclass(frozen=True)
class Coherent:
    q: float = 0.0
    p: float = 0.0


@dataclass(frozen=True)
class Thermal:
    n_bar: float = 0.0

    def __post_init__(self) -> None:
        if self.n_bar < 0:
            raise DomainError(f"n_bar must be >= 0, got {self.n_bar}")


@dataclass(frozen=True)
class QuenchThermal:
    """Thermal state of a mode with frequency ``omega_init`` at ``t_init``."""

    omega_init: float = 1.0
    t_init: float = 0.0

    def __post_init__(self) -> None:
        if self.omega_init <= 0 or self.t_init < 0:
            raise DomainError("quench needs omega_init > 0 and t_init >= 0")


@dataclass(frozen=True)
class Fock:
    n: int = 1

    def __post_init__(self) -> None:
        if self.n < 0 or int(self.n) != self.n:
            raise DomainError(f"Fock occupation must be a non-negative integer, got {self.n}")


@dataclass(frozen=True)
class Cat:
    """``(|alpha> + parity |-alpha>) / sqrt(2 (1 + parity exp(-2|alpha|^2)))``."""

    alpha: complex = 1.0 + 0.0j
    parity: int = 1

    def __post_init__(self) -> None:
        if self.parity not in (1, -1):
            raise DomainError(f"cat parity must be +1 or -1, got {self.parity}")
        if self.normalization <= 0:
            raise DomainError("odd cat state needs alpha != 0")

    @property
    def normalization(self) -> float:
        return 2.0 * (1.0 + self.parity * np.exp(-2.0 * abs(self.alpha) ** 2))


@dataclass(frozen=True, eq=False)
class CollectiveFock1:
    """One excitation in the collective mode ``c_0 a^+ + sum_i c_i b_i^+``.

    Without amplitudes the lowest one-excitation eigenvector of the
    record's bath is used.
    """

    amplitudes: NDArray | None = field(default=None)

    def __post_init__(self) -> None:
        if self.amplitudes is None:
            return
        amplitudes = np.array(self.amplitudes, dtype=complex, ndmin=1)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise DomainError("collective amplitudes must not all vanish")
        amplitudes = amplitudes / norm
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @classmethod
    def from_ground_state(
        cls,
        bath: DiscreteBath,
        params: SystemParams,
    ) -> "CollectiveFock1":
        return cls(one_excitation_spectrum(bath, params).ground_vector)

    def resolved(self, bath: DiscreteBath, params: SystemParams) -> NDArray:
        if self.amplitudes is None:
            return np.asarray(one_excitation_spectrum(bath, params).ground_vector, complex)
        if self.amplitudes.size != bath.n_modes + 1:
            raise UnsupportedStateError(
                f"collective amplitudes have {self.amplitudes.size} components, "
                f"the bath needs {bath.n_modes + 1}",
            )
        return self.amplitudes


InitialState = (
    Vacuum | Coherent | Thermal | QuenchThermal | Fock | Cat | CollectiveFock1
)


def initial_state_from_config(section: InitialSection) -> InitialState:
    parameters = section.resolved()
    if section.kind == "vacuum":
        return Vacuum()
    if section.kind == "coherent":
        return Coherent(q=parameters["q"], p=parameters["p"])
    if section.kind == "thermal":
        return Thermal(n_bar=parameters["n_bar"])
    if section.kind == "quench_thermal":
        return QuenchThermal(
            omega_init=parameters["omega_init"],
            t_init=parameters["t_init"],
        )
    if section.kind == "fock":
        return Fock(n=int(parameters["n"]))
    if section.kind == "cat":
        return Cat(
            alpha=complex(parameters["alpha_re"], parameters["alpha_im"]),
            parity=int(parameters["parity"]),
        )
    return CollectiveFock1()


# ---------------------------------------------------------------------------
# Gaussian terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianTerm:
    """``weight * N(z; mean, cov)`` with a possibly complex mean."""

    weight: complex
    mean: NDArray
    cov: NDArray

    def evolve(self, phi: NDArray, noise: NDArray) -> "GaussianTerm":
        return GaussianTerm(
            weight=self.weight,
            mean=phi @ self.mean,
            cov=phi @ self.cov @ phi.T + noise,
        )


def coherent_mean(alpha: complex, params: SystemParams) -> NDArray:
    """Phase-space point of the amplitude ``alpha = q sqrt(m w0/2) + i p / sqrt(2 m w0)``."""
    return np.array(
        [
            np.sqrt(2.0 / params.m_omega) * alpha.real,
            np.sqrt(2.0 * params.m_omega) * alpha.imag,
        ],
    )


def coherent_amplitude(q: float, p: float, params: SystemParams) -> complex:
    return complex(q * np.sqrt(params.m_omega / 2.0), p / np.sqrt(2.0 * params.m_omega))


def _outer_product_term(
    beta: complex,
    gamma: complex,
    weight: complex,
    params: SystemParams,
) -> GaussianTerm:
    """Wigner function of ``weight |beta><gamma|``."""
    c = 1.0 / np.sqrt(2.0 * params.m_omega)
    d = np.sqrt(params.m_omega / 2.0)
    overlap = np.exp(
        -0.5 * abs(beta) ** 2 - 0.5 * abs(gamma) ** 2 + np.conj(gamma) * beta,
    )
    mean = np.array(
        [c * (beta + np.conj(gamma)), 1j * d * (np.conj(gamma) - beta)],
        dtype=complex,
    )
    return GaussianTerm(
        weight=complex(weight * overlap),
        mean=mean,
        cov=coherent_covariance(params).as_array(),
    )


def gaussian_terms(state: InitialState, params: SystemParams) -> list[GaussianTerm]:
    """Term decomposition of a Gaussian-type state at ``t = 0``."""
    zero = np.zeros(2, dtype=complex)
    if isinstance(state, Vacuum):
        return [GaussianTerm(1.0, zero, coherent_covariance(params).as_array())]
    if isinstance(state, Coherent):
        return [
            GaussianTerm(
                1.0,
                np.array([state.q, state.p], dtype=complex),
                coherent_covariance(params).as_array(),
            ),
        ]
    if isinstance(state, Thermal):
        return [GaussianTerm(1.0, zero, thermal_covariance(state.n_bar, params).as_array())]
    if isinstance(state, QuenchThermal):
        cov = quench_covariance(state.omega_init, state.t_init, params)
        return [GaussianTerm(1.0, zero, cov.as_array())]
    if isinstance(state, Cat):
        alpha = complex(state.alpha)
        scale = 1.0 / state.normalization
        sign = float(state.parity)
        return [
            _outer_product_term(alpha, alpha, scale, params),
            _outer_product_term(-alpha, -alpha, scale, params),
            _outer_product_term(alpha, -alpha, sign * scale, params),
            _outer_product_term(-alpha, alpha, sign * scale, params),
        ]
    if isinstance(state, Fock) and state.n == 0:
        return gaussian_terms(Vacuum(), params)
    raise UnsupportedStateError(f"{type(state).__name__} has no Gaussian-term form")


def _terms_on_grid(terms: list[GaussianTerm], grid: GridSpec) -> NDArray:
    q, p = grid.mesh()
    total = np.zeros(q.shape, dtype=complex)
    for term in terms:
        cov = CovarianceMatrix.from_array(term.cov)
        cov.require_positive_definite()
        cov.require_invertible()
        inv = np.linalg.inv(term.cov)
        dq = q - term.mean[0]
        dp = p - term.mean[1]
        quad = inv[0, 0] * dq**2 + 2.0 * inv[0, 1] * dq * dp + inv[1, 1] * dp**2
        total += term.weight * np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(cov.det))
    return total.real


def _terms_moments(terms: list[GaussianTerm]) -> tuple[NDArray, NDArray, float]:
    """Mean, covariance and purity ``2 pi int W^2`` of a term mixture."""
    mean = sum(term.weight * term.mean for term in terms).real
    second = sum(
        term.weight * (term.cov + np.outer(term.mean, term.mean)) for term in terms
    ).real
    overlap = 0.0 + 0.0j
    for first in terms:
        for other in terms:
            joint = first.cov + other.cov
            delta = first.mean - other.mean
            value = np.exp(-0.5 * delta @ np.linalg.solve(joint, delta)) / (
                2.0 * np.pi * np.sqrt(np.linalg.det(joint))
            )
            overlap += first.weight * other.weight * value
    return mean, second - np.outer(mean, mean), float(2.0 * np.pi * overlap.real)


# ---------------------------------------------------------------------------
# Static Wigner functions and RDM elements
# ---------------------------------------------------------------------------


def wigner_gaussian(
    mean: ArrayLike,
    cov: CovarianceMatrix,
    grid: GridSpec,
) -> WignerGrid:
    """``exp(-(z - zbar)^T A^-1 (z - zbar) / 2) / (2 pi sqrt(det A))``."""
    cov.require_invertible()
    cov.require_positive_definite()
    term = GaussianTerm(1.0, np.asarray(mean, dtype=complex), cov.as_array())
    return WignerGrid(grid, _terms_on_grid([term], grid))


def rdm_element(
    mean: ArrayLike,
    cov: CovarianceMatrix,
    x: float | NDArray,
    y: float | NDArray,
) -> complex | NDArray:
    """Position-basis matrix element ``<x|rho|y>`` of a Gaussian state."""
    if cov.c_qq <= 0:
        raise DomainError(f"C_qq must be > 0, got {cov.c_qq}")
    q_bar, p_bar = (float(value) for value in np.asarray(mean, dtype=float))
    m_tilde = cov.c_pp - (0.25 + cov.c_qp**2) / cov.c_qq
    m = cov.c_pp + (0.5 - 1j * cov.c_qp) ** 2 / cov.c_qq
    big_x = np.asarray(x, dtype=float) - q_bar
    big_y = np.asarray(y, dtype=float) - q_bar
    exponent = (
        m_tilde * big_x * big_y
        - 0.5 * m * big_x**2
        - 0.5 * np.conj(m) * big_y**2
        + 1j * p_bar * (big_x - big_y)
    )
    value = np.exp(exponent) / np.sqrt(2.0 * np.pi * cov.c_qq)
    return complex(value) if np.ndim(value) == 0 else value


def _quadratic_form(grid: GridSpec, params: SystemParams) -> NDArray:
    """``z^T A_0^-1 z`` on the grid."""
    q, p = grid.mesh()
    return 2.0 * params.m_omega * q**2 + 2.0 * p**2 / params.m_omega


def _envelope(x: NDArray, scale: float) -> NDArray:
    """Gaussian of covariance ``scale * A_0`` as a function of ``x = z^T A_0^-1 z``."""
    # sqrt(det A_0) = 1/2
    return np.exp(-x / (2.0 * scale)) / (np.pi * scale)


def wigner_fock(n: int, grid: GridSpec, params: SystemParams | None = None) -> WignerGrid:
    """``(-1)^n L_n(x) exp(-x/2) / (2 pi sqrt(det A_0))`` with ``x = z^T A_0^-1 z``."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    params = SystemParams() if params is None else params
    x = _quadratic_form(grid, params)
    values = (-1.0) ** n * special.eval_laguerre(n, x) * _envelope(x, 1.0)
    return WignerGrid(grid, values)


def _fock_evolved_values(n: int, x: NDArray, w: float, a: float) -> NDArray:
    """Finite-sum form of the evolved Fock-``n`` Wigner function.

    ``a = 1 + 2v`` and ``w = |u|^2``; regular at ``a = 2w``.
    """
    b = a - 2.0 * w
    series = np.zeros_like(x)
    for k in range(n + 1):
        series += comb(n, k) * (w * x / a**2) ** k / factorial(k) * (b / a) ** (n - k)
    return series * _envelope(x, a)


def asymptotic_wigner(
    c0sq: float,
    grid: GridSpec,
    params: SystemParams | None = None,
) -> WignerGrid:
    """Wigner function of ``(1 - c0^4)|0><0| + c0^4 |1><1|``."""
    if not 0.0 <= c0sq <= 1.0:
        raise DomainError(f"c0sq must lie in [0, 1], got {c0sq}")
    params = SystemParams() if params is None else params
    x = _quadratic_form(grid, params)
    p1 = c0sq**2
    values = ((1.0 - p1) + p1 * (x - 1.0)) * _envelope(x, 1.0)
    return WignerGrid(grid, values)


def _collective_amplitude(
    state: CollectiveFock1,
    record: PropagatorRecord,
    params: SystemParams,
    t: float,
) -> complex:
    """``c_0 u(t) - i sum_i c_i I_i(t)``."""
    amplitudes = state.resolved(record.bath, params)
    k = record.index(t)
    return complex(
        amplitudes[0] * record.u[k] - 1j * np.dot(amplitudes[1:], record.response[:, k]),
    )


def static_wigner(
    state: InitialState,
    grid: GridSpec,
    params: SystemParams | None = None,
) -> WignerGrid:
    """Reduced Wigner function of the initial state."""
    params = SystemParams() if params is None else params
    if isinstance(state, Fock):
        return wigner_fock(state.n, grid, params)
    if isinstance(state, CollectiveFock1):
        if state.amplitudes is None:
            raise UnsupportedStateError(
                "collective state needs explicit amplitudes or a propagator record",
            )
        x = _quadratic_form(grid, params)
        w = abs(state.amplitudes[0]) ** 2
        return WignerGrid(grid, _fock_evolved_values(1, x, w, 1.0))
    return WignerGrid(grid, _terms_on_grid(gaussian_terms(state, params), grid))


# ---------------------------------------------------------------------------
# Evolution
# ---------------------------------------------------------------------------


def _require_resonant(state: InitialState, record: Record) -> PropagatorRecord:
    if not isinstance(record, PropagatorRecord):
        raise UnsupportedStateError(
            f"{type(state).__name__} needs a resonant-model propagator record",
        )
    return record


def evolved_terms(
    state: InitialState,
    record: Record,
    params: SystemParams,
    t: float,
) -> list[GaussianTerm]:
    phi = record.phi_at(t)
    noise = record.noise_at(t)
    return [term.evolve(phi, noise) for term in gaussian_terms(state, params)]


def evolve_wigner(
    state: InitialState,
    record: Record,
    params: SystemParams,
    t: float,
    grid: GridSpec,
) -> WignerGrid:
    """Reduced Wigner function at a stored time ``t`` of the record."""
    if isinstance(state, Fock) and state.n > 0:
        resonant = _require_resonant(state, record)
        k = resonant.index(t)
        x = _quadratic_form(grid, params)
        w = abs(resonant.u[k]) ** 2
        a = 1.0 + 2.0 * resonant.v[k]
        return WignerGrid(grid, _fock_evolved_values(state.n, x, w, a))
    if isinstance(state, CollectiveFock1):
        resonant = _require_resonant(state, record)
        if resonant.temperature > 0:
            raise UnsupportedStateError("collective one-excitation state needs T = 0")
        x = _quadratic_form(grid, params)
        w = abs(_collective_amplitude(state, resonant, params, t)) ** 2
        return WignerGrid(grid, _fock_evolved_values(1, x, w, 1.0))
    return WignerGrid(grid, _terms_on_grid(evolved_terms(state, record, params, t), grid))


def initial_characteristic(
    state: InitialState,
    params: SystemParams,
    kq: NDArray,
    kp: NDArray,
) -> NDArray:
    """``W~_0(k) = int W_0(z) exp(-i k.z) dz``."""
    if isinstance(state, Fock) and state.n > 0:
        a0 = coherent_covariance(params)
        kappa = a0.c_qq * kq**2 + a0.c_pp * kp**2
        return special.eval_laguerre(state.n, kappa) * np.exp(-0.5 * kappa) + 0j
    if isinstance(state, CollectiveFock1):
        raise UnsupportedStateError("collective state has no system-only characteristic")
    total = np.zeros(np.broadcast(kq, kp).shape, dtype=complex)
    for term in gaussian_terms(state, params):
        phase = kq * term.mean[0] + kp * term.mean[1]
        quad = term.cov[0, 0] * kq**2 + 2.0 * term.cov[0, 1] * kq * kp + term.cov[1, 1] * kp**2
        total += term.weight * np.exp(-1j * phase - 0.5 * quad)
    return total


def _k_window(
    state: InitialState,
    record: Record,
    params: SystemParams,
    t: float,
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Bounding box of the evolved characteristic function's support."""
    if isinstance(state, Fock) and state.n > 0:
        a0 = coherent_covariance(params).as_array()
        spread = K_WINDOW_SIGMAS + 2.0 * np.sqrt(state.n)
        cov = record.phi_at(t) @ a0 @ record.phi_at(t).T + record.noise_at(t)
        terms = [GaussianTerm(1.0, np.zeros(2, complex), cov)]
    else:
        spread = K_WINDOW_SIGMAS
        terms = evolved_terms(state, record, params, t)
    lows, highs = [], []
    for term in terms:
        eigenvalues = np.linalg.eigvalsh(term.cov)
        half = spread / np.sqrt(eigenvalues.min())
        centre = np.linalg.solve(term.cov, term.mean.imag)
        lows.append(centre - half)
        highs.append(centre + half)
    low = np.min(lows, axis=0)
    high = np.max(highs, axis=0)
    return (float(low[0]), float(high[0])), (float(low[1]), float(high[1]))


def evolve_wigner_fourier(
    state: InitialState,
    record: Record,
    params: SystemParams,
    t: float,
    grid: GridSpec,
    n_k: int = DEFAULT_K_POINTS,
) -> WignerGrid:
    """Invert ``W~_t(k) = K~_t(k) W~_0(Phi^T k)`` by 2-D trapezoidal quadrature."""
    if isinstance(state, CollectiveFock1):
        raise UnsupportedStateError("collective state has no k-space inversion path")
    phi = record.phi_at(t)
    noise = record.noise_at(t)
    (kq_lo, kq_hi), (kp_lo, kp_hi) = _k_window(state, record, params, t)
    kq_axis = np.linspace(kq_lo, kq_hi, n_k)
    kp_axis = np.linspace(kp_lo, kp_hi, n_k)
    kq, kp = np.meshgrid(kq_axis, kp_axis, indexing="ij")

    # Phi^T k
    kq0 = phi[0, 0] * kq + phi[1, 0] * kp
    kp0 = phi[0, 1] * kq + phi[1, 1] * kp
    kernel = np.exp(
        -0.5 * (noise[0, 0] * kq**2 + 2.0 * noise[0, 1] * kq * kp + noise[1, 1] * kp**2),
    )
    transform = kernel * initial_characteristic(state, params, kq0, kp0)

    wq = trapezoid_weights(n_k, kq_axis[1] - kq_axis[0])
    wp = trapezoid_weights(n_k, kp_axis[1] - kp_axis[0])
    e_q = np.exp(1j * np.outer(grid.q_axis, kq_axis)) * wq
    e_p = np.exp(1j * np.outer(grid.p_axis, kp_axis)) * wp
    values = (e_q @ transform @ e_p.T).real / (4.0 * np.pi**2)
    logger.debug(f"k-space inversion on {n_k}x{n_k} nodes, window q {kq_lo:.2f}..{kq_hi:.2f}")
    return WignerGrid(grid, values)


# ---------------------------------------------------------------------------
# Moments and observables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    q_mean: float
    p_mean: float
    cov: CovarianceMatrix
    purity: float

    def occupation(self, params: SystemParams) -> float:
        """``<a^+ a>`` from the first and second cumulants."""
        mw = params.m_omega
        fluct = (mw * self.cov.c_qq + self.cov.c_pp / mw - 1.0) / 2.0
        displacement = (mw * self.q_mean**2 + self.p_mean**2 / mw) / 2.0
        return fluct + displacement


@dataclass(frozen=True)
class Observables:
    norm: float
    occupation: float
    purity: float


def _fock_purity(n: int, w: float, a: float) -> float:
    """``int_0^inf L_n(w kappa)^2 exp(-a kappa) dkappa``, exact by Gauss-Laguerre."""
    nodes, weights = np.polynomial.laguerre.laggauss(n + 1)
    return float(np.dot(weights, special.eval_laguerre(n, w * nodes / a) ** 2) / a)


def _phase_invariant_moments(occupation: float, purity: float, params: SystemParams) -> Moments:
    a0 = coherent_covariance(params)
    scale = 1.0 + 2.0 * occupation
    return Moments(0.0, 0.0, CovarianceMatrix(scale * a0.c_qq, 0.0, scale * a0.c_pp), purity)


def state_moments(
    state: InitialState,
    record: Record | None,
    params: SystemParams,
    t: float = 0.0,
) -> Moments:
    """Mean, covariance and purity of the reduced state; ``record=None`` means ``t = 0``."""
    if record is None and t != 0.0:
        raise DomainError("a propagator record is needed for t > 0")
    if isinstance(state, Fock) and state.n > 0:
        if record is None:
            w, v = 1.0, 0.0
        else:
            resonant = _require_resonant(state, record)
            k = resonant.index(t)
            w, v = abs(resonant.u[k]) ** 2, float(resonant.v[k])
        a = 1.0 + 2.0 * v
        return _phase_invariant_moments(state.n * w + v, _fock_purity(state.n, w, a), params)
    if isinstance(state, CollectiveFock1):
        if record is None:
            if state.amplitudes is None:
                raise UnsupportedStateError("collective state needs amplitudes at t = 0")
            w = abs(state.amplitudes[0]) ** 2
        else:
            resonant = _require_resonant(state, record)
            if resonant.temperature > 0:
                raise UnsupportedStateError("collective one-excitation state needs T = 0")
            w = abs(_collective_amplitude(state, resonant, params, t)) ** 2
        return _phase_invariant_moments(w, (1.0 - w) ** 2 + w**2, params)

    terms = (
        gaussian_terms(state, params)
        if record is None
        else evolved_terms(state, record, params, t)
    )
    mean, cov, purity = _terms_moments(terms)
    return Moments(float(mean[0]), float(mean[1]), CovarianceMatrix.from_array(cov), purity)


def observables(
    source: WignerGrid | Moments,
    params: SystemParams | None = None,
) -> Observables:
    """Norm, occupation and purity from a grid (quadrature) or from moments."""
    params = SystemParams() if params is None else params
    if isinstance(source, Moments):
        return Observables(1.0, source.occupation(params), source.purity)

    cell = source.spec.dq * source.spec.dp
    norm = source.norm()
    if abs(norm - 1.0) > NORM_WARN_TOL:
        logger.warning(f"Wigner grid norm {norm:.6f} deviates from 1; grid truncates the state")
    q, p = source.spec.mesh()
    energy = (params.m_omega * q**2 + p**2 / params.m_omega) / 2.0
    occupation = float((source.values * energy).sum() * cell) - 0.5
    purity = float(2.0 * np.pi * (source.values**2).sum() * cell)
    return Observables(norm, occupation, purity)

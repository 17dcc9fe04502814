"""Numerical helper functions shared by the engine modules."""

import logging
from collections.abc import Callable, Iterator

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError

logger = logging.getLogger(__name__)

TIME_MATCH_TOL = 1e-9
BOSE_EXPONENT_MAX = 700.0


def rk4_step(
    fun: Callable[[float, NDArray], NDArray],
    t: float,
    y: NDArray,
    h: float,
) -> NDArray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = fun(t, y)
    k2 = fun(t + h / 2.0, y + h / 2.0 * k1)
    k3 = fun(t + h / 2.0, y + h / 2.0 * k2)
    k4 = fun(t + h, y + h * k3)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def trapezoid_weights(n_points: int, h: float) -> NDArray:
    """Composite trapezoid weights for ``n_points`` equally spaced samples."""
    if n_points < 1:
        raise DomainError("trapezoid needs at least one sample")
    weights = np.full(n_points, h)
    weights[0] = weights[-1] = h / 2.0
    if n_points == 1:
        weights[0] = 0.0
    return weights


def bose_occupation(omegas: ArrayLike, temperature: float) -> NDArray:
    """Bose function ``1/(exp(w/T) - 1)``; identically zero at ``T = 0``."""
    omegas = np.asarray(omegas, dtype=float)
    if temperature <= 0.0:
        return np.zeros_like(omegas)
    x = omegas / temperature
    # exp overflows past ~709; the occupation there is below 1e-300 anyway
    occupation = 1.0 / np.expm1(np.minimum(x, BOSE_EXPONENT_MAX))
    return np.where(x < BOSE_EXPONENT_MAX, occupation, 0.0)


def thermal_factor(omegas: ArrayLike, temperature: float) -> NDArray:
    """``coth(w/2T) = 1 + 2 n(w)``."""
    return 1.0 + 2.0 * bose_occupation(omegas, temperature)


def check_time_grid(times: ArrayLike) -> NDArray:
    """Validate a stored-time array: starts at zero, strictly increasing."""
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a non-empty 1-D array")
    if times[0] != 0.0:
        raise DomainError(f"times must start at 0, got {times[0]}")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")
    return times


def steps_on_grid(times: NDArray, dt: float) -> NDArray:
    """Integer step indices of ``times`` on a uniform ``dt`` grid."""
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - times) > TIME_MATCH_TOL * np.maximum(1.0, times)):
        raise DomainError(f"stored times are not multiples of dt={dt}")
    return steps


def time_index(times: NDArray, t: float) -> int:
    """Index of ``t`` in a stored-time array."""
    k = int(np.searchsorted(times, t - TIME_MATCH_TOL * max(1.0, abs(t))))
    if k >= times.size or abs(times[k] - t) > TIME_MATCH_TOL * max(1.0, abs(t)):
        raise DomainError(f"t={t} is not a stored time of the record")
    return k


def uniform_times(t_max: float, dt: float, store_every: int = 1) -> NDArray:
    """Stored times ``0, s*dt, 2*s*dt, ... <= t_max``."""
    n_steps = int(np.floor(t_max / dt + TIME_MATCH_TOL))
    return np.arange(0, n_steps + 1, store_every) * dt


def chunks(n: int, size: int) -> Iterator[slice]:
    """Consecutive slices covering ``range(n)``."""
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def format_float(value: float | None) -> str:
    """Shortest round-trip decimal of a float; empty for missing values."""
    if value is None:
        return ""
    return repr(float(value))

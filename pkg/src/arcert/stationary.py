"""Stationary second-order structure of a stable AR(n) process.

Computes the stationary state covariance, the reachability-style Gramian
sum_i A^i (A^T)^i, the peak squared gain of the AR transfer function on the
unit circle, the autocovariance sequence, and Toeplitz autocovariance
matrices.  These are the deterministic ingredients of every certificate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import StabilityError
from .linalg import solve_discrete_lyapunov
from .process import ArProcess, CompanionStateSpace, build_companion, check_schur_stable

#: Grid density for the transfer-gain maximisation; brackets every minimum of
#: the degree-n trigonometric polynomial for orders up to about 64.
GAIN_GRID_POINTS = 4096

#: Documented order limit for the default grid density.
GAIN_MAX_ORDER = 64


def _char_poly_sq_modulus(coeffs: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """|p(e^{j w})|^2 evaluated as (1 - sum c_k cos kw)^2 + (sum c_k sin kw)^2."""
    k = np.arange(1, coeffs.size + 1)
    kw = np.multiply.outer(omega, k)
    re = 1.0 - np.cos(kw) @ coeffs
    im = np.sin(kw) @ coeffs
    return re * re + im * im


def peak_transfer_gain(coeffs, grid_points: int = GAIN_GRID_POINTS) -> float:
    """Peak squared magnitude of the AR transfer function 1/p(e^{j w}).

    Equals 1 / min_w |p(e^{j w})|^2 over w in [0, pi] (the gain is even in w).
    Computed on a uniform grid followed by golden-section refinement of the
    bracketing cell; the result is stable to relative 1e-8 under grid-density
    doubling.  Scaled by the innovation variance it bounds every eigenvalue of
    the Toeplitz autocovariance matrices.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if not check_schur_stable(c):
        raise StabilityError("peak gain is unbounded or meaningless for unstable coefficients")
    if c.size > GAIN_MAX_ORDER:
        warnings.warn(
            f"order {c.size} exceeds the validated limit {GAIN_MAX_ORDER}; "
            "the default grid may miss narrow spectral peaks",
            RuntimeWarning,
        )

    omega = np.linspace(0.0, math.pi, int(grid_points))
    values = _char_poly_sq_modulus(c, omega)
    best = int(np.argmin(values))
    lo = omega[max(best - 1, 0)]
    hi = omega[min(best + 1, omega.size - 1)]

    # Golden-section refinement of the bracketing cell.
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1 = float(_char_poly_sq_modulus(c, np.array([x1]))[0])
    f2 = float(_char_poly_sq_modulus(c, np.array([x2]))[0])
    while b - a > 1e-12:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = float(_char_poly_sq_modulus(c, np.array([x1]))[0])
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = float(_char_poly_sq_modulus(c, np.array([x2]))[0])
    f_min = min(float(values[best]), f1, f2)
    return 1.0 / f_min


@dataclass(frozen=True, eq=False)
class StationaryStatistics:
    """Deterministic stationary quantities of one process.

    state_covariance: (n+1) x (n+1) stationary covariance of the companion
        state, solving V = A V A^T + noise_variance * B B^T.
    gramian: (n+1) x (n+1) solution of G = A G A^T + I (so G >= I); measures
        how system memory inflates the concentration bounds.
    output_variance: stationary variance of the scalar output, the (1,1)
        entry of state_covariance.
    peak_gain: peak squared transfer gain (see peak_transfer_gain).
    """

    state_covariance: np.ndarray
    gramian: np.ndarray
    output_variance: float
    peak_gain: float

    def __post_init__(self):
        v = np.asarray(self.state_covariance, dtype=float).copy()
        g = np.asarray(self.gramian, dtype=float).copy()
        v.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "state_covariance", v)
        object.__setattr__(self, "gramian", g)

    @property
    def order(self) -> int:
        return int(self.state_covariance.shape[0] - 1)

    @property
    def state_covariance_block(self) -> np.ndarray:
        """Top-left n x n block: stationary covariance of n consecutive outputs."""
        return self.state_covariance[: self.order, : self.order]

    @property
    def gramian_block(self) -> np.ndarray:
        return self.gramian[: self.order, : self.order]


def stationary_stats(ss: CompanionStateSpace, sigma2: float) -> StationaryStatistics:
    """Solve the two Lyapunov equations and evaluate the peak gain."""
    sigma2 = float(sigma2)
    if not np.isfinite(sigma2) or sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be a positive finite real, got {sigma2!r}")
    a, b = ss.a_matrix, ss.b_vector
    state_cov = solve_discrete_lyapunov(a, sigma2 * np.outer(b, b))
    gramian = solve_discrete_lyapunov(a, np.eye(a.shape[0]))
    y_var = float(state_cov[0, 0])
    if y_var <= 0.0:
        raise ValueError("stationary output variance must be positive")
    return StationaryStatistics(
        state_covariance=state_cov,
        gramian=gramian,
        output_variance=y_var,
        peak_gain=peak_transfer_gain(ss.coeffs),
    )


def autocovariance_sequence(process: ArProcess, max_lag: int) -> np.ndarray:
    """Stationary autocovariances gamma(0), ..., gamma(max_lag).

    Uses the state-space identity E[x_{t+k} x_t^T] = A^k V, whose (1,1) entry
    is gamma(k); gamma(0) is the stationary output variance.
    """
    max_lag = int(max_lag)
    if max_lag < 0:
        raise ValueError("max_lag must be nonnegative")
    ss = build_companion(process)
    cur = solve_discrete_lyapunov(
        ss.a_matrix, process.noise_variance * np.outer(ss.b_vector, ss.b_vector)
    )
    gamma = np.empty(max_lag + 1)
    gamma[0] = cur[0, 0]
    for k in range(1, max_lag + 1):
        cur = ss.a_matrix @ cur
        gamma[k] = cur[0, 0]
    return gamma


@dataclass(frozen=True, eq=False)
class ToeplitzCovariance:
    """Symmetric Toeplitz covariance matrix of consecutive process outputs.

    Every eigenvalue is bounded by noise_variance * peak_gain, the supremum of
    the spectral density.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])


def toeplitz_covariance(process: ArProcess, dimension: int) -> ToeplitzCovariance:
    """Covariance matrix of (y_1, ..., y_D) for a stationary run."""
    dimension = int(dimension)
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    gamma = autocovariance_sequence(process, dimension - 1)
    idx = np.arange(dimension)
    return ToeplitzCovariance(matrix=gamma[np.abs(idx[:, None] - idx[None, :])])

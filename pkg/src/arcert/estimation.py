"""Regression objects and the ordinary least squares estimate.

Index convention (encoded once in build_regressors and pinned by tests against
hand enumeration, since an off-by-one here silently corrupts every event
frequency downstream): the design matrix stacks the lag vectors
Y_n, ..., Y_{N-1} as rows, paired with targets y_{n+1}, ..., y_N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .process import ArProcess, Trajectory

#: Condition-number limit (on the normal matrix) for a trustworthy solve.
NORMAL_CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class RegressorSet:
    """Stacked regression data: design rows Y_t^T = [y_t ... y_{t-n+1}],
    targets y_{t+1}, and the normal matrix design^T design."""

    design: np.ndarray
    target: np.ndarray
    normal_matrix: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.design, dtype=float).copy()
        t = np.asarray(self.target, dtype=float).copy()
        m = np.asarray(self.normal_matrix, dtype=float).copy()
        if d.ndim != 2 or t.shape != (d.shape[0],) or m.shape != (d.shape[1], d.shape[1]):
            raise ValueError("inconsistent regressor shapes")
        for arr in (d, t, m):
            arr.flags.writeable = False
        object.__setattr__(self, "design", d)
        object.__setattr__(self, "target", t)
        object.__setattr__(self, "normal_matrix", m)

    @property
    def rows(self) -> int:
        return int(self.design.shape[0])

    @property
    def order(self) -> int:
        return int(self.design.shape[1])


@dataclass(frozen=True, eq=False)
class OlsEstimate:
    """Least-squares coefficient estimate with a trust flag.

    rank_ok is False when the design was rank deficient or the normal matrix
    too ill-conditioned; coeffs then holds the minimum-norm pseudo-inverse
    solution rather than the unique solve.
    """

    coeffs: np.ndarray
    rank_ok: bool

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)


def build_regressors(traj: Trajectory, order: int | None = None) -> RegressorSet:
    """Assemble the design matrix and targets from a trajectory.

    ``order`` defaults to the trajectory's own order; passing a different value
    fits a model of that order to the same data.
    """
    m = traj.order if order is None else int(order)
    horizon = traj.horizon
    if m < 1:
        raise ValueError("order must be >= 1")
    if horizon - m < 1:
        raise ValueError(f"horizon {horizon} leaves no regression rows for order {m}")
    obs = traj.observed
    windows = np.lib.stride_tricks.sliding_window_view(obs[: horizon - 1], m)
    design = np.ascontiguousarray(windows[:, ::-1])
    target = obs[m:].copy()
    return RegressorSet(design=design, target=target, normal_matrix=design.T @ design)


def ols_fit(reg: RegressorSet) -> OlsEstimate:
    """Least squares via an orthogonal (SVD) factorisation, never an explicit inverse.

    The normal-equation route squares the condition number, so it is kept out
    of the production path and used only as a test oracle.
    """
    theta, _, rank, singular = np.linalg.lstsq(reg.design, reg.target, rcond=None)
    if rank < reg.order or singular[-1] == 0.0:
        return OlsEstimate(coeffs=theta, rank_ok=False)
    normal_condition = (singular[0] / singular[-1]) ** 2
    return OlsEstimate(coeffs=theta, rank_ok=bool(normal_condition < NORMAL_CONDITION_LIMIT))


def weighted_deviation(est: OlsEstimate, truth: ArProcess, direction) -> float:
    """Signed deviation w^T (theta_hat - theta) for a unit direction w."""
    w = np.atleast_1d(np.asarray(direction, dtype=float))
    if w.shape != (truth.order,):
        raise ValueError(f"direction must have length {truth.order}")
    if abs(np.linalg.norm(w) - 1.0) > 1e-12:
        raise ValueError("direction must have unit 2-norm")
    if est.coeffs.shape != (truth.order,):
        raise ValueError("estimate and process orders differ")
    return float(w @ (est.coeffs - truth.coeffs))

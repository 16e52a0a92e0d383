"""Gaussian AR(n) processes: stability checks, companion form, exact-stationary simulation.

The simulation contract is deterministic: a trajectory is a pure function of
(process, horizon, seed).  Parallel Monte Carlo derives one RNG substream per
trial through :func:`substream`, so campaigns reproduce bit-for-bit regardless
of batch size or thread count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import StabilityError
from .linalg import solve_discrete_lyapunov, symmetric_sqrt

#: Margin below the unit circle required of every characteristic root.
#: Lyapunov solves degrade as roots approach the circle, so exact unit-modulus
#: roots are rejected with room to spare.
STABILITY_MARGIN = 1e-9

SeedLike = Union[int, np.random.SeedSequence]


def _coefficient_companion(coeffs: np.ndarray) -> np.ndarray:
    """n x n companion matrix whose eigenvalues are the roots of
    p(x) = x^n - c_1 x^(n-1) - ... - c_n."""
    n = coeffs.size
    m = np.zeros((n, n))
    m[0, :] = coeffs
    if n > 1:
        m[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    return m


def characteristic_roots(coeffs) -> np.ndarray:
    """Roots of the AR characteristic polynomial (the process poles)."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coeffs must be a non-empty 1-D vector")
    if not np.all(np.isfinite(c)):
        raise ValueError("coeffs must be finite")
    return np.linalg.eigvals(_coefficient_companion(c))


def check_schur_stable(coeffs, margin: float = STABILITY_MARGIN) -> bool:
    """True iff every characteristic root has modulus below 1 - margin."""
    roots = characteristic_roots(coeffs)
    return bool(np.max(np.abs(roots)) < 1.0 - margin)


@dataclass(frozen=True, eq=False)
class ArProcess:
    """A Schur-stable AR(n) process y_t = c_1 y_{t-1} + ... + c_n y_{t-n} + e_t.

    ``coeffs`` holds (c_1, ..., c_n); ``noise_variance`` is the variance of the
    i.i.d. Gaussian innovations e_t.  Construction rejects unstable coefficient
    vectors, so every instance describes a stationary process.
    """

    coeffs: np.ndarray
    noise_variance: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        sigma2 = float(self.noise_variance)
        if not np.isfinite(sigma2) or sigma2 <= 0.0:
            raise ValueError(f"noise_variance must be a positive finite real, got {sigma2!r}")
        if not check_schur_stable(c):
            raise StabilityError(
                "coefficients are not Schur-stable: some characteristic root has "
                f"modulus >= {1.0 - STABILITY_MARGIN}"
            )
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "noise_variance", sigma2)

    @property
    def order(self) -> int:
        return int(self.coeffs.size)

    def to_dict(self) -> dict:
        return {"coeffs": self.coeffs.tolist(), "noise_variance": self.noise_variance}


@dataclass(frozen=True, eq=False)
class CompanionStateSpace:
    """Companion realisation x_{t+1} = A x_t + B e_{t+1} of an AR(n) process.

    A is (n+1) x (n+1) with the coefficients in its first row and an identity
    shift below; B is the first standard basis vector.  The eigenvalues of A
    are the process poles plus one extra eigenvalue at zero, so det(A) = 0.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_matrix, dtype=float).copy()
        b = np.asarray(self.b_vector, dtype=float).copy()
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise ValueError(f"a_matrix must be square of size >= 2, got {a.shape}")
        if b.shape != (a.shape[0],):
            raise ValueError(f"b_vector must have length {a.shape[0]}, got {b.shape}")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_vector", b)

    @property
    def order(self) -> int:
        return int(self.a_matrix.shape[0] - 1)

    @property
    def coeffs(self) -> np.ndarray:
        return self.a_matrix[0, : self.order]


def build_companion(process: ArProcess) -> CompanionStateSpace:
    """State-space companion form of a stable AR(n) process."""
    n = process.order
    a = np.zeros((n + 1, n + 1))
    a[0, :n] = process.coeffs
    a[1:, :n] = np.eye(n)
    b = np.zeros(n + 1)
    b[0] = 1.0
    return CompanionStateSpace(a_matrix=a, b_vector=b)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A simulated sample path (y_{1-n}, ..., y_N) plus the realised innovations.

    ``samples`` has length N + n: the n pre-samples (y_{1-n}, ..., y_0) drawn
    from the stationary law, then the N recursion outputs.  ``noise`` holds
    (e_1, ..., e_N); event checkers need the true innovations, which would be
    contaminated if re-estimated from residuals.
    """

    samples: np.ndarray
    noise: np.ndarray
    order: int
    horizon: int
    seed: SeedLike

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).copy()
        noise = np.asarray(self.noise, dtype=float).copy()
        n, horizon = int(self.order), int(self.horizon)
        if n < 1 or horizon <= n:
            raise ValueError("require order >= 1 and horizon > order")
        if samples.shape != (horizon + n,):
            raise ValueError(f"samples must have length horizon + order = {horizon + n}")
        if noise.shape != (horizon,):
            raise ValueError(f"noise must have length horizon = {horizon}")
        if not (np.all(np.isfinite(samples)) and np.all(np.isfinite(noise))):
            raise ValueError("trajectory entries must be finite")
        samples.flags.writeable = False
        noise.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "order", n)
        object.__setattr__(self, "horizon", horizon)

    @property
    def pre_samples(self) -> np.ndarray:
        """(y_{1-n}, ..., y_0) in time order."""
        return self.samples[: self.order]

    @property
    def observed(self) -> np.ndarray:
        """(y_1, ..., y_N)."""
        return self.samples[self.order :]

    def y(self, t: int) -> float:
        """Sample y_t for 1 - order <= t <= horizon."""
        idx = t + self.order - 1
        if idx < 0 or idx >= self.samples.size:
            raise IndexError(f"time {t} outside stored range")
        return float(self.samples[idx])

    def lag_window(self, t: int) -> np.ndarray:
        """Lag vector (y_t, y_{t-1}, ..., y_{t-n+1}) for 0 <= t <= horizon."""
        if t < 0 or t > self.horizon:
            raise IndexError(f"lag window at time {t} outside stored range")
        return self.samples[t : t + self.order][::-1]

    def to_csv(self, path) -> None:
        """Write the sample path as a single-column CSV with a one-line header."""
        lines = ["y"] + [repr(float(v)) for v in self.samples]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def ar_recursion(coeffs, pre_samples, noise) -> np.ndarray:
    """Run the AR recursion y_t = sum_k c_k y_{t-k} + e_t and return (y_1, ..., y_N).

    ``pre_samples`` holds (y_{1-n}, ..., y_0) in time order; ``noise`` holds
    (e_1, ..., e_N).  Both accept a leading batch axis.  The accumulation order
    (innovation first, then lag terms in increasing k) is identical on the
    scalar and batched paths, so they produce bit-identical output.
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    pre = np.asarray(pre_samples, dtype=float)
    e = np.asarray(noise, dtype=float)
    n = c.size
    if pre.shape[-1] != n:
        raise ValueError(f"pre_samples last axis must have length {n}")
    if pre.ndim != e.ndim:
        raise ValueError("pre_samples and noise must have the same number of axes")

    if e.ndim == 1:
        # Plain-float path: ~10x faster than per-step numpy scalars for long runs.
        ck = c.tolist()
        hist = pre.tolist()
        out = []
        for ei in e.tolist():
            acc = ei
            for k in range(n):
                acc += ck[k] * hist[-1 - k]
            hist.append(acc)
            out.append(acc)
        return np.asarray(out)

    horizon = e.shape[-1]
    buf = np.concatenate([pre, np.zeros_like(e)], axis=-1)
    for t in range(horizon):
        acc = e[..., t].copy()
        for k in range(n):
            acc += c[k] * buf[..., n + t - 1 - k]
        buf[..., n + t] = acc
    return buf[..., n:]


def substream(master_seed: int, trial_index: int) -> np.random.SeedSequence:
    """RNG substream for one Monte Carlo trial.

    The rule is SeedSequence(master_seed, spawn_key=(trial_index,)): trial
    streams are statistically independent and the mapping is stable across
    batch sizes, thread counts and library versions.
    """
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial_index),))


def stationary_state_covariance(process: ArProcess) -> np.ndarray:
    """Stationary covariance of the companion state (solves V = A V A^T + s2 B B^T)."""
    ss = build_companion(process)
    return solve_discrete_lyapunov(
        ss.a_matrix, process.noise_variance * np.outer(ss.b_vector, ss.b_vector)
    )


def _draw_initial_and_noise(process: ArProcess, horizon: int, chol_like: np.ndarray,
                            rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Shared draw order: first the stationary state, then the innovation vector."""
    n = process.order
    state = chol_like @ rng.standard_normal(n + 1)
    # state = (y_0, y_{-1}, ..., y_{-n}); keep (y_{1-n}, ..., y_0), drop y_{-n}.
    pre = state[:n][::-1].copy()
    noise = np.sqrt(process.noise_variance) * rng.standard_normal(horizon)
    return pre, noise


def simulate_stationary(process: ArProcess, horizon: int, seed: SeedLike) -> Trajectory:
    """Simulate an exactly stationary trajectory of length horizon.

    The initial companion state is drawn from its stationary Gaussian law via a
    symmetric square root of the stationary covariance (no burn-in), then the
    recursion is run with fresh N(0, noise_variance) innovations.  Deterministic
    given (process, horizon, seed).
    """
    horizon = int(horizon)
    if horizon <= process.order:
        raise ValueError("horizon must exceed the process order")
    factor = symmetric_sqrt(stationary_state_covariance(process))
    rng = np.random.default_rng(seed)
    pre, noise = _draw_initial_and_noise(process, horizon, factor, rng)
    y = ar_recursion(process.coeffs, pre, noise)
    samples = np.concatenate([pre, y])
    return Trajectory(samples=samples, noise=noise, order=process.order,
                      horizon=horizon, seed=seed)


def simulate_batch(process: ArProcess, horizon: int, seeds: list[SeedLike],
                   _factor: np.ndarray | None = None,
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simulate one trajectory per seed; returns (pre, noise, observed) row-stacked.

    Row i reproduces simulate_stationary(process, horizon, seeds[i]) exactly.
    ``_factor`` lets campaign code reuse a precomputed symmetric square root of
    the stationary state covariance.
    """
    horizon = int(horizon)
    if horizon <= process.order:
        raise ValueError("horizon must exceed the process order")
    n = process.order
    factor = symmetric_sqrt(stationary_state_covariance(process)) if _factor is None else _factor
    pre = np.empty((len(seeds), n))
    noise = np.empty((len(seeds), horizon))
    for i, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        pre[i], noise[i] = _draw_initial_and_noise(process, horizon, factor, rng)
    y = ar_recursion(process.coeffs, pre, noise)
    return pre, noise, y


@dataclass(frozen=True)
class SimulationSpec:
    """Parsed simulation request: which process, how long, which stream."""

    process: ArProcess
    horizon: int
    seed: int


def simulation_spec_from_json(doc: str | dict) -> SimulationSpec:
    """Parse {"coeffs": [...], "noise_variance": ..., "horizon": ..., "seed": ...}.

    Raises ValueError naming the offending field on any validation failure.
    """
    data = json.loads(doc) if isinstance(doc, str) else dict(doc)
    for field in ("coeffs", "noise_variance", "horizon", "seed"):
        if field not in data:
            raise ValueError(f"field '{field}': missing from simulation spec")
    try:
        process = ArProcess(coeffs=np.asarray(data["coeffs"], dtype=float),
                            noise_variance=float(data["noise_variance"]))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"field 'coeffs'/'noise_variance': {exc}") from exc
    horizon = data["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon <= process.order:
        raise ValueError("field 'horizon': must be an integer exceeding the process order")
    seed = data["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValueError("field 'seed': must be a nonnegative integer")
    return SimulationSpec(process=process, horizon=horizon, seed=seed)

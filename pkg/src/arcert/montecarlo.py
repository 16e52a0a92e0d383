"""Monte Carlo validation of every probabilistic claim made by the certificates.

Each trial simulates one exactly stationary trajectory and evaluates the three
concentration events behind the sandwich failure bound, the sandwich itself,
the self-normalized norm event, and the deviation of the least-squares
estimate.  Two implications between those events are deterministic
consequences of the certificate construction and are checked on every single
trial, not just in aggregate:

* boundary and noise-energy and cross-term  =>  sandwich holds;
* sandwich and self-normalized              =>  the deviation radius holds.

Trials are embarrassingly parallel: trial i draws from the RNG substream
``substream(master_seed, i)`` and aggregation is an order-independent sum of
counts, so reports are bit-identical across batch sizes and thread counts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certificates import (
    BoundInputs,
    CovarianceCertificate,
    DeviationCertificate,
    covariance_certificate,
    deviation_radius,
)
from .errors import ConfigError, EventImplicationError, InfeasibleCertificateError
from .estimation import RegressorSet, build_regressors, ols_fit
from .linalg import PSD_ORDER_RTOL, psd_order_holds, symmetric_sqrt
from .process import (
    ArProcess,
    CompanionStateSpace,
    Trajectory,
    build_companion,
    simulate_batch,
    substream,
)
from .stationary import stationary_stats

#: Maximum tolerated fraction of trials lost to numerical failures.
MAX_ERROR_FRACTION = 1e-3


def event_threshold(inputs: BoundInputs) -> float:
    """Per-event spectral-radius budget epsilon * s2 * (N - n) / 3.

    The three component events each get a third of the total radius budget, so
    together they force the sandwich by subadditivity of the spectral radius on
    symmetric matrices.
    """
    return inputs.epsilon * inputs.process.noise_variance * inputs.effective_samples / 3.0


def event_noise_window(traj: Trajectory) -> np.ndarray:
    """Innovations (e_n, ..., e_{N-1}) driving the summed states.

    Note the one-step offset against the regression residuals: the recursion
    that produces states x_n, ..., x_{N-1} consumes these innovations, while
    the regression targets consume (e_{n+1}, ..., e_N).
    """
    return traj.noise[traj.order - 1 : traj.horizon - 1]


def residual_noise_window(traj: Trajectory) -> np.ndarray:
    """Innovations (e_{n+1}, ..., e_N): exactly target - design @ coeffs."""
    return traj.noise[traj.order :]


def _state_image(ss: CompanionStateSpace, lag_window: np.ndarray) -> np.ndarray:
    """A x_t assembled from the lag window Y_t; the companion's zero last
    column annihilates the oldest state entry, so Y_t determines A x_t."""
    return np.concatenate(([ss.coeffs @ lag_window], lag_window))


def check_boundary_event(traj: Trajectory, ss: CompanionStateSpace,
                         inputs: BoundInputs) -> tuple[bool, float]:
    """Initial/final-state event: rho[A (x_first x_first^T - x_last x_last^T) A^T]
    within its third of the radius budget.  Returns (held, radius)."""
    u = _state_image(ss, traj.lag_window(traj.order - 1))
    v = _state_image(ss, traj.lag_window(traj.horizon - 1))
    m = np.outer(u, u) - np.outer(v, v)
    radius = float(np.max(np.abs(np.linalg.eigvalsh(m))))
    return radius <= event_threshold(inputs), radius


def check_noise_energy_event(noise_window, inputs: BoundInputs) -> tuple[bool, float]:
    """Innovation energy event |sum e^2 - (N-n) s2| within its budget third.

    This is the scalar form of the rank-one matrix event: the matrix's
    spectral radius equals the absolute energy deviation.
    """
    e = np.asarray(noise_window, dtype=float)
    if e.shape != (inputs.effective_samples,):
        raise ValueError(f"noise window must have length {inputs.effective_samples}")
    radius = float(abs(e @ e - inputs.effective_samples * inputs.process.noise_variance))
    return radius <= event_threshold(inputs), radius


def check_cross_term_event(traj: Trajectory, noise_window, ss: CompanionStateSpace,
                           inputs: BoundInputs) -> tuple[bool, float]:
    """State-innovation cross-term event.

    The summed cross matrix S B^T + B S^T with S = sum_i e_{i+1} A x_i is
    symmetric of rank <= 2 with spectral radius |S_1| + ||S||_2 (closed form,
    cross-checked against a dense eigensolve in tests).
    """
    n, horizon = traj.order, traj.horizon
    e = np.asarray(noise_window, dtype=float)
    if e.shape != (horizon - n,):
        raise ValueError(f"noise window must have length {horizon - n}")
    full = traj.samples
    s_tail = np.array([
        e @ full[2 * n - 2 - k : horizon + n - 2 - k] for k in range(n)
    ])
    s_head = float(ss.coeffs @ s_tail)
    radius = abs(s_head) + math.sqrt(s_head ** 2 + float(s_tail @ s_tail))
    return radius <= event_threshold(inputs), radius


def check_sandwich_event(reg: RegressorSet, cert: CovarianceCertificate) -> bool:
    """Sandwich event lower <= design^T design <= upper (PSD order)."""
    if not cert.feasible:
        raise InfeasibleCertificateError("sandwich event needs a feasible certificate")
    return psd_order_holds(cert.lower, reg.normal_matrix, cert.upper)


def check_self_normalized_event(reg: RegressorSet, residual_noise,
                                cert: CovarianceCertificate,
                                noise_variance: float) -> bool:
    """Self-normalized event: ||design^T E|| in the (normal + lower)^{-1} norm
    stays below sqrt(2 s2 log(det(normal + lower)^{1/2} det(lower)^{-1/2} / delta)).

    E must be the true innovations (exactly target - design @ coeffs); using
    fitted residuals would contaminate the event.  When delta already exceeds
    the determinant term the threshold is imaginary and the event cannot hold.
    """
    if not cert.feasible:
        raise InfeasibleCertificateError("self-normalized event needs a feasible certificate")
    e = np.asarray(residual_noise, dtype=float)
    if e.shape != (reg.rows,):
        raise ValueError(f"residual noise must have length {reg.rows}")
    s = reg.design.T @ e
    m = reg.normal_matrix + cert.lower
    lhs_sq = float(s @ np.linalg.solve(m, s))
    sign_m, logdet_m = np.linalg.slogdet(m)
    sign_low, logdet_low = np.linalg.slogdet(cert.lower)
    if sign_m <= 0 or sign_low <= 0:
        return False
    log_argument = 0.5 * float(logdet_m - logdet_low) - cert.log_delta
    return log_argument > 0.0 and lhs_sq <= 2.0 * float(noise_variance) * log_argument


@dataclass(frozen=True)
class TrialOutcome:
    """All events of one trial plus the raw statistics behind them.

    Construction verifies the two deterministic implications and raises
    EventImplicationError on violation; deviation_ok is None when the
    deviation certificate was vacuous (no radius to test).
    """

    boundary_ok: bool
    noise_energy_ok: bool
    cross_term_ok: bool
    sandwich_ok: bool
    self_normalized_ok: bool
    deviation_ok: bool | None
    boundary_radius: float
    noise_energy_radius: float
    cross_term_radius: float
    deviation: float

    def __post_init__(self):
        if (self.boundary_ok and self.noise_energy_ok and self.cross_term_ok
                and not self.sandwich_ok):
            raise EventImplicationError(
                "all three component events held but the sandwich failed"
            )
        if (self.sandwich_ok and self.self_normalized_ok
                and self.deviation_ok is False):
            raise EventImplicationError(
                "sandwich and self-normalized events held but the deviation "
                "exceeded its certified radius"
            )


def evaluate_trial(process: ArProcess, ss: CompanionStateSpace,
                   inputs: BoundInputs, cert: CovarianceCertificate,
                   dev_cert: DeviationCertificate, traj: Trajectory) -> TrialOutcome:
    """Reference single-trial evaluation (the campaign uses a vectorised twin)."""
    reg = build_regressors(traj)
    est = ols_fit(reg)
    deviation = abs(float(dev_cert.direction @ (est.coeffs - process.coeffs)))
    boundary_ok, boundary_r = check_boundary_event(traj, ss, inputs)
    noise_ok, noise_r = check_noise_energy_event(event_noise_window(traj), inputs)
    cross_ok, cross_r = check_cross_term_event(traj, event_noise_window(traj), ss, inputs)
    sandwich_ok = check_sandwich_event(reg, cert)
    sn_ok = check_self_normalized_event(reg, residual_noise_window(traj), cert,
                                        process.noise_variance)
    dev_ok = None if dev_cert.vacuous else bool(deviation <= dev_cert.radius)
    return TrialOutcome(
        boundary_ok=boundary_ok, noise_energy_ok=noise_ok, cross_term_ok=cross_ok,
        sandwich_ok=sandwich_ok, self_normalized_ok=sn_ok, deviation_ok=dev_ok,
        boundary_radius=boundary_r, noise_energy_radius=noise_r,
        cross_term_radius=cross_r, deviation=deviation,
    )


def resolve_direction(spec, order: int, fallback_label: str = "custom") -> tuple[str, np.ndarray]:
    """Turn a direction spec into a (label, unit vector) pair.

    Accepts the shorthand "e<i>" for the i-th standard basis vector (1-based),
    "uniform" for the normalised all-ones vector, or an explicit vector, which
    is normalised to unit length.
    """
    if isinstance(spec, str):
        token = spec.strip().lower()
        if token == "uniform":
            return "uniform", np.full(order, 1.0 / math.sqrt(order))
        if token.startswith("e") and token[1:].isdigit():
            idx = int(token[1:])
            if not 1 <= idx <= order:
                raise ConfigError(f"direction '{spec}': index must be in 1..{order}")
            w = np.zeros(order)
            w[idx - 1] = 1.0
            return token, w
        raise ConfigError(f"direction '{spec}': expected 'e<i>', 'uniform' or a vector")
    w = np.atleast_1d(np.asarray(spec, dtype=float))
    if w.shape != (order,):
        raise ConfigError(f"direction: expected a vector of length {order}")
    norm = float(np.linalg.norm(w))
    if not np.isfinite(norm) or norm == 0.0:
        raise ConfigError("direction: vector must be finite and nonzero")
    return fallback_label, w / norm


@dataclass(frozen=True, eq=False)
class CampaignConfig:
    """Validated inputs of one Monte Carlo campaign.

    directions maps labels to unit vectors; trial i uses the RNG substream
    derived from (master_seed, i).  With allow_vacuous=False a campaign whose
    sandwich failure bound is already >= 1 is rejected, since every verdict
    would be vacuous.
    """

    process: ArProcess
    horizon: int
    epsilon: float
    trials: int
    master_seed: int
    directions: tuple[tuple[str, np.ndarray], ...]
    threads: int = 1
    batch_size: int = 256
    allow_vacuous: bool = False

    def __post_init__(self):
        n = self.process.order
        if int(self.horizon) < 2 * n + 1:
            raise ConfigError("horizon: must be at least 2 * order + 1 for a full-rank design")
        if int(self.trials) < 100:
            raise ConfigError("trials: at least 100 trials are required")
        eps = float(self.epsilon)
        if not np.isfinite(eps) or eps <= 0.0:
            raise ConfigError("epsilon: must be a positive finite real")
        if int(self.master_seed) < 0:
            raise ConfigError("seed: must be a nonnegative integer")
        if not self.directions:
            raise ConfigError("direction: at least one direction is required")
        labels = [label for label, _ in self.directions]
        if len(set(labels)) != len(labels):
            raise ConfigError("direction: labels must be unique")
        resolved = []
        for label, w in self.directions:
            vec = np.atleast_1d(np.asarray(w, dtype=float)).copy()
            if vec.shape != (n,) or abs(np.linalg.norm(vec) - 1.0) > 1e-9:
                raise ConfigError(f"direction '{label}': must be a unit vector of length {n}")
            vec.flags.writeable = False
            resolved.append((str(label), vec))
        if int(self.threads) < 1 or int(self.batch_size) < 1:
            raise ConfigError("threads/batch_size: must be >= 1")
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "directions", tuple(resolved))
        object.__setattr__(self, "threads", int(self.threads))
        object.__setattr__(self, "batch_size", int(self.batch_size))


@dataclass(frozen=True)
class EventCoverage:
    """Empirical failure frequency of one event against its theoretical bound.

    failures / frequency / stderr are None for a deviation event whose
    certificate was vacuous (there is no radius to test).  verdict is
    "violated" only when the observation beats the bound by more than three
    binomial standard errors, and "vacuous" when the bound itself is >= 1 or
    untestable.
    """

    event: str
    bound: float
    failures: int | None
    evaluated: int
    frequency: float | None
    stderr: float | None
    verdict: str

    def to_dict(self) -> dict:
        return {
            "event": self.event,
            "bound": self.bound,
            "failures": self.failures,
            "evaluated": self.evaluated,
            "frequency": self.frequency,
            "stderr": self.stderr,
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EventCoverage":
        return cls(
            event=str(data["event"]),
            bound=float(data["bound"]),
            failures=None if data["failures"] is None else int(data["failures"]),
            evaluated=int(data["evaluated"]),
            frequency=None if data["frequency"] is None else float(data["frequency"]),
            stderr=None if data["stderr"] is None else float(data["stderr"]),
            verdict=str(data["verdict"]),
        )


@dataclass(frozen=True)
class CoverageReport:
    """Aggregated campaign result: per-event coverage rows, the per-trial
    implication violation counts (zero unless the implementation is broken),
    and the number of trials lost to numerical errors."""

    trials: int
    master_seed: int
    horizon: int
    epsilon: float
    process: dict
    events: tuple[EventCoverage, ...]
    sandwich_chain_violations: int
    deviation_chain_violations: dict[str, int]
    trial_errors: int

    def event(self, name: str) -> EventCoverage:
        for row in self.events:
            if row.event == name:
                return row
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "master_seed": self.master_seed,
            "horizon": self.horizon,
            "epsilon": self.epsilon,
            "process": dict(self.process),
            "events": [row.to_dict() for row in self.events],
            "sandwich_chain_violations": self.sandwich_chain_violations,
            "deviation_chain_violations": dict(self.deviation_chain_violations),
            "trial_errors": self.trial_errors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CoverageReport":
        return cls(
            trials=int(data["trials"]),
            master_seed=int(data["master_seed"]),
            horizon=int(data["horizon"]),
            epsilon=float(data["epsilon"]),
            process=dict(data["process"]),
            events=tuple(EventCoverage.from_dict(row) for row in data["events"]),
            sandwich_chain_violations=int(data["sandwich_chain_violations"]),
            deviation_chain_violations={str(k): int(v) for k, v in
                                        data["deviation_chain_violations"].items()},
            trial_errors=int(data["trial_errors"]),
        )

    def csv_text(self) -> str:
        """Flat CSV, one row per event; deterministic byte-for-byte."""
        lines = ["event,bound,failures,evaluated,frequency,stderr,verdict"]
        for row in self.events:
            lines.append(",".join([
                row.event,
                repr(row.bound),
                "" if row.failures is None else str(row.failures),
                str(row.evaluated),
                "" if row.frequency is None else repr(row.frequency),
                "" if row.stderr is None else repr(row.stderr),
                row.verdict,
            ]))
        return "\n".join(lines) + "\n"


@dataclass
class _BatchCounts:
    evaluated: int = 0
    errors: int = 0
    boundary_fail: int = 0
    noise_fail: int = 0
    cross_fail: int = 0
    sandwich_fail: int = 0
    sn_fail: int = 0
    dev_fail: tuple[int, ...] = ()
    chain_sandwich: int = 0
    chain_dev: tuple[int, ...] = ()


def _run_batch(config: CampaignConfig, ss: CompanionStateSpace, inputs: BoundInputs,
               cert: CovarianceCertificate, factor: np.ndarray,
               radii: list[float | None], logdet_lower: float,
               start: int, stop: int) -> _BatchCounts:
    process = config.process
    n = process.order
    horizon = config.horizon
    rows = horizon - n
    sigma2 = process.noise_variance
    coeffs = process.coeffs
    threshold = event_threshold(inputs)

    seeds = [substream(config.master_seed, i) for i in range(start, stop)]
    pre, noise, y = simulate_batch(process, horizon, seeds, _factor=factor)
    full = np.concatenate([pre, y], axis=1)

    errored = ~np.isfinite(y).all(axis=1)

    # Design columns: column k stacks y_{i-k} over rows i = n .. N-1.
    cols = [y[:, n - 1 - k : horizon - 1 - k] for k in range(n)]
    targets = y[:, n:]
    normal = np.empty((y.shape[0], n, n))
    for j in range(n):
        for k in range(j, n):
            val = np.einsum("bi,bi->b", cols[j], cols[k])
            normal[:, j, k] = val
            normal[:, k, j] = val

    # Boundary event from the first and last usable lag windows.
    first_window = full[:, n - 1 : 2 * n - 1][:, ::-1]
    last_window = full[:, horizon - 1 : horizon + n - 1][:, ::-1]
    u = np.concatenate([(first_window @ coeffs)[:, None], first_window], axis=1)
    v = np.concatenate([(last_window @ coeffs)[:, None], last_window], axis=1)
    rank_two = u[:, :, None] * u[:, None, :] - v[:, :, None] * v[:, None, :]
    boundary_radius = np.abs(np.linalg.eigvalsh(rank_two)).max(axis=1)
    boundary_ok = boundary_radius <= threshold

    # Innovation energy event on the state-driving window (e_n .. e_{N-1}).
    window = noise[:, n - 1 : horizon - 1]
    energy = np.einsum("bi,bi->b", window, window)
    noise_ok = np.abs(energy - rows * sigma2) <= threshold

    # Cross-term event; rank-2 closed-form spectral radius.
    s_tail = np.empty((y.shape[0], n))
    for k in range(n):
        s_tail[:, k] = np.einsum(
            "bi,bi->b", window, full[:, 2 * n - 2 - k : horizon + n - 2 - k]
        )
    s_head = s_tail @ coeffs
    cross_radius = np.abs(s_head) + np.sqrt(
        s_head ** 2 + np.einsum("bi,bi->b", s_tail, s_tail)
    )
    cross_ok = cross_radius <= threshold

    # Sandwich event, mirroring psd_order_holds semantics per trial.
    mid_scale = np.maximum(np.abs(np.linalg.eigvalsh(normal)).max(axis=1), 1e-300)
    tol = PSD_ORDER_RTOL * mid_scale
    lo_gap = np.linalg.eigvalsh(normal - cert.lower[None]).min(axis=1)
    hi_gap = np.linalg.eigvalsh(cert.upper[None] - normal).min(axis=1)
    sandwich_ok = (lo_gap >= -tol) & (hi_gap >= -tol)

    # Self-normalized event on the regression residual window (e_{n+1} .. e_N).
    resid = noise[:, n:]
    s_sn = np.empty((y.shape[0], n))
    for k in range(n):
        s_sn[:, k] = np.einsum("bi,bi->b", resid, cols[k])
    m_sn = normal + cert.lower[None]
    lhs_sq = np.einsum("bi,bi->b", s_sn, np.linalg.solve(m_sn, s_sn[..., None])[..., 0])
    sign_m, logdet_m = np.linalg.slogdet(m_sn)
    log_argument = 0.5 * (logdet_m - logdet_lower) - cert.log_delta
    sn_ok = (sign_m > 0) & (log_argument > 0.0) & (lhs_sq <= 2.0 * sigma2 * log_argument)

    # Least squares through a batched orthogonal factorisation.
    design = np.stack(cols, axis=2)
    q_fac, r_fac = np.linalg.qr(design)
    r_diag = np.abs(np.diagonal(r_fac, axis1=1, axis2=2))
    errored |= r_diag.min(axis=1) <= 1e-12 * np.maximum(r_diag.max(axis=1), 1e-300)
    if errored.any():
        r_fac = r_fac.copy()
        r_fac[errored] = np.eye(n)
    rhs = np.einsum("bij,bi->bj", q_fac, targets)
    theta = np.linalg.solve(r_fac, rhs[..., None])[..., 0]
    errored |= ~np.isfinite(theta).all(axis=1)

    valid = ~errored
    counts = _BatchCounts(
        evaluated=int(valid.sum()),
        errors=int(errored.sum()),
        boundary_fail=int((~boundary_ok & valid).sum()),
        noise_fail=int((~noise_ok & valid).sum()),
        cross_fail=int((~cross_ok & valid).sum()),
        sandwich_fail=int((~sandwich_ok & valid).sum()),
        sn_fail=int((~sn_ok & valid).sum()),
        chain_sandwich=int((boundary_ok & noise_ok & cross_ok & ~sandwich_ok & valid).sum()),
    )

    dev_fail = []
    chain_dev = []
    for (_, w), radius in zip(config.directions, radii):
        if radius is None:
            # A vacuous radius means delta exceeds the determinant term, which
            # the sandwich event makes incompatible with the self-normalized
            # event holding; both holding anyway is an implication violation.
            dev_fail.append(0)
            chain_dev.append(int((sandwich_ok & sn_ok & valid).sum()))
            continue
        deviation = np.abs((theta - coeffs[None, :]) @ w)
        dev_ok = deviation <= radius
        dev_fail.append(int((~dev_ok & valid).sum()))
        chain_dev.append(int((sandwich_ok & sn_ok & ~dev_ok & valid).sum()))
    counts.dev_fail = tuple(dev_fail)
    counts.chain_dev = tuple(chain_dev)
    return counts


def _frequency_row(name: str, failures: int, evaluated: int, bound: float) -> EventCoverage:
    frequency = failures / evaluated
    stderr = math.sqrt(frequency * (1.0 - frequency) / evaluated)
    if bound >= 1.0:
        verdict = "vacuous"
    elif frequency - 3.0 * stderr > bound:
        verdict = "violated"
    else:
        verdict = "respected"
    return EventCoverage(event=name, bound=bound, failures=failures, evaluated=evaluated,
                         frequency=frequency, stderr=stderr, verdict=verdict)


def run_campaign(config: CampaignConfig) -> CoverageReport:
    """Run the full campaign and aggregate per-event coverage.

    Deterministic given the master seed.  Trials that fail numerically are
    counted and excluded from frequencies; the campaign aborts if more than
    MAX_ERROR_FRACTION of trials error out.
    """
    process = config.process
    ss = build_companion(process)
    stats = stationary_stats(ss, process.noise_variance)
    inputs = BoundInputs(process=process, stats=stats,
                         epsilon=config.epsilon, horizon=config.horizon)
    cert = covariance_certificate(inputs)
    if not cert.feasible:
        raise ConfigError(
            "epsilon: infeasible (the lower sandwich matrix is not positive definite); "
            "choose epsilon below the feasibility ceiling"
        )
    if cert.delta >= 1.0 and not config.allow_vacuous:
        raise ConfigError(
            f"epsilon/horizon: the failure bound delta = {cert.delta:.4g} is vacuous (>= 1); "
            "pass allow_vacuous to run anyway"
        )

    dev_certs = [deviation_radius(cert, w, process.noise_variance)
                 for _, w in config.directions]
    radii = [dc.radius for dc in dev_certs]
    factor = symmetric_sqrt(stats.state_covariance)
    _, logdet_lower = np.linalg.slogdet(cert.lower)

    batches = [(lo, min(lo + config.batch_size, config.trials))
               for lo in range(0, config.trials, config.batch_size)]

    def work(bounds: tuple[int, int]) -> _BatchCounts:
        return _run_batch(config, ss, inputs, cert, factor, radii,
                          float(logdet_lower), bounds[0], bounds[1])

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            partials = list(pool.map(work, batches))
    else:
        partials = [work(b) for b in batches]

    evaluated = sum(p.evaluated for p in partials)
    errors = sum(p.errors for p in partials)
    if errors > MAX_ERROR_FRACTION * config.trials:
        raise ConfigError(
            f"{errors} of {config.trials} trials failed numerically "
            f"(limit {MAX_ERROR_FRACTION:.1%})"
        )

    events = [
        _frequency_row("boundary", sum(p.boundary_fail for p in partials),
                       evaluated, cert.failure_terms[0]),
        _frequency_row("noise_energy", sum(p.noise_fail for p in partials),
                       evaluated, cert.failure_terms[1]),
        _frequency_row("cross_term", sum(p.cross_fail for p in partials),
                       evaluated, cert.failure_terms[2] + cert.failure_terms[3]),
        _frequency_row("sandwich", sum(p.sandwich_fail for p in partials),
                       evaluated, cert.delta),
        _frequency_row("self_normalized", sum(p.sn_fail for p in partials),
                       evaluated, cert.delta),
    ]
    deviation_chain: dict[str, int] = {}
    for idx, ((label, _), dev_cert) in enumerate(zip(config.directions, dev_certs)):
        name = f"deviation:{label}"
        if dev_cert.vacuous:
            events.append(EventCoverage(event=name, bound=dev_cert.total_failure,
                                        failures=None, evaluated=evaluated,
                                        frequency=None, stderr=None, verdict="vacuous"))
        else:
            events.append(_frequency_row(name, sum(p.dev_fail[idx] for p in partials),
                                         evaluated, dev_cert.total_failure))
        deviation_chain[label] = sum(p.chain_dev[idx] for p in partials)

    return CoverageReport(
        trials=config.trials,
        master_seed=config.master_seed,
        horizon=config.horizon,
        epsilon=config.epsilon,
        process=process.to_dict(),
        events=tuple(events),
        sandwich_chain_violations=sum(p.chain_sandwich for p in partials),
        deviation_chain_violations=deviation_chain,
        trial_errors=errors,
    )

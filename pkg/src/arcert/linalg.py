"""Dense matrix primitives: discrete Lyapunov solves, spectral radius, PSD ordering.

Everything here operates on plain numpy arrays and is pure, so all functions
are safe for concurrent use.
"""

import numpy as np

from .errors import ConvergenceError, StabilityError

#: Default relative residual tolerance for Lyapunov solutions.
LYAPUNOV_TOL = 1e-10

#: Default relative slack when testing positive-semidefinite ordering.
PSD_ORDER_RTOL = 1e-8


def _require_square(m: np.ndarray, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")


def spectral_radius(m) -> float:
    """Largest eigenvalue modulus of a square matrix."""
    m = np.asarray(m, dtype=float)
    _require_square(m, "m")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def solve_discrete_lyapunov(a, q, tol: float = LYAPUNOV_TOL, max_doublings: int = 100) -> np.ndarray:
    """Solve X = A X A^T + Q for symmetric PSD Q and rho(A) < 1.

    Uses the squared Smith iteration: starting from X_0 = Q,
    X_{k+1} = X_k + A_k X_k A_k^T with A_{k+1} = A_k^2, so that X_k equals
    the partial series sum_{i<2^k} A^i Q (A^T)^i.  Convergence is quadratic
    for any rho(A) < 1.

    Raises StabilityError when rho(A) >= 1 and ConvergenceError when the
    final relative residual exceeds ``tol``.
    """
    a = np.asarray(a, dtype=float)
    q = np.asarray(q, dtype=float)
    _require_square(a, "a")
    if q.shape != a.shape:
        raise ValueError(f"q must match a in shape, got {q.shape} vs {a.shape}")
    if not np.allclose(q, q.T, atol=1e-12 * max(1.0, float(np.abs(q).max(initial=0.0)))):
        raise ValueError("q must be symmetric")
    rho = spectral_radius(a)
    if rho >= 1.0:
        raise StabilityError(f"spectral radius {rho:.6g} >= 1; Lyapunov series diverges")

    x = q.copy()
    apow = a.copy()
    for _ in range(max_doublings):
        update = apow @ x @ apow.T
        x = x + update
        if np.linalg.norm(update) <= 1e-16 * max(np.linalg.norm(x), 1e-300):
            break
        apow = apow @ apow
    x = 0.5 * (x + x.T)

    scale = max(np.linalg.norm(x), np.linalg.norm(q), 1e-300)
    residual = np.linalg.norm(x - a @ x @ a.T - q) / scale
    if residual > tol:
        raise ConvergenceError(
            f"Lyapunov residual {residual:.3e} above tolerance {tol:.1e} "
            f"(rho(A) = {rho:.12g})"
        )
    return x


def psd_order_holds(lower, middle, upper, rtol: float = PSD_ORDER_RTOL) -> bool:
    """True iff lower <= middle <= upper in the PSD order, up to a relative slack.

    The slack is ``rtol`` times the spectral norm of ``middle``, so exact
    boundary cases (equal matrices) pass.
    """
    lower = np.asarray(lower, dtype=float)
    middle = np.asarray(middle, dtype=float)
    upper = np.asarray(upper, dtype=float)
    for name, m in (("lower", lower), ("middle", middle), ("upper", upper)):
        _require_square(m, name)
    if lower.shape != middle.shape or upper.shape != middle.shape:
        raise ValueError("psd_order_holds requires matrices of identical shape")

    tol = rtol * max(float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (middle + middle.T))))), 1e-300)
    lo_gap = float(np.min(np.linalg.eigvalsh(0.5 * ((middle - lower) + (middle - lower).T))))
    hi_gap = float(np.min(np.linalg.eigvalsh(0.5 * ((upper - middle) + (upper - middle).T))))
    return lo_gap >= -tol and hi_gap >= -tol


def symmetric_sqrt(m, clip_rtol: float = 1e-12) -> np.ndarray:
    """Symmetric square root of a symmetric PSD matrix via eigendecomposition.

    Eigenvalues within ``clip_rtol`` of zero (relative to the largest) are
    clipped to zero; genuinely negative eigenvalues raise ValueError.
    """
    m = np.asarray(m, dtype=float)
    _require_square(m, "m")
    lam, u = np.linalg.eigh(0.5 * (m + m.T))
    floor = -clip_rtol * max(float(lam[-1]), 1e-300)
    if lam[0] < floor:
        raise ValueError(f"matrix is not PSD: smallest eigenvalue {lam[0]:.3e}")
    return (u * np.sqrt(np.clip(lam, 0.0, None))) @ u.T

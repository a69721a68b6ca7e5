"""SVM dual solver for a fixed kernel matrix.

Solves

    max_a  sum(a) - 1/2 a^T Q a,   Q_ij = y_i y_j K_ij
    s.t.   sum(a * y) = 0,  0 <= a_i <= C

with two-variable working-set updates (maximal-violating pair for the first
index, second-order gain for the second).  The primal weight vector is never
formed; callers work with the dual expansion ``f(x) = sum_j a_j y_j K(x_j, x) + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, InputError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

DEFAULT_TOL = 1e-4
SUPPORT_THRESHOLD = 1e-8
MAX_PAIR_UPDATES = 100_000
_TAU = 1e-12


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    bias: float
    objective: float
    support_indices: np.ndarray
    converged: bool = True
    iterations: int = 0
    kkt_gap: float = 0.0
    # set when no bias can be read off the KKT conditions (all alpha zero)
    bias_degenerate: bool = False
    # decision values without the bias, sum_j a_j y_j K_ij
    margins: np.ndarray = field(default=None, repr=False)

    def decision_values(self):
        """``f(x_i)`` on the training points."""
        return self.margins + self.bias


@njit(cache=True)
def _smo(Q, y, C, alpha, G, tol, max_iter):
    n = y.shape[0]
    it = 0
    gap = np.inf
    while it < max_iter:
        # i: maximal violator in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                if i >= 0 and v < gmax:
                    b = gmax - v
                    a = Q[i, i] + Q[t, t] - 2.0 * y[i] * y[t] * Q[i, t]
                    if a <= 0:
                        a = _TAU
                    score = -(b * b) / a
                    if score < best:
                        best = score
                        j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            return it, gap, True
        it += 1

        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            s = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if s > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = s - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = s
            if s > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = s - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = s

        di = alpha[i] - ai_old
        dj = alpha[j] - aj_old
        for t in range(n):
            G[t] += Q[t, i] * di + Q[t, j] * dj
    return it, gap, False


def _validate(K, y, C):
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"kernel matrix must be square, got shape {K.shape}")
    if K.shape[0] != y.size:
        raise DimensionError(f"kernel is {K.shape[0]}x{K.shape[0]} but {y.size} labels given")
    if not np.all(np.isfinite(K)):
        raise DomainError("kernel matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(K)))) if K.size else 1.0
    if not np.allclose(K, K.T, rtol=0.0, atol=1e-10 * scale):
        raise DomainError("kernel matrix is not symmetric")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DomainError("labels must be -1 or +1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InputError("both classes must be present")
    if not C >= 0 or not np.isfinite(C):
        raise DomainError(f"C must be a non-negative finite number, got {C}")
    return 0.5 * (K + K.T), y


def dual_objective(alpha, K, y) -> float:
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ np.asarray(K, dtype=float) @ ay)


def compute_bias(alpha, K, y, C, margins=None, threshold=SUPPORT_THRESHOLD):
    """Return ``(b, degenerate)``.

    Free support vectors pin ``b`` directly and are averaged.  Without free
    vectors the bound ones only bracket ``b``; the midpoint of the bracket is
    used.  An all-zero ``alpha`` has no valid bracket, so ``b`` is set to
    +/-1 following the larger class and the result is flagged.
    """
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    if margins is None:
        margins = np.asarray(K, dtype=float) @ (alpha * y)
    resid = y - margins
    if not np.any(alpha > threshold):
        n_pos = int(np.sum(y > 0))
        return (1.0 if n_pos >= y.size - n_pos else -1.0), True
    free = (alpha > threshold) & (alpha < C - threshold)
    if np.any(free):
        return float(np.mean(resid[free])), False
    at_zero = alpha <= threshold
    # alpha = 0 wants y f >= 1, alpha = C wants y f <= 1
    lower_mask = (at_zero & (y > 0)) | (~at_zero & (y < 0))
    upper_mask = (at_zero & (y < 0)) | (~at_zero & (y > 0))
    lo = float(np.max(resid[lower_mask])) if np.any(lower_mask) else None
    hi = float(np.min(resid[upper_mask])) if np.any(upper_mask) else None
    if lo is None:
        return hi, False
    if hi is None:
        return lo, False
    return 0.5 * (lo + hi), False


def solve_dual(K, y, C=1.0, tol=DEFAULT_TOL, alpha0=None, max_iter=MAX_PAIR_UPDATES,
               support_threshold=SUPPORT_THRESHOLD) -> DualSolution:
    """Solve the box- and equality-constrained SVM dual on kernel matrix ``K``.

    ``alpha0`` warm-starts the solver; it is clipped to the box and dropped
    if it violates the equality constraint.  Hitting ``max_iter`` returns the
    last feasible iterate with ``converged=False``.
    """
    K, y = _validate(K, y, C)
    C = float(C)
    n = y.size
    alpha = np.zeros(n)
    if alpha0 is not None:
        a0 = np.clip(np.asarray(alpha0, dtype=float).ravel(), 0.0, C)
        if a0.size == n and abs(a0 @ y) <= 1e-12 * max(1.0, C * n):
            alpha = a0.copy()
    Q = (y[:, None] * y[None, :]) * K
    G = Q @ alpha - 1.0
    if C == 0.0:
        iters, gap, ok = 0, 0.0, True
    else:
        iters, gap, ok = _smo(Q, y, C, alpha, G, float(tol), int(max_iter))
    margins = K @ (alpha * y)
    bias, degenerate = compute_bias(alpha, K, y, C, margins, support_threshold)
    objective = float(alpha.sum() - 0.5 * (alpha * y) @ margins)
    alpha.setflags(write=False)
    margins.setflags(write=False)
    return DualSolution(
        alpha=alpha,
        bias=float(bias),
        objective=objective,
        support_indices=np.flatnonzero(alpha > support_threshold),
        converged=bool(ok),
        iterations=int(iters),
        kkt_gap=float(gap),
        bias_degenerate=degenerate,
        margins=margins,
    )

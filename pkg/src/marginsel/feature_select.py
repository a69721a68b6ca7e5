"""Bin weighting for additive-kernel SVMs by maximizing the normalized margin.

The margin is normalized by the same-class scatter of the weighted feature
map.  For an additive kernel that scatter is linear in the bin weights,
``sum_k a_k p_k``, so fixing it to one turns weight learning into an
MKL-style problem over the simplex ``{p >= 0, sum_k a_k p_k = 1}``.  The
outer loop here is a reduced-gradient descent on the optimal dual value
``J(p)``; each evaluation of ``J`` is a dual SVM solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import DimensionError, InputError, SolverError
from .kernels import KernelKind
from .qp import solve_dual

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SELECT_REL_THRESHOLD = 1e-6
# scatter below this fraction of the largest bin's is treated as zero
ACTIVE_REL_THRESHOLD = 1e-12


@dataclass(frozen=True)
class FeatureSelectOptions:
    tol: float = 1e-6
    step_tol: float = 1e-5
    max_outer: int = 200
    line_search_iters: int = 20
    max_qp_iter: int = 100_000


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: float
    step: float
    n_selected: int


@dataclass(frozen=True)
class FeatureSelectModel:
    kind: KernelKind
    p: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    bias: float
    train_X: np.ndarray
    train_y: np.ndarray
    C: float = 1.0
    trace: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def history(self):
        return [rec.objective for rec in self.trace]

    @property
    def objective(self):
        return self.trace[-1].objective if self.trace else float("nan")

    @property
    def dim(self):
        return self.p.size

    def n_selected(self, rel=SELECT_REL_THRESHOLD):
        return n_selected(self.p, rel)

    def support(self):
        """Copy of the model keeping only training points with nonzero alpha."""
        keep = self.alpha != 0
        return replace(self, alpha=self.alpha[keep], train_X=self.train_X[keep],
                       train_y=self.train_y[keep])


def n_selected(p, rel=SELECT_REL_THRESHOLD):
    p = np.asarray(p)
    top = p.max() if p.size else 0.0
    if top <= 0:
        return 0
    return int(np.sum(p > rel * top))


def _check_labels(y, n):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != n:
        raise DimensionError(f"{n} samples but {y.size} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InputError("labels must be -1 or +1")
    return y


def compute_bin_scatter(X, y, kind) -> np.ndarray:
    """Per-bin same-class scatter in the kernel feature space.

    ``a_k = sum_{i,j: y_i = y_j} kappa(x_ik, x_ik) - 2 kappa(x_ik, x_jk) + kappa(x_jk, x_jk)``
    over ordered pairs.
    """
    X = kernels.as_histograms(X)
    y = _check_labels(y, X.shape[0])
    a = np.zeros(X.shape[1])
    for label in (-1.0, 1.0):
        Xc = X[y == label]
        m = Xc.shape[0]
        if m == 0:
            continue
        diag = kernels.bin_kernel(kind, Xc, Xc).sum(axis=0)
        total = kernels.per_bin_grams(kind, Xc).sum(axis=(1, 2))
        a += 2.0 * m * diag - 2.0 * total
    return np.maximum(a, 0.0)


def active_bins(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    top = a.max() if a.size else 0.0
    return a > ACTIVE_REL_THRESHOLD * top if top > 0 else np.zeros(a.shape, bool)


def init_weights(a) -> np.ndarray:
    """Uniform start ``p_k = 1 / sum(a)`` on bins with nonzero scatter."""
    a = np.asarray(a, dtype=float)
    active = active_bins(a)
    if not np.any(active):
        raise InputError("no discriminable bins: every bin has zero same-class scatter")
    p = np.zeros_like(a)
    p[active] = 1.0 / a[active].sum()
    return p


def combine(p, per_bin) -> np.ndarray:
    idx = np.flatnonzero(p)
    return np.tensordot(p[idx], per_bin[idx], axes=1)


def grad_J_p(alpha, y, per_bin) -> np.ndarray:
    """``dJ/dp_k = -1/2 (alpha*y)^T G_k (alpha*y)`` for each per-bin Gram ``G_k``."""
    ay = np.asarray(alpha, dtype=float) * np.asarray(y, dtype=float)
    return -0.5 * np.einsum("i,kij,j->k", ay, per_bin, ay)


def reduced_gradient_direction(grad, p, a):
    """Reduced gradient and feasible descent direction on ``sum a_k p_k = 1``.

    The pivot is the largest weight (first index on ties).  Components that
    would push a zero weight negative are zeroed, and the pivot takes up the
    slack so that ``sum_k a_k r_k = 0`` holds exactly.  Bins with zero
    scatter never move.
    """
    grad = np.asarray(grad, dtype=float)
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    if not (grad.shape == p.shape == a.shape):
        raise DimensionError("gradient, weights and scatter must have equal length")
    active = active_bins(a)
    if not np.any(active):
        raise InputError("no active bins")
    mu = int(np.argmax(np.where(active, p, -np.inf)))
    ratio = np.where(active, a / a[mu], 0.0)
    redgrad = grad - ratio * grad[mu]
    others = active.copy()
    others[mu] = False
    redgrad[mu] = np.sum(ratio[others] ** 2 * grad[mu] - ratio[others] * grad[others])
    redgrad[~active] = 0.0

    r = np.where(others, -redgrad, 0.0)
    r[(p <= 0) & (redgrad > 0)] = 0.0
    r[mu] = -np.dot(ratio[others], r[others])
    return redgrad, r


def max_step(p, r) -> float:
    neg = r < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(p[neg] / -r[neg]))


def advance(p, r, gamma, gamma_max=None, a=None):
    """``p + gamma r`` kept exactly on the constraint set.

    At ``gamma == gamma_max`` the blocking coordinates are set to zero.  With
    ``a`` given the result is rescaled so that ``sum a_k p_k = 1``.
    """
    q = p + gamma * r
    if gamma_max is not None and gamma == gamma_max and np.isfinite(gamma_max):
        neg = r < 0
        ratios = np.full(p.shape, np.inf)
        ratios[neg] = p[neg] / -r[neg]
        q[ratios <= gamma_max * (1 + 1e-12)] = 0.0
    q = np.maximum(q, 0.0)
    if a is not None:
        total = np.dot(a, q)
        if total > 0:
            q = q / total
    return q


def _golden(f, lo, hi, f_lo, iters):
    """Golden-section probes on ``[lo, hi]``; returns every (x, f(x)) seen."""
    seen = [(lo, f_lo)]
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    seen += [(x1, f1), (x2, f2)]
    for _ in range(max(iters - 2, 0)):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
            seen.append((x1, f1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
            seen.append((x2, f2))
    return seen


def line_search(J_at, p, r, a=None, J0=None, max_iter=20, initial_step=None) -> float:
    """Step size along ``r`` that does not increase ``J``.

    Bounded case: the far end ``gamma_max`` is probed first, then golden
    section on ``[0, gamma_max]``.  If ``r`` never hits the boundary the
    interval is first bracketed by doubling.  The best probe wins; if none
    beats ``J(p)`` the step is 0.
    """
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    if not np.any(r):
        return 0.0
    gmax = max_step(p, r)

    def f(gamma):
        return J_at(advance(p, r, gamma, gmax, a))

    if J0 is None:
        J0 = J_at(p)
    if np.isfinite(gmax):
        if gmax <= 0:
            return 0.0
        seen = [(gmax, f(gmax))]
        seen += _golden(f, 0.0, gmax, J0, max_iter)
    else:
        step = initial_step or 1.0 / np.max(np.abs(r))
        seen = [(0.0, J0)]
        lo, prev = 0.0, J0
        for _ in range(max_iter):
            val = f(step)
            seen.append((step, val))
            if val > prev:
                break
            lo, prev = seen[-2][0], val
            step *= 2.0
        seen += _golden(f, lo, step, f(lo) if lo > 0 else J0, max_iter)
    gamma, best = min(seen, key=lambda t: (t[1], -t[0]))
    if not best < J0:
        return 0.0
    return float(gamma)


def optimize_bin_weights(per_bin, y, a, C=1.0, opts=None, p0=None, callback=None):
    """Reduced-gradient descent of ``J(p)`` on ``{p >= 0, a.p = 1}``.

    Returns ``(p, solution, trace)`` where ``solution`` is the dual solve at
    the final ``p``.  ``callback(iteration, p, solution)`` sees every iterate,
    the starting point included.
    """
    opts = opts or FeatureSelectOptions()
    per_bin = np.asarray(per_bin, dtype=float)
    a = np.asarray(a, dtype=float)
    y = _check_labels(y, per_bin.shape[1])
    p = init_weights(a) if p0 is None else np.asarray(p0, dtype=float)

    def solve(q, alpha0, where):
        sol = solve_dual(combine(q, per_bin), y, C, tol=opts.tol, alpha0=alpha0,
                         max_iter=opts.max_qp_iter)
        if not sol.converged:
            raise SolverError(f"dual solve did not converge ({sol.iterations} pair updates, "
                              f"KKT gap {sol.kkt_gap:.3g}) {where}")
        return sol

    sol = solve(p, None, "at the initial weights")
    trace = [IterationRecord(0, sol.objective, 0.0, n_selected(p))]
    if callback:
        callback(0, p, sol)
    for it in range(1, opts.max_outer + 1):
        g = grad_J_p(sol.alpha, y, per_bin)
        _, r = reduced_gradient_direction(g, p, a)
        if not np.any(r):
            break
        cache = {}

        def J_at(q, _alpha=sol.alpha, _it=it):
            key = q.tobytes()
            if key not in cache:
                cache[key] = solve(q, _alpha, f"in the line search of outer iteration {_it}")
            return cache[key].objective

        gamma = line_search(J_at, p, r, a, J0=sol.objective, max_iter=opts.line_search_iters)
        if gamma == 0.0:
            break
        gmax = max_step(p, r)
        p_new = advance(p, r, gamma, gmax, a)
        sol = cache[p_new.tobytes()]
        step = float(np.max(np.abs(p_new - p)))
        hit_boundary = gamma == gmax
        scale = float(np.max(p))
        p = p_new
        trace.append(IterationRecord(it, sol.objective, step, n_selected(p)))
        if callback:
            callback(it, p, sol)
        # relative to the weight scale, which is 1/sum(a) and data dependent
        if step < opts.step_tol * scale and not hit_boundary:
            break
    return p, sol, trace


def train_feature_selection(X, y, kind=KernelKind.CHI2, C=1.0, opts=None,
                            callback=None) -> FeatureSelectModel:
    kind = KernelKind.parse(kind)
    X = kernels.as_histograms(X)
    y = _check_labels(y, X.shape[0])
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InputError("both classes must be present")
    opts = opts or FeatureSelectOptions()
    a = compute_bin_scatter(X, y, kind)
    per_bin = kernels.per_bin_grams(kind, X)
    p, sol, trace = optimize_bin_weights(per_bin, y, a, C, opts, callback=callback)
    return FeatureSelectModel(
        kind=kind, p=p, a=a, alpha=np.array(sol.alpha), bias=sol.bias,
        train_X=X, train_y=y, C=float(C), trace=tuple(trace),
        meta={"converged_outer": len(trace) - 1 < opts.max_outer,
              "bias_degenerate": sol.bias_degenerate},
    )


def predict_fs(model: FeatureSelectModel, z):
    """``f(z) = sum_i y_i alpha_i sum_k p_k kappa(z_k, x_ik) + b``.

    Returns a float for a single histogram, an array for a 2-D batch.
    """
    z_arr = np.asarray(z, dtype=float)
    single = z_arr.ndim == 1
    Z = kernels.as_histograms(z_arr)
    if Z.shape[1] != model.dim:
        raise DimensionError(f"model expects {model.dim} bins, got {Z.shape[1]}")
    keep = model.alpha != 0
    coef = model.alpha[keep] * model.train_y[keep]
    if coef.size:
        scores = kernels.weighted_gram(model.kind, model.p, Z, model.train_X[keep]) @ coef
    else:
        scores = np.zeros(Z.shape[0])
    scores = scores + model.bias
    return float(scores[0]) if single else scores

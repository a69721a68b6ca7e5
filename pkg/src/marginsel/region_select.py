"""Weakly-supervised region selection over bags of instance histograms.

A positive bag is represented by a convex combination ``sum_k s_ik phi(h_ik)``
of its instances' feature maps; every instance of a negative bag becomes its
own singleton bag that must score negative.  The per-bag weights ``s_i`` live
on probability simplices and are learned by reduced-gradient steps on the
optimal dual value, alternating with dual SVM solves on the bag-level kernel
``K_ij = s_i^T Kblock(i, j) s_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .data import Bag
from .errors import DimensionError, InputError, SolverError
from .feature_select import advance, line_search, max_step, reduced_gradient_direction
from .kernels import BlockGram, KernelKind
from .qp import solve_dual

__all__ = [
    "Bag", "RegionSelectOptions", "RegionSelectModel", "expand_negative_bags",
    "grad_J_s", "bag_descent_direction", "train_region_selection",
    "score_instance", "score_bag",
]


@dataclass(frozen=True)
class RegionSelectOptions:
    tol: float = 1e-6
    step_tol: float = 1e-5
    max_outer: int = 200
    line_search_iters: int = 20
    max_qp_iter: int = 100_000


@dataclass(frozen=True)
class RegionIteration:
    iteration: int
    objective: float
    step: float
    n_active: int


@dataclass(frozen=True)
class RegionSelectModel:
    kind: KernelKind
    bags: tuple
    s: tuple
    alpha: np.ndarray
    bias: float
    C: float = 1.0
    # learned weights for every positive training bag, including non-support ones
    bag_weights: dict = field(default_factory=dict)
    trace: tuple = ()
    provenance: tuple = ()

    @property
    def labels(self):
        return np.array([b.label for b in self.bags], dtype=float)

    @property
    def history(self):
        return [rec.objective for rec in self.trace]

    @property
    def objective(self):
        return self.trace[-1].objective if self.trace else float("nan")

    @property
    def dim(self):
        return self.bags[0].instances.shape[1]

    def support(self):
        keep = [i for i, a in enumerate(self.alpha) if a != 0]
        return replace(self, bags=tuple(self.bags[i] for i in keep),
                       s=tuple(self.s[i] for i in keep), alpha=self.alpha[keep],
                       provenance=())


def expand_negative_bags(bags):
    """Split negative bags into singleton bags, one per instance.

    Returns ``(effective_bags, labels, provenance)``; ``provenance[t]`` is
    ``(original_bag_index, instance_index)`` with ``None`` as the instance
    index for positive bags passed through whole.
    """
    eff, labels, prov = [], [], []
    for i, bag in enumerate(bags):
        if bag.label > 0:
            eff.append(bag)
            labels.append(1.0)
            prov.append((i, None))
            continue
        for k in range(bag.size):
            truth = None if bag.truth is None else (bag.truth[k],)
            inst = bag.instances[k:k + 1]
            eff_id = bag.bag_id if bag.size == 1 else f"{bag.bag_id}#{k}"
            eff.append(Bag(eff_id, -1, inst, truth))
            labels.append(-1.0)
            prov.append((i, k))
    return eff, np.array(labels), prov


def grad_J_s(alpha, y, s, blockK: BlockGram):
    """``dJ/ds_ik = -alpha_i y_i sum_j alpha_j y_j (Kblock(i, j) s_j)_k``.

    This is the exact derivative of the optimal dual value; ``s_i`` enters
    ``K`` on both sides, which doubles the one-sided ``-1/2`` factor.
    """
    alpha = np.asarray(alpha, dtype=float)
    ay = alpha * np.asarray(y, dtype=float)
    S = kernels.mixing_matrix(s, blockK.sizes)
    u = blockK.full @ (S.T @ ay)
    return [-ay[i] * u[blockK.bag_slice(i)] for i in range(blockK.n_bags)]


def bag_descent_direction(grad_i, s_i):
    s_i = np.asarray(s_i, dtype=float)
    if s_i.size == 1:
        return np.zeros(1)
    _, r = reduced_gradient_direction(grad_i, s_i, np.ones_like(s_i))
    return r


def _validate_bags(bags):
    bags = list(bags)
    if not bags:
        raise InputError("no bags given")
    dims = {b.instances.shape[1] for b in bags}
    if len(dims) != 1:
        raise DimensionError(f"instances have inconsistent dimensions {sorted(dims)}")
    if any(b.size == 0 for b in bags):
        raise InputError("every bag needs at least one instance")
    labels = {b.label for b in bags}
    if labels != {-1, 1}:
        raise InputError("training needs at least one positive and one negative bag")
    return bags


def train_region_selection(bags, kind=KernelKind.CHI2, C=1.0, opts=None,
                           callback=None) -> RegionSelectModel:
    """Alternate dual solves with per-bag reduced-gradient steps on ``s``.

    Bags are stepped in order within an outer iteration, each with its own
    line search while the others stay fixed.  ``callback(iteration, s,
    solution)`` is called at the start and after every accepted bag step.
    """
    opts = opts or RegionSelectOptions()
    kind = KernelKind.parse(kind)
    bags = _validate_bags(bags)
    eff, y, prov = expand_negative_bags(bags)
    blockK = kernels.block_gram(kind, [b.instances for b in eff])
    s = [np.full(b.size, 1.0 / b.size) for b in eff]

    def solve(K, alpha0, where):
        sol = solve_dual(K, y, C, tol=opts.tol, alpha0=alpha0, max_iter=opts.max_qp_iter)
        if not sol.converged:
            raise SolverError(f"dual solve did not converge ({sol.iterations} pair updates, "
                              f"KKT gap {sol.kkt_gap:.3g}) {where}")
        return sol

    K = kernels.bag_gram(blockK, s)
    sol = solve(K, None, "at the uniform initial weights")
    movable = [i for i, b in enumerate(eff) if b.label > 0 and b.size > 1]
    trace = [RegionIteration(0, sol.objective, 0.0, _n_active(s, movable))]
    if callback:
        callback(0, s, sol)

    for it in range(1, opts.max_outer + 1):
        grads = grad_J_s(sol.alpha, y, s, blockK)
        directions = {i: bag_descent_direction(grads[i], s[i]) for i in movable}
        step, moved, hit_boundary = 0.0, False, False
        for i in movable:
            r = directions[i]
            if not np.any(r):
                continue
            sl = blockK.bag_slice(i)
            S = kernels.mixing_matrix(s, blockK.sizes)
            cross = blockK.full[sl] @ S.T        # m_i x n, column i stale
            own = blockK.block(i, i)
            cache = {}

            def K_for(q, _cross=cross, _own=own, _i=i, _K=K):
                row = q @ _cross
                row[_i] = q @ _own @ q
                Kq = _K.copy()
                Kq[_i, :] = row
                Kq[:, _i] = row
                return Kq

            def J_at(q, _K_for=K_for, _alpha=sol.alpha, _it=it, _i=i, _cache=cache):
                key = q.tobytes()
                if key not in _cache:
                    Kq = _K_for(q)
                    _cache[key] = (Kq, solve(Kq, _alpha, f"for bag {_i} in outer iteration {_it}"))
                return _cache[key][1].objective

            gamma = line_search(J_at, s[i], r, np.ones_like(r), J0=sol.objective,
                                max_iter=opts.line_search_iters)
            if gamma == 0.0:
                continue
            gmax = max_step(s[i], r)
            q = advance(s[i], r, gamma, gmax, np.ones_like(r))
            K, sol = cache[q.tobytes()]
            step = max(step, float(np.max(np.abs(q - s[i]))))
            hit_boundary |= gamma == gmax
            s[i] = q
            moved = True
            if callback:
                callback(it, s, sol)
        if not moved:
            break
        trace.append(RegionIteration(it, sol.objective, step, _n_active(s, movable)))
        if step < opts.step_tol and not hit_boundary:
            break

    weights = {eff[i].bag_id: s[i].copy() for i in range(len(eff)) if eff[i].label > 0}
    return RegionSelectModel(
        kind=kind, bags=tuple(eff), s=tuple(s), alpha=np.array(sol.alpha), bias=sol.bias,
        C=float(C), bag_weights=weights, trace=tuple(trace), provenance=tuple(prov),
    )


def _n_active(s, idx, rel=1e-6):
    """Instances with non-negligible weight, summed over the movable bags."""
    return int(sum(np.sum(s[i] > rel * s[i].max()) for i in idx))


def score_instance(model: RegionSelectModel, h):
    """Decision value ``sum_j alpha_j y_j sum_l s_jl K(h, h_jl) + b``.

    ``h`` may be a single histogram (returns a float) or a 2-D batch.
    """
    h_arr = np.asarray(h, dtype=float)
    single = h_arr.ndim == 1
    H = kernels.as_histograms(h_arr, "instance")
    if H.shape[1] != model.dim:
        raise DimensionError(f"model expects {model.dim} bins, got {H.shape[1]}")
    keep = [i for i, a in enumerate(model.alpha) if a != 0]
    scores = np.full(H.shape[0], model.bias)
    if keep:
        inst = np.vstack([model.bags[i].instances for i in keep])
        coef = np.concatenate([model.alpha[i] * model.bags[i].label * np.asarray(model.s[i])
                               for i in keep])
        scores = scores + kernels.gram(model.kind, H, inst) @ coef
    return float(scores[0]) if single else scores


BAG_MODES = ("mean", "max", "weighted")


def score_bag(model: RegionSelectModel, bag: Bag, mode="mean") -> float:
    """Aggregate instance scores into a bag score.

    ``weighted`` uses the learned ``s`` and so only applies to positive
    training bags; unseen bags should use ``mean`` (the default) or ``max``.
    """
    if mode not in BAG_MODES:
        raise InputError(f"unknown bag scoring mode {mode!r}; choose from {BAG_MODES}")
    scores = np.atleast_1d(score_instance(model, bag.instances))
    if mode == "mean":
        return float(np.mean(scores))
    if mode == "max":
        return float(np.max(scores))
    w = model.bag_weights.get(bag.bag_id)
    if w is None:
        raise InputError(f"no learned weights for bag {bag.bag_id!r}; weighted scoring only "
                         "applies to positive training bags, use mode 'mean' or 'max'")
    if len(w) != scores.size:
        raise DimensionError(f"bag {bag.bag_id!r} has {scores.size} instances, "
                             f"stored weights have {len(w)}")
    return float(np.dot(w, scores))

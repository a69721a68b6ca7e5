"""Additive per-bin kernels and the Gram matrices built from them.

An additive kernel on histograms is ``K(x, z) = sum_k kappa(x_k, z_k)``.  The
weighted form ``sum_k p_k kappa(x_k, z_k)`` is what feature selection learns;
region selection uses the unweighted form between instances and then mixes
instances inside a bag with per-bag weights.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, InputError


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    CHI2 = "chi2"
    INTERSECTION = "intersection"

    @classmethod
    def parse(cls, value) -> "KernelKind":
        if isinstance(value, cls):
            return value
        aliases = {"chisquare": "chi2", "chi-square": "chi2", "chi_square": "chi2",
                   "min": "intersection", "hik": "intersection"}
        key = str(value).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise DomainError(f"unknown kernel kind {value!r}") from None


def _check_nonnegative(arr, what="histogram"):
    if np.any(arr < 0):
        raise DomainError(f"{what} values must be non-negative")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} values must be finite")


def bin_kernel(kind, a, b):
    """Elementwise per-bin kernel with numpy broadcasting (no validation)."""
    kind = KernelKind.parse(kind)
    if kind is KernelKind.LINEAR:
        return a * b
    if kind is KernelKind.INTERSECTION:
        return np.minimum(a, b)
    num, den = np.broadcast_arrays(2.0 * a * b, a + b)
    out = np.zeros(num.shape, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def kappa(kind, a: float, b: float) -> float:
    """Per-bin kernel value on two non-negative scalars."""
    if a < 0 or b < 0:
        raise DomainError(f"per-bin kernel needs non-negative inputs, got {a}, {b}")
    return float(bin_kernel(kind, np.float64(a), np.float64(b)))


def as_histograms(X, what="histogram") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError(f"{what} array must be 2-D with at least one bin, got shape {X.shape}")
    _check_nonnegative(X, what)
    return X


def combined_kernel(kind, p, x, z) -> float:
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (p.shape == x.shape == z.shape) or p.ndim != 1:
        raise DimensionError(f"length mismatch: p{p.shape}, x{x.shape}, z{z.shape}")
    _check_nonnegative(x)
    _check_nonnegative(z)
    if np.any(p < 0):
        raise DomainError("bin weights must be non-negative")
    return float(np.dot(p, bin_kernel(kind, x, z)))


def per_bin_grams(kind, X) -> np.ndarray:
    """Stack of per-bin Gram matrices, shape ``(D, n, n)``.

    ``G[k, i, j] = kappa(X[i, k], X[j, k])``.
    """
    X = as_histograms(X)
    cols = X.T
    return bin_kernel(kind, cols[:, :, None], cols[:, None, :])


def weighted_gram(kind, p, X, Z=None, chunk=64) -> np.ndarray:
    """``sum_k p_k kappa(X[i, k], Z[j, k])`` for all pairs.

    Bins with zero weight are skipped; the remaining bins are processed in
    chunks so the intermediate stays ``chunk * n * m``.
    """
    X = as_histograms(X)
    Z = X if Z is None else as_histograms(Z)
    if X.shape[1] != Z.shape[1]:
        raise DimensionError(f"dimension mismatch: {X.shape[1]} vs {Z.shape[1]}")
    if p is None:
        p = np.ones(X.shape[1])
    p = np.asarray(p, dtype=float)
    if p.shape != (X.shape[1],):
        raise DimensionError(f"weight vector has length {p.size}, expected {X.shape[1]}")
    out = np.zeros((X.shape[0], Z.shape[0]))
    active = np.flatnonzero(p)
    for start in range(0, active.size, chunk):
        idx = active[start:start + chunk]
        vals = bin_kernel(kind, X[:, None, idx], Z[None, :, idx])
        out += vals @ p[idx]
    return out


def gram(kind, X, Z=None) -> np.ndarray:
    """Unweighted additive kernel matrix."""
    return weighted_gram(kind, None, X, Z)


@dataclass(frozen=True)
class BlockGram:
    """Instance-level Gram matrix partitioned by bag.

    ``full`` is the ``N x N`` kernel over all instances in bag order and
    ``offsets[i]:offsets[i+1]`` slices out bag ``i``.
    """

    full: np.ndarray
    offsets: np.ndarray

    @property
    def n_bags(self) -> int:
        return len(self.offsets) - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def bag_slice(self, i) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def block(self, i, j) -> np.ndarray:
        return self.full[self.bag_slice(i), self.bag_slice(j)]


def block_gram(kind, bags) -> BlockGram:
    """Build ``[K(i, j)]_{kl} = K(h_ik, h_jl)`` with the unweighted kernel."""
    mats = []
    for i, bag in enumerate(bags):
        H = np.asarray(bag, dtype=float)
        if H.ndim == 1:
            H = H[None, :]
        if H.shape[0] == 0:
            raise InputError(f"bag {i} has no instances")
        mats.append(H)
    if not mats:
        raise InputError("no bags given")
    dims = {H.shape[1] for H in mats}
    if len(dims) != 1:
        raise DimensionError(f"instances have inconsistent dimensions {sorted(dims)}")
    H = as_histograms(np.vstack(mats), "instance")
    offsets = np.concatenate([[0], np.cumsum([m.shape[0] for m in mats])])
    G = gram(kind, H)
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return BlockGram(full=G, offsets=offsets)


def mixing_matrix(s, sizes) -> np.ndarray:
    """Dense ``n x N`` matrix whose row ``i`` holds ``s_i`` in bag ``i``'s columns."""
    sizes = np.asarray(sizes)
    if len(s) != len(sizes):
        raise DimensionError(f"{len(s)} weight vectors for {len(sizes)} bags")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    S = np.zeros((len(sizes), int(offsets[-1])))
    for i, si in enumerate(s):
        si = np.asarray(si, dtype=float)
        if si.shape != (sizes[i],):
            raise DimensionError(f"bag {i}: weight vector length {si.size}, bag size {sizes[i]}")
        if np.any(si < 0):
            raise DomainError(f"bag {i}: instance weights must be non-negative")
        S[i, offsets[i]:offsets[i + 1]] = si
    return S


def bag_gram(blockK: BlockGram, s) -> np.ndarray:
    """``K_ij = s_i^T K(i, j) s_j`` for every pair of bags."""
    S = mixing_matrix(s, blockK.sizes)
    K = S @ blockK.full @ S.T
    return 0.5 * (K + K.T)

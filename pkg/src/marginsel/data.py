"""Dataset containers, file formats and seeded synthetic generators.

Sample files are CSV, one sample per line: ``label,v1,...,vD``.  Bag files
hold one JSON object per line: ``{"bag_id": ..., "label": ..., "instances":
[[...], ...]}`` with an optional ``instance_labels`` list for ground truth.
Floats are written with ``repr`` so a write/read cycle is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError, InputError, ParseError


@dataclass(frozen=True)
class SampleDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.size:
            raise DimensionError(f"X has shape {self.X.shape} but {self.y.size} labels")

    @property
    def D(self):
        return self.X.shape[1]

    def __len__(self):
        return self.y.size


@dataclass(frozen=True)
class Bag:
    bag_id: str
    label: int
    instances: np.ndarray
    # ground-truth instance labels (+1 signal / -1 background) when known
    truth: tuple | None = None

    @property
    def size(self):
        return self.instances.shape[0]


@dataclass(frozen=True)
class SyntheticSpec:
    n_pos: int = 100
    n_neg: int = 100
    D: int = 100
    informative_bins: tuple = tuple(range(10))
    separation: float = 2.0
    noise_scale: float = 1.0
    seed: int = 0
    normalize: bool = False
    # bag generator only
    m_per_bag: int = 5
    signal_per_pos: int = 1

    def __post_init__(self):
        bins = tuple(int(k) for k in self.informative_bins)
        object.__setattr__(self, "informative_bins", bins)
        if any(k < 0 or k >= self.D for k in bins):
            raise DomainError(f"informative bins must lie in [0, {self.D})")
        if self.separation < 0:
            raise DomainError("separation must be non-negative")
        if self.noise_scale <= 0:
            raise DomainError("noise_scale must be positive")
        if self.m_per_bag < 1 or not 0 <= self.signal_per_pos <= self.m_per_bag:
            raise DomainError("need m_per_bag >= 1 and 0 <= signal_per_pos <= m_per_bag")


def _parse_label(tok):
    v = float(tok)
    if v not in (-1.0, 0.0, 1.0):
        raise ValueError(f"label must be -1, 0 or 1, got {tok!r}")
    return v


def load_samples(path) -> SampleDataset:
    labels, rows = [], []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            try:
                lab = _parse_label(toks[0])
                vals = [float(t) for t in toks[1:]]
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", path, lineno) from None
            if not vals:
                raise ParseError("row has a label but no histogram values", path, lineno)
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise ParseError(f"ragged row: {len(vals)} values, expected {dim}", path, lineno)
            if any(v < 0 or not np.isfinite(v) for v in vals):
                raise ParseError("histogram values must be finite and non-negative", path, lineno)
            labels.append(lab)
            rows.append(vals)
    if not rows:
        raise ParseError("no samples", path)
    y = np.array(labels)
    if np.any(y == 0) and np.any(y == -1):
        raise ParseError("labels mix the {-1,+1} and {0,1} conventions", path)
    y[y == 0] = -1.0
    return SampleDataset(np.array(rows, dtype=float), y)


def write_samples(path, dataset: SampleDataset):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for lab, row in zip(dataset.y, dataset.X):
            fh.write(",".join([str(int(lab))] + [repr(float(v)) for v in row]) + "\n")


def load_bags(path) -> list[Bag]:
    bags, seen = [], set()
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                bag_id = str(rec["bag_id"])
                label = float(rec["label"])
                inst = np.asarray(rec["instances"], dtype=float)
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad bag record ({exc!r})", path, lineno) from None
            if label not in (-1.0, 0.0, 1.0):
                raise ParseError(f"bag label must be -1, 0 or 1, got {rec['label']!r}", path, lineno)
            if bag_id in seen:
                raise ParseError(f"duplicate bag_id {bag_id!r}", path, lineno)
            if inst.size == 0:
                raise ParseError(f"bag {bag_id!r} has no instances", path, lineno)
            if inst.ndim != 2:
                raise ParseError(f"bag {bag_id!r}: instances must be a list of equal-length lists",
                                 path, lineno)
            if dim is None:
                dim = inst.shape[1]
            elif inst.shape[1] != dim:
                raise ParseError(f"bag {bag_id!r} has D={inst.shape[1]}, expected {dim}", path, lineno)
            if np.any(inst < 0) or not np.all(np.isfinite(inst)):
                raise ParseError(f"bag {bag_id!r}: histogram values must be finite and non-negative",
                                 path, lineno)
            truth = rec.get("instance_labels")
            if truth is not None:
                truth = tuple(int(t) for t in truth)
                if len(truth) != inst.shape[0]:
                    raise ParseError(f"bag {bag_id!r}: instance_labels length mismatch", path, lineno)
            seen.add(bag_id)
            bags.append(Bag(bag_id, 1 if label > 0 else -1, inst, truth))
    if not bags:
        raise ParseError("no bags", path)
    return bags


def write_bags(path, bags):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for bag in bags:
            rec = {"bag_id": bag.bag_id, "label": int(bag.label),
                   "instances": [[float(v) for v in row] for row in bag.instances]}
            if bag.truth is not None:
                rec["instance_labels"] = [int(t) for t in bag.truth]
            fh.write(json.dumps(rec) + "\n")


def l1_normalize(X):
    X = np.asarray(X, dtype=float)
    s = X.sum(axis=-1, keepdims=True)
    return np.divide(X, s, out=np.zeros_like(X), where=s > 0)


def _draw(rng, n, spec, positive):
    X = np.abs(rng.normal(0.0, spec.noise_scale, size=(n, spec.D)))
    if positive and spec.informative_bins:
        X[:, list(spec.informative_bins)] += spec.separation
    return X


def generate_planted_features(spec: SyntheticSpec) -> SampleDataset:
    """Folded-Gaussian histograms; positives are shifted on the informative bins."""
    rng = np.random.default_rng(spec.seed)
    X = np.vstack([_draw(rng, spec.n_pos, spec, True), _draw(rng, spec.n_neg, spec, False)])
    y = np.concatenate([np.ones(spec.n_pos), -np.ones(spec.n_neg)])
    order = rng.permutation(y.size)
    X, y = X[order], y[order]
    if spec.normalize:
        X = l1_normalize(X)
    return SampleDataset(X, y)


def generate_planted_instances(spec: SyntheticSpec) -> list[Bag]:
    """Positive bags hold ``signal_per_pos`` shifted instances at random slots;
    every other instance (and every instance of a negative bag) is background."""
    rng = np.random.default_rng(spec.seed)
    m = spec.m_per_bag
    bags = []
    for i in range(spec.n_pos):
        truth = np.full(m, -1)
        truth[rng.choice(m, size=spec.signal_per_pos, replace=False)] = 1
        H = np.empty((m, spec.D))
        H[truth > 0] = _draw(rng, spec.signal_per_pos, spec, True)
        H[truth < 0] = _draw(rng, m - spec.signal_per_pos, spec, False)
        if spec.normalize:
            H = l1_normalize(H)
        bags.append(Bag(f"pos{i:04d}", 1, H, tuple(int(t) for t in truth)))
    for i in range(spec.n_neg):
        H = _draw(rng, m, spec, False)
        if spec.normalize:
            H = l1_normalize(H)
        bags.append(Bag(f"neg{i:04d}", -1, H, (-1,) * m))
    order = rng.permutation(len(bags))
    return [bags[k] for k in order]


def bags_from_arrays(instances, labels, ids=None) -> list[Bag]:
    if len(instances) != len(labels):
        raise InputError("one label per bag is required")
    ids = ids if ids is not None else [f"b{i:04d}" for i in range(len(labels))]
    out = []
    for bag_id, inst, lab in zip(ids, instances, labels):
        inst = np.atleast_2d(np.asarray(inst, dtype=float))
        if inst.size == 0:
            raise InputError(f"bag {bag_id!r} has no instances")
        out.append(Bag(str(bag_id), 1 if lab > 0 else -1, inst))
    return out

"""Ranking metrics: non-interpolated average precision and PR curves.

Ties in score are broken by original position (stable sort), so results are
deterministic even for constant scores.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError


@dataclass(frozen=True)
class PRPoint:
    precision: float
    recall: float
    threshold: float


def _prepare(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size != labels.size:
        raise DimensionError(f"{scores.size} scores but {labels.size} labels")
    pos = labels > 0
    if not np.any(pos):
        raise InputError("average precision needs at least one positive label")
    return scores, pos


def average_precision(scores, labels) -> float:
    scores, pos = _prepare(scores, labels)
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, ranks.size + 1) / ranks))


def pr_curve(scores, labels) -> list[PRPoint]:
    """One point per distinct score, thresholds descending (``score >= t`` is positive)."""
    scores, pos = _prepare(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(pos[order])
    # last index of each run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    n_pos = tp[-1]
    return [PRPoint(float(tp[e] / (e + 1)), float(tp[e] / n_pos), float(s[e])) for e in ends]


def write_pr_csv(path, points):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for pt in points:
            w.writerow([repr(pt.threshold), repr(pt.precision), repr(pt.recall)])

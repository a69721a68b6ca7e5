"""JSON model files.

Feature-selection model::

    {"format": "marginsel/feature-select", "version": 1,
     "kernel": "chi2", "C": 1.0, "bias": b,
     "p": [...], "a": [...],                  # D bin weights and bin scatter
     "alpha": [...], "train_X": [[...], ...], "train_y": [...],  # support vectors only
     "trace": [{"iteration", "objective", "step", "n_selected"}, ...],
     "meta": {...}}

Region-selection model::

    {"format": "marginsel/region-select", "version": 1,
     "kernel": "chi2", "C": 1.0, "bias": b,
     "support": [{"bag_id", "label", "alpha", "s": [...], "instances": [[...], ...]}, ...],
     "bag_weights": {bag_id: [...], ...},     # every positive training bag
     "trace": [{"iteration", "objective", "step", "n_active"}, ...],
     "meta": {...}}

Floats go through ``json`` (shortest round-trip repr), so a load reproduces
the saved arrays bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from .data import Bag
from .errors import ParseError
from .feature_select import FeatureSelectModel, IterationRecord
from .kernels import KernelKind
from .region_select import RegionIteration, RegionSelectModel

FS_FORMAT = "marginsel/feature-select"
RS_FORMAT = "marginsel/region-select"
VERSION = 1


def _floats(arr):
    return [float(v) for v in np.asarray(arr, dtype=float).ravel()]


def fs_model_to_dict(model: FeatureSelectModel) -> dict:
    sv = model.support()
    return {
        "format": FS_FORMAT,
        "version": VERSION,
        "kernel": model.kind.value,
        "C": float(model.C),
        "bias": float(model.bias),
        "p": _floats(model.p),
        "a": _floats(model.a),
        "alpha": _floats(sv.alpha),
        "train_X": [_floats(row) for row in sv.train_X],
        "train_y": [int(v) for v in sv.train_y],
        "trace": [{"iteration": r.iteration, "objective": float(r.objective),
                   "step": float(r.step), "n_selected": r.n_selected} for r in model.trace],
        "meta": dict(model.meta, n_selected=model.n_selected(), dim=model.dim),
    }


def fs_model_from_dict(d) -> FeatureSelectModel:
    _check_format(d, FS_FORMAT)
    p = np.array(d["p"], dtype=float)
    X = np.array(d["train_X"], dtype=float).reshape(-1, p.size)
    return FeatureSelectModel(
        kind=KernelKind.parse(d["kernel"]),
        p=p,
        a=np.array(d["a"], dtype=float),
        alpha=np.array(d["alpha"], dtype=float),
        bias=float(d["bias"]),
        train_X=X,
        train_y=np.array(d["train_y"], dtype=float),
        C=float(d["C"]),
        trace=tuple(IterationRecord(**r) for r in d.get("trace", [])),
        meta=dict(d.get("meta", {})),
    )


def rs_model_to_dict(model: RegionSelectModel, meta=None) -> dict:
    sv = model.support()
    support = [{"bag_id": b.bag_id, "label": int(b.label), "alpha": float(a),
                "s": _floats(s), "instances": [_floats(row) for row in b.instances]}
               for b, s, a in zip(sv.bags, sv.s, sv.alpha)]
    return {
        "format": RS_FORMAT,
        "version": VERSION,
        "kernel": model.kind.value,
        "C": float(model.C),
        "bias": float(model.bias),
        "support": support,
        "bag_weights": {k: _floats(v) for k, v in model.bag_weights.items()},
        "trace": [{"iteration": r.iteration, "objective": float(r.objective),
                   "step": float(r.step), "n_active": r.n_active} for r in model.trace],
        "meta": dict(meta or {}, dim=model.dim),
    }


def rs_model_from_dict(d) -> RegionSelectModel:
    _check_format(d, RS_FORMAT)
    sup = d["support"]
    bags = tuple(Bag(str(e["bag_id"]), int(e["label"]), np.array(e["instances"], dtype=float))
                 for e in sup)
    if not bags:
        raise ParseError("region-selection model has no support bags")
    return RegionSelectModel(
        kind=KernelKind.parse(d["kernel"]),
        bags=bags,
        s=tuple(np.array(e["s"], dtype=float) for e in sup),
        alpha=np.array([e["alpha"] for e in sup], dtype=float),
        bias=float(d["bias"]),
        C=float(d["C"]),
        bag_weights={k: np.array(v, dtype=float) for k, v in d.get("bag_weights", {}).items()},
        trace=tuple(RegionIteration(**r) for r in d.get("trace", [])),
    )


def _check_format(d, expected):
    if not isinstance(d, dict) or d.get("format") != expected:
        got = d.get("format") if isinstance(d, dict) else type(d).__name__
        raise ParseError(f"expected a {expected!r} model file, found {got!r}")
    if d.get("version") != VERSION:
        raise ParseError(f"unsupported model version {d.get('version')!r}")


def save_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", path, exc.lineno) from None


def save_fs_model(path, model):
    save_json(path, fs_model_to_dict(model))


def load_fs_model(path):
    return fs_model_from_dict(load_json(path))


def save_rs_model(path, model, meta=None):
    save_json(path, rs_model_to_dict(model, meta))


def load_rs_model(path):
    return rs_model_from_dict(load_json(path))

"""Command-line front end.

    marginsel synth      --task features|instances --output FILE [--seed N ...]
    marginsel fs-train   --input samples.csv --model model.json [--kernel chi2 --C 1 ...]
    marginsel fs-predict --input samples.csv --model model.json --output scores.csv
    marginsel rs-train   --input bags.jsonl --model model.json [...]
    marginsel rs-predict --input bags.jsonl --model model.json --output bag_scores.csv
                         [--instance-output instance_scores.csv --bag-mode mean|max|weighted]
    marginsel eval       --input scores.csv --output metrics.json [--pr-output pr.csv]

Every subcommand accepts ``--config FILE`` (JSON or YAML) whose keys use the
long flag names with dashes or underscores; explicit flags win over the file.
Failures exit non-zero with a single ``error: <category>: <message>`` line on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data, evaluation, modelio
from .errors import DimensionError, DomainError, InputError, MarginselError, ParseError
from .feature_select import FeatureSelectOptions, predict_fs, train_feature_selection
from .kernels import KernelKind
from .region_select import RegionSelectOptions, score_bag, score_instance, train_region_selection

log = logging.getLogger("marginsel")

COMMANDS = ("fs-train", "fs-predict", "rs-train", "rs-predict", "eval", "synth")
EXIT_CODES = {"usage": 2, "parse": 3, "dimension": 4, "domain": 5, "input": 6,
              "solver": 7, "io": 8, "error": 1}


@dataclass
class RunConfig:
    command: str
    kernel: KernelKind = KernelKind.CHI2
    C: float = 1.0
    tol: float = 1e-6
    step_tol: float = 1e-5
    max_outer: int = 200
    normalize: bool = False
    seed: int = 0
    input: str | None = None
    model: str | None = None
    output: str | None = None
    log: str | None = None
    instance_output: str | None = None
    pr_output: str | None = None
    bag_mode: str = "mean"
    # synth
    task: str = "features"
    n_pos: int = 100
    n_neg: int = 100
    dim: int = 100
    informative: int = 10
    separation: float = 2.0
    noise_scale: float = 1.0
    m_per_bag: int = 5
    signal_per_pos: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}")
        self.kernel = KernelKind.parse(self.kernel)
        if not self.C > 0:
            raise DomainError(f"C must be positive, got {self.C}")
        if not (self.tol > 0 and self.step_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_outer < 0:
            raise DomainError("max-outer must be non-negative")


def _require(cfg, *names):
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise InputError(f"{cfg.command} needs --{', --'.join(m.replace('_', '-') for m in missing)}")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    return repr(float(v))


def _maybe_normalize(X, flag):
    return data.l1_normalize(X) if flag else X


def _log_path(cfg):
    return cfg.log or f"{cfg.model}.log.csv"


def cmd_synth(cfg):
    _require(cfg, "output")
    spec = data.SyntheticSpec(
        n_pos=cfg.n_pos, n_neg=cfg.n_neg, D=cfg.dim, informative_bins=tuple(range(cfg.informative)),
        separation=cfg.separation, noise_scale=cfg.noise_scale, seed=cfg.seed,
        normalize=cfg.normalize, m_per_bag=cfg.m_per_bag, signal_per_pos=cfg.signal_per_pos)
    if cfg.task == "features":
        ds = data.generate_planted_features(spec)
        data.write_samples(cfg.output, ds)
        log.info("wrote %d samples (D=%d) to %s", len(ds), ds.D, cfg.output)
    elif cfg.task == "instances":
        bags = data.generate_planted_instances(spec)
        data.write_bags(cfg.output, bags)
        log.info("wrote %d bags to %s", len(bags), cfg.output)
    else:
        raise DomainError(f"unknown synth task {cfg.task!r}; use 'features' or 'instances'")


def cmd_fs_train(cfg):
    _require(cfg, "input", "model")
    ds = data.load_samples(cfg.input)
    X = _maybe_normalize(ds.X, cfg.normalize)
    opts = FeatureSelectOptions(tol=cfg.tol, step_tol=cfg.step_tol, max_outer=cfg.max_outer)
    model = train_feature_selection(X, ds.y, cfg.kernel, cfg.C, opts)
    model.meta.update(normalize_l1=bool(cfg.normalize), n_train=len(ds))
    modelio.save_fs_model(cfg.model, model)
    _write_csv(_log_path(cfg), ["iteration", "objective", "step", "n_selected"],
               [[r.iteration, _fmt(r.objective), _fmt(r.step), r.n_selected] for r in model.trace])
    log.info("J %.6g -> %.6g in %d iterations, %d bins selected",
             model.history[0], model.objective, len(model.trace) - 1, model.n_selected())


def cmd_fs_predict(cfg):
    _require(cfg, "input", "model", "output")
    model = modelio.load_fs_model(cfg.model)
    ds = data.load_samples(cfg.input)
    if ds.D != model.dim:
        raise DimensionError(f"model expects {model.dim} bins, input has {ds.D}")
    X = _maybe_normalize(ds.X, cfg.normalize or model.meta.get("normalize_l1", False))
    scores = predict_fs(model, X)
    _write_csv(cfg.output, ["index", "label", "score"],
               [[i, int(lab), _fmt(sc)] for i, (lab, sc) in enumerate(zip(ds.y, scores))])


def _normalized_bags(bags, flag):
    if not flag:
        return bags
    return [data.Bag(b.bag_id, b.label, data.l1_normalize(b.instances), b.truth) for b in bags]


def cmd_rs_train(cfg):
    _require(cfg, "input", "model")
    bags = _normalized_bags(data.load_bags(cfg.input), cfg.normalize)
    opts = RegionSelectOptions(tol=cfg.tol, step_tol=cfg.step_tol, max_outer=cfg.max_outer)
    model = train_region_selection(bags, cfg.kernel, cfg.C, opts)
    modelio.save_rs_model(cfg.model, model, meta={"normalize_l1": bool(cfg.normalize),
                                                  "n_bags": len(bags)})
    _write_csv(_log_path(cfg), ["iteration", "objective", "step", "n_active"],
               [[r.iteration, _fmt(r.objective), _fmt(r.step), r.n_active] for r in model.trace])
    log.info("J %.6g -> %.6g in %d iterations", model.history[0], model.objective,
             len(model.trace) - 1)


def cmd_rs_predict(cfg):
    _require(cfg, "input", "model", "output")
    raw = modelio.load_json(cfg.model)
    model = modelio.rs_model_from_dict(raw)
    bags = data.load_bags(cfg.input)
    dims = {b.instances.shape[1] for b in bags}
    if dims != {model.dim}:
        raise DimensionError(f"model expects {model.dim} bins, input has {sorted(dims)}")
    bags = _normalized_bags(bags, cfg.normalize or raw.get("meta", {}).get("normalize_l1", False))
    rows, inst_rows = [], []
    for b in bags:
        rows.append([b.bag_id, b.label, _fmt(score_bag(model, b, cfg.bag_mode))])
        if cfg.instance_output:
            for k, sc in enumerate(np.atleast_1d(score_instance(model, b.instances))):
                truth = b.truth[k] if b.truth is not None else b.label
                inst_rows.append([b.bag_id, k, truth, _fmt(sc)])
    _write_csv(cfg.output, ["bag_id", "label", "score"], rows)
    if cfg.instance_output:
        _write_csv(cfg.instance_output, ["bag_id", "instance", "label", "score"], inst_rows)


def _read_scores(path):
    scores, labels = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"score", "label"} <= set(reader.fieldnames):
            raise ParseError("score file needs 'score' and 'label' columns", path, 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
                labels.append(float(row["label"]))
            except (TypeError, ValueError):
                raise ParseError("non-numeric score or label", path, lineno) from None
    return np.array(scores), np.array(labels)


def cmd_eval(cfg):
    _require(cfg, "input", "output")
    scores, labels = _read_scores(cfg.input)
    ap = evaluation.average_precision(scores, labels)
    curve = evaluation.pr_curve(scores, labels)
    pr_path = cfg.pr_output or str(Path(cfg.output).with_suffix(".pr.csv"))
    evaluation.write_pr_csv(pr_path, curve)
    with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"average_precision": ap, "n": int(scores.size),
                   "n_positive": int(np.sum(labels > 0)), "pr_curve": Path(pr_path).name}, fh, indent=1)
        fh.write("\n")
    log.info("AP %.6f over %d scores", ap, scores.size)


HANDLERS = {"synth": cmd_synth, "fs-train": cmd_fs_train, "fs-predict": cmd_fs_predict,
            "rs-train": cmd_rs_train, "rs-predict": cmd_rs_predict, "eval": cmd_eval}


def run(config: RunConfig) -> int:
    HANDLERS[config.command](config)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="marginsel", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON or YAML file with option defaults")
        p.add_argument("--input")
        p.add_argument("--output")
        p.add_argument("--seed", type=int)
        p.add_argument("--normalize-l1", dest="normalize", action="store_true", default=None)
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("fs-train", "fs-predict", "rs-train", "rs-predict"):
            p.add_argument("--model")
        if name in ("fs-train", "rs-train"):
            p.add_argument("--kernel", choices=[k.value for k in KernelKind])
            p.add_argument("--C", dest="C", type=float)
            p.add_argument("--tol", type=float, help="KKT tolerance of the dual solver")
            p.add_argument("--step-tol", type=float)
            p.add_argument("--max-outer", type=int)
            p.add_argument("--log", help="training log CSV (default: MODEL.log.csv)")
        if name == "rs-predict":
            p.add_argument("--instance-output")
            p.add_argument("--bag-mode", choices=["mean", "max", "weighted"])
        if name == "eval":
            p.add_argument("--pr-output")
        if name == "synth":
            p.add_argument("--task", choices=["features", "instances"])
            p.add_argument("--n-pos", type=int)
            p.add_argument("--n-neg", type=int)
            p.add_argument("--dim", type=int)
            p.add_argument("--informative", type=int, help="number of informative bins (the first k)")
            p.add_argument("--separation", type=float)
            p.add_argument("--noise-scale", type=float)
            p.add_argument("--m-per-bag", type=int)
            p.add_argument("--signal-per-pos", type=int)
    return parser


def _load_config_file(path):
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml
        cfg = yaml.safe_load(text)
    else:
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON ({exc.msg})", path, exc.lineno) from None
    if not isinstance(cfg, dict):
        raise ParseError("config file must hold a mapping", path)
    out = {str(k).replace("-", "_"): v for k, v in cfg.items()}
    if "normalize_l1" in out:
        out["normalize"] = out.pop("normalize_l1")
    return out


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(_load_config_file(args.config))
    for key, val in vars(args).items():
        if key in ("config", "verbose") or val is None:
            continue
        values[key] = val
    known = set(RunConfig.__dataclass_fields__)
    extra = {k: v for k, v in values.items() if k not in known}
    if extra:
        raise InputError(f"unknown config keys: {', '.join(sorted(extra))}")
    return RunConfig(**values)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(config_from_args(argv))
    except (MarginselError, OSError, TypeError) as exc:
        if isinstance(exc, MarginselError):
            category = exc.category
        elif isinstance(exc, OSError):
            category = "io"
        else:  # wrongly typed config-file values
            category = "input"
        msg = " ".join(str(exc).split())
        print(f"error: {category}: {msg}", file=sys.stderr)
        return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())

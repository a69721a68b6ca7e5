import csv
import json

import numpy as np
import pytest

from marginsel import cli, kernels
from marginsel.data import Bag, load_bags, load_samples, write_bags
from marginsel.errors import DomainError
from marginsel.qp import solve_dual


def run(*args):
    return cli.main([str(a) for a in args])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SMALL = ("--n-pos", 30, "--n-neg", 30, "--dim", 12, "--informative", 3)


def test_feature_pipeline(tmp_path):
    tr, te = tmp_path / "train.csv", tmp_path / "test.csv"
    model, scores, metrics = tmp_path / "m.json", tmp_path / "s.csv", tmp_path / "metrics.json"
    assert run("synth", "--output", tr, "--seed", 1, *SMALL) == 0
    assert run("synth", "--output", te, "--seed", 2, *SMALL) == 0
    assert run("fs-train", "--input", tr, "--model", model, "--C", 10, "--max-outer", 30) == 0
    assert run("fs-predict", "--input", te, "--model", model, "--output", scores) == 0
    assert run("eval", "--input", scores, "--output", metrics) == 0
    res = json.loads(metrics.read_text())
    assert res["n"] == 60 and res["n_positive"] == 30
    assert res["average_precision"] >= 0.95
    assert (tmp_path / "metrics.pr.csv").exists()
    log = read_csv(str(model) + ".log.csv")
    assert list(log[0]) == ["iteration", "objective", "step", "n_selected"]
    objs = [float(r["objective"]) for r in log]
    assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))


def test_dimension_mismatch_exit(tmp_path, capsys):
    tr, te, model = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "m.json"
    run("synth", "--output", tr, *SMALL)
    run("synth", "--output", te, "--n-pos", 3, "--n-neg", 3, "--dim", 5, "--informative", 1)
    run("fs-train", "--input", tr, "--model", model, "--max-outer", 2)
    code = run("fs-predict", "--input", te, "--model", model, "--output", tmp_path / "s.csv")
    assert code == cli.EXIT_CODES["dimension"] != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: dimension: ")


def test_error_categories(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,0.5\n-1,-2\n")
    assert run("fs-train", "--input", bad, "--model", tmp_path / "m.json") == cli.EXIT_CODES["parse"]
    assert ":2:" in capsys.readouterr().err
    assert run("fs-train", "--input", tmp_path / "missing.csv",
               "--model", tmp_path / "m.json") == cli.EXIT_CODES["io"]
    assert run("fs-train", "--input", bad, "--model", tmp_path / "m.json",
               "--C", 0) == cli.EXIT_CODES["domain"]
    assert run("fs-train", "--model", tmp_path / "m.json") == cli.EXIT_CODES["input"]


def test_run_config_validation():
    with pytest.raises(DomainError):
        cli.RunConfig(command="fs-train", C=-1)
    with pytest.raises(DomainError):
        cli.RunConfig(command="fs-train", step_tol=0)
    with pytest.raises(DomainError):
        cli.RunConfig(command="train")


def test_singleton_bags_match_plain_svm(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.gamma(2.0, 1.0, size=(16, 4))
    y = np.where(np.arange(16) < 6, 1, -1)
    X[y > 0, 0] += 1.0
    path = tmp_path / "bags.jsonl"
    write_bags(path, [Bag(f"i{k}", int(y[k]), X[k:k + 1]) for k in range(16)])
    model = tmp_path / "rs.json"
    assert run("rs-train", "--input", path, "--model", model, "--kernel", "chi2", "--C", 2) == 0
    final_J = float(read_csv(str(model) + ".log.csv")[-1]["objective"])
    ref = solve_dual(kernels.gram("chi2", X), y, 2.0, tol=1e-6)
    assert final_J == pytest.approx(ref.objective, abs=1e-9)


def test_instance_pipeline_and_outputs(tmp_path):
    bags, model = tmp_path / "bags.jsonl", tmp_path / "rs.json"
    out, inst = tmp_path / "bag_scores.csv", tmp_path / "inst_scores.csv"
    assert run("synth", "--task", "instances", "--output", bags, "--n-pos", 8, "--n-neg", 8,
               "--dim", 10, "--informative", 3, "--m-per-bag", 3, "--seed", 3) == 0
    assert run("rs-train", "--input", bags, "--model", model, "--max-outer", 5) == 0
    assert run("rs-predict", "--input", bags, "--model", model, "--output", out,
               "--instance-output", inst, "--bag-mode", "max") == 0
    rows = read_csv(out)
    assert len(rows) == 16 and list(rows[0]) == ["bag_id", "label", "score"]
    irows = read_csv(inst)
    assert len(irows) == 48 and list(irows[0]) == ["bag_id", "instance", "label", "score"]
    truth = {b.bag_id: b.truth for b in load_bags(bags)}
    for r in irows:
        assert int(r["label"]) == truth[r["bag_id"]][int(r["instance"])]
    pos = tmp_path / "pos.jsonl"
    write_bags(pos, [b for b in load_bags(bags) if b.label > 0])
    assert run("rs-predict", "--input", pos, "--model", model, "--output", out,
               "--bag-mode", "weighted") == 0
    assert run("eval", "--input", inst, "--output", tmp_path / "m.json",
               "--pr-output", tmp_path / "pr.csv") == 0
    assert read_csv(tmp_path / "pr.csv")[0].keys() == {"threshold", "precision", "recall"}


def test_weighted_mode_on_negative_bag_errors(tmp_path):
    bags, model = tmp_path / "bags.jsonl", tmp_path / "rs.json"
    run("synth", "--task", "instances", "--output", bags, "--n-pos", 4, "--n-neg", 4,
        "--dim", 6, "--informative", 2, "--m-per-bag", 2)
    run("rs-train", "--input", bags, "--model", model, "--max-outer", 1)
    other = tmp_path / "new.jsonl"
    write_bags(other, [Bag("unseen", -1, np.ones((2, 6)))])
    assert run("rs-predict", "--input", other, "--model", model, "--output", tmp_path / "o.csv",
               "--bag-mode", "weighted") == cli.EXIT_CODES["input"]


@pytest.mark.parametrize("suffix, text", [
    (".json", '{"kernel": "linear", "C": 5, "max-outer": 3}'),
    (".yaml", "kernel: linear\nC: 5\nmax_outer: 3\n"),
])
def test_config_file_defaults_and_override(tmp_path, suffix, text):
    conf = tmp_path / f"conf{suffix}"
    conf.write_text(text)
    cfg = cli.config_from_args(["fs-train", "--config", str(conf), "--C", "7"])
    assert cfg.kernel.value == "linear" and cfg.C == 7.0 and cfg.max_outer == 3


def test_config_unknown_key(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text('{"gamma": 1}')
    assert run("fs-train", "--config", conf) == cli.EXIT_CODES["input"]


def test_normalize_flag_is_remembered(tmp_path):
    tr, model, scores = tmp_path / "a.csv", tmp_path / "m.json", tmp_path / "s.csv"
    run("synth", "--output", tr, *SMALL)
    assert run("fs-train", "--input", tr, "--model", model, "--normalize-l1", "--max-outer", 3) == 0
    assert json.loads(model.read_text())["meta"]["normalize_l1"] is True
    assert run("fs-predict", "--input", tr, "--model", model, "--output", scores) == 0
    assert len(read_csv(scores)) == len(load_samples(tr))


def test_determinism_byte_identical(tmp_path):
    def pipeline(d):
        d.mkdir()
        run("synth", "--output", d / "tr.csv", "--seed", 5, *SMALL)
        run("fs-train", "--input", d / "tr.csv", "--model", d / "m.json", "--max-outer", 10)
        run("fs-predict", "--input", d / "tr.csv", "--model", d / "m.json", "--output", d / "s.csv")
        run("eval", "--input", d / "s.csv", "--output", d / "e.json")
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a, b = pipeline(tmp_path / "a"), pipeline(tmp_path / "b")
    assert a.keys() == b.keys() and len(a) == 6
    assert a == b

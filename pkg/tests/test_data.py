import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from marginsel import kernels
from marginsel.data import (Bag, SampleDataset, SyntheticSpec, generate_planted_features,
                            generate_planted_instances, l1_normalize, load_bags, load_samples,
                            write_bags, write_samples)
from marginsel.errors import DomainError, ParseError
from marginsel.evaluation import average_precision
from marginsel.qp import solve_dual


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# --- sample files --------------------------------------------------------------------------

def test_load_samples_examples(tmp_path):
    ds = load_samples(write(tmp_path, "a.csv", "1,0.5,0.0"))
    assert len(ds) == 1 and ds.D == 2 and ds.y[0] == 1
    ds = load_samples(write(tmp_path, "b.csv", "-1,1,2\n1,0,1\n"))
    np.testing.assert_array_equal(ds.X, [[1, 2], [0, 1]])
    np.testing.assert_array_equal(ds.y, [-1, 1])


def test_zero_one_labels_are_mapped(tmp_path):
    ds = load_samples(write(tmp_path, "a.csv", "0,1\n1,2\n\n"))
    np.testing.assert_array_equal(ds.y, [-1, 1])


@pytest.mark.parametrize("text, line", [
    ("1,1,2\n-1,1,-1\n", 2),
    ("1,1,2\n-1,1\n", 2),
    ("1,a,2\n", 1),
    ("2,1,2\n", 1),
    ("1\n", 1),
])
def test_load_samples_errors_carry_line(tmp_path, text, line):
    with pytest.raises(ParseError) as info:
        load_samples(write(tmp_path, "bad.csv", text))
    assert info.value.line == line
    assert f":{line}:" in str(info.value) or f"line {line}" in str(info.value)


def test_mixed_label_conventions_rejected(tmp_path):
    with pytest.raises(ParseError):
        load_samples(write(tmp_path, "bad.csv", "0,1\n-1,2\n1,3\n"))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)),
              elements=st.floats(0, 1e6, allow_subnormal=True)))
def test_samples_round_trip_bit_exact(tmp_path_factory, X):
    y = np.where(np.arange(X.shape[0]) % 2 == 0, 1.0, -1.0)
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    write_samples(path, SampleDataset(X, y))
    back = load_samples(path)
    assert back.X.tobytes() == X.tobytes()
    np.testing.assert_array_equal(back.y, y)


# --- bag files -----------------------------------------------------------------------------

def test_load_bags_example(tmp_path):
    rec = {"bag_id": "x", "label": 1, "instances": [[1, 2, 3], [0, 0, 1]]}
    bags = load_bags(write(tmp_path, "b.jsonl", json.dumps(rec)))
    assert len(bags) == 1 and bags[0].size == 2 and bags[0].label == 1


@pytest.mark.parametrize("records", [
    [{"bag_id": "x", "label": 1, "instances": [[1.0]]},
     {"bag_id": "x", "label": -1, "instances": [[2.0]]}],
    [{"bag_id": "x", "label": 1, "instances": []}],
    [{"bag_id": "x", "label": 1, "instances": [[1.0, 2.0]]},
     {"bag_id": "y", "label": -1, "instances": [[2.0]]}],
    [{"bag_id": "x", "label": 1, "instances": [[1.0, -2.0]]}],
    [{"bag_id": "x", "instances": [[1.0]]}],
])
def test_load_bags_errors(tmp_path, records):
    text = "\n".join(json.dumps(r) for r in records)
    with pytest.raises(ParseError):
        load_bags(write(tmp_path, "b.jsonl", text))


def test_load_bags_bad_json_reports_line(tmp_path):
    text = json.dumps({"bag_id": "a", "label": 1, "instances": [[1]]}) + "\n{oops\n"
    with pytest.raises(ParseError) as info:
        load_bags(write(tmp_path, "b.jsonl", text))
    assert info.value.line == 2


def test_bags_round_trip(tmp_path):
    bags = generate_planted_instances(SyntheticSpec(n_pos=3, n_neg=2, D=4, informative_bins=(0,),
                                                    m_per_bag=3, seed=2))
    path = tmp_path / "bags.jsonl"
    write_bags(path, bags)
    back = load_bags(path)
    for a, b in zip(bags, back):
        assert (a.bag_id, a.label, a.truth) == (b.bag_id, b.label, b.truth)
        assert a.instances.tobytes() == b.instances.tobytes()


# --- generators ----------------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(DomainError):
        SyntheticSpec(D=5, informative_bins=(5,))
    with pytest.raises(DomainError):
        SyntheticSpec(separation=-1)
    with pytest.raises(DomainError):
        SyntheticSpec(m_per_bag=2, signal_per_pos=3)


def test_features_deterministic_and_nonnegative():
    spec = SyntheticSpec(n_pos=20, n_neg=30, D=12, informative_bins=(1, 4), seed=9)
    a, b = generate_planted_features(spec), generate_planted_features(spec)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()
    assert np.all(a.X >= 0) and (a.y > 0).sum() == 20
    other = generate_planted_features(SyntheticSpec(n_pos=20, n_neg=30, D=12,
                                                    informative_bins=(1, 4), seed=10))
    assert other.X.tobytes() != a.X.tobytes()


def test_normalized_rows_sum_to_one():
    ds = generate_planted_features(SyntheticSpec(n_pos=5, n_neg=5, D=6, informative_bins=(0,),
                                                 normalize=True))
    np.testing.assert_allclose(ds.X.sum(axis=1), 1.0)
    np.testing.assert_array_equal(l1_normalize(np.zeros((1, 3))), 0.0)


def test_zero_separation_matches_class_distributions():
    # with no shift the two classes are draws from one distribution
    spec = SyntheticSpec(n_pos=3000, n_neg=3000, D=4, informative_bins=(0, 1), separation=0.0)
    ds = generate_planted_features(spec)
    pos, neg = ds.X[ds.y > 0], ds.X[ds.y < 0]
    se = np.sqrt(pos.var(axis=0) / 3000 + neg.var(axis=0) / 3000)
    assert np.all(np.abs(pos.mean(axis=0) - neg.mean(axis=0)) < 5 * se)


def test_informative_bins_carry_the_signal():
    spec = SyntheticSpec(n_pos=100, n_neg=100, D=100, informative_bins=tuple(range(10)),
                         separation=2.0, seed=0)
    ds = generate_planted_features(spec)

    def training_ap(cols):
        X = ds.X[:, cols]
        sol = solve_dual(kernels.gram("chi2", X), ds.y, 1.0)
        return average_precision(sol.decision_values(), ds.y)

    noise_cols = np.random.default_rng(1).choice(np.arange(10, 100), 10, replace=False)
    assert training_ap(list(range(10))) > training_ap(list(noise_cols))


def test_instances_structure():
    spec = SyntheticSpec(n_pos=6, n_neg=4, D=5, informative_bins=(0, 1), m_per_bag=4,
                         signal_per_pos=1, seed=3)
    bags = generate_planted_instances(spec)
    again = generate_planted_instances(spec)
    assert [b.instances.tobytes() for b in bags] == [b.instances.tobytes() for b in again]
    assert len({b.bag_id for b in bags}) == 10
    for b in bags:
        assert b.size == 4 and np.all(b.instances >= 0)
        n_signal = sum(t > 0 for t in b.truth)
        assert n_signal == (1 if b.label > 0 else 0)


def test_all_signal_bags():
    spec = SyntheticSpec(n_pos=3, n_neg=1, D=3, informative_bins=(2,), m_per_bag=3,
                         signal_per_pos=3)
    for b in generate_planted_instances(spec):
        if b.label > 0:
            assert b.truth == (1, 1, 1)
            assert np.all(b.instances[:, 2] >= spec.separation)


def test_bag_size_property():
    assert Bag("a", 1, np.ones((4, 2))).size == 4

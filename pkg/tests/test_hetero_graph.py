import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lts_curriculum.exceptions import ConfigurationError, GraphFormatError, GraphValidationError
from lts_curriculum.hetero_graph import (
    HeteroGraph,
    SyntheticSpec,
    dumps_graph,
    generate_synthetic,
    inject_label_noise,
    load_graph,
    save_graph,
    simple_spec,
)


def majority_vote_accuracy(graph):
    """Predict each test node by the most common train label among its neighbours.

    Neighbours are target nodes adjacent through a target-target relation (either
    direction) or sharing an intermediate node. Ties and empty votes go to class 0.
    """
    n = graph.num_target
    tgt = graph.target_type
    adj = np.zeros((n, n), dtype=bool)
    via = {}
    for rel, src, dst in graph.relations:
        e = graph.edges[rel]
        if src == tgt and dst == tgt:
            adj[e[:, 0], e[:, 1]] = True
            adj[e[:, 1], e[:, 0]] = True
        elif dst == tgt:
            via.setdefault(src, []).append(("in", e))
        elif src == tgt:
            via.setdefault(dst, []).append(("out", e))
    for other, groups in via.items():
        members = {}
        for direction, e in groups:
            for a, b in e:
                node, mid = (b, a) if direction == "in" else (a, b)
                members.setdefault(mid, set()).add(node)
        for group in members.values():
            g = sorted(group)
            for i in g:
                for j in g:
                    if i != j:
                        adj[i, j] = True
    train = set(graph.train_idx.tolist())
    correct = 0
    for v in graph.test_idx:
        votes = Counter(int(graph.labels[u]) for u in np.flatnonzero(adj[v]) if u in train)
        pred = max(sorted(votes), key=lambda c: votes[c]) if votes else 0
        correct += pred == graph.labels[v]
    return correct / len(graph.test_idx)


def test_generator_yields_learnable_structure(synthetic_graph):
    assert majority_vote_accuracy(synthetic_graph) > 0.8


def test_generator_is_deterministic():
    spec = simple_spec(60, 3, 2.0, 0.1, 0.01)
    assert dumps_graph(generate_synthetic(spec, 3)) == dumps_graph(generate_synthetic(spec, 3))
    assert dumps_graph(generate_synthetic(spec, 3)) != dumps_graph(generate_synthetic(spec, 4))


def test_generator_splits_and_labels(synthetic_graph):
    g = synthetic_graph
    assert len(g.train_idx) == 200 and len(g.val_idx) == 100 and len(g.test_idx) == 100
    assert set(np.unique(g.labels)) == {0, 1}
    assert g.features["author"] is None
    assert g.features["paper"].shape == (400, 16)


def test_generator_edges_prefer_same_class(synthetic_graph):
    e = synthetic_graph.edges["cites"]
    same = synthetic_graph.labels[e[:, 0]] == synthetic_graph.labels[e[:, 1]]
    assert same.mean() > 0.85


def test_generator_feature_means_separated_by_sigma():
    g = generate_synthetic(simple_spec(4000, 2, 5.0, 0.0, 0.0, author_nodes=1), 0)
    x, y = g.features["paper"], g.labels
    dist = np.linalg.norm(x[y == 0].mean(0) - x[y == 1].mean(0))
    assert dist == pytest.approx(5.0, abs=0.15)


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(node_types=(("paper", 0, 4),)), "count"),
        (dict(num_classes=0), "num_classes"),
        (dict(relations=(("x", "paper", "venue"),)), "relations"),
        (dict(relations=()), "relations"),
        (dict(target_type="venue"), "target_type"),
        (dict(train_frac=0.0), "train_frac"),
        (dict(train_frac=0.6, val_frac=0.3, test_frac=0.3), "split fractions"),
    ],
)
def test_generator_rejects_bad_spec(kwargs, field):
    with pytest.raises(ConfigurationError) as info:
        generate_synthetic(SyntheticSpec(**kwargs), 0)
    assert field in str(info.value)


def test_zero_node_request_rejected():
    with pytest.raises(ConfigurationError):
        generate_synthetic(simple_spec(target_nodes=0, classes=2), 0)


# -- label noise -------------------------------------------------------------


def test_noise_rho_zero_is_identity(synthetic_graph):
    g, rec = inject_label_noise(synthetic_graph, 0.0, 1)
    assert g == synthetic_graph and not rec.flipped


def test_noise_rho_one_flips_every_train_label(synthetic_graph):
    g, rec = inject_label_noise(synthetic_graph, 1.0, 1)
    tr = synthetic_graph.train_idx
    assert np.all(g.labels[tr] != synthetic_graph.labels[tr])
    assert rec.flipped == set(tr.tolist())


def test_noise_count_on_hundred_train_nodes():
    g = generate_synthetic(simple_spec(200, 4, 2.0, 0.05, 0.01), 2)
    assert len(g.train_idx) == 100
    noisy, rec = inject_label_noise(g, 0.3, 5)
    assert len(rec.flipped) == 30
    changed = np.flatnonzero(noisy.labels != g.labels)
    assert set(changed.tolist()) == rec.flipped
    for i in rec.flipped:
        assert rec.original_labels[i] == g.labels[i] != noisy.labels[i]
    for split in ("val", "test"):
        idx = g.splits[split]
        assert np.array_equal(noisy.labels[idx], g.labels[idx])


@settings(max_examples=60, deadline=None)
@given(rho=st.floats(0, 1), n_train=st.integers(1, 60), seed=st.integers(0, 2**31))
def test_noise_count_exact(rho, n_train, seed):
    g = generate_synthetic(simple_spec(4 * n_train, 3, 1.0, 0.0, 0.0, splits=(0.25, 0.25, 0.5)), 0)
    assert len(g.train_idx) == n_train
    _, rec = inject_label_noise(g, rho, seed)
    expected = int(np.floor(rho * n_train + 1e-9))
    assert len(rec.flipped) == expected
    assert rec.flipped <= set(g.train_idx.tolist())


def test_noise_deterministic(synthetic_graph):
    a = inject_label_noise(synthetic_graph, 0.3, 9)
    b = inject_label_noise(synthetic_graph, 0.3, 9)
    assert a[0] == b[0] and a[1] == b[1]


def test_noise_uniform_over_other_classes():
    g = generate_synthetic(simple_spec(4000, 4, 1.0, 0.0, 0.0, author_nodes=1, splits=(0.98, 0.01, 0.01)), 0)
    noisy, rec = inject_label_noise(g, 1.0, 3)
    tr = g.train_idx
    offsets = (noisy.labels[tr] - g.labels[tr]) % 4
    counts = np.bincount(offsets, minlength=4)
    assert counts[0] == 0
    assert np.all(np.abs(counts[1:] / len(tr) - 1 / 3) < 0.03)


# -- file format -------------------------------------------------------------


def test_round_trip_exact(tmp_path, synthetic_graph):
    p = tmp_path / "g.json"
    save_graph(synthetic_graph, p)
    back = load_graph(p)
    assert back == synthetic_graph
    assert np.array_equal(back.features["paper"], synthetic_graph.features["paper"])
    save_graph(back, tmp_path / "h.json")
    assert p.read_bytes() == (tmp_path / "h.json").read_bytes()


def test_floats_written_with_17_digits(tmp_path):
    g = generate_synthetic(simple_spec(20, 2, 1.0, 0.1, 0.1), 1)
    obj_text = dumps_graph(g)
    first_row = json.loads(obj_text)["features"]["paper"][0]
    text_row = obj_text.split('"paper":[[', 1)[1].split("]", 1)[0].split(",")
    assert len(text_row) == len(first_row)
    for tok in text_row:
        digits = tok.lstrip("-").split("e")[0].replace(".", "").lstrip("0")
        assert len(digits) >= 17 or float(tok) == 0.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), classes=st.integers(2, 4))
def test_round_trip_property(tmp_path_factory, seed, classes):
    g = generate_synthetic(simple_spec(30, classes, 2.0, 0.2, 0.05), seed)
    p = tmp_path_factory.mktemp("rt") / "g.json"
    save_graph(g, p)
    assert load_graph(p) == g


def _obj(g):
    return json.loads(dumps_graph(g))


def test_load_rejects_edge_index_out_of_range(tmp_path, small_graph):
    obj = _obj(small_graph)
    obj["edges"]["cites"].append([0, small_graph.num_target])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphValidationError, match="edge-range"):
        load_graph(p)


def test_load_rejects_label_equal_num_classes(tmp_path, small_graph):
    obj = _obj(small_graph)
    obj["labels"][0] = obj["num_classes"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphValidationError, match="label-range"):
        load_graph(p)


def test_load_rejects_overlapping_splits(tmp_path, small_graph):
    obj = _obj(small_graph)
    obj["splits"]["val"].append(obj["splits"]["train"][0])
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphValidationError, match="split-disjoint"):
        load_graph(p)


def test_load_rejects_feature_row_mismatch(tmp_path, small_graph):
    obj = _obj(small_graph)
    obj["features"]["paper"].pop()
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphValidationError, match="feature-rows"):
        load_graph(p)


def test_load_reports_parse_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n "node_types": [\n  {"name": "a", "count": 1},,\n]}')
    with pytest.raises(GraphFormatError, match="line 3"):
        load_graph(p)


def test_load_reports_missing_field(tmp_path, small_graph):
    obj = _obj(small_graph)
    del obj["splits"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GraphFormatError, match="splits"):
        load_graph(p)


def test_graph_is_immutable(small_graph):
    with pytest.raises(ValueError):
        small_graph.labels[0] = 1
    with pytest.raises(AttributeError):
        small_graph.num_classes = 5


def test_constructor_checks_invariants():
    with pytest.raises(GraphValidationError, match="split-range"):
        HeteroGraph(
            node_types=(("a", 2),), features={"a": None}, relations=(("r", "a", "a"),),
            edges={"r": [[0, 1]]}, target_type="a", labels=[0, 1],
            splits={"train": [0], "val": [], "test": [2]}, num_classes=2,
        )

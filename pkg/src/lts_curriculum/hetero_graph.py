"""Heterogeneous graph container, synthetic generator, label noise and JSON I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import ConfigurationError, GraphFormatError, GraphValidationError
from .validation import (
    check_fraction,
    check_nonnegative_int,
    check_positive_int,
    floor_count,
)

SPLITS = ("train", "val", "test")


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class HeteroGraph:
    """Typed nodes, typed directed relations and labels on one target type.

    Node indices are local to their type. ``edges[r]`` is an ``(E, 2)`` array of
    ``(source, target)`` pairs; messages flow from source to target. Arrays are
    made read-only on construction.
    """

    node_types: tuple  # ((name, count), ...)
    features: Mapping[str, Optional[np.ndarray]]
    relations: tuple  # ((name, src_type, dst_type), ...)
    edges: Mapping[str, np.ndarray]
    target_type: str
    labels: np.ndarray
    splits: Mapping[str, np.ndarray]
    num_classes: int

    def __post_init__(self):
        node_types = tuple((str(n), int(c)) for n, c in self.node_types)
        relations = tuple((str(r), str(s), str(d)) for r, s, d in self.relations)
        features = {}
        for name, _ in node_types:
            x = self.features.get(name) if self.features else None
            features[name] = None if x is None else _frozen(x, np.float64)
        edges = {}
        for rel, _, _ in relations:
            e = np.asarray(self.edges.get(rel, np.zeros((0, 2))), dtype=np.int64)
            edges[rel] = _frozen(e.reshape(-1, 2), np.int64)
        splits = {s: _frozen(np.asarray(self.splits.get(s, []), dtype=np.int64), np.int64)
                  for s in SPLITS}
        object.__setattr__(self, "node_types", node_types)
        object.__setattr__(self, "relations", relations)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
        object.__setattr__(self, "num_classes", int(self.num_classes))
        self.validate()

    # -- accessors -----------------------------------------------------------
    @property
    def counts(self):
        return dict(self.node_types)

    @property
    def num_target(self):
        return self.counts[self.target_type]

    @property
    def train_idx(self):
        return self.splits["train"]

    @property
    def val_idx(self):
        return self.splits["val"]

    @property
    def test_idx(self):
        return self.splits["test"]

    def with_labels(self, labels):
        """Copy of the graph with a replaced label vector."""
        return HeteroGraph(
            node_types=self.node_types,
            features=self.features,
            relations=self.relations,
            edges=self.edges,
            target_type=self.target_type,
            labels=labels,
            splits=self.splits,
            num_classes=self.num_classes,
        )

    def validate(self):
        counts = {}
        for name, count in self.node_types:
            if name in counts:
                raise GraphValidationError("unique-node-types", f"duplicate node type {name!r}")
            if count <= 0:
                raise GraphValidationError("node-count", f"type {name!r} has {count} nodes")
            counts[name] = count
        if self.target_type not in counts:
            raise GraphValidationError(
                "target-type", f"target type {self.target_type!r} is not a node type"
            )
        for name, x in self.features.items():
            if x is None:
                continue
            if x.ndim != 2 or x.shape[0] != counts[name]:
                raise GraphValidationError(
                    "feature-rows",
                    f"features of {name!r} have shape {x.shape}, expected ({counts[name]}, d)",
                )
            if not np.all(np.isfinite(x)):
                raise GraphValidationError("feature-finite", f"features of {name!r} contain NaN/Inf")
        seen = set()
        for rel, src, dst in self.relations:
            if rel in seen:
                raise GraphValidationError("unique-relations", f"duplicate relation {rel!r}")
            seen.add(rel)
            for end in (src, dst):
                if end not in counts:
                    raise GraphValidationError(
                        "relation-types", f"relation {rel!r} references unknown type {end!r}"
                    )
            e = self.edges[rel]
            if e.size and (e[:, 0].min() < 0 or e[:, 0].max() >= counts[src]):
                raise GraphValidationError(
                    "edge-range", f"relation {rel!r} has a source index outside [0, {counts[src]})"
                )
            if e.size and (e[:, 1].min() < 0 or e[:, 1].max() >= counts[dst]):
                raise GraphValidationError(
                    "edge-range", f"relation {rel!r} has a target index outside [0, {counts[dst]})"
                )
        extra = set(self.edges) - seen
        if extra:
            raise GraphValidationError("edge-relations", f"edges for undeclared relations {sorted(extra)}")
        if self.num_classes < 1:
            raise GraphValidationError("num-classes", f"num_classes={self.num_classes}")
        n = counts[self.target_type]
        if self.labels.shape != (n,):
            raise GraphValidationError(
                "label-count", f"expected {n} labels, got shape {self.labels.shape}"
            )
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise GraphValidationError(
                "label-range", f"labels must lie in [0, {self.num_classes})"
            )
        union = []
        for s in SPLITS:
            idx = self.splits[s]
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise GraphValidationError("split-range", f"split {s!r} indexes outside [0, {n})")
            if np.unique(idx).size != idx.size:
                raise GraphValidationError("split-unique", f"split {s!r} has repeated indices")
            union.append(idx)
        allidx = np.concatenate(union)
        if np.unique(allidx).size != allidx.size:
            raise GraphValidationError("split-disjoint", "train/val/test splits overlap")

    def __eq__(self, other):
        if not isinstance(other, HeteroGraph):
            return NotImplemented
        if (self.node_types, self.relations, self.target_type, self.num_classes) != (
            other.node_types, other.relations, other.target_type, other.num_classes
        ):
            return False
        for name, _ in self.node_types:
            a, b = self.features[name], other.features[name]
            if (a is None) != (b is None) or (a is not None and not np.array_equal(a, b)):
                return False
        return (
            all(np.array_equal(self.edges[r], other.edges[r]) for r, _, _ in self.relations)
            and np.array_equal(self.labels, other.labels)
            and all(np.array_equal(self.splits[s], other.splits[s]) for s in SPLITS)
        )

    __hash__ = None

    def summary_rows(self):
        """(type, nodes, train, val, test) rows plus (relation, src, dst, edges) rows."""
        rows = []
        for name, count in self.node_types:
            if name == self.target_type:
                rows.append((name, count, *(len(self.splits[s]) for s in SPLITS)))
            else:
                rows.append((name, count, None, None, None))
        rel_rows = [(r, s, d, len(self.edges[r])) for r, s, d in self.relations]
        return rows, rel_rows


@dataclass(frozen=True)
class NoiseRecord:
    """Which training labels were flipped, and what they were before."""

    flipped: frozenset = frozenset()
    original_labels: Mapping[int, int] = field(default_factory=dict)

    def to_dict(self):
        flipped = sorted(self.flipped)
        return {
            "flipped": flipped,
            "original_labels": {str(i): int(self.original_labels[i]) for i in flipped},
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            flipped = frozenset(int(i) for i in obj["flipped"])
            original = {int(k): int(v) for k, v in obj["original_labels"].items()}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise GraphFormatError(f"malformed noise record: {exc}") from exc
        if set(original) != set(flipped):
            raise GraphFormatError("noise record: original_labels keys differ from flipped")
        return cls(flipped, original)


# --------------------------------------------------------------------------
# synthetic generation


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a class-structured heterogeneous graph.

    ``node_types`` holds ``(name, count, feature_dim)`` triples; a feature_dim of 0
    marks a featureless type. Every node carries a latent class; target nodes
    expose it as their label. An edge of any relation is drawn independently with
    probability ``p_intra`` when both endpoints share the latent class, else
    ``p_inter``. Features are ``mean[class] + N(0, I)`` where class means sit on
    scaled coordinate axes, pairwise Euclidean distance ``sigma``.
    """

    node_types: tuple = (("paper", 400, 16), ("author", 200, 0))
    target_type: str = "paper"
    relations: tuple = (
        ("cites", "paper", "paper"),
        ("writes", "author", "paper"),
        ("written_by", "paper", "author"),
    )
    num_classes: int = 2
    sigma: float = 5.0
    p_intra: float = 0.05
    p_inter: float = 0.005
    train_frac: float = 0.5
    val_frac: float = 0.25
    test_frac: float = 0.25

    def validate(self):
        if not self.node_types:
            raise ConfigurationError("node_types", "at least one node type is required")
        names = []
        for entry in self.node_types:
            if len(entry) != 3:
                raise ConfigurationError("node_types", f"expected (name, count, dim), got {entry!r}")
            name, count, dim = entry
            check_positive_int(count, f"node_types[{name}].count")
            check_nonnegative_int(dim, f"node_types[{name}].feature_dim")
            names.append(name)
        if len(set(names)) != len(names):
            raise ConfigurationError("node_types", "duplicate type names")
        if self.target_type not in names:
            raise ConfigurationError("target_type", f"{self.target_type!r} is not a declared node type")
        if not self.relations:
            raise ConfigurationError("relations", "at least one relation is required")
        for rel in self.relations:
            if len(rel) != 3:
                raise ConfigurationError("relations", f"expected (name, src, dst), got {rel!r}")
            for end in rel[1:]:
                if end not in names:
                    raise ConfigurationError("relations", f"relation {rel[0]!r} uses unknown type {end!r}")
        if len({r[0] for r in self.relations}) != len(self.relations):
            raise ConfigurationError("relations", "duplicate relation names")
        if isinstance(self.num_classes, bool) or int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ConfigurationError("num_classes", f"must be an integer >= 2, got {self.num_classes}")
        if not (self.sigma >= 0):
            raise ConfigurationError("sigma", f"must be >= 0, got {self.sigma}")
        check_fraction(self.p_intra, "p_intra")
        check_fraction(self.p_inter, "p_inter")
        fracs = [check_fraction(getattr(self, f"{s}_frac"), f"{s}_frac") for s in SPLITS]
        if sum(fracs) > 1.0 + 1e-12:
            raise ConfigurationError("split fractions", f"sum to {sum(fracs)} > 1")
        target_count = dict((n, c) for n, c, _ in self.node_types)[self.target_type]
        for s, f in zip(SPLITS, fracs):
            if floor_count(target_count, f) == 0:
                raise ConfigurationError(f"{s}_frac", f"yields an empty {s} split for {target_count} target nodes")
        target_dim = dict((n, d) for n, _, d in self.node_types)[self.target_type]
        for name, _, dim in self.node_types:
            if dim and dim < self.num_classes:
                raise ConfigurationError(
                    f"node_types[{name}].feature_dim",
                    f"{dim} < num_classes={self.num_classes}; class means need one axis per class",
                )
            if dim and target_dim and dim != target_dim:
                raise ConfigurationError(
                    f"node_types[{name}].feature_dim",
                    f"featured types must share one input width ({target_dim})",
                )


def _sbm_edges(rng, cls_src, cls_dst, p_intra, p_inter, no_self_loops):
    same = cls_src[:, None] == cls_dst[None, :]
    prob = np.where(same, p_intra, p_inter)
    draw = rng.random(prob.shape) < prob
    if no_self_loops:
        np.fill_diagonal(draw, False)
    src, dst = np.nonzero(draw)
    return np.stack([src, dst], axis=1).astype(np.int64)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> HeteroGraph:
    """Sample a graph from ``spec``; a pure function of ``(spec, seed)``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    C = int(spec.num_classes)
    latent = {}
    features = {}
    for name, count, dim in spec.node_types:
        cls = rng.integers(0, C, size=count)
        latent[name] = cls
        if dim:
            means = np.zeros((C, dim))
            means[np.arange(C), np.arange(C)] = spec.sigma / np.sqrt(2.0)
            features[name] = means[cls] + rng.standard_normal((count, dim))
        else:
            features[name] = None

    edges = {}
    for rel, src, dst in spec.relations:
        edges[rel] = _sbm_edges(
            rng, latent[src], latent[dst], spec.p_intra, spec.p_inter, no_self_loops=src == dst
        )

    n = dict((nm, c) for nm, c, _ in spec.node_types)[spec.target_type]
    perm = rng.permutation(n)
    sizes = [floor_count(n, getattr(spec, f"{s}_frac")) for s in SPLITS]
    bounds = np.cumsum([0] + sizes)
    splits = {s: np.sort(perm[bounds[i]:bounds[i + 1]]) for i, s in enumerate(SPLITS)}

    return HeteroGraph(
        node_types=tuple((nm, c) for nm, c, _ in spec.node_types),
        features=features,
        relations=tuple(spec.relations),
        edges=edges,
        target_type=spec.target_type,
        labels=latent[spec.target_type],
        splits=splits,
        num_classes=C,
    )


def inject_label_noise(graph: HeteroGraph, rho: float, seed: int):
    """Flip ``floor(rho * |train|)`` training labels to a different class.

    Victims are drawn uniformly without replacement; each new label is uniform
    over the ``num_classes - 1`` other classes. Returns ``(noisy_graph, record)``.
    """
    rho = check_fraction(rho, "rho")
    train = graph.train_idx
    n_flip = floor_count(len(train), rho)
    if n_flip == 0:
        return graph, NoiseRecord()
    if graph.num_classes < 2:
        raise ConfigurationError("num_classes", "label flipping needs at least 2 classes")
    rng = np.random.default_rng(seed)
    victims = rng.choice(train, size=n_flip, replace=False)
    labels = graph.labels.copy()
    old = labels[victims]
    # offset in [1, C-1] guarantees a different class, uniform over the rest
    offset = rng.integers(1, graph.num_classes, size=n_flip)
    labels[victims] = (old + offset) % graph.num_classes
    record = NoiseRecord(
        flipped=frozenset(int(v) for v in victims),
        original_labels={int(v): int(o) for v, o in zip(victims, old)},
    )
    return graph.with_labels(labels), record


# --------------------------------------------------------------------------
# JSON I/O


def format_float(x):
    """Round-trip-exact decimal text with 17 significant digits."""
    return format(float(x), ".16e")


def matrix_to_json(mat):
    rows = (",".join(format_float(v) for v in row) for row in np.asarray(mat))
    return "[" + ",".join("[" + r + "]" for r in rows) + "]"


def _int_list(values):
    return "[" + ",".join(str(int(v)) for v in values) + "]"


def dumps_graph(graph: HeteroGraph) -> str:
    parts = []
    parts.append('"node_types":' + json.dumps([{"name": n, "count": c} for n, c in graph.node_types]))
    feats = ",".join(
        json.dumps(name) + ":" + ("null" if graph.features[name] is None
                                  else matrix_to_json(graph.features[name]))
        for name, _ in graph.node_types
    )
    parts.append('"features":{' + feats + "}")
    parts.append('"relations":' + json.dumps(
        [{"name": r, "src": s, "dst": d} for r, s, d in graph.relations]))
    edges = ",".join(
        json.dumps(r) + ":[" + ",".join(f"[{int(a)},{int(b)}]" for a, b in graph.edges[r]) + "]"
        for r, _, _ in graph.relations
    )
    parts.append('"edges":{' + edges + "}")
    parts.append('"target_type":' + json.dumps(graph.target_type))
    parts.append('"labels":' + _int_list(graph.labels))
    parts.append('"num_classes":' + str(graph.num_classes))
    parts.append('"splits":{' + ",".join(
        f'"{s}":' + _int_list(graph.splits[s]) for s in SPLITS) + "}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def save_graph(graph: HeteroGraph, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_graph(graph), encoding="utf-8")


def _require(obj, key, where="graph"):
    if not isinstance(obj, dict) or key not in obj:
        raise GraphFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def parse_json_text(text, source="<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(
            f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def graph_from_obj(obj) -> HeteroGraph:
    if not isinstance(obj, dict):
        raise GraphFormatError("graph: top level must be a JSON object")
    try:
        node_types = [(_require(t, "name", "node_types[]"), _require(t, "count", "node_types[]"))
                      for t in _require(obj, "node_types")]
        feats_obj = _require(obj, "features")
        if not isinstance(feats_obj, dict):
            raise GraphFormatError("features: expected an object")
        features = {}
        for name, mat in feats_obj.items():
            if mat is None:
                features[name] = None
                continue
            arr = np.array(mat, dtype=np.float64)
            if arr.ndim != 2:
                raise GraphFormatError(f"features[{name!r}]: expected a 2-D array")
            features[name] = arr
        unknown = set(features) - {n for n, _ in node_types}
        if unknown:
            raise GraphValidationError("feature-types", f"features for unknown types {sorted(unknown)}")
        relations = [(_require(r, "name", "relations[]"), _require(r, "src", "relations[]"),
                      _require(r, "dst", "relations[]")) for r in _require(obj, "relations")]
        edges_obj = _require(obj, "edges")
        if not isinstance(edges_obj, dict):
            raise GraphFormatError("edges: expected an object")
        edges = {}
        for rel, pairs in edges_obj.items():
            arr = np.array(pairs, dtype=np.int64)
            if arr.size and (arr.ndim != 2 or arr.shape[1] != 2):
                raise GraphFormatError(f"edges[{rel!r}]: expected an array of [src, dst] pairs")
            edges[rel] = arr.reshape(-1, 2)
        splits_obj = _require(obj, "splits")
        splits = {s: np.array(_require(splits_obj, s, "splits"), dtype=np.int64) for s in SPLITS}
        labels = np.array(_require(obj, "labels"), dtype=np.int64)
        return HeteroGraph(
            node_types=node_types,
            features=features,
            relations=relations,
            edges=edges,
            target_type=_require(obj, "target_type"),
            labels=labels,
            splits=splits,
            num_classes=_require(obj, "num_classes"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (GraphFormatError, GraphValidationError)):
            raise
        raise GraphFormatError(f"graph: malformed value: {exc}") from exc


def load_graph(path) -> HeteroGraph:
    path = Path(path)
    return graph_from_obj(parse_json_text(path.read_text(encoding="utf-8"), str(path)))


def noise_path_for(graph_path) -> Path:
    """Sidecar location for the noise record of a graph file."""
    p = Path(graph_path)
    return p.with_name(p.stem + ".noise.json")


def save_noise(record: NoiseRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_noise(path) -> NoiseRecord:
    path = Path(path)
    return NoiseRecord.from_dict(parse_json_text(path.read_text(encoding="utf-8"), str(path)))


def synthetic_spec_from_dict(obj: Mapping) -> SyntheticSpec:
    """Build a spec from a flat mapping; unknown keys are ignored."""
    kw = {}
    for key in ("target_type", "num_classes", "sigma", "p_intra", "p_inter",
                "train_frac", "val_frac", "test_frac"):
        if key in obj:
            kw[key] = obj[key]
    if "node_types" in obj:
        kw["node_types"] = tuple(tuple(t) for t in obj["node_types"])
    if "relations" in obj:
        kw["relations"] = tuple(tuple(r) for r in obj["relations"])
    return SyntheticSpec(**kw)


def simple_spec(target_nodes: int = 400, classes: int = 2, sigma: float = 5.0,
                p_intra: float = 0.05, p_inter: float = 0.005, feature_dim: int = 16,
                author_nodes: Optional[int] = None,
                splits: Sequence[float] = (0.5, 0.25, 0.25)) -> SyntheticSpec:
    """Two-type paper/author spec with citation and authorship relations."""
    if author_nodes is None:
        author_nodes = max(1, target_nodes // 2)
    return SyntheticSpec(
        node_types=(("paper", target_nodes, feature_dim), ("author", author_nodes, 0)),
        target_type="paper",
        num_classes=classes,
        sigma=sigma,
        p_intra=p_intra,
        p_inter=p_inter,
        train_frac=splits[0],
        val_frac=splits[1],
        test_frac=splits[2],
    )

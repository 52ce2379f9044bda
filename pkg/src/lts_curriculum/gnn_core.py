"""Relational GCN backbone with hand-written reverse-mode gradients.

Layer rule for a node ``v`` of any type::

    h_v' = relu(h_v @ W_self + sum_r mean_{u in N_r(v)} h_u @ W_r)

where ``N_r(v)`` are the sources of relation-``r`` edges ending at ``v``. A relation
with no incoming edges at ``v`` contributes zero. Logits are ``h_target @ head``
on the final layer, with no activation. Everything is float64.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ContractError, GraphFormatError, ShapeError, StaleTraceError
from .hetero_graph import HeteroGraph, matrix_to_json, parse_json_text
from .validation import check_index_array, check_positive_int


class RelationalModelParams:
    """Ordered name -> matrix mapping of backbone weights.

    Names: ``emb/<type>`` (learned inputs for featureless types), ``self/<layer>``,
    ``rel/<relation>/<layer>`` and ``head``.
    """

    def __init__(self, arrays: Dict[str, np.ndarray]):
        self._arrays = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}

    def __getitem__(self, name):
        return self._arrays[name]

    def __contains__(self, name):
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self):
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    def keys(self):
        return self._arrays.keys()

    def copy(self):
        return RelationalModelParams({k: v.copy() for k, v in self._arrays.items()})

    def zeros_like(self):
        return RelationalModelParams({k: np.zeros_like(v) for k, v in self._arrays.items()})

    def replace(self, **updates):
        arrays = dict(self._arrays)
        arrays.update(updates)
        return RelationalModelParams(arrays)

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for k, v in self._arrays.items():
            h.update(k.encode())
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self._arrays.values())

    def equals(self, other) -> bool:
        return list(self) == list(other) and all(
            np.array_equal(self[k], other[k]) for k in self
        )

    # layer / relation views
    @property
    def num_layers(self):
        return sum(1 for k in self._arrays if k.startswith("self/"))

    def self_weight(self, layer):
        return self._arrays[f"self/{layer}"]

    def rel_weight(self, relation, layer):
        return self._arrays[f"rel/{relation}/{layer}"]

    @property
    def head(self):
        return self._arrays["head"]


@dataclass(frozen=True)
class ModelDims:
    in_dim: int
    hidden_dim: int
    num_classes: int
    num_layers: int
    embedding_rows: Tuple[Tuple[str, int], ...]  # featureless (type, count)

    @classmethod
    def from_graph(cls, graph: HeteroGraph, hidden_dim=32, num_layers=2):
        dims = {x.shape[1] for x in graph.features.values() if x is not None}
        if len(dims) > 1:
            raise ShapeError(f"featured node types disagree on input width: {sorted(dims)}")
        in_dim = dims.pop() if dims else hidden_dim
        emb = tuple((n, c) for n, c in graph.node_types if graph.features[n] is None)
        return cls(in_dim, hidden_dim, graph.num_classes, num_layers, emb)


def glorot_bound(d_in, d_out):
    return float(np.sqrt(6.0 / (d_in + d_out)))


def init_params(dims: ModelDims, relations, seed) -> RelationalModelParams:
    """Uniform Glorot initialization, deterministic for a given seed.

    ``relations`` is an iterable of relation names or ``(name, src, dst)`` triples.
    """
    for field in ("in_dim", "hidden_dim", "num_classes", "num_layers"):
        check_positive_int(getattr(dims, field), field)
    for name, count in dims.embedding_rows:
        check_positive_int(count, f"embedding rows of {name!r}")
    rel_names = [r if isinstance(r, str) else r[0] for r in relations]
    rng = np.random.default_rng(seed)

    def draw(d_in, d_out):
        a = glorot_bound(d_in, d_out)
        return rng.uniform(-a, a, size=(d_in, d_out))

    arrays = {}
    for name, count in dims.embedding_rows:
        arrays[f"emb/{name}"] = draw(count, dims.in_dim)
    for layer in range(dims.num_layers):
        d_in = dims.in_dim if layer == 0 else dims.hidden_dim
        arrays[f"self/{layer}"] = draw(d_in, dims.hidden_dim)
        for rel in rel_names:
            arrays[f"rel/{rel}/{layer}"] = draw(d_in, dims.hidden_dim)
    arrays["head"] = draw(dims.hidden_dim, dims.num_classes)
    return RelationalModelParams(arrays)


def init_params_for_graph(graph, hidden_dim=32, num_layers=2, seed=0):
    dims = ModelDims.from_graph(graph, hidden_dim, num_layers)
    return init_params(dims, graph.relations, seed)


def mean_adjacency(graph: HeteroGraph) -> Dict[str, sp.csr_matrix]:
    """Row-normalized ``dst x src`` matrices, one per relation (cached on the graph)."""
    cached = graph.__dict__.get("_mean_adjacency")
    if cached is not None:
        return cached
    counts = graph.counts
    out = {}
    for rel, src, dst in graph.relations:
        e = graph.edges[rel]
        a = sp.coo_matrix(
            (np.ones(len(e)), (e[:, 1], e[:, 0])), shape=(counts[dst], counts[src])
        ).tocsr()
        a.sum_duplicates()
        deg = np.asarray(a.sum(axis=1)).ravel()
        inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
        out[rel] = sp.diags(inv) @ a
    graph.__dict__["_mean_adjacency"] = out
    return out


def _input_features(graph, params):
    h0 = {}
    for name, count in graph.node_types:
        x = graph.features[name]
        if x is None:
            key = f"emb/{name}"
            if key not in params:
                raise ShapeError(f"featureless type {name!r} has no embedding {key!r}")
            x = params[key]
            if x.shape[0] != count:
                raise ShapeError(f"{key} has {x.shape[0]} rows, type {name!r} has {count} nodes")
        h0[name] = x
    return h0


def check_dims(graph: HeteroGraph, params: RelationalModelParams):
    """Raise ShapeError naming the first inconsistent layer/relation."""
    L = params.num_layers
    if L == 0:
        raise ShapeError("params have no layers")
    h0 = _input_features(graph, params)
    widths = {x.shape[1] for x in h0.values()}
    if len(widths) != 1:
        raise ShapeError(f"input widths differ across node types: {sorted(widths)}")
    d = widths.pop()
    for layer in range(L):
        w = params.self_weight(layer)
        if w.ndim != 2 or w.shape[0] != d:
            raise ShapeError(f"layer {layer}: self weight {w.shape} expects input width {d}")
        for rel, _, _ in graph.relations:
            key = f"rel/{rel}/{layer}"
            if key not in params:
                raise ShapeError(f"layer {layer}: missing weight for relation {rel!r}")
            if params[key].shape != w.shape:
                raise ShapeError(
                    f"layer {layer}, relation {rel!r}: shape {params[key].shape} != {w.shape}"
                )
        d = w.shape[1]
    head = params.head
    if head.shape != (d, graph.num_classes):
        raise ShapeError(f"head shape {head.shape}, expected ({d}, {graph.num_classes})")


@dataclass
class ForwardTrace:
    """Activations cached by :func:`forward` for :func:`backward`."""

    hidden: list      # hidden[l][type]: input to layer l (hidden[0] = inputs)
    pre: list         # pre[l][type]: pre-activation of layer l
    messages: list    # messages[l][rel]: mean-aggregated source activations
    logits: np.ndarray
    graph_id: int
    params_digest: str


def forward(graph: HeteroGraph, params: RelationalModelParams):
    """Return ``(logits, trace)`` for all target-type nodes."""
    check_dims(graph, params)
    adj = mean_adjacency(graph)
    h = _input_features(graph, params)
    hidden, pres, msgs = [h], [], []
    for layer in range(params.num_layers):
        ws = params.self_weight(layer)
        pre = {name: h[name] @ ws for name, _ in graph.node_types}
        m = {}
        for rel, src, dst in graph.relations:
            m[rel] = adj[rel] @ h[src]
            pre[dst] = pre[dst] + m[rel] @ params.rel_weight(rel, layer)
        h = {name: np.maximum(p, 0.0) for name, p in pre.items()}
        pres.append(pre)
        msgs.append(m)
        hidden.append(h)
    logits = h[graph.target_type] @ params.head
    trace = ForwardTrace(hidden, pres, msgs, logits, id(graph), params.digest())
    return logits, trace


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def per_node_losses(logits, labels, node_indices):
    """Unreduced cross-entropy ``-log softmax(z_v)[y_v]`` in ``node_indices`` order."""
    logits = np.asarray(logits, dtype=np.float64)
    idx = check_index_array(node_indices, logits.shape[0], "node_indices")
    y = np.asarray(labels)[idx]
    if y.size and (y.min() < 0 or y.max() >= logits.shape[1]):
        raise IndexError("label outside [0, num_classes)")
    lsm = log_softmax(logits[idx])
    return -lsm[np.arange(len(idx)), y]


def predict(logits):
    """Argmax per row; ties go to the lowest class id."""
    return np.argmax(logits, axis=1)


def backward(trace: ForwardTrace, selected_indices, graph: HeteroGraph,
             params: RelationalModelParams) -> RelationalModelParams:
    """Gradient of the mean loss over ``selected_indices`` w.r.t. every parameter."""
    if trace.graph_id != id(graph) or trace.params_digest != params.digest():
        raise StaleTraceError("trace was produced for a different graph or parameter state")
    sel = check_index_array(selected_indices, graph.num_target, "selected_indices")
    if sel.size == 0:
        raise ContractError("selected_indices must be nonempty")

    adj = mean_adjacency(graph)
    grads = params.zeros_like()
    g = grads._arrays

    # d mean(CE) / d logits, nonzero on selected rows only (duplicates accumulate)
    probs = np.exp(log_softmax(trace.logits[sel]))
    probs[np.arange(len(sel)), graph.labels[sel]] -= 1.0
    dlogits = np.zeros_like(trace.logits)
    np.add.at(dlogits, sel, probs / len(sel))

    L = params.num_layers
    tgt = graph.target_type
    g["head"] = trace.hidden[L][tgt].T @ dlogits
    dh = {name: np.zeros_like(trace.hidden[L][name]) for name, _ in graph.node_types}
    dh[tgt] = dlogits @ params.head.T

    for layer in reversed(range(L)):
        h_in = trace.hidden[layer]
        dpre = {name: dh[name] * (trace.pre[layer][name] > 0) for name in dh}
        ws = params.self_weight(layer)
        g_self = np.zeros_like(ws)
        dh_in = {}
        for name, _ in graph.node_types:
            g_self += h_in[name].T @ dpre[name]
            dh_in[name] = dpre[name] @ ws.T
        g[f"self/{layer}"] = g_self
        for rel, src, dst in graph.relations:
            wr = params.rel_weight(rel, layer)
            g[f"rel/{rel}/{layer}"] = trace.messages[layer][rel].T @ dpre[dst]
            dh_in[src] = dh_in[src] + adj[rel].T @ (dpre[dst] @ wr.T)
        dh = dh_in

    for name, _ in graph.node_types:
        key = f"emb/{name}"
        if key in g:
            g[key] = dh[name]
    return grads


def selected_mean_loss(graph, params, selected_indices):
    logits, _ = forward(graph, params)
    return float(per_node_losses(logits, graph.labels, selected_indices).mean())


def gradient_check(graph, params, selected_indices, eps=1e-5, backward_fn=backward):
    """Compare analytic gradients with central finite differences.

    Returns ``{name: relative_error}`` where the error of a tensor is
    ``||g_analytic - g_numeric|| / max(||g_analytic|| + ||g_numeric||, 1e-12)``.
    """
    _, trace = forward(graph, params)
    analytic = backward_fn(trace, selected_indices, graph, params)
    errors = {}
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            up = selected_mean_loss(graph, params, selected_indices)
            value[idx] = orig - eps
            down = selected_mean_loss(graph, params, selected_indices)
            value[idx] = orig
            numeric[idx] = (up - down) / (2.0 * eps)
        diff = np.linalg.norm(analytic[name] - numeric)
        scale = max(np.linalg.norm(analytic[name]) + np.linalg.norm(numeric), 1e-12)
        errors[name] = float(diff / scale)
    return errors


def params_to_json(params: RelationalModelParams) -> str:
    body = ",\n".join(f"{json.dumps(k)}:{matrix_to_json(v)}" for k, v in params.items())
    return "{\n" + body + "\n}\n"


def params_from_json(text: str) -> RelationalModelParams:
    obj = parse_json_text(text, "checkpoint")
    if not isinstance(obj, dict):
        raise GraphFormatError("checkpoint: expected an object of name -> matrix")
    arrays = {}
    for k, v in obj.items():
        arr = np.array(v, dtype=np.float64)
        if arr.ndim != 2:
            raise GraphFormatError(f"checkpoint[{k!r}]: expected a 2-D array")
        arrays[k] = arr
    return RelationalModelParams(arrays)

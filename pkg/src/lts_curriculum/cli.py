"""Command-line interface: ``lts generate | train | compare | gradcheck``.

Exit codes: 0 success, 1 check failure, 2 usage or input error, 3 divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import warnings
from importlib import metadata, resources
from pathlib import Path

import numpy as np

from .curriculum import ScheduleConfig
from .exceptions import DivergenceError, LTSError
from .experiment import compare
from .gnn_core import backward, gradient_check, init_params_for_graph, params_to_json
from .hetero_graph import (
    generate_synthetic,
    inject_label_noise,
    load_graph,
    load_noise,
    noise_path_for,
    parse_json_text,
    save_graph,
    save_noise,
    simple_spec,
    synthetic_spec_from_dict,
)
from .trainer import TrainConfig, run_training, summary_json

logger = logging.getLogger("lts_curriculum")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

TRAIN_KEYS = ("scheduler", "lambda0", "T", "learning_rate", "optimizer", "beta1", "beta2",
              "epsilon", "max_epochs", "patience", "hidden_dim", "num_layers", "seed")


class UsageError(Exception):
    pass


def default_config():
    text = resources.files("lts_curriculum").joinpath("default_config.json").read_text()
    return json.loads(text)


def read_flat_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    obj = parse_json_text(text, str(path))
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: config must be a JSON object of flat keys")
    return obj


def resolve_train_config(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = default_config()
    if args.config:
        file_cfg = read_flat_config(args.config)
        unknown = set(file_cfg) - set(TRAIN_KEYS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in TRAIN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def build_train_config(cfg) -> TrainConfig:
    schedule = None
    if cfg["scheduler"] != "none":
        schedule = ScheduleConfig(cfg["lambda0"], cfg["T"], cfg["scheduler"])
    fields = {k: cfg[k] for k in TRAIN_KEYS if k not in ("scheduler", "lambda0", "T")}
    return TrainConfig(schedule=schedule, **fields)


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for dist in ("lts-curriculum", "scipy", "scikit-learn"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def write_run_meta(out_dir, command, config, inputs):
    meta = {"command": command, "config": config, "inputs": inputs, "versions": versions()}
    Path(out_dir, "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _load_graph_arg(path):
    try:
        return load_graph(path)
    except OSError as exc:
        raise UsageError(f"cannot read graph {path}: {exc}") from exc


def _load_noise_arg(args):
    path = args.noise_record
    if path is None:
        sidecar = noise_path_for(args.graph)
        path = sidecar if sidecar.exists() else None
    return (load_noise(path), str(path)) if path else (None, None)


# -- commands -------------------------------------------------------------------


def cmd_generate(args):
    spec_kw = {}
    if args.config:
        spec_kw = read_flat_config(args.config)
    if spec_kw.get("node_types"):
        spec = synthetic_spec_from_dict(spec_kw)
    else:
        def pick(flag, key, default):
            v = getattr(args, flag)
            return v if v is not None else spec_kw.get(key, default)

        spec = simple_spec(
            target_nodes=pick("target_nodes", "target_nodes", 400),
            classes=pick("classes", "num_classes", 2),
            sigma=pick("sigma", "sigma", 5.0),
            p_intra=pick("p_intra", "p_intra", 0.05),
            p_inter=pick("p_inter", "p_inter", 0.005),
            feature_dim=pick("feature_dim", "feature_dim", 16),
            author_nodes=pick("author_nodes", "author_nodes", None),
            splits=(pick("train_frac", "train_frac", 0.5), pick("val_frac", "val_frac", 0.25),
                    pick("test_frac", "test_frac", 0.25)),
        )
    seed = args.seed if args.seed is not None else spec_kw.get("seed", 0)
    graph = generate_synthetic(spec, seed)
    out = Path(args.out)
    record = None
    if args.noise:
        graph, record = inject_label_noise(graph, args.noise, seed)
    save_graph(graph, out)
    if record is not None:
        save_noise(record, noise_path_for(out))

    rows, rel_rows = graph.summary_rows()
    print(f"{'Node type':<12} {'Nodes':>7} {'Train':>7} {'Validation':>10} {'Test':>7}")
    for name, count, tr, va, te in rows:
        cells = [f"{x:>7}" if x is not None else f"{'--':>7}" for x in (tr, va, te)]
        print(f"{name:<12} {count:>7} {cells[0]} {cells[1]:>10} {cells[2]}")
    print(f"{'Relation':<12} {'Edges':>7}  (src -> dst)")
    for rel, src, dst, n in rel_rows:
        print(f"{rel:<12} {n:>7}  ({src} -> {dst})")
    if record is not None:
        print(f"label noise: flipped {len(record.flipped)} of {len(graph.train_idx)} "
              f"training labels (rho={args.noise})")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_train(args):
    graph = _load_graph_arg(args.graph)
    noise, noise_path = _load_noise_arg(args)
    cfg = resolve_train_config(args)
    config = build_train_config(cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_run_meta(out_dir, "train", cfg, {
        "graph": str(args.graph), "graph_sha256": file_sha256(args.graph), "noise_record": noise_path,
    })
    try:
        report = run_training(graph, config, noise=noise, record_time=args.timing)
    except DivergenceError as exc:
        (out_dir / "metrics.csv").write_text(exc.report.to_csv(include_noise=noise is not None))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    (out_dir / "metrics.csv").write_text(report.to_csv(include_noise=noise is not None))
    (out_dir / "summary.json").write_text(summary_json(report))
    (out_dir / "params.json").write_text(params_to_json(report.params))
    print(summary_json(report), end="")
    return EXIT_OK


def parse_seeds(text):
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("--seeds is empty")
    return seeds


def cmd_compare(args):
    graph = _load_graph_arg(args.graph)
    noise, noise_path = _load_noise_arg(args)
    cfg = resolve_train_config(args)
    config = build_train_config(cfg)
    seeds = parse_seeds(args.seeds)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = compare(graph, config, seeds, noise=noise, jobs=args.jobs)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(result.table())
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "compare.csv").write_text(result.to_csv())
        (out_dir / "compare.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
        (out_dir / "compare.txt").write_text(result.table() + "\n")
        write_run_meta(out_dir, "compare", {**cfg, "seeds": seeds}, {
            "graph": str(args.graph), "graph_sha256": file_sha256(args.graph),
            "noise_record": noise_path,
        })
    return EXIT_OK


def _corrupted_backward(trace, selected, graph, params):
    grads = backward(trace, selected, graph, params)
    return grads.replace(head=grads["head"] * 1.5)


def cmd_gradcheck(args):
    if args.graph:
        graph = _load_graph_arg(args.graph)
    else:
        graph = generate_synthetic(simple_spec(12, 3, 1.0, 0.3, 0.1, feature_dim=4,
                                               author_nodes=6), args.seed)
    total = sum(c for _, c in graph.node_types)
    if total > 50:
        raise UsageError(f"gradcheck needs a graph with at most 50 nodes, got {total}")
    params = init_params_for_graph(graph, args.hidden_dim, args.num_layers, args.seed)
    rng = np.random.default_rng(args.seed)
    train = graph.train_idx
    k = max(1, int(round(args.fraction * len(train))))
    selected = np.sort(rng.choice(train, size=k, replace=False))
    fn = _corrupted_backward if args.corrupt_backward else backward
    errors = gradient_check(graph, params, selected, eps=args.eps, backward_fn=fn)
    print(f"eps={args.eps:g} selected={k}/{len(train)} tolerance={args.tol:g}")
    for name, err in errors.items():
        print(f"  {name:<24} {err:.3e}")
    worst = max(errors.values())
    ok = worst < args.tol
    print(f"max relative error {worst:.3e}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


# -- parser -----------------------------------------------------------------------


def _add_schedule_flags(p):
    p.add_argument("--config", help="JSON file of flat training keys; flags override it")
    p.add_argument("--scheduler", choices=("linear", "root", "geom", "none"))
    p.add_argument("--lambda0", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--lr", "--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--noise-record", help="noise sidecar (default: <graph>.noise.json if present)")


def build_parser():
    parser = argparse.ArgumentParser(prog="lts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a synthetic heterogeneous graph")
    g.add_argument("-o", "--out", required=True, help="graph JSON to write")
    g.add_argument("--config", help="JSON synthetic-spec file (flat keys)")
    g.add_argument("--seed", type=int)
    g.add_argument("--target-nodes", dest="target_nodes", type=int)
    g.add_argument("--author-nodes", dest="author_nodes", type=int)
    g.add_argument("--classes", type=int)
    g.add_argument("--feature-dim", dest="feature_dim", type=int)
    g.add_argument("--sigma", type=float)
    g.add_argument("--p-intra", dest="p_intra", type=float)
    g.add_argument("--p-inter", dest="p_inter", type=float)
    g.add_argument("--train-frac", dest="train_frac", type=float)
    g.add_argument("--val-frac", dest="val_frac", type=float)
    g.add_argument("--test-frac", dest="test_frac", type=float)
    g.add_argument("--noise", type=float, default=0.0, help="fraction of train labels to flip")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one model and write per-epoch metrics")
    t.add_argument("graph")
    t.add_argument("-o", "--out", default="lts-run", help="output directory (default: lts-run)")
    t.add_argument("--seed", type=int)
    t.add_argument("--timing", action="store_true", help="record wall time in the ms column")
    _add_schedule_flags(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="baseline vs curriculum over several seeds")
    c.add_argument("graph")
    c.add_argument("-o", "--out", help="directory for compare.csv/json/txt")
    c.add_argument("--seeds", default="1-10", help="e.g. 1-10 or 1,2,5")
    c.add_argument("--seed", type=int, help=argparse.SUPPRESS)
    c.add_argument("--jobs", type=int, default=1)
    _add_schedule_flags(c)
    c.set_defaults(func=cmd_compare)

    k = sub.add_parser("gradcheck", help="finite-difference check of the backward pass")
    k.add_argument("--graph", help="graph JSON with at most 50 nodes (default: generated)")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--eps", type=float, default=1e-5)
    k.add_argument("--tol", type=float, default=1e-4)
    k.add_argument("--fraction", type=float, default=0.5, help="share of train nodes selected")
    k.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=4)
    k.add_argument("--num-layers", dest="num_layers", type=int, default=2)
    k.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)
    k.add_argument("-o", "--out", help=argparse.SUPPRESS)
    k.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, LTSError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Full-batch training loop with the loss-aware curriculum and early stopping."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .curriculum import ScheduleConfig, ScheduleState, advance, select_nodes
from .exceptions import ConfigurationError, DivergenceError
from .gnn_core import (
    RelationalModelParams,
    backward,
    forward,
    init_params_for_graph,
    per_node_losses,
    predict,
)
from .hetero_graph import HeteroGraph, NoiseRecord
from .metrics import accuracy, exclusion_purity
from .validation import check_fraction, check_positive_int, check_positive_real

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")
CSV_COLUMNS = ("epoch", "lambda", "selected", "mean_loss", "train_acc", "val_acc", "test_acc", "ms")
NOISE_COLUMNS = ("excl_noisy_frac", "global_noisy_frac")


@dataclass(frozen=True)
class TrainConfig:
    schedule: Optional[ScheduleConfig] = None  # None -> plain full-set baseline
    learning_rate: float = 0.01
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_epochs: int = 500
    patience: int = 30
    hidden_dim: int = 32
    num_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        check_positive_real(self.learning_rate, "learning_rate")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError("optimizer", f"expected one of {OPTIMIZERS}, got {self.optimizer!r}")
        check_fraction(self.beta1, "beta1")
        check_fraction(self.beta2, "beta2")
        if not self.beta1 < 1 or not self.beta2 < 1:
            raise ConfigurationError("beta1/beta2", "must be < 1")
        check_positive_real(self.epsilon, "epsilon")
        check_positive_int(self.max_epochs, "max_epochs")
        check_positive_int(self.patience, "patience")
        check_positive_int(self.hidden_dim, "hidden_dim")
        check_positive_int(self.num_layers, "num_layers")
        if self.schedule is not None and self.max_epochs < self.schedule.T:
            raise ConfigurationError(
                "max_epochs", f"{self.max_epochs} is smaller than T={self.schedule.T}"
            )

    def to_dict(self):
        d = asdict(self)
        sched = d.pop("schedule")
        if sched is None:
            d.update(scheduler="none")
        else:
            d.update(sched)
        return d


# --------------------------------------------------------------------------
# optimizer


@dataclass(frozen=True)
class OptimizerState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(params: RelationalModelParams, grads: RelationalModelParams,
                   state: OptimizerState, config: TrainConfig):
    """One SGD or bias-corrected Adam update. Returns ``(params', state')``."""
    lr = config.learning_rate
    if config.optimizer == "sgd":
        new = {k: p - lr * grads[k] for k, p in params.items()}
        return RelationalModelParams(new), replace(state, step=state.step + 1)

    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    t = state.step + 1
    new, m_new, v_new = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = b1 * state.m.get(k, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(k, 0.0) + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        new[k] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        m_new[k], v_new[k] = m, v
    return RelationalModelParams(new), OptimizerState(t, m_new, v_new)


# --------------------------------------------------------------------------
# epochs and reports


@dataclass
class EpochRow:
    epoch: int
    lam: float
    selected: int
    mean_loss: float
    train_acc: float
    val_acc: float
    test_acc: float
    ms: float = 0.0
    excl_noisy_frac: Optional[float] = None
    global_noisy_frac: Optional[float] = None


@dataclass
class TrainReport:
    rows: List[EpochRow] = field(default_factory=list)
    best_epoch: int = -1
    best_val_acc: float = -1.0
    test_acc: float = float("nan")
    stop_reason: str = ""
    params: Optional[RelationalModelParams] = None  # parameters at the best-val epoch

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def summary(self):
        return {
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "test_acc": self.test_acc,
            "epochs_run": len(self.rows),
            "stop_reason": self.stop_reason,
        }

    def to_csv(self, include_noise=None) -> str:
        if include_noise is None:
            include_noise = any(r.excl_noisy_frac is not None for r in self.rows)
        cols = CSV_COLUMNS + (NOISE_COLUMNS if include_noise else ())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            vals = [r.epoch, repr(r.lam), r.selected, repr(r.mean_loss), repr(r.train_acc),
                    repr(r.val_acc), repr(r.test_acc), repr(round(r.ms, 3))]
            if include_noise:
                vals += [repr(r.excl_noisy_frac), repr(r.global_noisy_frac)]
            w.writerow(vals)
        return buf.getvalue()


def _evaluate(graph, logits, split):
    idx = graph.splits[split]
    if idx.size == 0:
        return float("nan")
    return accuracy(predict(logits[idx]), graph.labels[idx])


def train_epoch(graph: HeteroGraph, params: RelationalModelParams, opt_state: OptimizerState,
                sched_state: ScheduleState, config: TrainConfig,
                noise: Optional[NoiseRecord] = None, record_time=False):
    """Rank, select, backpropagate the selected mean and step once.

    Returns ``(params', opt_state', row)``. Accuracies use the updated parameters.
    """
    start = time.perf_counter()
    with np.errstate(over="ignore", invalid="ignore"):
        params, opt_state, row = _train_epoch(graph, params, opt_state, sched_state, config, noise)
    if record_time:
        row.ms = (time.perf_counter() - start) * 1000.0
    return params, opt_state, row


def _train_epoch(graph, params, opt_state, sched_state, config, noise):
    train = graph.train_idx
    logits, trace = forward(graph, params)
    losses = per_node_losses(logits, graph.labels, train)
    if not np.all(np.isfinite(losses)):
        raise DivergenceError(sched_state.epoch, config.learning_rate)
    sel = select_nodes(losses, sched_state.proportion)
    grads = backward(trace, train[sel.selected], graph, params)
    params, opt_state = optimizer_step(params, grads, opt_state, config)
    if not params.is_finite():
        raise DivergenceError(sched_state.epoch, config.learning_rate)

    logits, _ = forward(graph, params)
    if not np.all(np.isfinite(logits)):
        raise DivergenceError(sched_state.epoch, config.learning_rate)
    row = EpochRow(
        epoch=sched_state.epoch,
        lam=float(sched_state.proportion),
        selected=int(len(sel.selected)),
        mean_loss=sel.mean_selected_loss,
        train_acc=_evaluate(graph, logits, "train"),
        val_acc=_evaluate(graph, logits, "val"),
        test_acc=_evaluate(graph, logits, "test"),
    )
    if noise is not None:
        row.excl_noisy_frac, row.global_noisy_frac = exclusion_purity(
            sel, noise, len(train), node_ids=train
        )
    return params, opt_state, row


def run_training(graph: HeteroGraph, config: TrainConfig, noise: Optional[NoiseRecord] = None,
                 params: Optional[RelationalModelParams] = None, record_time=False) -> TrainReport:
    """Curriculum epochs ``t = 0..T`` then full-set epochs until validation stalls.

    Early stopping only counts epochs trained on the whole training set: the run
    ends after ``patience`` such epochs without a strict improvement of the best
    validation accuracy, or after epoch ``max_epochs``. The reported test accuracy
    is the one at the best-validation epoch (earliest on ties).
    """
    if params is None:
        params = init_params_for_graph(graph, config.hidden_dim, config.num_layers, config.seed)
    opt_state = OptimizerState()
    sched = ScheduleState.initial(config.schedule)
    report = TrainReport()
    stale = 0
    for _ in range(config.max_epochs + 1):
        try:
            params, opt_state, row = train_epoch(
                graph, params, opt_state, sched, config, noise, record_time
            )
        except DivergenceError as exc:
            exc.report = report
            report.stop_reason = "diverged"
            raise
        report.rows.append(row)
        if row.val_acc > report.best_val_acc:
            report.best_val_acc = row.val_acc
            report.best_epoch = row.epoch
            report.test_acc = row.test_acc
            report.params = params
            stale = 0
        elif sched.proportion == 1.0:
            stale += 1
        if sched.proportion == 1.0 and stale >= config.patience:
            report.stop_reason = "patience"
            logger.debug("early stop at epoch %d (best %d)", row.epoch, report.best_epoch)
            break
        sched = advance(sched, config.schedule)
    else:
        report.stop_reason = "max_epochs"
    return report


def summary_json(report: TrainReport) -> str:
    return json.dumps(report.summary(), sort_keys=True) + "\n"

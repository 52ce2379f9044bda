"""Baseline-vs-curriculum comparisons over several seeds."""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .hetero_graph import HeteroGraph, NoiseRecord
from .trainer import TrainConfig, run_training


def mean_std(values):
    """Mean and population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


@dataclass
class SeedResult:
    seed: int
    baseline_test: float
    lts_test: float
    baseline_best_epoch: int
    lts_best_epoch: int
    lts_excl_noisy: Optional[float] = None  # mean over curriculum epochs, when noise known

    @property
    def delta(self):
        return self.lts_test - self.baseline_test


@dataclass
class Comparison:
    results: List[SeedResult]
    label: str

    @property
    def baseline(self):
        return mean_std([r.baseline_test for r in self.results])

    @property
    def lts(self):
        return mean_std([r.lts_test for r in self.results])

    @property
    def positive_deltas(self):
        return sum(r.delta > 0 for r in self.results)

    def table(self) -> str:
        """Rows shaped like a 'method | test accuracy' results table."""
        width = max(len(self.label), len("Baseline (full set)"))
        lines = [f"{'Method':<{width}} | Test (mean ± std over {len(self.results)} seeds)",
                 "-" * (width + 40)]
        for name, (m, s) in (("Baseline (full set)", self.baseline), (self.label, self.lts)):
            lines.append(f"{name:<{width}} | {m:.4f} ± {s:.4f}")
        lines.append("")
        lines.append(f"{'seed':>6} {'baseline':>9} {'lts':>9} {'delta':>9}")
        for r in self.results:
            lines.append(f"{r.seed:>6} {r.baseline_test:>9.4f} {r.lts_test:>9.4f} {r.delta:>+9.4f}")
        lines.append(f"positive deltas: {self.positive_deltas}/{len(self.results)}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        out = ["seed,baseline_test_acc,lts_test_acc,delta,baseline_best_epoch,lts_best_epoch"]
        for r in self.results:
            out.append(f"{r.seed},{r.baseline_test!r},{r.lts_test!r},{r.delta!r},"
                       f"{r.baseline_best_epoch},{r.lts_best_epoch}")
        return "\n".join(out) + "\n"

    def to_dict(self):
        (bm, bs), (lm, ls) = self.baseline, self.lts
        return {
            "baseline": {"mean": bm, "std": bs},
            "lts": {"mean": lm, "std": ls, "label": self.label},
            "positive_deltas": self.positive_deltas,
            "seeds": [r.seed for r in self.results],
            "deltas": [r.delta for r in self.results],
        }


def _one_seed(args):
    graph, lts_config, baseline_config, noise, seed = args
    base = run_training(graph, replace(baseline_config, seed=seed))
    lts = run_training(graph, replace(lts_config, seed=seed), noise=noise)
    excl = None
    if noise is not None and lts_config.schedule is not None:
        vals = [r.excl_noisy_frac for r in lts.rows if r.lam < 1.0]
        excl = float(np.mean(vals)) if vals else None
    return SeedResult(seed, base.test_acc, lts.test_acc, base.best_epoch, lts.best_epoch, excl)


def compare(graph: HeteroGraph, lts_config: TrainConfig, seeds: Sequence[int],
            noise: Optional[NoiseRecord] = None, baseline_config: Optional[TrainConfig] = None,
            jobs: int = 1) -> Comparison:
    """Train baseline and curriculum arms for every seed; the seed drives model init.

    The baseline arm defaults to ``lts_config`` with the schedule removed.
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        warnings.warn("fewer than 2 seeds: standard deviation reported as 0", stacklevel=2)
    if baseline_config is None:
        baseline_config = replace(lts_config, schedule=None)
    tasks = [(graph, lts_config, baseline_config, noise, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one_seed, tasks))
    else:
        results = [_one_seed(t) for t in tasks]
    sched = lts_config.schedule
    label = "LTS (none)" if sched is None else (
        f"LTS ({sched.scheduler}, lambda0={sched.lambda0:g}, T={sched.T})")
    return Comparison(results, label)

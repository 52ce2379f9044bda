"""Loss-aware training schedule: pacing functions and easy-first node selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractError
from .validation import check_finite_vector, check_fraction, check_positive_int, floor_count

SCHEDULERS = ("linear", "root", "geom")

CURRICULUM = "curriculum"
FULL_SET = "full-set"


@dataclass(frozen=True)
class ScheduleConfig:
    """Initial proportion ``lambda0``, ramp length ``T`` and pacing family."""

    lambda0: float = 0.25
    T: int = 100
    scheduler: str = "linear"

    def __post_init__(self):
        check_fraction(self.lambda0, "lambda0", low_open=True)
        check_positive_int(self.T, "T")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(
                "scheduler", f"unknown scheduler {self.scheduler!r}; expected one of {SCHEDULERS}"
            )


def pacing_value(config: ScheduleConfig, t) -> float:
    """Proportion of easiest training nodes used at epoch ``t``.

    linear: ``min(1, l0 + (1 - l0) t/T)``
    root:   ``min(1, sqrt(l0^2 + (1 - l0^2) t/T))``
    geom:   ``min(1, 2^(log2 l0 - log2 l0 * t/T))``

    Returns exactly 1.0 for ``t >= T``.
    """
    if t < 0:
        raise ContractError(f"epoch must be >= 0, got {t}")
    lam, T = float(config.lambda0), config.T
    if t >= T:
        return 1.0
    frac = t / T
    if config.scheduler == "linear":
        value = lam + (1.0 - lam) * frac
    elif config.scheduler == "root":
        value = math.sqrt(lam * lam + (1.0 - lam * lam) * frac)
    elif config.scheduler == "geom":
        value = 2.0 ** (math.log2(lam) - math.log2(lam) * frac)
    else:  # unreachable for a validated config
        raise ConfigurationError("scheduler", f"unknown scheduler {config.scheduler!r}")
    return min(1.0, value)


@dataclass(frozen=True)
class ScheduleState:
    epoch: int
    proportion: float
    phase: str

    @classmethod
    def initial(cls, config: ScheduleConfig | None):
        """State at epoch 0; ``None`` means no curriculum (always the full set)."""
        if config is None:
            return cls(0, 1.0, FULL_SET)
        return cls(0, pacing_value(config, 0), CURRICULUM)


def advance(state: ScheduleState, config: ScheduleConfig | None) -> ScheduleState:
    """Move to the next epoch. The full-set phase starts once ``t > T`` and is sticky."""
    t = state.epoch + 1
    if config is None:
        return ScheduleState(t, 1.0, FULL_SET)
    if state.phase == FULL_SET or t > config.T:
        return ScheduleState(t, 1.0, FULL_SET)
    return ScheduleState(t, pacing_value(config, t), CURRICULUM)


def selection_size(n: int, proportion: float) -> int:
    """``max(1, floor(n * proportion))``."""
    return max(1, floor_count(n, proportion))


@dataclass(frozen=True)
class SelectionResult:
    """``sorted_indices`` are positions into the loss vector, easiest first."""

    sorted_indices: np.ndarray
    selected: np.ndarray
    mean_selected_loss: float

    @property
    def excluded(self):
        return self.sorted_indices[len(self.selected):]


def select_nodes(losses, proportion) -> SelectionResult:
    """Keep the ``max(1, floor(n * proportion))`` smallest losses.

    The sort is stable, so equal losses keep their original order.
    """
    losses = check_finite_vector(losses, "losses")
    if losses.size == 0:
        raise ContractError("losses must be nonempty")
    proportion = check_fraction(proportion, "proportion", low_open=True)
    order = np.argsort(losses, kind="stable")
    k = selection_size(losses.size, proportion)
    chosen = order[:k]
    return SelectionResult(order, chosen, float(losses[chosen].mean()))

"""Classification accuracy and curriculum/noise diagnostics."""

import numpy as np

from .exceptions import ContractError


def accuracy(predictions, labels) -> float:
    """Fraction of exact matches between predicted and true class ids."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ContractError(
            f"predictions {predictions.shape} and labels {labels.shape} must be equal-length vectors"
        )
    if predictions.size == 0:
        raise ContractError("accuracy needs at least one prediction")
    return float(np.count_nonzero(predictions == labels)) / predictions.size


def exclusion_purity(selection, noise, train_size, node_ids=None):
    """``(excluded_noisy_fraction, global_noisy_fraction)``.

    ``selection`` indexes into the train split; ``node_ids`` maps those positions
    to target-node ids (identity when omitted). The excluded fraction is 0 when
    nothing was excluded.
    """
    excluded = np.asarray(selection.excluded)
    if node_ids is not None:
        excluded = np.asarray(node_ids)[excluded]
    flipped = noise.flipped
    global_frac = len(flipped) / train_size if train_size else 0.0
    if excluded.size == 0:
        return 0.0, global_frac
    hits = sum(1 for v in excluded.tolist() if v in flipped)
    return hits / excluded.size, global_frac

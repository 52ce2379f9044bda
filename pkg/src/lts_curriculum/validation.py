"""Small input-validation helpers used at public entry points."""

import math
import numbers

import numpy as np

from .exceptions import ConfigurationError, ContractError, DataError

# Absorbs binary representation error in products like 0.29 * 100 before flooring.
_FLOOR_SLACK = 1e-9


def floor_count(n, fraction):
    """``floor(n * fraction)`` robust to float representation error."""
    return int(math.floor(n * fraction + _FLOOR_SLACK))


def check_positive_int(value, field):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(field, f"expected an integer, got {value!r}")
    if value <= 0:
        raise ConfigurationError(field, f"must be positive, got {value}")
    return int(value)


def check_nonnegative_int(value, field):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ConfigurationError(field, f"expected an integer, got {value!r}")
    if value < 0:
        raise ConfigurationError(field, f"must be >= 0, got {value}")
    return int(value)


def check_fraction(value, field, *, low_open=False, high=1.0):
    """Validate a real in [0, high] (or (0, high] with ``low_open``)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigurationError(field, f"expected a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(field, f"must be finite, got {value}")
    if low_open and not 0.0 < value <= high:
        raise ConfigurationError(field, f"must lie in (0, {high}], got {value}")
    if not low_open and not 0.0 <= value <= high:
        raise ConfigurationError(field, f"must lie in [0, {high}], got {value}")
    return value


def check_positive_real(value, field):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigurationError(field, f"expected a real number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise ConfigurationError(field, f"must be positive and finite, got {value}")
    return float(value)


def check_finite_vector(values, name="values"):
    """Return ``values`` as a 1-D float64 array; NaN/Inf raise DataError."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {arr.shape}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(
            f"{name}[{int(bad[0])}] is {arr[bad[0]]}; all entries must be finite"
        )
    return arr


def check_index_array(indices, upper, name="indices"):
    """1-D int64 array with every entry in [0, upper)."""
    idx = np.asarray(indices)
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise ContractError(f"{name} must be a 1-D integer array")
    idx = idx.astype(np.int64, copy=False)
    if idx.min() < 0 or idx.max() >= upper:
        raise IndexError(f"{name} out of range [0, {upper})")
    return idx

"""Input validation helpers used by the functional API and the estimators."""

import math

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigError, DataError


def check_vector(x, name="x", length=None):
    """Return ``x`` as a finite 1-D float64 array, optionally of fixed length."""
    arr = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise DataError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def check_square(a, name="matrix", size=None):
    arr = check_array(a, dtype=np.float64, input_name=name)
    if arr.shape[0] != arr.shape[1]:
        raise DataError(f"{name} must be square, got shape {arr.shape}")
    if size is not None and arr.shape[0] != size:
        raise DataError(f"{name} has dimension {arr.shape[0]}, expected {size}")
    return arr


def check_positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number, got {value!r}") from exc
    if not math.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be non-negative and finite, got {value!r}")
    return value


def check_fips(code):
    """Normalize a county code to the 5-character zero-padded form."""
    code = str(code).strip()
    if not code.isdigit() or len(code) > 5:
        raise DataError(f"invalid FIPS code {code!r}")
    return code.zfill(5)

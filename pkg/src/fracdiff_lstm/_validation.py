"""Small input-validation helpers shared by the estimators and functions."""

import numpy as np
from sklearn.utils import check_array

from .exceptions import ContractError, InsufficientDataError


def check_1d(x, name="x", min_length=1, allow_nan=False):
    """Return ``x`` as a contiguous 1-D float64 array.

    Raises ContractError for the wrong dimensionality or non-finite values
    and InsufficientDataError when shorter than ``min_length``.
    """
    values = getattr(x, "values", x)
    try:
        arr = check_array(
            np.asarray(values, dtype=np.float64).reshape(-1, 1) if np.ndim(values) == 1 else values,
            ensure_2d=True,
            dtype=np.float64,
            ensure_all_finite="allow-nan" if allow_nan else True,
            ensure_min_samples=0,
        )
    except ValueError as exc:
        raise ContractError(f"{name}: {exc}") from exc
    if arr.shape[1] != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {np.shape(values)}")
    arr = np.ascontiguousarray(arr[:, 0])
    if arr.size < min_length:
        raise InsufficientDataError(f"{name} needs at least {min_length} values, got {arr.size}")
    return arr


def check_2d(X, name="X", min_rows=1):
    try:
        arr = check_array(X, ensure_2d=True, dtype=np.float64, ensure_min_samples=0)
    except ValueError as exc:
        raise ContractError(f"{name}: {exc}") from exc
    if arr.shape[0] < min_rows:
        raise InsufficientDataError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    return arr


def check_same_length(a, b, names=("a", "b")):
    if len(a) != len(b):
        raise ContractError(f"{names[0]} and {names[1]} differ in length ({len(a)} != {len(b)})")


def check_window(k, name="k", minimum=1):
    if int(k) != k or k < minimum:
        raise ContractError(f"{name} must be an integer >= {minimum}, got {k!r}")
    return int(k)


def frozen(arr):
    """Read-only copy, so dataclass fields stay immutable after construction."""
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out

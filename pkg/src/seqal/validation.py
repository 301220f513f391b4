"""Input validation helpers shared across the public API."""

from __future__ import annotations

from typing import Sequence

import numpy as np

PROB_ROW_TOL = 1e-9


def check_matrix(name: str, value, n_cols: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array, optionally pinning the column count."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} must have {n_cols} columns, got {arr.shape[1]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_probability_matrix(name: str, value) -> np.ndarray:
    """A matrix whose rows are probability distributions."""
    arr = check_matrix(name, value)
    if (arr < 0).any():
        raise ValueError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    if np.abs(sums - 1.0).max() > PROB_ROW_TOL:
        raise ValueError(f"{name} rows must sum to 1 within {PROB_ROW_TOL}")
    return arr


def check_token_indices(sequence: Sequence[int], vocab_size: int) -> list[int]:
    seq = [int(t) for t in sequence]
    if not seq:
        raise ValueError("empty token sequence")
    if min(seq) < 0 or max(seq) >= vocab_size:
        raise ValueError(f"token indices must lie in [0, {vocab_size})")
    return seq

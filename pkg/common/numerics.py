"""
Fixed-order reductions.

Every reduction here has a summation order that depends only on the data
layout, never on how many rows are processed together or by which worker,
so chunked/parallel runs agree with serial runs bit for bit.
"""
from typing import Tuple

import numpy as np


def row_sq_norms(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm over the last axis, accumulated column by column"""
    x = np.asarray(x, dtype=np.float64)
    acc = x[..., 0] * x[..., 0]
    for j in range(1, x.shape[-1]):
        acc = acc + x[..., j] * x[..., j]
    return acc


def row_norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(row_sq_norms(x))


def row_dots(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Inner product over the last axis, same column order as row_sq_norms"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    acc = x[..., 0] * y[..., 0]
    for j in range(1, x.shape[-1]):
        acc = acc + x[..., j] * y[..., j]
    return acc


def pairwise_sum(values: np.ndarray) -> float:
    """Tree summation over index order: neighbours (2k, 2k+1) are added level by level"""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.concatenate([v[:-1:2] + v[1::2], v[-1:]])
        else:
            v = v[0::2] + v[1::2]
    return float(v[0])


def mean_and_std_error(values: np.ndarray) -> Tuple[float, float]:
    """Sample mean and standard error (ddof=1); a single value has std error 0"""
    v = np.asarray(values, dtype=np.float64).ravel()
    n = v.size
    mean = pairwise_sum(v) / n
    if n < 2:
        return mean, 0.0
    var = pairwise_sum((v - mean) ** 2) / (n - 1)
    return mean, float(np.sqrt(var / n))

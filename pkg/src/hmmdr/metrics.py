"""Partition agreement: adjusted Rand index and contingency tables."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .exceptions import DomainError


def _check_pair(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DomainError(f"partitions must be 1-D of equal length, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise DomainError("partitions must be non-empty")
    return a, b


def confusion(a, b) -> np.ndarray:
    """
    Contingency table ``n_ij`` = number of items in class ``i`` of ``a`` and
    class ``j`` of ``b``. Rows/columns follow the sorted distinct labels.
    """
    a, b = _check_pair(a, b)
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def _pairs(counts) -> int:
    return sum(int(c) * (int(c) - 1) // 2 for c in np.ravel(counts))


def ari(a, b) -> float:
    """
    Adjusted Rand index by exact integer pair counting.

    Returns 1.0 when both partitions are trivial in the same way (the index
    is 0/0 there), matching the usual convention.
    """
    table = confusion(a, b)
    n = int(table.sum())
    index = _pairs(table)
    sa = _pairs(table.sum(axis=1))
    sb = _pairs(table.sum(axis=0))
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    expected = Fraction(sa * sb, total)
    top = Fraction(sa + sb, 2)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))

"""Support selection, hard thresholding and index-set scatter/gather.

Supports are plain sorted ``np.intp`` arrays.  Selection is deterministic:
among entries of equal magnitude the smallest index wins, and the support
always has exactly `s` entries even if some of the kept values are zero.
"""
import numpy as np

from .errors import DimensionMismatch, SparsityTooLarge

__all__ = [
    "select_support",
    "hard_threshold",
    "complement",
    "gather",
    "scatter",
    "as_support",
]


def as_support(t, ambient):
    """Validate `t` as an index set of [0, ambient) and return it sorted."""
    t = np.unique(np.asarray(t, dtype=np.intp))
    if t.size and (t[0] < 0 or t[-1] >= ambient):
        raise DimensionMismatch(f"support indices must lie in [0, {ambient})")
    return t


def select_support(x, s):
    """Indices of the `s` largest-magnitude entries of `x`, sorted ascending.

    Runs in O(N) expected time via `np.partition`; the result is identical to
    a stable full sort by decreasing magnitude.
    """
    x = np.asarray(x)
    n = x.shape[0]
    if s > n:
        raise SparsityTooLarge(f"s = {s} exceeds vector length {n}")
    if s <= 0:
        return np.zeros(0, dtype=np.intp)
    mag = np.abs(x)
    if s == n:
        return np.arange(n, dtype=np.intp)
    kth = np.partition(mag, n - s)[n - s]
    above = np.flatnonzero(mag > kth)
    ties = np.flatnonzero(mag == kth)[: s - above.size]
    return np.sort(np.concatenate((above, ties)))


def hard_threshold(x, s, support=None):
    """Keep the `s` largest-magnitude entries of `x` and zero the rest."""
    x = np.asarray(x, dtype=np.float64)
    if support is None:
        support = select_support(x, s)
    out = np.zeros_like(x)
    out[support] = x[support]
    return out


def complement(t, ambient):
    mask = np.ones(ambient, dtype=bool)
    mask[t] = False
    return np.flatnonzero(mask)


def gather(x, t):
    x = np.asarray(x)
    t = np.asarray(t, dtype=np.intp)
    if t.size and t.max() >= x.shape[0]:
        raise DimensionMismatch("support index out of range")
    return x[t]


def scatter(vals, t, ambient):
    vals = np.asarray(vals, dtype=np.float64)
    t = np.asarray(t, dtype=np.intp)
    if vals.shape != t.shape:
        raise DimensionMismatch(f"{vals.shape[0]} values for {t.shape[0]} indices")
    if t.size and t.max() >= ambient:
        raise DimensionMismatch("support index out of range")
    out = np.zeros(ambient)
    out[t] = vals
    return out

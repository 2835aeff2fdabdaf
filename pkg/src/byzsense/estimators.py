"""Robust location, scale and skewness estimators over one sample of reports.

Every function accepts any 1-d array-like of finite reals and returns a
Python float. Estimator constants are used exactly as given in the
technique definitions (1.192 for Sn, 2.2 for Qn, 1.5 with exponents -3.5
and 4 for the medcouple fences); no finite-sample corrections are applied.
"""

import math
from dataclasses import dataclass

import numpy as np

from byzsense.errors import DegenerateSampleError, InvalidInputError

__all__ = [
    "MedcoupleFences",
    "SN_CONSTANT",
    "QN_CONSTANT",
    "adjusted_fences",
    "fence_factors",
    "mad",
    "mean_difference",
    "median",
    "medcouple",
    "qn_estimator",
    "quartiles",
    "sn_estimator",
]

SN_CONSTANT = 1.192
QN_CONSTANT = 2.2
FENCE_SCALE = 1.5
LOWER_FENCE_EXPONENT = -3.5
UPPER_FENCE_EXPONENT = 4.0

# Above this size mean_difference switches from the exact all-pairs sum to
# the O(n log n) order-statistic identity.
_PAIRWISE_LIMIT = 1024


def _as_sample(values, min_size, name):
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError(f"{name}: sample must be one-dimensional, got shape {x.shape}")
    if x.size < min_size:
        raise InvalidInputError(f"{name}: needs at least {min_size} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name}: sample contains NaN or infinite values")
    return x


def _quantile_sorted(s, p):
    # linear interpolation at 0-based position p*(n-1)
    pos = p * (s.size - 1)
    lo = math.floor(pos)
    frac = pos - lo
    if frac == 0.0:
        return float(s[lo])
    return float(s[lo] + frac * (s[lo + 1] - s[lo]))


def median(values):
    """Sample median; even-length samples average the two central order statistics."""
    x = _as_sample(values, 1, "median")
    return float(np.median(x))


def mean_difference(values):
    """Gini mean difference, ``sum_i sum_j |x_i - x_j| / N**2``.

    The diagonal ``i == j`` contributes zeros but still counts in the N**2
    denominator.
    """
    x = _as_sample(values, 1, "mean_difference")
    n = x.size
    if n <= _PAIRWISE_LIMIT:
        total = math.fsum(np.abs(x[:, None] - x[None, :]).ravel().tolist())
    else:
        s = np.sort(x)
        weights = 2.0 * np.arange(1, n + 1) - n - 1
        total = 2.0 * math.fsum((weights * s).tolist())
    return total / (n * n)


def mad(values):
    """Median absolute deviation from the median (unscaled)."""
    x = _as_sample(values, 1, "mad")
    return float(np.median(np.abs(x - np.median(x))))


def _kth_two_sided(s, k):
    """k-th smallest (1-based) of ``{|s[i] - s[j]| : j != i}`` for every i.

    For sorted ``s`` the distances to the left of i and to the right of i
    form two ascending runs, so the k-th smallest of their union is found
    by a binary search on how many elements come from the left run. The
    search runs for all rows at once.
    """
    n = s.size
    rows = np.arange(n)
    n_left = rows
    n_right = n - 1 - rows
    lo = np.maximum(0, k - n_right)
    hi = np.minimum(k, n_left)
    while True:
        active = lo < hi
        if not active.any():
            break
        take = (lo + hi) // 2
        left_idx = np.clip(rows - 1 - take, 0, n - 1)
        right_idx = np.clip(rows + k - take, 0, n - 1)
        left_val = s[rows] - s[left_idx]
        right_val = s[right_idx] - s[rows]
        more_left = left_val < right_val
        lo = np.where(active & more_left, take + 1, lo)
        hi = np.where(active & ~more_left, take, hi)
    take = lo
    left_val = np.where(take > 0, s[rows] - s[np.clip(rows - take, 0, n - 1)], -np.inf)
    right_val = np.where(k - take > 0, s[np.clip(rows + k - take, 0, n - 1)] - s[rows], -np.inf)
    return np.maximum(left_val, right_val)


def sn_estimator(values):
    """``1.192 * med_i med_{j != i} |x_i - x_j|`` with ordinary medians at both levels."""
    x = _as_sample(values, 2, "sn_estimator")
    s = np.sort(x)
    m = s.size - 1
    if m % 2:
        inner = _kth_two_sided(s, (m + 1) // 2)
    else:
        a = _kth_two_sided(s, m // 2)
        b = _kth_two_sided(s, m // 2 + 1)
        inner = (a + b) / 2.0
    return SN_CONSTANT * float(np.median(inner))


def _count_row_distances(s, pivot, strict):
    """Per row i, the number of j > i with ``s[j] - s[i] < pivot`` (or ``<=``)."""
    n = s.size
    rows = np.arange(n)
    lo = rows + 1
    hi = np.full(n, n)
    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi) // 2
        d = s[np.minimum(mid, n - 1)] - s
        past = d >= pivot if strict else d > pivot
        hi = np.where(active & past, mid, hi)
        lo = np.where(active & ~past, mid + 1, lo)
    return lo - rows - 1


def _kth_pairwise_distance(s, k):
    """k-th smallest (1-based) of ``s[j] - s[i]`` over ``i < j`` for sorted ``s``.

    Selection over the implicit, row-sorted distance matrix: each round
    takes the weighted median of the row midpoints as pivot, counts the
    distances below it, and discards the side that cannot hold the target.
    """
    n = s.size
    rows = np.arange(n)
    left = rows + 1
    right = np.full(n, n)
    while True:
        width = np.maximum(right - left, 0)
        total = int(width.sum())
        below = int((left - rows - 1).sum())
        if total <= 2 * n:
            keep = width > 0
            cols = np.concatenate([np.arange(a, b) for a, b in zip(left[keep], right[keep])])
            owners = np.repeat(rows[keep], width[keep])
            candidates = np.sort(s[cols] - s[owners])
            return float(candidates[k - below - 1])
        keep = width > 0
        mids = (left[keep] + right[keep] - 1) // 2
        vals = s[mids] - s[rows[keep]]
        order = np.argsort(vals, kind="stable")
        cum = np.cumsum(width[keep][order])
        pivot = vals[order][np.searchsorted(cum, total / 2.0)]
        n_lt = _count_row_distances(s, pivot, strict=True)
        n_le = _count_row_distances(s, pivot, strict=False)
        if k <= n_lt.sum():
            right = np.minimum(right, rows + 1 + n_lt)
        elif k > n_le.sum():
            left = np.maximum(left, rows + 1 + n_le)
        else:
            return float(pivot)


def qn_estimator(values):
    """``2.2 *`` first quartile of the pairwise distances ``|x_i - x_j|, i < j``.

    The quartile uses the same linear-interpolation convention as
    :func:`quartiles`; only the two order statistics it needs are selected,
    so large samples never materialise all n(n-1)/2 distances.
    """
    x = _as_sample(values, 2, "qn_estimator")
    s = np.sort(x)
    n_pairs = s.size * (s.size - 1) // 2
    pos = 0.25 * (n_pairs - 1)
    lo = math.floor(pos)
    frac = pos - lo
    d_lo = _kth_pairwise_distance(s, lo + 1)
    if frac == 0.0:
        q1 = d_lo
    else:
        d_hi = _kth_pairwise_distance(s, lo + 2)
        q1 = d_lo + frac * (d_hi - d_lo)
    return QN_CONSTANT * q1


def quartiles(values):
    """First and third quartiles, interpolating at 1-based positions ``1 + p(n-1)``."""
    x = _as_sample(values, 2, "quartiles")
    s = np.sort(x)
    return _quantile_sorted(s, 0.25), _quantile_sorted(s, 0.75)


def medcouple(values):
    """Medcouple skewness over all pairs that strictly straddle the median.

    Naive O(n^2) enumeration. Values equal to the median take no part in
    any pair; when no pair remains a :class:`DegenerateSampleError` is
    raised.
    """
    x = _as_sample(values, 3, "medcouple")
    m = float(np.median(x))
    lower = x[x < m]
    upper = x[x > m]
    if lower.size == 0 or upper.size == 0:
        raise DegenerateSampleError("medcouple: no pair of values straddles the median")
    xi = lower[:, None]
    xj = upper[None, :]
    kernel = ((xj - m) - (m - xi)) / (xj - xi)
    return float(np.median(kernel))


def fence_factors(mc):
    """Exponential fence multipliers ``(h_l, h_r)`` for a medcouple value."""
    return (
        FENCE_SCALE * math.exp(LOWER_FENCE_EXPONENT * mc),
        FENCE_SCALE * math.exp(UPPER_FENCE_EXPONENT * mc),
    )


@dataclass(frozen=True)
class MedcoupleFences:
    mc: float
    q1: float
    q3: float
    iqr: float
    h_l: float
    h_r: float
    lower_fence: float
    upper_fence: float


def adjusted_fences(values):
    """Skew-adjusted boxplot fences ``Q1 - h_l*IQR`` and ``Q3 + h_r*IQR``."""
    x = _as_sample(values, 3, "adjusted_fences")
    mc = medcouple(x)
    q1, q3 = quartiles(x)
    iqr = q3 - q1
    h_l, h_r = fence_factors(mc)
    return MedcoupleFences(
        mc=mc,
        q1=q1,
        q3=q3,
        iqr=iqr,
        h_l=h_l,
        h_r=h_r,
        lower_fence=q1 - h_l * iqr,
        upper_fence=q3 + h_r * iqr,
    )

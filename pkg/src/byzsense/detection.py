"""Exclusion thresholds built from the robust estimators, and the refinement loop."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from byzsense import estimators
from byzsense.errors import DegenerateSampleError, InvalidInputError

__all__ = [
    "ALL_METHODS",
    "DetectorParams",
    "Method",
    "ThresholdResult",
    "classify_reports",
    "detect",
    "iterative_threshold",
    "lower_threshold",
    "upper_threshold",
]

# Gaussian-consistency factors: sigma ~ 1.4826 * MAD ~ sqrt(pi)/2 * MD.
MAD_CONSISTENCY = 1.4826
MD_CONSISTENCY = math.sqrt(math.pi) / 2.0


class Method(str, enum.Enum):
    MEDCOUPLE = "mc"
    MEAN_DIFFERENCE = "md"
    MAD = "mad"
    SN = "sn"
    QN = "qn"

    @property
    def min_size(self):
        return _MIN_SIZE[self]


_MIN_SIZE = {
    Method.MEDCOUPLE: 3,
    Method.MEAN_DIFFERENCE: 1,
    Method.MAD: 1,
    Method.SN: 2,
    Method.QN: 2,
}

ALL_METHODS = (Method.MEDCOUPLE, Method.MEAN_DIFFERENCE, Method.MAD, Method.SN, Method.QN)


def _mean(x):
    # offset by the first value so constant samples return that value exactly
    base = float(x[0])
    m = base + math.fsum((x - base).tolist()) / x.size
    return min(max(m, float(x.min())), float(x.max()))


def _location_scale(x, method):
    if method is Method.MEAN_DIFFERENCE:
        return _mean(x), MD_CONSISTENCY * estimators.mean_difference(x)
    loc = estimators.median(x)
    if method is Method.MAD:
        return loc, MAD_CONSISTENCY * estimators.mad(x)
    if method is Method.SN:
        return loc, estimators.sn_estimator(x)
    if method is Method.QN:
        return loc, estimators.qn_estimator(x)
    raise InvalidInputError(f"no location/scale form for {method}")


def _check(sample, method, k):
    method = Method(method)
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size < method.min_size:
        raise InvalidInputError(f"{method.value}: needs a 1-d sample of at least {method.min_size} values")
    if not k > 0:
        raise InvalidInputError(f"k must be positive, got {k}")
    return x, method


def lower_threshold(sample, method, k=3.0):
    """Level below which a report is treated as an outlier.

    The medcouple uses its adjusted lower fence ``Q1 - h_l * IQR`` and
    ignores ``k``. The other methods return ``location - k * sigma`` with
    sigma the Gaussian-consistent scale: ``1.4826 * MAD``, ``Sn``, ``Qn``
    around the median, or ``sqrt(pi)/2 * MD`` around the mean.
    """
    x, method = _check(sample, method, k)
    if method is Method.MEDCOUPLE:
        return estimators.adjusted_fences(x).lower_fence
    loc, sigma = _location_scale(x, method)
    return loc - k * sigma


def upper_threshold(sample, method, k=3.0):
    """Mirror of :func:`lower_threshold`; only used for two-sided exclusion."""
    x, method = _check(sample, method, k)
    if method is Method.MEDCOUPLE:
        return estimators.adjusted_fences(x).upper_fence
    loc, sigma = _location_scale(x, method)
    return loc + k * sigma


@dataclass(frozen=True)
class DetectorParams:
    k: float = 3.0
    max_iterations: int = 10
    tolerance: float = 1e-6
    two_sided: bool = False

    @classmethod
    def from_config(cls, config):
        return cls(
            k=config.method_multiplier_k,
            max_iterations=config.max_iterations,
            tolerance=config.threshold_tolerance,
            two_sided=config.two_sided,
        )


@dataclass(frozen=True)
class ThresholdResult:
    method: Method
    lower_threshold: float
    iterations_used: int
    threshold_trace: tuple[float, ...]
    excluded_ids: frozenset[int]
    n_values: int
    upper_threshold: float | None = None
    truncated: bool = False


def iterative_threshold(sample, method, k=3.0, max_iterations=10, tolerance=1e-6, two_sided=False):
    """Refine the threshold by recomputing it on the reports that survive.

    Each round computes the threshold on the currently retained values and
    then marks every value of the full sample strictly below it (or above
    the upper threshold when ``two_sided``). A value excluded earlier comes
    back if the threshold later drops under it, so the excluded set is
    always exactly the values below the final threshold.

    The loop stops when the excluded set no longer changes, when two
    consecutive thresholds differ by less than ``tolerance``, or after
    ``max_iterations`` rounds. If a round would leave fewer values than the
    estimator needs, that round is discarded and the previous one is
    returned with ``truncated=True`` (a first round is always kept).
    """
    x, method = _check(sample, method, k)
    if isinstance(max_iterations, bool) or not isinstance(max_iterations, int) or max_iterations < 1:
        raise InvalidInputError(f"max_iterations must be a positive integer, got {max_iterations!r}")
    if not tolerance > 0:
        raise InvalidInputError(f"tolerance must be positive, got {tolerance}")

    excluded = np.zeros(x.size, dtype=bool)
    trace = []
    uppers = []
    truncated = False
    for it in range(max_iterations):
        retained = x[~excluded]
        try:
            lo = lower_threshold(retained, method, k)
            hi = upper_threshold(retained, method, k) if two_sided else None
        except DegenerateSampleError:
            if it == 0:
                raise
            truncated = True
            break
        flagged = x < lo
        if hi is not None:
            flagged |= x > hi
        if x.size - flagged.sum() < method.min_size:
            truncated = True
            if it > 0:
                break
        trace.append(lo)
        uppers.append(hi)
        changed = not np.array_equal(flagged, excluded)
        excluded = flagged
        if truncated or not changed:
            break
        if it > 0 and abs(trace[-1] - trace[-2]) < tolerance:
            break

    return ThresholdResult(
        method=method,
        lower_threshold=trace[-1],
        iterations_used=len(trace),
        threshold_trace=tuple(trace),
        excluded_ids=frozenset(np.flatnonzero(excluded).tolist()),
        n_values=int(x.size),
        upper_threshold=uppers[-1],
        truncated=truncated,
    )


def detect(instant, method, params: DetectorParams = DetectorParams()) -> ThresholdResult:
    """Run the refinement loop over one instant's reported levels."""
    return iterative_threshold(
        instant.levels, method, params.k, params.max_iterations, params.tolerance, params.two_sided
    )


def classify_reports(instant, result: ThresholdResult) -> frozenset[int]:
    """SU ids flagged as malicious by a threshold computed on this instant."""
    if len(instant.reports) != result.n_values:
        raise InvalidInputError(
            f"threshold was computed over {result.n_values} reports, instant has {len(instant.reports)}"
        )
    ids = [r.su_id for r in instant.reports]
    return frozenset(ids[i] for i in result.excluded_ids)

"""Averaging fusion at the control centre and the evaluation metrics.

``method=None`` everywhere below denotes the WM baseline: all reports,
malicious ones included, are fused with no exclusion.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from byzsense.detection import DetectorParams, Method, detect
from byzsense.errors import InvalidInputError

__all__ = [
    "DetectionMetrics",
    "FusionOutcome",
    "correct_detection_count",
    "decide",
    "detection_probability",
    "evaluate",
    "exclusion_sets",
    "false_alarm_probability",
    "fuse_average",
    "method_label",
    "roc_sweep",
]

WM_LABEL = "wm"


def method_label(method):
    return WM_LABEL if method is None else Method(method).value


@dataclass(frozen=True)
class FusionOutcome:
    fused_level: float
    decided_present: bool
    global_threshold: float


def fuse_average(instant, excluded=frozenset()):
    """Mean reported level over the SUs not in ``excluded``."""
    kept = [r.reported_level for r in instant.reports if r.su_id not in excluded]
    if not kept:
        raise InvalidInputError("every report is excluded; nothing left to fuse")
    return float(np.mean(kept))


def decide(instant, excluded, global_threshold):
    level = fuse_average(instant, excluded)
    return FusionOutcome(level, level >= global_threshold, global_threshold)


def exclusion_sets(instants, method, params=DetectorParams()):
    if method is None:
        return [frozenset() for _ in instants]
    return [detect(inst, method, params).excluded_ids for inst in instants]


def _fused_levels(instants, method, params, present):
    chosen = [inst for inst in instants if inst.pu_present == present]
    excl = exclusion_sets(chosen, method, params)
    return np.array([fuse_average(inst, ex) for inst, ex in zip(chosen, excl)])


def _check_grid(grid):
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise InvalidInputError("threshold grid must be a non-empty 1-d sequence")
    if np.any(np.diff(g) <= 0):
        raise InvalidInputError("threshold grid must be strictly ascending")
    return g


def _rates(levels, grid):
    if levels.size == 0:
        return np.full(grid.size, np.nan)
    return np.array([np.count_nonzero(levels >= th) / levels.size for th in grid])


def detection_probability(instants, method, global_threshold, params=DetectorParams()):
    """Fraction of PU-present instants whose fused level reaches the threshold."""
    levels = _fused_levels(instants, method, params, present=True)
    if levels.size == 0:
        raise InvalidInputError("no instant has the PU present; detection probability is undefined")
    return float(np.count_nonzero(levels >= global_threshold) / levels.size)


def false_alarm_probability(instants, method, global_threshold, params=DetectorParams()):
    """Same as :func:`detection_probability` over PU-absent instants; NaN if there are none."""
    levels = _fused_levels(instants, method, params, present=False)
    if levels.size == 0:
        return float("nan")
    return float(np.count_nonzero(levels >= global_threshold) / levels.size)


def roc_sweep(instants, method, threshold_grid, params=DetectorParams()):
    """``[(threshold, pd), ...]`` over an ascending grid; pd is non-increasing."""
    grid = _check_grid(threshold_grid)
    levels = _fused_levels(instants, method, params, present=True)
    if levels.size == 0:
        raise InvalidInputError("no instant has the PU present; detection probability is undefined")
    return list(zip(grid.tolist(), _rates(levels, grid).tolist()))


def correct_detection_count(instants, method, params=DetectorParams()):
    """Instants whose flagged SU set equals the true malicious set exactly."""
    excl = exclusion_sets(instants, method, params)
    return sum(ex == inst.malicious_ids for inst, ex in zip(instants, excl))


@dataclass(frozen=True)
class DetectionMetrics:
    method: Method | None
    per_instant_flag_counts: dict[int, int]
    correct_count: int
    correct_countmatch: int
    n_instants: int
    pd_curve: list[tuple[float, float]]
    pfa_curve: list[tuple[float, float]]

    @property
    def label(self):
        return method_label(self.method)


def evaluate(instants, method, threshold_grid, params=DetectorParams(), exclusions=None):
    """All metrics for one method (or the WM baseline) over one scenario.

    ``exclusions`` may carry precomputed per-instant excluded sets to avoid
    running the detector twice.
    """
    grid = _check_grid(threshold_grid)
    excl = exclusion_sets(instants, method, params) if exclusions is None else exclusions
    if len(excl) != len(instants):
        raise InvalidInputError("one exclusion set is needed per instant")
    fused = np.array([fuse_average(inst, ex) for inst, ex in zip(instants, excl)])
    present = np.array([inst.pu_present for inst in instants], dtype=bool)
    flags = Counter(len(ex) for ex in excl)
    setmatch = sum(ex == inst.malicious_ids for inst, ex in zip(instants, excl))
    countmatch = sum(len(ex) == len(inst.malicious_ids) for inst, ex in zip(instants, excl))
    return DetectionMetrics(
        method=None if method is None else Method(method),
        per_instant_flag_counts=dict(sorted(flags.items())),
        correct_count=setmatch,
        correct_countmatch=countmatch,
        n_instants=len(instants),
        pd_curve=list(zip(grid.tolist(), _rates(fused[present], grid).tolist())),
        pfa_curve=list(zip(grid.tolist(), _rates(fused[~present], grid).tolist())),
    )

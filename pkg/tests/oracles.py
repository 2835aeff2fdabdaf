"""Definitional brute-force versions of the estimators.

These enumerate every pair literally and share no code with the package,
so agreement is a real cross-check of the fast selection algorithms.
"""

import itertools
import math

import numpy as np


def py_median(values):
    s = sorted(values)
    n = len(s)
    mid = n // 2
    if n % 2:
        return s[mid]
    return (s[mid - 1] + s[mid]) / 2.0


def mean_difference(x):
    x = [float(v) for v in x]
    n = len(x)
    diffs = np.abs(np.subtract.outer(np.asarray(x), np.asarray(x)))
    return math.fsum(diffs.ravel().tolist()) / (n * n)


def mad(x):
    m = py_median(x)
    return py_median([abs(v - m) for v in x])


def sn(x):
    x = np.asarray(x, dtype=float)
    d = np.abs(np.subtract.outer(x, x))
    inner = [np.median(np.delete(d[i], i)) for i in range(x.size)]
    return 1.192 * np.median(inner)


def qn(x):
    x = np.asarray(x, dtype=float)
    iu = np.triu_indices(x.size, 1)
    d = np.abs(np.subtract.outer(x, x))[iu]
    return 2.2 * np.quantile(d, 0.25)


def quartiles(x):
    return tuple(np.quantile(np.asarray(x, dtype=float), [0.25, 0.75]))


def medcouple(x):
    m = py_median(x)
    kernel = [
        ((xj - m) - (m - xi)) / (xj - xi)
        for xi, xj in itertools.product(x, x)
        if xi < m < xj
    ]
    return py_median(kernel)


def within_ulps(a, b, ulps):
    if a == b:
        return True
    scale = max(abs(a), abs(b))
    return abs(a - b) <= ulps * np.spacing(scale)

"""Power-law regression on log-log axes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class FitResult:
    exponent: float
    log_prefactor: float
    residual: float
    count: int

    @property
    def prefactor(self) -> float:
        return math.exp(self.log_prefactor)

    def predict(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


def _logs(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fits need strictly positive x and y")
    if np.unique(x).size < 2:
        raise ValueError("need at least two distinct x values")
    return np.log(x), np.log(y)


def power_law_fit(x: Sequence[float], y: Sequence[float]) -> FitResult:
    """Least squares for ``ln y = ln c + k ln x``.

    >>> round(power_law_fit([1, 10], [1, 100]).exponent, 12)
    2.0
    """
    lx, ly = _logs(x, y)
    k, c = np.polyfit(lx, ly, 1)
    res = float(np.sum((ly - (c + k * lx)) ** 2))
    return FitResult(float(k), float(c), res, len(lx))


def fixed_exponent_fit(x: Sequence[float], y: Sequence[float], exponent: float) -> FitResult:
    """Best prefactor for ``y = c x^exponent`` with the exponent held fixed."""
    lx, ly = _logs(x, y)
    c = float(np.mean(ly - exponent * lx))
    res = float(np.sum((ly - (c + exponent * lx)) ** 2))
    return FitResult(float(exponent), c, res, len(lx))

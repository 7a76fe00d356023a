"""Power-law exponent fits with trajectory-level bootstrap intervals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..streams import substream

MIN_POINTS = 5


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residuals: np.ndarray = field(repr=False)
    ci: tuple
    n_points: int
    n_boot: int = 0

    def contains(self, value: float) -> bool:
        return self.ci[0] <= value <= self.ci[1]


def _line(lx: np.ndarray, ly: np.ndarray):
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def fit_exponent(x: Sequence[float], y: Sequence[float], samples: Optional[Sequence] = None,
                 n_boot: int = 500, seed: int = 0, level: float = 0.95) -> FitResult:
    """Least-squares fit of ``log y = slope log x + intercept``.

    Parameters
    ----------
    x, y : sequences of positive floats
        At least five points.
    samples : sequence, optional
        Per point, the per-trajectory values behind ``y``: either one array
        (``y`` is its mean) or a pair ``(numerator, denominator)`` of paired
        arrays (``y`` is the ratio of their means).  The confidence interval
        resamples trajectories within each point; without samples it collapses
        to the point estimate.
    n_boot : int
        Bootstrap resamples.
    seed : int
        Seed of the bootstrap stream.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise FitError("x and y must be 1-d and of equal length")
    if len(x) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("non-finite data")
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fits need positive x and y")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = _line(lx, ly)
    residuals = ly - (slope * lx + intercept)
    if samples is None:
        return FitResult(slope, intercept, residuals, (slope, slope), len(x))
    if len(samples) != len(x):
        raise FitError("one sample set per point is required")
    rng = substream(seed, 0, "bootstrap")
    pairs = [tuple(np.asarray(a) for a in s) if isinstance(s, tuple) else (np.asarray(s), None) for s in samples]
    boot = np.empty(n_boot)
    for b in range(n_boot):
        yb = np.empty(len(x))
        for i, (num, den) in enumerate(pairs):
            idx = rng.integers(0, len(num), len(num))
            yb[i] = np.mean(num[idx]) if den is None else np.mean(num[idx]) / np.mean(den[idx])
        if np.any(yb <= 0):
            boot[b] = np.nan
            continue
        boot[b] = _line(lx, np.log(yb))[0]
    boot = boot[np.isfinite(boot)]
    if len(boot) == 0:
        raise FitError("every bootstrap resample produced a nonpositive value")
    alpha = (1.0 - level) / 2
    lo, hi = np.quantile(boot, [alpha, 1 - alpha])
    return FitResult(slope, intercept, residuals, (float(min(lo, slope)), float(max(hi, slope))), len(x), n_boot)

"""Local linear kernel smoothing of the measured components."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Dataset

KERNEL = "epanechnikov"


def epanechnikov(z):
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) < 1.0, 0.75 * (1.0 - z * z), 0.0)


def _nearest_two_mean(t, times, values):
    # Nadaraya-Watson over the two nearest samples, equal weights.
    dist = np.abs(times[None, :] - t[:, None])
    idx = np.argsort(dist, axis=1, kind="stable")[:, :2]
    return values[idx].mean(axis=1)


def _local_linear(t, times, values, bandwidth, exclude_self=False):
    """Local linear fit at each point of ``t``.

    With ``exclude_self`` the i-th sample is dropped when predicting at
    ``t[i]`` (``t`` must then equal ``times``).
    """
    diff = times[None, :] - t[:, None]
    w = epanechnikov(diff / bandwidth)
    if exclude_self:
        np.fill_diagonal(w, 0.0)
    s0 = w.sum(axis=1)
    s1 = (w * diff).sum(axis=1)
    s2 = (w * diff * diff).sum(axis=1)
    wy = w @ values
    wdy = (w * diff) @ values
    det = s0 * s2 - s1 * s1

    # fewer than 2 distinct in-window points makes the local design singular
    support = (w > 0).sum(axis=1)
    ok = (support >= 2) & (det > 1e-12 * np.maximum(s0 * s2, np.finfo(float).tiny))
    est = np.empty(t.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        est[ok] = (s2[ok] * wy[ok] - s1[ok] * wdy[ok]) / det[ok]

    ymax = np.max(np.abs(values)) if values.size else 0.0
    wild = ok & ~(np.abs(est) <= 10.0 * ymax + 1e-12)
    bad = ~ok | wild
    if np.any(bad):
        if exclude_self:
            keep = np.ones(times.size, dtype=bool)
            for i in np.flatnonzero(bad):
                keep[:] = True
                keep[i] = False
                est[i] = _nearest_two_mean(t[i : i + 1], times[keep], values[keep])[0]
        else:
            est[bad] = _nearest_two_mean(t[bad], times, values)
    return est


@dataclass(frozen=True)
class SmoothEstimate:
    """Local linear estimate of one measured component, callable on [0, T]."""

    times: np.ndarray
    values: np.ndarray
    bandwidth: float
    kernel: str = KERNEL

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        _check_domain(t, self.T)
        if t.size == 0:
            return np.empty(0)
        return _local_linear(t, self.times, self.values, self.bandwidth)


def _check_domain(t, T):
    if t.size and (np.min(t) < 0.0 or np.max(t) > T):
        raise ValueError(f"evaluation points must lie in [0, {T}]")


def fit_local_linear(data: Dataset, component: int, bandwidth: float) -> SmoothEstimate:
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if data.n < 3:
        raise ValueError("local linear smoothing needs at least 3 samples")
    return SmoothEstimate(data.times, data.obs[component].copy(), float(bandwidth))


def loo_scores(data: Dataset, component: int, candidates: Sequence[float]) -> np.ndarray:
    """Leave-one-out mean squared prediction error for each candidate bandwidth."""
    y = data.obs[component]
    scores = []
    for h in candidates:
        pred = _local_linear(data.times, data.times, y, float(h), exclude_self=True)
        scores.append(np.mean((y - pred) ** 2))
    return np.array(scores)


def select_bandwidth_cv(data: Dataset, component: int, candidates: Sequence[float]) -> float:
    """Candidate with the smallest leave-one-out error; ties go to the larger bandwidth."""
    candidates = [float(h) for h in candidates]
    if not candidates:
        raise ValueError("need at least one candidate bandwidth")
    if any(h <= 0 for h in candidates):
        raise ValueError("candidate bandwidths must be positive")
    scores = loo_scores(data, component, candidates)
    # scores this close to each other count as ties
    tie = 1e-12 * max(float(np.mean(data.obs[component] ** 2)), np.finfo(float).tiny)
    best = None
    for h, s in sorted(zip(candidates, scores)):
        if best is None or s <= best[1] + tie:
            best = (h, min(s, best[1]) if best else s)
    return best[0]


def default_bandwidths(data: Dataset, count: int = 8) -> np.ndarray:
    """Geometric grid from 2*T/n to T/4."""
    T = data.T
    lo, hi = 2.0 * T / data.n, T / 4.0
    if lo >= hi:
        return np.array([hi])
    return np.geomspace(lo, hi, count)


def fit_all(data: Dataset, bandwidth=None) -> list:
    """Smooth every measured component, picking bandwidths by LOO-CV when not given."""
    out = []
    for j in range(data.r):
        h = bandwidth if bandwidth is not None else select_bandwidth_cv(data, j, default_bandwidths(data))
        out.append(fit_local_linear(data, j, h))
    return out


def evaluate_on_grid(estimates: Sequence[SmoothEstimate], grid) -> np.ndarray:
    """Stack the component estimates on ``grid`` into an ``r x N`` matrix."""
    grid = np.asarray(grid, dtype=float)
    if not estimates:
        raise ValueError("no component estimates given")
    _check_domain(grid, min(e.T for e in estimates))
    if grid.size == 0:
        return np.empty((len(estimates), 0))
    return np.stack([est(grid) for est in estimates])

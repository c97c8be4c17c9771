"""Spline sieve spaces with a joint L1 bound on the coefficients.

Each unmeasured component is a clamped uniform B-spline expansion
u_j(t) = sum_k beta[j, k] phi[j, k](t), and the flattened coefficient vector
must satisfy sum |beta| <= delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


def clamped_uniform_knots(K: int, degree: int, T: float) -> np.ndarray:
    """Knot vector for ``K`` basis functions on [0, T], endpoint multiplicity degree+1."""
    if K < degree + 1:
        raise ValueError(f"need at least {degree + 1} basis functions for degree {degree}, got {K}")
    inner = np.linspace(0.0, T, K - degree + 1)
    return np.concatenate([np.zeros(degree), inner, np.full(degree, float(T))])


def bspline_basis_eval(knots, degree: int, t) -> np.ndarray:
    """All B-spline basis values at ``t`` by the Cox-de Boor recursion.

    Returns shape ``(K,)`` for scalar ``t`` and ``(len(t), K)`` otherwise,
    with ``K = len(knots) - degree - 1``. The right end point belongs to the
    last non-degenerate knot span, so the clamped ends interpolate.
    """
    knots = np.asarray(knots, dtype=float)
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    K = knots.size - degree - 1
    lo, hi = knots[degree], knots[K]
    if t.size and (np.min(t) < lo or np.max(t) > hi):
        raise ValueError(f"evaluation points must lie in [{lo}, {hi}]")

    # span index s with knots[s] <= t < knots[s+1], degree <= s <= K-1
    span = np.searchsorted(knots, t, side="right") - 1
    span = np.clip(span, degree, K - 1)

    # triangular table of the degree+1 nonzero functions on each span
    N = np.zeros((t.size, degree + 1))
    N[:, 0] = 1.0
    left = np.zeros((t.size, degree + 1))
    right = np.zeros((t.size, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(t.size)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = np.divide(N[:, r], denom, out=np.zeros(t.size), where=denom != 0)
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved

    out = np.zeros((t.size, K))
    cols = span[:, None] - degree + np.arange(degree + 1)[None, :]
    np.put_along_axis(out, cols, N, axis=1)
    return out[0] if scalar else out


@dataclass(frozen=True)
class SieveSpec:
    """Per-component basis sizes ``K``, degree, L1 budget and domain end ``T``."""

    K: tuple
    delta: float
    T: float
    degree: int = 3

    def __post_init__(self):
        K = tuple(int(k) for k in self.K)
        if any(k < self.degree + 1 for k in K):
            raise ValueError(f"every K must be >= degree + 1 = {self.degree + 1}: {K}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        object.__setattr__(self, "K", K)

    @property
    def components(self) -> int:
        return len(self.K)

    @property
    def size(self) -> int:
        return sum(self.K)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.K)]).astype(int)

    @cached_property
    def knots(self) -> tuple:
        return tuple(clamped_uniform_knots(k, self.degree, self.T) for k in self.K)

    def split(self, coeffs) -> list:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ValueError(f"expected {self.size} coefficients, got shape {coeffs.shape}")
        off = self.offsets
        return [coeffs[off[j] : off[j + 1]] for j in range(self.components)]

    def design(self, grid) -> list:
        """Basis matrices ``(N, K_j)`` of every component on ``grid``."""
        return [bspline_basis_eval(kn, self.degree, grid) for kn in self.knots]


def eval_u(spec: SieveSpec, coeffs, grid=None, design=None) -> np.ndarray:
    """Candidate unmeasured components on the grid, shape ``(d - r) x N``.

    Pass a precomputed ``design`` (from ``spec.design(grid)``) to skip basis
    evaluation in hot loops.
    """
    parts = spec.split(coeffs)
    if design is None:
        design = spec.design(np.asarray(grid, dtype=float))
    return np.stack([D @ c for D, c in zip(design, parts)])


def project_l1(coeffs, delta: float) -> np.ndarray:
    """Euclidean projection onto {c : sum |c| <= delta}.

    Soft thresholding at the level tau found from the sorted magnitudes.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = np.asarray(coeffs, dtype=float)
    a = np.abs(v)
    if a.sum() <= delta:
        return v.copy()
    mu = np.sort(a)[::-1]
    css = np.cumsum(mu)
    ranks = np.arange(1, a.size + 1)
    rho = np.flatnonzero(mu - (css - delta) / ranks > 0)[-1]
    tau = (css[rho] - delta) / (rho + 1)
    return np.sign(v) * np.maximum(a - tau, 0.0)


def fit_best_approximation(spec: SieveSpec, target, grid) -> np.ndarray:
    """Least-squares spline fit of each target row, then projection onto the L1 ball."""
    grid = np.asarray(grid, dtype=float)
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if target.shape != (spec.components, grid.size):
        raise ValueError(f"target must have shape {(spec.components, grid.size)}, got {target.shape}")
    if grid.size < 2 * max(spec.K):
        raise ValueError(f"grid of {grid.size} points too coarse for K={max(spec.K)}")
    parts = []
    for D, y in zip(spec.design(grid), target):
        if np.linalg.matrix_rank(D) < D.shape[1]:
            raise ValueError("rank-deficient spline design")
        coef, *_ = np.linalg.lstsq(D, y, rcond=None)
        parts.append(coef)
    return project_l1(np.concatenate(parts), spec.delta)


def nested_size(K: int, degree: int = 3, base: int = 7) -> int:
    """Smallest K' >= K on the knot-halving ladder that starts at ``base``.

    Rungs have degree + (base - degree) * 2**l basis functions, so every
    rung's knot vector contains the previous one.
    """
    spans = base - degree
    level = 0
    while degree + spans * 2**level < K:
        level += 1
    return degree + spans * 2**level


def sieve_schedule(n: int, degree: int = 3, nested: bool = False):
    """Basis size and L1 budget for sample size ``n``; both nondecreasing in ``n``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    K = max(4 + degree, math.ceil(2.0 * n**0.25))
    if nested:
        K = nested_size(K, degree, base=4 + degree)
    delta = 10.0 * (1.0 + math.log10(n))
    return K, delta


def spec_for(n: int, components: int, T: float, degree: int = 3, nested: bool = False,
             K: int | None = None, delta: float | None = None) -> SieveSpec:
    """Sieve for ``components`` unmeasured states at sample size ``n``, with optional overrides."""
    K_n, delta_n = sieve_schedule(n, degree, nested)
    K = K_n if K is None else K
    delta = delta_n if delta is None else delta
    return SieveSpec(tuple([K] * components), delta, T, degree)


def random_feasible(spec: SieveSpec, rng, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    """Uniform draw on [low, high]^size projected onto the L1 ball."""
    return project_l1(rng.uniform(low, high, spec.size), spec.delta)


def l1_norm(coeffs) -> float:
    return float(np.sum(np.abs(coeffs)))

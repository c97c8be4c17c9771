"""Minimization of the integrated residual criterion over the spline sieve.

The search runs a feasible Nelder-Mead: every trial vertex is projected onto
the L1 ball before it is evaluated and stored, so the simplex never leaves
the sieve. Several starts hedge against local minima.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWinnerError, ModelError, SingularityError
from .estimator import (
    ParamEstimate,
    StateGrid,
    assemble_state,
    criterion,
    estimate_parameters,
    integral_operators,
    criterion_value,
    trapezoid_weights,
)
from .model import OdeModel
from .sieve import SieveSpec, fit_best_approximation, l1_norm, project_l1

PENALTY = 1e9


@dataclass(frozen=True)
class OptimizerConfig:
    max_evals: int = 5000
    starts: int = 5
    tol_f: float = 1e-9
    tol_x: float = 1e-7
    seed: int = 0
    adaptive: bool = True

    def __post_init__(self):
        if self.max_evals <= 0 or self.starts <= 0 or self.tol_f <= 0 or self.tol_x <= 0:
            raise ValueError("optimizer settings must be positive")


@dataclass
class StartSummary:
    index: int
    kind: str
    best_value: float
    evals: int
    iterations: int
    converged: bool
    trace: list = field(default_factory=list, repr=False)


@dataclass
class OptResult:
    best_coeffs: np.ndarray
    best_value: float
    evals: int
    converged: bool
    starts: list = field(default_factory=list)


@dataclass
class Estimate:
    """Final estimates at the optimizer's winner, plus diagnostics."""

    theta: np.ndarray
    xi: np.ndarray
    u_coeffs: np.ndarray
    mn_value: float
    converged: bool
    evals: int
    seed: int
    condition_B: float = float("nan")
    condition_outer: float = float("nan")
    opt: OptResult | None = field(default=None, repr=False)


class CriterionObjective:
    """coeffs -> criterion value of the state (measured rows, spline rows).

    Basis matrices and quadrature weights are computed once. Candidates
    whose closed form is singular score ``1e9 + ||coeffs||_1``.
    """

    def __init__(self, model: OdeModel, m_grid, spec: SieveSpec, grid):
        self.model = model
        self.grid = np.asarray(grid, dtype=float)
        self.m_grid = np.atleast_2d(np.asarray(m_grid, dtype=float))
        if self.m_grid.shape != (model.r, self.grid.size):
            raise ValueError(f"measured rows must have shape {(model.r, self.grid.size)}")
        if not np.all(np.isfinite(self.m_grid)):
            raise ValueError("measured rows contain non-finite values")
        if spec.components != model.d - model.r:
            raise ValueError(f"sieve has {spec.components} components, model has {model.d - model.r} unmeasured")
        self.spec = spec
        self.weights = trapezoid_weights(self.grid)
        self.design = spec.design(self.grid)
        self._unmeasured = list(model.unmeasured)
        self._base = assemble_state(self.m_grid, np.zeros((spec.components, self.grid.size)),
                                    model.measured, self.grid).values

    def state(self, coeffs) -> StateGrid:
        values = self._base.copy()
        parts = self.spec.split(coeffs)
        for row, D, c in zip(self._unmeasured, self.design, parts):
            values[row] = D @ c
        return StateGrid(self.grid, values)

    def pipeline(self, coeffs):
        """(value, ParamEstimate, StateGrid); raises on singular candidates."""
        state = self.state(coeffs)
        value, est, _ = criterion(self.model, state, self.weights)
        return value, est, state

    def __call__(self, coeffs) -> float:
        try:
            with np.errstate(all="ignore"):
                value = self.pipeline(coeffs)[0]
        except (SingularityError, ModelError, np.linalg.LinAlgError):
            return PENALTY + l1_norm(coeffs)
        if not np.isfinite(value):
            return PENALTY + l1_norm(coeffs)
        return value


def build_objective(model: OdeModel, m_hat_grid, spec: SieveSpec, grid) -> CriterionObjective:
    return CriterionObjective(model, m_hat_grid, spec, grid)


def _nelder_mead(f, x0, scale, project, max_evals, tol_f, tol_x, adaptive):
    """Feasible Nelder-Mead; returns (x, fx, evals, iterations, converged, trace)."""
    n = x0.size
    if adaptive and n > 1:
        rho, chi, gamma, sigma = 1.0, 1.0 + 2.0 / n, 0.75 - 0.5 / n, 1.0 - 1.0 / n
    else:
        rho, chi, gamma, sigma = 1.0, 2.0, 0.5, 0.5

    evals = 0

    def ev(x):
        nonlocal evals
        evals += 1
        return f(x)

    sim = np.empty((n + 1, n))
    sim[0] = project(x0)
    for i in range(n):
        y = sim[0].copy()
        y[i] += scale
        sim[i + 1] = project(y)
    fs = np.array([ev(x) for x in sim])

    trace = []
    iterations = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        trace.append(float(fs[0]))
        if np.max(np.abs(sim[1:] - sim[0])) < tol_x or fs[-1] - fs[0] < tol_f:
            converged = True
            break
        if evals >= max_evals:
            break
        iterations += 1

        centroid = sim[:-1].mean(axis=0)
        xr = project(centroid + rho * (centroid - sim[-1]))
        fr = ev(xr)
        if fr < fs[0]:
            if evals >= max_evals:
                sim[-1], fs[-1] = xr, fr
                continue
            xe = project(centroid + rho * chi * (centroid - sim[-1]))
            fe = ev(xe)
            sim[-1], fs[-1] = (xe, fe) if fe < fr else (xr, fr)
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if evals >= max_evals:
            continue
        if fr < fs[-1]:
            xc = project(centroid + gamma * rho * (centroid - sim[-1]))
            fc = ev(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = project(centroid - gamma * (centroid - sim[-1]))
            fc = ev(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            if evals >= max_evals:
                break
            sim[i] = project(sim[0] + sigma * (sim[i] - sim[0]))
            fs[i] = ev(sim[i])

    best = int(np.argmin(fs))
    return sim[best].copy(), float(fs[best]), evals, iterations, converged, trace


def start_points(spec: SieveSpec, config: OptimizerConfig, level_range=(-1.0, 1.0), grid=None):
    """(kind, coeffs) pairs: zeros, a constant at the midrange level, then seeded random points."""
    lo, hi = (float(v) for v in level_range)
    points = [("zeros", np.zeros(spec.size))]
    if config.starts >= 2:
        if grid is None:
            grid = np.linspace(0.0, spec.T, max(201, 4 * max(spec.K)))
        level = np.full((spec.components, len(grid)), 0.5 * (lo + hi))
        points.append(("midrange", fit_best_approximation(spec, level, grid)))
    for k in range(2, config.starts):
        rng = np.random.default_rng([config.seed, k])
        points.append(("random", project_l1(rng.uniform(lo, hi, spec.size), spec.delta)))
    return points


def minimize(objective, spec: SieveSpec, config: OptimizerConfig = OptimizerConfig(),
             level_range=None) -> OptResult:
    """Multistart feasible Nelder-Mead over the sieve coefficients.

    ``level_range`` sets the constant start (its midpoint) and the box from
    which random starts are drawn; by default it is the range of the
    objective's measured rows when available, else [-1, 1].
    """
    dim = spec.size
    if config.max_evals < dim + 2:
        raise ValueError(f"budget {config.max_evals} too small for dimension {dim}")
    if level_range is None:
        m = getattr(objective, "m_grid", None)
        level_range = (float(np.min(m)), float(np.max(m))) if m is not None else (-1.0, 1.0)
    grid = getattr(objective, "grid", None)

    scale = 0.1 * max(1.0, spec.delta / dim)

    def project(x):
        return project_l1(x, spec.delta)

    best = None
    summaries = []
    total = 0
    for index, (kind, x0) in enumerate(start_points(spec, config, level_range, grid)):
        x, fx, evals, iterations, converged, trace = _nelder_mead(
            objective, x0, scale, project, config.max_evals, config.tol_f, config.tol_x, config.adaptive
        )
        total += evals
        summaries.append(StartSummary(index, kind, fx, evals, iterations, converged, trace))
        if best is None or fx < best[1]:
            best = (x, fx, converged)
    return OptResult(best[0], best[1], total, best[2], summaries)


def direct_estimate(model: OdeModel, x_grid, grid, seed: int = 0) -> Estimate:
    """Closed-form estimate when every component is measured; no search needed."""
    state = StateGrid(np.asarray(grid, dtype=float), np.atleast_2d(np.asarray(x_grid, dtype=float)))
    weights = trapezoid_weights(state.times)
    ops = integral_operators(model, state, weights)
    est = estimate_parameters(state, ops, weights)
    value = criterion_value(state, ops, est, weights)
    return Estimate(est.theta, est.xi, np.empty(0), value, True, 0, seed, est.condition_B, est.condition_outer)


def final_estimate(opt: OptResult, objective: CriterionObjective, seed: int = 0) -> Estimate:
    """Closed-form (theta, xi) at the winning coefficients."""
    if l1_norm(opt.best_coeffs) > objective.spec.delta * (1 + 1e-12) + 1e-12:
        raise ValueError("winning coefficients violate the L1 budget")
    try:
        value, est, _ = objective.pipeline(opt.best_coeffs)
    except SingularityError as exc:
        raise DegenerateWinnerError(f"optimizer winner is degenerate: {exc}") from exc
    if not np.isfinite(value):
        raise DegenerateWinnerError("criterion at the winner is not finite")
    est: ParamEstimate
    return Estimate(est.theta, est.xi, opt.best_coeffs.copy(), value, opt.converged, opt.evals, seed,
                    est.condition_B, est.condition_outer, opt)

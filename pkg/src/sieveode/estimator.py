"""Integral operators, closed-form (xi, theta) and the integrated residual criterion.

Given a state path x(t) on a uniform grid, with running integral
G(t) = int_0^t g(x(s)) ds, the quadratic

    int_0^T || x(t) - xi - G(t) theta ||^2 dt

has the closed-form minimizer computed by :func:`estimate_parameters`, and
:func:`criterion_value` evaluates the quadratic at it. Feeding smoothed
measurements gives the data-driven criterion; feeding the true measured
components gives its deterministic limit.

All integrals use the composite trapezoid rule on the shared grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ModelError, SingularityError
from .model import OdeModel

CONDITION_LIMIT = 1e12


def _uniform_step(times) -> float:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2:
        raise ValueError("need a 1-d grid with at least 2 points")
    steps = np.diff(times)
    h = (times[-1] - times[0]) / (times.size - 1)
    if not h > 0 or np.max(np.abs(steps - h)) > 1e-9 * h:
        raise ValueError("grid must be uniform and increasing")
    return h


def trapezoid_weights(times) -> np.ndarray:
    h = _uniform_step(times)
    w = np.full(len(times), h)
    w[0] = w[-1] = 0.5 * h
    return w


def cumulative_trapezoid(values, times) -> np.ndarray:
    """Running trapezoid integral along the last axis; the first entry is zero."""
    h = _uniform_step(times)
    return integrate.cumulative_trapezoid(values, dx=h, axis=-1, initial=0.0)


def definite_trapezoid(values, times):
    """Trapezoid integral over the whole grid along the last axis."""
    return cumulative_trapezoid(values, times)[..., -1]


@dataclass(frozen=True)
class StateGrid:
    times: np.ndarray
    values: np.ndarray  # d x N

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])


@dataclass(frozen=True)
class IntegralOperators:
    G: np.ndarray  # d x p x N running integral of g
    A: np.ndarray  # d x p
    B: np.ndarray  # p x p


@dataclass(frozen=True)
class ParamEstimate:
    xi: np.ndarray
    theta: np.ndarray
    condition_B: float
    condition_outer: float


def assemble_state(m_vals, u_vals, measured, times) -> StateGrid:
    """Interleave measured rows and candidate rows back into original state order.

    Row ``measured[j]`` receives ``m_vals[j]``; the remaining indices, in
    ascending order, receive the rows of ``u_vals``.
    """
    m_vals = np.atleast_2d(np.asarray(m_vals, dtype=float))
    u_vals = np.asarray(u_vals, dtype=float).reshape(-1, m_vals.shape[1])
    measured = tuple(int(i) for i in measured)
    if len(measured) != m_vals.shape[0]:
        raise ValueError(f"{m_vals.shape[0]} measured rows for {len(measured)} measured indices")
    if len(set(measured)) != len(measured):
        raise ValueError("measured indices overlap")
    d = m_vals.shape[0] + u_vals.shape[0]
    if any(i < 0 or i >= d for i in measured):
        raise ValueError(f"measured indices out of range for d={d}")
    if len(times) != m_vals.shape[1]:
        raise ValueError("grid size does not match the number of columns")
    unmeasured = [i for i in range(d) if i not in measured]
    values = np.empty((d, m_vals.shape[1]))
    values[list(measured)] = m_vals
    values[unmeasured] = u_vals
    return StateGrid(np.asarray(times, dtype=float), values)


def integral_operators(model: OdeModel, state: StateGrid, weights=None) -> IntegralOperators:
    gvals = np.asarray(model.g(state.values), dtype=float)
    N = state.values.shape[1]
    if gvals.shape != (model.d, model.p, N):
        raise ModelError(f"{model.name}: g returned shape {gvals.shape}, expected {(model.d, model.p, N)}")
    if not np.all(np.isfinite(gvals)):
        k = int(np.argmax(~np.isfinite(gvals).all(axis=(0, 1))))
        raise ModelError(f"{model.name}: non-finite g at t={state.times[k]:.6g}")
    if weights is None:
        weights = trapezoid_weights(state.times)
    G = cumulative_trapezoid(gvals, state.times)
    A = G @ weights
    B = np.einsum("ipn,iqn,n->pq", G, G, weights)
    B = 0.5 * (B + B.T)
    return IntegralOperators(G, A, B)


def _checked_solve(M, rhs, name):
    cond = np.linalg.cond(M)
    if not cond <= CONDITION_LIMIT:
        raise SingularityError(name, cond)
    return np.linalg.solve(M, rhs), cond


def estimate_parameters(state: StateGrid, ops: IntegralOperators, weights=None) -> ParamEstimate:
    """Closed-form minimizer (xi, theta) of the integrated squared residual."""
    if weights is None:
        weights = trapezoid_weights(state.times)
    x = state.values
    d = x.shape[0]
    int_x = x @ weights
    int_Gx = np.einsum("ipn,in,n->p", ops.G, x, weights)
    BinvAt, cond_B = _checked_solve(ops.B, np.column_stack([ops.A.T, int_Gx]), "B")
    Binv_At, Binv_Gx = BinvAt[:, :d], BinvAt[:, d]
    outer = state.T * np.eye(d) - ops.A @ Binv_At
    xi, cond_outer = _checked_solve(outer, int_x - ops.A @ Binv_Gx, "outer")
    theta = Binv_Gx - Binv_At @ xi
    return ParamEstimate(xi, theta, float(cond_B), float(cond_outer))


def residual(state: StateGrid, ops: IntegralOperators, est: ParamEstimate) -> np.ndarray:
    """x(t) - xi - G(t) theta on the grid, shape ``d x N``."""
    return state.values - est.xi[:, None] - np.einsum("ipn,p->in", ops.G, est.theta)


def criterion_value(state: StateGrid, ops: IntegralOperators, est: ParamEstimate, weights=None) -> float:
    if weights is None:
        weights = trapezoid_weights(state.times)
    res = residual(state, ops, est)
    return float(np.einsum("in,in,n->", res, res, weights))


def criterion(model: OdeModel, state: StateGrid, weights=None):
    """Run operators, closed form and criterion on one state path.

    Returns ``(value, ParamEstimate, IntegralOperators)``; raises
    :class:`SingularityError` when the closed form is not well defined.
    """
    if weights is None:
        weights = trapezoid_weights(state.times)
    ops = integral_operators(model, state, weights)
    est = estimate_parameters(state, ops, weights)
    return criterion_value(state, ops, est, weights), est, ops

"""ODE systems of the form x'(t) = g(x(t)) theta, simulation and noisy sampling.

The map ``g`` of every model takes a state array of shape ``(d, ...)`` and
returns an array of shape ``(d, p, ...)``, broadcasting over the trailing
axes. That lets the estimator evaluate ``g`` on a whole time grid at once.

State indices are 0-based throughout the package.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DivergenceError, ModelError

OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class OdeModel:
    """A system linear in its parameters, F(x; theta) = g(x) theta.

    Parameters
    ----------
    name : str
        Identifier used by the CLI and config files.
    d, p : int
        State and parameter dimensions.
    g : callable
        Vectorized map from states ``(d, ...)`` to matrices ``(d, p, ...)``.
    measured : tuple of int
        Indices of the observed state components, in observation order.
    """

    name: str
    d: int
    p: int
    g: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    measured: tuple = (0,)

    def __post_init__(self):
        measured = tuple(int(i) for i in self.measured)
        if not 1 <= len(measured) <= self.d:
            raise ValueError(f"need between 1 and {self.d} measured components, got {len(measured)}")
        if len(set(measured)) != len(measured):
            raise ValueError(f"measured indices must be distinct: {measured}")
        if any(i < 0 or i >= self.d for i in measured):
            raise ValueError(f"measured indices must lie in 0..{self.d - 1}: {measured}")
        object.__setattr__(self, "measured", measured)

    @property
    def r(self) -> int:
        return len(self.measured)

    @property
    def unmeasured(self) -> tuple:
        return tuple(i for i in range(self.d) if i not in self.measured)

    @property
    def fully_observed(self) -> bool:
        return self.r == self.d

    def with_measured(self, measured: Sequence[int]) -> "OdeModel":
        return dataclasses.replace(self, measured=tuple(measured))

    def rhs(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Vector field g(x) theta for a single state or a batch ``(d, ...)``."""
        return np.einsum("ij...,j->i...", self.g(x), theta)


def _lotka_volterra_g(x):
    prey, pred = x[0], x[1]
    out = np.zeros((2, 4) + np.shape(prey), dtype=float)
    out[0, 0] = prey
    out[0, 1] = -prey * pred
    out[1, 2] = prey * pred
    out[1, 3] = -pred
    return out


def _harmonic_g(x):
    out = np.zeros((2, 2) + np.shape(x[0]), dtype=float)
    out[0, 0] = x[1]
    out[1, 1] = -x[0]
    return out


def _exponential_g(x):
    return np.asarray(x, dtype=float)[:1][:, None]


def lotka_volterra(measured=(0,)) -> OdeModel:
    """prey' = a*prey - b*prey*pred, pred' = c*prey*pred - e*pred."""
    return OdeModel("lotka_volterra", 2, 4, _lotka_volterra_g, tuple(measured))


def harmonic_oscillator(measured=(0,)) -> OdeModel:
    """x1' = a*x2, x2' = -b*x1."""
    return OdeModel("harmonic_oscillator", 2, 2, _harmonic_g, tuple(measured))


def exponential(measured=(0,)) -> OdeModel:
    """Scalar growth x' = theta*x."""
    return OdeModel("exponential", 1, 1, _exponential_g, tuple(measured))


BUILTIN_MODELS = {
    "lotka_volterra": lotka_volterra,
    "harmonic_oscillator": harmonic_oscillator,
    "exponential": exponential,
}


def get_model(name: str, measured: Optional[Sequence[int]] = None) -> OdeModel:
    try:
        factory = BUILTIN_MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(BUILTIN_MODELS)}") from None
    return factory() if measured is None else factory(tuple(measured))


def eval_g(model: OdeModel, x) -> np.ndarray:
    """Evaluate g at a single state; returns a ``(d, p)`` matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ValueError(f"state must have shape ({model.d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"state has non-finite entries: {x}")
    out = np.asarray(model.g(x), dtype=float)
    if out.shape != (model.d, model.p):
        raise ModelError(f"{model.name}: g returned shape {out.shape}, expected ({model.d}, {model.p})")
    if not np.all(np.isfinite(out)):
        raise ModelError(f"{model.name}: g returned non-finite values at x={x}")
    return out


@dataclass(frozen=True)
class Trajectory:
    """States ``values[:, k]`` at ``times[k]``; times start at 0 and end at T."""

    times: np.ndarray
    values: np.ndarray

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def at(self, t, rows=None) -> np.ndarray:
        """Linear interpolation of the selected rows at times ``t``."""
        t = np.asarray(t, dtype=float)
        rows = range(self.values.shape[0]) if rows is None else rows
        return np.stack([np.interp(t, self.times, self.values[i]) for i in rows])


def uniform_grid(T: float, step: float) -> np.ndarray:
    """Uniform grid on [0, T] whose spacing is at most ``step``; both ends included."""
    if T < 0 or step <= 0:
        raise ValueError("need T >= 0 and step > 0")
    if T == 0:
        return np.zeros(1)
    count = int(np.ceil(T / step - 1e-9))
    return np.linspace(0.0, T, count + 1)


def simulate(model: OdeModel, theta, xi, grid) -> Trajectory:
    """Classical RK4 solution of x' = g(x) theta, x(0) = xi, stepping between grid points."""
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if theta.shape != (model.p,) or xi.shape != (model.d,):
        raise ValueError(f"expected theta of length {model.p} and xi of length {model.d}")
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(xi))):
        raise ValueError("theta and xi must be finite")
    if grid.ndim != 1 or grid.size == 0 or grid[0] != 0.0:
        raise ValueError("grid must be a non-empty 1-d array starting at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")

    def f(x):
        return model.g(x) @ theta

    values = np.empty((model.d, grid.size))
    x = xi.copy()
    values[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, grid.size):
            h = grid[k] - grid[k - 1]
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.abs(x) <= OVERFLOW_GUARD):
                raise DivergenceError(grid[k])
            values[:, k] = x
    return Trajectory(grid, values)


@dataclass(frozen=True)
class Dataset:
    """Noisy measurements ``obs[j, i]`` of the j-th measured component at ``times[i]``."""

    times: np.ndarray
    obs: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        obs = np.atleast_2d(np.asarray(self.obs, dtype=float))
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a dataset needs at least 2 sample times")
        if np.any(np.diff(times) <= 0) or times[0] < 0:
            raise ValueError("sample times must be non-negative and strictly increasing")
        if obs.shape[1] != times.size:
            raise ValueError(f"obs has {obs.shape[1]} columns for {times.size} sample times")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "obs", obs)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def r(self) -> int:
        return self.obs.shape[0]

    @property
    def T(self) -> float:
        return float(self.times[-1])


def generate_observations(traj: Trajectory, measured, sample_times, sigma: float, seed: int) -> Dataset:
    """Sample measured rows at ``sample_times`` and add i.i.d. N(0, sigma^2) noise."""
    sample_times = np.asarray(sample_times, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sample_times.size and (sample_times[0] < 0 or sample_times[-1] > traj.T):
        raise ValueError(f"sample times must lie in [0, {traj.T}]")
    measured = tuple(int(i) for i in measured)
    clean = traj.at(sample_times, measured)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.shape)
    meta = {"sigma": float(sigma), "seed": int(seed), "measured": measured}
    return Dataset(sample_times, clean + sigma * noise, meta)


def write_dataset_csv(data: Dataset, path) -> None:
    """Write ``t,y1,...,yr`` rows with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"y{j + 1}" for j in range(data.r)])
        for i, t in enumerate(data.times):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in data.obs[:, i]])


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t" or len(header) < 2:
            raise ValueError(f"{path}: expected header 't,y1,...,yr'")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    if table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return Dataset(table[:, 0], table[:, 1:].T, {"source": str(path)})

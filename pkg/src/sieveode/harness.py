"""End-to-end runs: simulate, smooth, search the sieve, estimate; Monte-Carlo sweeps."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import smoother
from .errors import DegenerateWinnerError, DivergenceError, ModelError
from .model import Dataset, Trajectory, generate_observations, get_model, read_dataset_csv, simulate
from .optimizer import (
    Estimate,
    OptimizerConfig,
    build_objective,
    direct_estimate,
    final_estimate,
    minimize,
)
from .sieve import SieveSpec, eval_u, project_l1, spec_for

log = logging.getLogger(__name__)

# numerical failures recorded per replication; anything else aborts the sweep
RECOVERABLE = (ArithmeticError, DegenerateWinnerError, DivergenceError, ModelError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class RunConfig:
    model: str = "lotka_volterra"
    theta: tuple = (1.0, 1.0, 1.0, 1.0)
    xi: tuple = (1.0, 2.0)
    t_end: float = 5.0
    n: int = 100
    sigma: float = 0.1
    measured: Optional[tuple] = None
    grid: int = 1001
    sim_refine: int = 10
    degree: int = 3
    k: Optional[int] = None
    delta: Optional[float] = None
    nested: bool = False
    bandwidth: Optional[float] = None
    exact_m: bool = False
    starts: int = 5
    max_evals: int = 5000
    tol_f: float = 1e-9
    tol_x: float = 1e-7
    seed: int = 0
    n_list: tuple = (100, 400, 1600)
    reps: int = 25
    candidates: int = 50
    data: Optional[str] = None
    record_timing: bool = True
    workers: int = 1
    out_csv: Optional[str] = None
    out_svg: Optional[str] = None
    out_json: Optional[str] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.grid < 3:
            raise ValueError("grid must have at least 3 points")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def build_model(self):
        return get_model(self.model, self.measured)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(self.max_evals, self.starts, self.tol_f, self.tol_x, self.seed)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw: str) -> tuple:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> tuple:
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _optional(convert):
    def parse(raw):
        return None if raw.lower() in ("", "none") else convert(raw)
    return parse


_CONVERTERS = {
    "model": str, "theta": _floats, "xi": _floats, "t_end": float, "n": int, "sigma": float,
    "measured": _optional(_ints), "grid": int, "sim_refine": int, "degree": int,
    "k": _optional(int), "delta": _optional(float), "nested": _bool, "bandwidth": _optional(float),
    "exact_m": _bool, "starts": int, "max_evals": int, "tol_f": float, "tol_x": float, "seed": int,
    "n_list": _ints, "reps": int, "candidates": int, "data": _optional(str), "record_timing": _bool,
    "workers": int, "out_csv": _optional(str), "out_svg": _optional(str), "out_json": _optional(str),
}


def parse_config_text(text: str) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment, arrays are comma-separated."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](raw)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


@dataclass(frozen=True)
class SweepRow:
    n: int
    rep: int
    theta_err: float
    xi_err: float
    m_sup_err: float
    u_sup_err: float
    mn_value: float
    wall_ms: float
    failed: int = 0

    @classmethod
    def failure(cls, n, rep, wall_ms=0.0):
        return cls(n, rep, -1.0, -1.0, -1.0, -1.0, -1.0, wall_ms, 1)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def medians(self, column: str = "theta_err") -> dict:
        """Median of ``column`` per sample size over successful replications."""
        out = {}
        for n in sorted({r.n for r in self.rows}):
            vals = [getattr(r, column) for r in self.rows if r.n == n and not r.failed]
            out[n] = float(np.median(vals)) if vals else float("nan")
        return out


@dataclass
class Problem:
    """Everything a run needs before the search: data, grid, smoothed rows, optional truth."""

    model: object
    dataset: Dataset
    grid: np.ndarray
    m_grid: np.ndarray
    truth: Optional[Trajectory] = None


def simulate_dataset(config: RunConfig, model=None):
    """Simulate on a grid ``sim_refine`` times finer than the quadrature grid and sample it."""
    model = model or config.build_model()
    fine = np.linspace(0.0, config.t_end, (config.grid - 1) * config.sim_refine + 1)
    traj = simulate(model, config.theta, config.xi, fine)
    sample_times = np.linspace(0.0, config.t_end, config.n)
    data = generate_observations(traj, model.measured, sample_times, config.sigma, config.seed)
    data.meta.update(theta=tuple(config.theta), xi=tuple(config.xi))
    return traj, data


def prepare(config: RunConfig, dataset: Optional[Dataset] = None) -> Problem:
    model = config.build_model()
    truth = None
    if dataset is None and config.data:
        dataset = read_dataset_csv(config.data)
    if dataset is None:
        truth, dataset = simulate_dataset(config, model)
    if dataset.r != model.r:
        raise ValueError(f"data has {dataset.r} measured rows, model expects {model.r}")
    grid = np.linspace(0.0, dataset.T, config.grid)
    if config.exact_m:
        if truth is None:
            raise ValueError("exact_m needs simulated data")
        m_grid = truth.at(grid, model.measured)
    else:
        fits = smoother.fit_all(dataset, config.bandwidth)
        m_grid = smoother.evaluate_on_grid(fits, grid)
    return Problem(model, dataset, grid, m_grid, truth)


def sieve_for(config: RunConfig, problem: Problem) -> SieveSpec:
    model = problem.model
    return spec_for(problem.dataset.n, model.d - model.r, float(problem.grid[-1]),
                    config.degree, config.nested, config.k, config.delta)


def _sup_norm(diff) -> float:
    diff = np.atleast_2d(diff)
    if diff.size == 0:
        return 0.0
    return float(np.max(np.sqrt(np.sum(diff * diff, axis=0))))


def estimate_problem(config: RunConfig, problem: Problem) -> Estimate:
    model = problem.model
    if model.fully_observed:
        order = np.argsort(model.measured)
        return direct_estimate(model, problem.m_grid[order], problem.grid, config.seed)
    spec = sieve_for(config, problem)
    objective = build_objective(model, problem.m_grid, spec, problem.grid)
    opt = minimize(objective, spec, config.optimizer())
    return final_estimate(opt, objective, config.seed)


def run_estimation(config: RunConfig, dataset: Optional[Dataset] = None):
    """Full pipeline; returns ``(Estimate, SweepRow or None)``.

    The row is only available when the truth is known (simulated data).
    """
    start = time.perf_counter()
    problem = prepare(config, dataset)
    est = estimate_problem(config, problem)
    wall_ms = (time.perf_counter() - start) * 1e3 if config.record_timing else 0.0
    if problem.truth is None:
        return est, None
    model = problem.model
    truth = problem.truth
    m_true = truth.at(problem.grid, model.measured)
    if model.fully_observed:
        u_err = 0.0
    else:
        spec = sieve_for(config, problem)
        u_hat = eval_u(spec, est.u_coeffs, problem.grid)
        u_err = _sup_norm(u_hat - truth.at(problem.grid, model.unmeasured))
    row = SweepRow(
        n=problem.dataset.n,
        rep=0,
        theta_err=float(np.linalg.norm(est.theta - np.asarray(config.theta))),
        xi_err=float(np.linalg.norm(est.xi - np.asarray(config.xi))),
        m_sup_err=_sup_norm(problem.m_grid - m_true),
        u_sup_err=u_err,
        mn_value=est.mn_value,
        wall_ms=wall_ms,
    )
    return est, row


def _replication(job):
    config, rep = job
    start = time.perf_counter()
    try:
        _, row = run_estimation(config)
    except RECOVERABLE as exc:
        log.warning("n=%d rep=%d failed: %s", config.n, rep, exc)
        wall_ms = (time.perf_counter() - start) * 1e3 if config.record_timing else 0.0
        return SweepRow.failure(config.n, rep, wall_ms)
    return dataclasses.replace(row, rep=rep)


def _run_jobs(fn, jobs, workers):
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def run_consistency_sweep(base: RunConfig, n_list: Optional[Sequence[int]] = None,
                          reps: Optional[int] = None, workers: Optional[int] = None) -> SweepResult:
    """Replicate the estimation for every sample size; replication ``k`` uses seed ``base.seed + k``."""
    n_list = tuple(base.n_list if n_list is None else n_list)
    reps = base.reps if reps is None else reps
    if reps < 3:
        raise ValueError("a sweep needs at least 3 replications")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    base.build_model()  # config errors surface before any work
    jobs = [(base.replace(n=n, seed=base.seed + rep), rep) for n in n_list for rep in range(reps)]
    rows = _run_jobs(_replication, jobs, base.workers if workers is None else workers)
    return SweepResult(rows)


@dataclass(frozen=True)
class GapRow:
    n: int
    rep: int
    max_gap: float
    evaluated: int


def candidate_coefficients(spec: SieveSpec, count: int, low: float, high: float, rng) -> list:
    """Uniform coefficient draws on [low, high], projected onto the L1 ball."""
    return [project_l1(rng.uniform(low, high, spec.size), spec.delta) for _ in range(count)]


def _gap_job(job):
    config, rep, count = job
    problem = prepare(config)
    if problem.truth is None:
        raise ValueError("the gap probe needs simulated data")
    model = problem.model
    spec = sieve_for(config, problem)
    m_true = problem.truth.at(problem.grid, model.measured)
    smoothed = build_objective(model, problem.m_grid, spec, problem.grid)
    exact = build_objective(model, m_true, spec, problem.grid)
    u_true = problem.truth.at(problem.grid, model.unmeasured)
    rng = np.random.default_rng([config.seed, config.n])
    gap, evaluated = 0.0, 0
    for coeffs in candidate_coefficients(spec, count, float(u_true.min()), float(u_true.max()), rng):
        try:
            diff = abs(smoothed.pipeline(coeffs)[0] - exact.pipeline(coeffs)[0])
        except RECOVERABLE:
            continue
        gap = max(gap, diff)
        evaluated += 1
    return GapRow(problem.dataset.n, rep, gap, evaluated)


def run_gap_probe(base: RunConfig, n_list: Optional[Sequence[int]] = None,
                  candidate_count: Optional[int] = None, reps: int = 1,
                  workers: Optional[int] = None) -> list:
    """Max over random sieve elements of |M_n(u) - M(u)| per sample size and replication."""
    if base.data:
        raise ValueError("the gap probe needs simulated data")
    model = base.build_model()
    if model.fully_observed:
        raise ValueError("the gap probe needs at least one unmeasured component")
    n_list = tuple(base.n_list if n_list is None else n_list)
    count = base.candidates if candidate_count is None else candidate_count
    jobs = [(base.replace(n=n, seed=base.seed + rep), rep, count) for n in n_list for rep in range(reps)]
    return _run_jobs(_gap_job, jobs, base.workers if workers is None else workers)


def gap_medians(rows: Sequence[GapRow]) -> dict:
    return {n: float(np.median([r.max_gap for r in rows if r.n == n])) for n in sorted({r.n for r in rows})}

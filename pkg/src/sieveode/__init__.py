"""Direct integral estimation for partially observed ODE systems linear in the parameters."""

from .errors import DegenerateWinnerError, DivergenceError, ModelError, SingularityError
from .harness import RunConfig, run_consistency_sweep, run_estimation, run_gap_probe
from .model import Dataset, OdeModel, Trajectory, generate_observations, get_model, simulate
from .optimizer import Estimate, OptimizerConfig
from .sieve import SieveSpec

__all__ = [
    "DegenerateWinnerError",
    "DivergenceError",
    "ModelError",
    "SingularityError",
    "RunConfig",
    "run_consistency_sweep",
    "run_estimation",
    "run_gap_probe",
    "Dataset",
    "OdeModel",
    "Trajectory",
    "generate_observations",
    "get_model",
    "simulate",
    "Estimate",
    "OptimizerConfig",
    "SieveSpec",
]

__version__ = "0.1.0"

"""Stochastic Koiter shells: geometry, energies, transport noise and solvers."""
from .charts import get_chart
from .config import Config, dump_config, parse_config
from .elasticity import ShellParams
from .ensemble import EnsembleStats, estimate_growth_rate, exceedance_probability, run_ensemble
from .solver import ShellState, dispersion, linear_propagator, run_simulation
from .spectral import SpectralGrid, build_grid
from .stochastic import derive_path_seed, make_noise_model

__version__ = "0.1.0"

__all__ = [
    "Config",
    "EnsembleStats",
    "ShellParams",
    "ShellState",
    "SpectralGrid",
    "build_grid",
    "derive_path_seed",
    "dispersion",
    "dump_config",
    "estimate_growth_rate",
    "exceedance_probability",
    "get_chart",
    "linear_propagator",
    "make_noise_model",
    "parse_config",
    "run_ensemble",
    "run_simulation",
]

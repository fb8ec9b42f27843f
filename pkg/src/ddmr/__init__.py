"""Domain-decomposition model reduction for PDEs with random coefficients."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .mesh_fem import (CellField, ConvectionProblem, DiffusionProblem, Mesh,
                       assemble, build_mesh, solve_full)
from .partition import DomainPartition, build_partition
from .dd_exact import dd_solve
from .pipeline import (ReducedModel, SolveResult, load_model, offline_train,
                       online_solve, reconstruct, save_model)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "RunConfig", "load_config", "parse_config",
    "CellField", "ConvectionProblem", "DiffusionProblem", "Mesh",
    "assemble", "build_mesh", "solve_full",
    "DomainPartition", "build_partition", "dd_solve",
    "ReducedModel", "SolveResult", "load_model", "offline_train",
    "online_solve", "reconstruct", "save_model",
    "__version__",
]

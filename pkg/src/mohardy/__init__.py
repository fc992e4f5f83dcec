"""Numerical lab for local Musielak-Orlicz Hardy spaces on 1D and 2D grids."""

__version__ = "0.1.0"

from .errors import (ConfigError, DomainError, MoHardyError, PreconditionError,  # noqa: E402
                     ResolutionError)
from .grid import Cube, Grid, GridFunction  # noqa: E402
from .growth import GrowthFunction, builtin_family, from_descriptor  # noqa: E402
from .norms import chi_norm, luxembourg_norm, modular  # noqa: E402
from .weights import a_p_loc_constant, default_lattice  # noqa: E402
from .maximal import MaximalParams, h_phi_quasinorm, maximal_function  # noqa: E402
from .czd import cz_decompose, whitney  # noqa: E402
from .atoms import atomic_decompose, validate_atom  # noqa: E402
from .bmo import bmo_phi_norm, psi_from_phi, phi0_from_psi  # noqa: E402
from .operators import Symbol, psdo_apply, riesz_local  # noqa: E402
from .corpus import generate_corpus  # noqa: E402
from .config import ExperimentConfig, load_config  # noqa: E402

__all__ = [
    "__version__", "MoHardyError", "DomainError", "PreconditionError", "ResolutionError", "ConfigError",
    "Cube", "Grid", "GridFunction", "GrowthFunction", "builtin_family", "from_descriptor",
    "chi_norm", "luxembourg_norm", "modular", "a_p_loc_constant", "default_lattice",
    "MaximalParams", "h_phi_quasinorm", "maximal_function", "cz_decompose", "whitney",
    "atomic_decompose", "validate_atom", "bmo_phi_norm", "psi_from_phi", "phi0_from_psi",
    "Symbol", "psdo_apply", "riesz_local", "generate_corpus", "ExperimentConfig", "load_config",
]

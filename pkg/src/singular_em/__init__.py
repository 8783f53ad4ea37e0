"""Euler-Maruyama simulation and bound verification for SDEs with singular drifts."""

from .errors import (
    AssumptionViolation,
    ConfigurationError,
    CouplingError,
    DomainError,
    NumericalError,
    RangeError,
    SingularEMError,
    UnsupportedDimensionError,
)
from .randomness import BrownianTable, GridSpec, coarsen, generate_table
from .models import AssumptionData, ScalarField, SdeModel, builtin_models, get_model
from .engine import ErrorEstimate, Trajectory, coupled_sup_error, simulate, strong_error_mc
from .constants import ConstantsReport, constants_report
from .harness import RateFit, StudyConfig, load_config, run_convergence

__version__ = "0.1.0"

"""Equilibrium adoption and operator pricing for a base network bundled with a supplementary network."""

from .dynamics import divergence_check, integrate, jacobian
from .equilibrium import closed_form_equilibrium, solve, solve_fixed_point
from .errors import AdoptionError, DomainError, ModelInconsistencyError, NumericalFailure, ParameterError
from .model import UNIFORM, AdoptionState, Beta, Linear, LogMarkov, ModelParams, Uniform, thresholds, willingness
from .pricing import (
    CITIES,
    CityProfile,
    CostParams,
    estimate_costs,
    optimize_profit,
    profit,
    revenue,
    revenue_max_full,
    revenue_max_prices,
)

__version__ = "0.1.0"

__all__ = [
    "AdoptionError", "AdoptionState", "Beta", "CITIES", "CityProfile", "CostParams", "DomainError",
    "Linear", "LogMarkov", "ModelInconsistencyError", "ModelParams", "NumericalFailure",
    "ParameterError", "UNIFORM", "Uniform", "closed_form_equilibrium", "divergence_check",
    "estimate_costs", "integrate", "jacobian", "optimize_profit", "profit", "revenue",
    "revenue_max_full", "revenue_max_prices", "solve", "solve_fixed_point", "thresholds",
    "willingness",
]

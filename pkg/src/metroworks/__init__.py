"""Tactical planning of metro maintenance possessions with multimodal mitigation."""

from .model import (
    Instance, Link, Intervention, DemandMatrix, UtilizationProfile,
    load_instance, save_instance, sample_od, effective_demand,
    ParseError, ValidationError,
)
from .sp1 import (
    PossessionPlan, TabuCoefficients, build_sp1, solve_sp1, check_plan,
    position_based_plan, priority_based_plan,
)
from .sp2 import MitigationSolution, build_sp2, solve_sp2, unmet_fraction
from .sp3 import ServiceDesign, Line, build_sp3, solve_sp3, extract_lines
from .negotiation import run, gamma, tabu_coefficients, select_best, NegotiationResult
from .report import compare, ComparisonReport
from .genoa import make_genoa_instance

__version__ = "0.1.0"

__all__ = [
    "Instance", "Link", "Intervention", "DemandMatrix", "UtilizationProfile",
    "load_instance", "save_instance", "sample_od", "effective_demand",
    "ParseError", "ValidationError",
    "PossessionPlan", "TabuCoefficients", "build_sp1", "solve_sp1", "check_plan",
    "position_based_plan", "priority_based_plan",
    "MitigationSolution", "build_sp2", "solve_sp2", "unmet_fraction",
    "ServiceDesign", "Line", "build_sp3", "solve_sp3", "extract_lines",
    "run", "gamma", "tabu_coefficients", "select_best", "NegotiationResult",
    "compare", "ComparisonReport",
    "make_genoa_instance",
    "__version__",
]

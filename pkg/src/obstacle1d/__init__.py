"""Parabolic obstacle problems in one space dimension.

Solves ``a u_xx + b u_x + c u - u_t = f 1{u>0}``, ``u >= 0`` by implicit
finite differences and projected SOR, extracts the free boundary and
classifies its points with Weiss-type energies and blow-ups.
"""

__version__ = "0.1.0"

from .blowup import BlowupLadder, blowup_ladder, homogeneity_defect, match_profile, rescale
from .classifier import (PointDiagnosis, SmoothFitReport, classify_boundary, classify_point,
                         normalize_at, smoothfit_report)
from .closed_forms import VFamily, VMinus, VPlus, closed_form, get_profile, solve_profile
from .coefficients import CoefficientSet, validate
from .energetics import EnergyTrace, calibration, energy, energy_trace, phi
from .errors import (AdmissibilityError, ConfigError, DegenerateLimitError, ExprError, GridError,
                     HypothesisViolation, MMatrixError, NonConvergenceError, ObstacleError,
                     ProfileError)
from .expr import evaluate, parse_expression, pretty_print
from .finance import PutScenario, exercise_boundary_report, solve_put
from .free_boundary import FreeBoundarySet, extract, liminf_ut_check, ut_jump
from .grid_field import Field, GridSpec, read_field_csv, sample, write_field_csv
from .lcp import SolveConfig, solve_parabolic

__all__ = [
    "AdmissibilityError", "BlowupLadder", "CoefficientSet", "ConfigError", "DegenerateLimitError",
    "EnergyTrace", "ExprError", "Field", "FreeBoundarySet", "GridError", "GridSpec",
    "HypothesisViolation", "MMatrixError", "NonConvergenceError", "ObstacleError",
    "PointDiagnosis", "ProfileError", "PutScenario", "SmoothFitReport", "SolveConfig",
    "VFamily", "VMinus", "VPlus", "blowup_ladder", "calibration", "classify_boundary",
    "classify_point", "closed_form", "energy", "energy_trace", "evaluate",
    "exercise_boundary_report", "extract", "get_profile", "homogeneity_defect",
    "liminf_ut_check", "match_profile", "normalize_at", "parse_expression", "phi",
    "pretty_print", "read_field_csv", "rescale", "sample", "smoothfit_report", "solve_parabolic",
    "solve_profile", "solve_put", "ut_jump", "validate", "write_field_csv",
]

"""Sequential kernel estimation and model selection for varying-coefficient
AR(1) processes, plus a Monte Carlo harness for oracle-inequality checks."""

__version__ = "0.1.0"

from .kernels import active_backend
from .process import (ModelSpec, NoiseDensity, Path, StabilityParams,
                      check_stability, make_coefficient, max_path_moment,
                      moment_cap, noise_moment, simulate_path)
from .risk import (ProcedureParams, RiskReport, check_norm_lemma, check_prop4,
                   check_prop5, decompose_noise, empirical_norm_sq,
                   eta_fourth_moment_cap, l2_norm_sq, monte_carlo_risk,
                   oracle_bound_factor, robust_risk)
from .selection import (Basis, FourierEstimates, SelectionResult, build_basis,
                        cost, evaluate, fourier_estimates, penalty, select)
from .seqkernel import (GridLayout, PointProcedureResult, RegressionData,
                        build_regression, eta_variables, grid_layout,
                        pilot_estimate, run_point_procedure, sigma_band,
                        threshold, upsilon_statistic)
from .weights import (WeightGridParams, WeightVector, build_weight_family,
                      family_metadata)

__all__ = [
    "ModelSpec", "NoiseDensity", "Path", "StabilityParams", "GridLayout",
    "PointProcedureResult", "RegressionData", "Basis", "FourierEstimates",
    "SelectionResult", "WeightGridParams", "WeightVector", "ProcedureParams",
    "RiskReport", "active_backend", "build_basis", "build_regression",
    "build_weight_family", "check_norm_lemma", "check_prop4", "check_prop5",
    "check_stability", "cost", "decompose_noise", "empirical_norm_sq",
    "eta_fourth_moment_cap", "eta_variables", "evaluate", "family_metadata",
    "fourier_estimates", "grid_layout", "l2_norm_sq", "make_coefficient",
    "max_path_moment", "moment_cap", "monte_carlo_risk", "noise_moment",
    "oracle_bound_factor", "penalty", "pilot_estimate", "robust_risk",
    "run_point_procedure", "select", "sigma_band", "simulate_path",
    "threshold", "upsilon_statistic",
]

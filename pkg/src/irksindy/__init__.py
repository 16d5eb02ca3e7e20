"""Sparse identification of nonlinear dynamics from Gauss implicit
Runge-Kutta predictions, with either solved or network-predicted stages."""

from .coefficients import CoefficientMatrix
from .dataset import (Dataset, ReferenceModel, ScalingInfo, add_noise,
                      generate, integrate_grid, load_csv, reference_model,
                      rescale_coefficients, save_csv, savgol_filter,
                      standardize)
from .features import Library, LibrarySpec, build_library, evaluate, jacobian
from .grad import finite_difference, gradient, value_and_gradient
from .irk import (SolverSettings, StageValues, predict_matrices, solve_stages,
                  stage_predictors, step)
from .net import MlpParams, encode_time, forward, init, parameter_gradient
from .sindy import (AdamState, DiscoveredModel, SindyConfig, adam_step,
                    discover_deep, discover_irk, discover_rk4,
                    fit_stage_network, loss_deep, loss_irk, regularize,
                    threshold)
from .tableau import MAX_STAGES, ButcherTableau, gauss_tableau, verify_order_conditions

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ButcherTableau", "CoefficientMatrix", "Dataset",
    "DiscoveredModel", "Library", "LibrarySpec", "MAX_STAGES", "MlpParams",
    "ReferenceModel", "ScalingInfo", "SindyConfig", "SolverSettings",
    "StageValues", "adam_step", "add_noise", "build_library", "discover_deep",
    "discover_irk", "discover_rk4", "encode_time", "evaluate",
    "finite_difference", "fit_stage_network", "forward", "gauss_tableau",
    "generate", "gradient", "init", "integrate_grid", "jacobian", "load_csv",
    "loss_deep", "loss_irk", "parameter_gradient", "predict_matrices",
    "reference_model", "regularize", "rescale_coefficients", "save_csv",
    "savgol_filter", "solve_stages", "stage_predictors", "standardize",
    "step", "threshold", "value_and_gradient", "verify_order_conditions",
]

from .parameters import FORMAT_VERSION, HyperParams, LvbcParameters, ParameterGradient
from .objective import elbo, elbo_gradient, prior_penalty
from .forward import ground_truth_parameters, simulate_panel
from .training import DEFAULT_LAMBDA_GRID, Adam, RestartResult, TrainingReport, fit, fit_lambda_grid

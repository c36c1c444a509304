__version__ = '0.1.0'

from ._errors import (ConcordError, ConfigError, ConflictError, DataError, DegenerateInputError, InvalidInputError,
                      MissingPathError, ParseError, SingularCalibrationError, SingularFitError, TrainingFailureError,
                      UndefinedMetricError)
from ._seeding import derive_seed, derive_stream_seed, make_rng
from ._estimators import (EstimatorKind, DominancePair, MeasurementBatch, GroundTruthParams, MomentPair,
                          estimate_naive, estimate_conservative, estimate_greedy, estimate_bayesian, estimate,
                          analytic_moments, analytic_mse, dominance_threshold, dominance_predicate)
from ._panel import ForecastPanel
from ._simulation import (SyntheticConfig, Realization, SweepResult, generate_realization, run_sweep,
                          monte_carlo_moments)
from ._lvbc import (HyperParams, LvbcParameters, elbo, elbo_gradient, fit, fit_lambda_grid, TrainingReport,
                    ground_truth_parameters, simulate_panel)
from ._gibbs import (ChainBudget, ChainOutput, conditional_posterior, gibbs_run, infer_point_estimates,
                     posterior_mean_estimates)
from ._baselines import (WeightVector, RidgeModel, fit_weights, estimate_weighted, fit_ridge, estimate_regression,
                         select_ridge_strength, estimate_bre, NaiveModel, WeightedModel, RegressionModel, LvbcModel,
                         BayesianRegressionModel, default_models)
from ._metrics import score, bootstrap_report, EvalReport, MetricInterval
from ._io import parse_forecast_csv, parse_actuals_csv, write_panel_csv
from ._config import RunConfig
from ._report import ReportSection, render_html_report

__doc__ = """
concord - Bayesian consensus estimation from miscalibrated, noisy instruments
-----------------------------------------------------------------------------

**concord** combines the readings of many instruments (sensors, analysts, forecasters) into one estimate per
quantity. It provides the four closed-form estimators with their analytic bias and variance, a latent-variable
model that learns each instrument's miscalibration group, Gibbs-sampling inference of the true quantities, the usual
reference models, and bootstrap evaluation.

Everything is also available from the ``concord`` command line tool.
"""

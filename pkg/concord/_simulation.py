"""Synthetic two-class measurement worlds and Monte-Carlo sweeps over them."""
import logging
from dataclasses import dataclass
from numbers import Integral
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ._errors import DegenerateInputError, InvalidInputError, SingularCalibrationError
from ._estimators import DEFAULT_LAMBDA0, EstimatorKind, GroundTruthParams, estimate_from_sums
from ._panel import ForecastPanel
from ._seeding import derive_seed, derive_stream_seed, make_rng
from ._utils import (check_non_negative, check_positive, check_probability, check_real, check_sanity_int, check_seed,
                     check_type)

logger = logging.getLogger(__name__)

#: Truths are drawn uniformly from the half-open interval [TRUTH_LOW, TRUTH_HIGH).
TRUTH_LOW, TRUTH_HIGH = -5.0, 5.0


class SyntheticConfig:
    """Settings of a synthetic sweep.

    Parameters
    ----------
    delta : float, default=0.5
        Probability that a (quantity, instrument) reading comes from a bad instrument. 0 and 1 are allowed.
    alpha, beta : float, default=0.8, -0.2
        Miscalibration of bad readings, which have mean ``alpha * X + beta``.
    sigma2, sigma_star2 : float, default=1.0, 1.5
        Noise variances of good and bad readings. Zero gives noise-free readings.
    num_quantities : int, default=1000
        Number of quantities per realization.
    instrument_counts : sequence of int, default=(10, 25, 50, 100, 200)
        Instrument counts to sweep; each at least 2.
    num_realizations : int, default=1000
        Independent realizations per instrument count.
    seed : int, default=0
        Master seed. Every realization draws from its own derived stream.
    lambda0 : float, default=1e-4
        Prior precision of the Bayesian estimator.
    """
    def __init__(self,
                 delta: float = 0.5,
                 alpha: float = 0.8,
                 beta: float = -0.2,
                 sigma2: float = 1.0,
                 sigma_star2: float = 1.5,
                 num_quantities: int = 1000,
                 instrument_counts: Sequence[int] = (10, 25, 50, 100, 200),
                 num_realizations: int = 1000,
                 seed: int = 0,
                 lambda0: float = DEFAULT_LAMBDA0
                 ):

        check_probability("delta", delta)
        self.delta = float(delta)

        check_real("alpha", alpha)
        self.alpha = float(alpha)
        check_real("beta", beta)
        self.beta = float(beta)

        check_non_negative("sigma2", sigma2)
        self.sigma2 = float(sigma2)
        check_non_negative("sigma_star2", sigma_star2)
        self.sigma_star2 = float(sigma_star2)

        check_sanity_int("num_quantities", num_quantities)
        self.num_quantities = int(num_quantities)

        check_type("instrument_counts", instrument_counts, (list, tuple))
        if len(instrument_counts) == 0:
            raise InvalidInputError("instrument_counts must not be empty.")
        for count in instrument_counts:
            check_type("instrument_counts[]", count, Integral)
            if count < 2:
                raise InvalidInputError(f"Every instrument count must be at least 2; received {count}.")
        self.instrument_counts = [int(c) for c in instrument_counts]

        check_sanity_int("num_realizations", num_realizations)
        self.num_realizations = int(num_realizations)

        check_seed("seed", seed)
        self.seed = int(seed)

        check_positive("lambda0", lambda0)
        self.lambda0 = float(lambda0)

    def __repr__(self):
        return f"SyntheticConfig({', '.join(f'{k}={v!r}' for k, v in self.to_dict().items())})"

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "alpha": self.alpha,
            "beta": self.beta,
            "sigma2": self.sigma2,
            "sigma_star2": self.sigma_star2,
            "num_quantities": self.num_quantities,
            "instrument_counts": list(self.instrument_counts),
            "num_realizations": self.num_realizations,
            "seed": self.seed,
            "lambda0": self.lambda0,
        }

    @classmethod
    def from_dict(cls, values: dict) -> "SyntheticConfig":
        return cls(**values)


@dataclass
class Realization:
    """One draw of a synthetic world.

    ``readings`` and ``labels`` are (num_quantities x instrument_count) arrays; ``labels[i, j] == 1`` marks a bad
    reading.
    """
    truths: np.ndarray
    readings: np.ndarray
    labels: np.ndarray

    @property
    def num_quantities(self) -> int:
        return int(self.readings.shape[0])

    @property
    def instrument_count(self) -> int:
        return int(self.readings.shape[1])

    def label_sums(self):
        """Per-quantity ``(good_sum, bad_sum, m, n)`` arrays."""
        bad = self.labels.astype(bool)
        bad_sum = np.where(bad, self.readings, 0.0).sum(axis=1)
        good_sum = np.where(bad, 0.0, self.readings).sum(axis=1)
        n = bad.sum(axis=1)
        m = self.instrument_count - n
        return good_sum, bad_sum, m, n

    def to_panel(self) -> ForecastPanel:
        """Dense realization as a sparse panel with quantity ids ``q0, q1, ...`` and instrument ids ``a0, a1, ...``."""
        D, A = self.readings.shape
        quantity_ids = np.repeat([f"q{i}" for i in range(D)], A)
        instrument_ids = np.tile([f"a{j}" for j in range(A)], D)
        actuals = {f"q{i}": float(x) for i, x in enumerate(self.truths)}
        return ForecastPanel(quantity_ids, instrument_ids, self.readings.reshape(-1), actuals)


def generate_realization(config: SyntheticConfig, instrument_count: int, stream_seed: int) -> Realization:
    """Draw truths, labels and readings for one realization.

    Truths are Uniform[-5, 5); each (quantity, instrument) label is Bernoulli(delta); a good reading is
    Normal(X, sigma2) and a bad reading Normal(alpha * X + beta, sigma_star2).
    """
    check_type("config", config, SyntheticConfig)
    check_type("instrument_count", instrument_count, Integral)
    if instrument_count < 2:
        raise InvalidInputError(f"instrument_count must be at least 2; received {instrument_count}.")
    rng = make_rng(stream_seed)

    D, A = config.num_quantities, int(instrument_count)
    truths = rng.uniform(TRUTH_LOW, TRUTH_HIGH, size=D)
    labels = (rng.random((D, A)) < config.delta).astype(np.int8)
    noise = rng.standard_normal((D, A))

    x = truths[:, None]
    good = x + np.sqrt(config.sigma2) * noise
    bad = config.alpha * x + config.beta + np.sqrt(config.sigma_star2) * noise
    readings = np.where(labels == 1, bad, good)
    return Realization(truths=truths, readings=readings, labels=labels)


@dataclass
class SweepRow:
    """``mean_rmse`` pools the squared errors of every quantity and realization; ``realization_rmse`` averages the
    per-realization RMSEs instead."""
    instrument_count: int
    estimator: EstimatorKind
    mean_rmse: float
    stderr: float
    realization_rmse: float
    excluded: int


class SweepResult:
    """RMSE over all quantities and realizations, with its standard error, per (instrument count, estimator) pair."""

    columns = ["instrument_count", "estimator", "mean_rmse", "stderr"]

    def __init__(self, rows: List[SweepRow]):
        self.rows = list(rows)

    def __len__(self):
        return len(self.rows)

    def __repr__(self):
        return f"<SweepResult: {len(self.rows)} rows>"

    def get(self, instrument_count: int, kind: Union[str, EstimatorKind]) -> SweepRow:
        kind = EstimatorKind.parse(kind)
        for row in self.rows:
            if row.instrument_count == instrument_count and row.estimator is kind:
                return row
        raise KeyError((instrument_count, kind.value))

    def to_frame(self, full: bool = False) -> pd.DataFrame:
        """Rows as a DataFrame.

        ``full=True`` adds the mean per-realization RMSE and the conservative-estimator exclusion count.
        """
        frame = pd.DataFrame([{
            "instrument_count": row.instrument_count,
            "estimator": row.estimator.value,
            "mean_rmse": row.mean_rmse,
            "stderr": row.stderr,
            "realization_rmse": row.realization_rmse,
            "excluded": row.excluded,
        } for row in self.rows], columns=self.columns + ["realization_rmse", "excluded"])
        return frame if full else frame[self.columns]


def _check_kinds(kinds, alpha: float) -> List[EstimatorKind]:
    kinds = [EstimatorKind.parse(k) for k in kinds]
    if not kinds:
        raise InvalidInputError("At least one estimator kind is needed.")
    if len(set(kinds)) != len(kinds):
        raise InvalidInputError(f"Estimator kinds must be unique; received {[k.value for k in kinds]}.")
    if EstimatorKind.GE in kinds and alpha == 0:
        raise SingularCalibrationError("The greedy estimator cannot be swept with alpha = 0.")
    return kinds


def _realization_errors(config: SyntheticConfig, instrument_count: int, index: int, kinds: List[EstimatorKind]):
    """Squared-error sum, quantity count and RMSE per estimator for one realization."""
    realization = generate_realization(config, instrument_count, derive_stream_seed(config.seed, index,
                                                                                    instrument_count))
    good_sum, bad_sum, m, n = realization.label_sums()
    out = {}
    for kind in kinds:
        keep = m > 0 if kind is EstimatorKind.CE else np.ones_like(m, dtype=bool)
        # Oracle estimators see the true labels and the true miscalibration.
        estimates = estimate_from_sums(kind, good_sum[keep], bad_sum[keep], m[keep], n[keep],
                                       config.alpha, config.beta, config.lambda0)
        squared = (estimates - realization.truths[keep]) ** 2
        count = int(keep.sum())
        rmse = float(np.sqrt(squared.mean())) if count else np.nan
        out[kind] = (float(squared.sum()), count, rmse)
    return out


def _pooled_rmse(squared: np.ndarray, counts: np.ndarray) -> Tuple[float, float]:
    """Pooled MSE over realizations and the delta-method standard error of its square root.

    The MSE is the ratio of summed squared errors to summed counts; its variance is estimated from the
    per-realization residuals ``squared - mse * counts``.
    """
    scored = counts > 0
    squared, counts = squared[scored], counts[scored]
    mse = float(squared.sum() / counts.sum())
    r = squared.size
    if r < 2 or mse == 0:
        return mse, 0.0
    residuals = squared - mse * counts
    mse_stderr = np.sqrt((residuals ** 2).sum() / (r * (r - 1))) / counts.mean()
    return mse, float(mse_stderr / (2 * np.sqrt(mse)))


def run_sweep(config: SyntheticConfig,
              kinds: Sequence[Union[str, EstimatorKind]] = tuple(EstimatorKind),
              n_jobs: Optional[int] = 1) -> SweepResult:
    """RMSE of each estimator for every instrument count in ``config``.

    Squared errors are averaged over every quantity of every realization before taking the root. All estimators
    see the same data within a realization. Quantities without a single good reading are left out of the
    conservative estimator's RMSE and counted in ``SweepRow.excluded``.

    Parameters
    ----------
    config : SyntheticConfig
    kinds : sequence of str or EstimatorKind
    n_jobs : int, optional
        Number of joblib workers for the realizations. Results do not depend on it.

    Returns
    -------
    SweepResult
    """
    check_type("config", config, SyntheticConfig)
    kinds = _check_kinds(kinds, config.alpha)

    rows = []
    for instrument_count in config.instrument_counts:
        logger.info(f"Sweeping {config.num_realizations} realizations with {instrument_count} instruments.")
        per_realization = Parallel(n_jobs=n_jobs)(
            delayed(_realization_errors)(config, instrument_count, index, kinds)
            for index in range(config.num_realizations)
        )
        for kind in kinds:
            squared = np.array([result[kind][0] for result in per_realization], dtype=float)
            counts = np.array([result[kind][1] for result in per_realization], dtype=float)
            rmses = np.array([result[kind][2] for result in per_realization], dtype=float)
            rmses = rmses[np.isfinite(rmses)]
            excluded = config.num_quantities * config.num_realizations - int(counts.sum())
            if excluded:
                logger.warning(f"{excluded} quantities with no good reading were excluded from {kind.value} at "
                               f"{instrument_count} instruments.")
            if rmses.size == 0:
                raise DegenerateInputError(f"No quantity could be scored by {kind.value} at {instrument_count} "
                                           f"instruments.")
            mse, stderr = _pooled_rmse(squared, counts)
            rows.append(SweepRow(instrument_count=instrument_count,
                                 estimator=kind,
                                 mean_rmse=float(np.sqrt(mse)),
                                 stderr=stderr,
                                 realization_rmse=float(rmses.mean()),
                                 excluded=int(excluded)))
    return SweepResult(rows)


@dataclass
class MonteCarloMoments:
    """Empirical moments of one estimator's error ``estimate - mu`` over many replications."""
    bias: float
    variance: float
    mse: float
    bias_stderr: float
    variance_stderr: float
    mse_stderr: float
    errors: np.ndarray

    @property
    def n_replications(self) -> int:
        return int(self.errors.size)


def _moments(errors: np.ndarray) -> MonteCarloMoments:
    size = errors.size
    centered = errors - errors.mean()
    variance = float(centered.var(ddof=1))
    squared = errors ** 2
    return MonteCarloMoments(
        bias=float(errors.mean()),
        variance=variance,
        mse=float(squared.mean()),
        bias_stderr=float(np.sqrt(variance / size)),
        variance_stderr=float(np.sqrt(max((centered ** 4).mean() - variance ** 2, 0.0) / size)),
        mse_stderr=float(squared.std(ddof=1) / np.sqrt(size)),
        errors=errors,
    )


def monte_carlo_moments(params: GroundTruthParams,
                        kinds: Sequence[Union[str, EstimatorKind]] = tuple(EstimatorKind),
                        n_replications: int = 100_000,
                        seed: int = 0) -> Dict[EstimatorKind, MonteCarloMoments]:
    """Empirical bias, variance and MSE of several estimators on the same simulated batches.

    Each replication draws ``m`` good and ``n`` bad readings of ``params.mu``. Only the label-wise sums enter the
    estimators, so the sums are drawn directly from their Normal distributions.

    Returns
    -------
    dict
        ``{EstimatorKind: MonteCarloMoments}``; the ``errors`` arrays are paired across kinds.
    """
    check_type("params", params, GroundTruthParams)
    kinds = _check_kinds(kinds, params.alpha)
    if EstimatorKind.CE in kinds and params.m == 0:
        raise DegenerateInputError("The conservative estimator is undefined without good instruments (m = 0).")
    check_sanity_int("n_replications", n_replications)
    if n_replications < 2:
        raise InvalidInputError("At least two replications are needed to estimate a variance.")

    rng = make_rng(derive_seed(seed, params.m, params.n))
    m, n = params.m, params.n
    good_sum = m * params.mu + np.sqrt(m * params.sigma2) * rng.standard_normal(n_replications)
    bad_sum = n * (params.alpha * params.mu + params.beta) + \
        np.sqrt(n * params.sigma_star2) * rng.standard_normal(n_replications)

    results = {}
    for kind in kinds:
        estimates = estimate_from_sums(kind, good_sum, bad_sum, m, n, params.alpha, params.beta, params.lambda0)
        results[kind] = _moments(np.asarray(estimates, dtype=float) - params.mu)
    return results

"""Inverse inference: posterior of the true changes given readings and a fitted parameter set.

Conditioned on the group ``z_j`` of every reading and the sign branch ``xi``, the posterior of a quantity under a
Normal(0, 1/lambda0) prior is Normal with precision ``lambda0 + sum(alpha**2 / sigma**2)`` and mean
``sum(alpha * (Xhat - beta) / sigma**2) / precision``. The sampler alternates between the groups, the quantities and
their signs.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

from ._errors import InvalidInputError
from ._estimators import DEFAULT_LAMBDA0
from ._lvbc.parameters import LvbcParameters
from ._panel import ForecastPanel
from ._seeding import make_rng
from ._utils import check_non_negative_int, check_positive, check_probability, check_sanity_int, check_seed, \
    check_type

logger = logging.getLogger(__name__)

Z_UPDATES = ("prior", "conditional")


@dataclass(frozen=True)
class ConditionalPosterior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise InvalidInputError(f"A posterior variance must be positive; received {self.variance}.")


@dataclass(eq=False)
class ChainOutput:
    """Retained samples of one quantity, their mean and a central credible interval."""
    quantity_id: str
    samples: np.ndarray
    point_estimate: float
    credible_interval: Tuple[float, float]

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    @property
    def ci_low(self) -> float:
        return self.credible_interval[0]

    @property
    def ci_high(self) -> float:
        return self.credible_interval[1]


class ChainBudget:
    """Length, burn-in, seed and credible level of a Gibbs run.

    Parameters
    ----------
    num_samples : int, default=1000
        Total iterations, burn-in included.
    burn_in : int, default=100
        Leading iterations that are discarded.
    seed : int, default=0
    credible_level : float, default=0.95
    """
    def __init__(self, num_samples: int = 1000, burn_in: int = 100, seed: int = 0, credible_level: float = 0.95):
        check_sanity_int("num_samples", num_samples)
        check_non_negative_int("burn_in", burn_in)
        if not num_samples > burn_in:
            raise InvalidInputError(f"num_samples ({num_samples}) must exceed burn_in ({burn_in}).")
        check_seed("seed", seed)
        check_probability("credible_level", credible_level, open_interval=True)
        self.num_samples = int(num_samples)
        self.burn_in = int(burn_in)
        self.seed = int(seed)
        self.credible_level = float(credible_level)

    def __repr__(self):
        return (f"ChainBudget(num_samples={self.num_samples}, burn_in={self.burn_in}, seed={self.seed}, "
                f"credible_level={self.credible_level})")

    def to_dict(self) -> dict:
        return {"num_samples": self.num_samples, "burn_in": self.burn_in, "seed": self.seed,
                "credible_level": self.credible_level}


def conditional_posterior(readings: Sequence[Tuple[float, int]],
                          params: LvbcParameters,
                          xi: int,
                          lambda0: float = DEFAULT_LAMBDA0) -> ConditionalPosterior:
    """Posterior of one quantity given its readings, the group of every reading and the sign branch.

    Parameters
    ----------
    readings : sequence of (float, int)
        ``(reading, group)`` pairs.
    params : LvbcParameters
    xi : {0, 1}
        Sign branch whose calibrations apply.
    lambda0 : float, default=1e-4
        Prior precision of the quantity.
    """
    check_type("params", params, LvbcParameters)
    check_positive("lambda0", lambda0)
    if xi not in (0, 1):
        raise InvalidInputError(f"xi must be 0 or 1; received {xi!r}.")
    if len(readings) == 0:
        raise InvalidInputError("The conditional posterior needs at least one reading.")
    values = np.array([float(r[0]) for r in readings])
    groups = np.array([r[1] for r in readings])
    if not np.issubdtype(groups.dtype, np.integer) or groups.min() < 0 or groups.max() >= params.num_groups:
        raise InvalidInputError(f"Reading groups must be integers in [0, {params.num_groups}).")

    alpha = params.alpha[groups, xi]
    beta = params.beta[groups, xi]
    variance = params.sigma[groups] ** 2
    precision = lambda0 + np.sum(alpha ** 2 / variance)
    mean = np.sum(alpha * (values - beta) / variance) / precision
    return ConditionalPosterior(mean=float(mean), variance=float(1.0 / precision))


class ChainData:
    """Readings of a panel indexed for vectorized sampling.

    Quantities without readings are dropped. Instruments missing from the parameter set are mapped to an extra row
    with zero logits, i.e. a uniform group distribution.
    """
    def __init__(self, panel: ForecastPanel, params: LvbcParameters, warn: bool = True):
        check_type("panel", panel, ForecastPanel)
        check_type("params", params, LvbcParameters)
        counts = panel.readings_per_quantity
        kept = np.flatnonzero(counts > 0)
        if warn and kept.size < panel.n_quantities:
            dropped = [panel.quantities[i] for i in np.flatnonzero(counts == 0)]
            logger.warning(f"{len(dropped)} quantities have no readings and are excluded, e.g. {dropped[:5]}.")

        positions = panel.instrument_positions(params.instruments)
        unknown = positions < 0
        if warn and np.any(unknown):
            names = sorted({panel.instruments[i] for i in panel.instrument_index[unknown]})
            logger.warning(f"{len(names)} instruments are unknown to the parameter set and get a uniform group "
                           f"distribution, e.g. {names[:5]}.")

        remap = np.full(panel.n_quantities, -1, dtype=np.int64)
        remap[kept] = np.arange(kept.size)
        self.quantity_positions = kept
        self.quantity_ids = [panel.quantities[i] for i in kept]
        self.quantity = remap[panel.quantity_index]
        self.instrument = np.where(unknown, params.num_instruments, positions)
        self.forecasts = panel.forecasts
        self.num_instruments = params.num_instruments + 1
        self.consensus = panel.consensus()[kept]

    @property
    def num_quantities(self) -> int:
        return len(self.quantity_ids)

    def group_probabilities(self, params: LvbcParameters) -> np.ndarray:
        logits = np.vstack([params.logits, np.zeros((1, params.num_groups))])
        return softmax(logits, axis=1)

    def posterior(self, params: LvbcParameters, entry_groups: np.ndarray, signs: np.ndarray, lambda0: float):
        """Vectorized conditional posterior mean and precision of every quantity."""
        entry_signs = signs[self.quantity]
        alpha = params.alpha[entry_groups, entry_signs]
        beta = params.beta[entry_groups, entry_signs]
        variance = np.exp(2.0 * params.log_sigma)[entry_groups]
        precision = lambda0 + np.bincount(self.quantity, alpha ** 2 / variance, minlength=self.num_quantities)
        weighted = np.bincount(self.quantity, alpha * (self.forecasts - beta) / variance,
                               minlength=self.num_quantities)
        return weighted / precision, precision


def _sample_categorical(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cumulative = np.cumsum(probabilities, axis=1)
    draws = (cumulative < rng.random(probabilities.shape[0])[:, None]).sum(axis=1)
    return np.minimum(draws, probabilities.shape[1] - 1)


def _conditional_group_logits(data: ChainData, params: LvbcParameters, values: np.ndarray, signs: np.ndarray):
    """Prior logits plus the log-likelihood of every instrument's readings under every group."""
    entry_signs = signs[data.quantity]
    x = values[data.quantity]
    residuals = data.forecasts[:, None] - (params.alpha[:, entry_signs].T * x[:, None] + params.beta[:, entry_signs].T)
    log_density = -residuals ** 2 / (2.0 * np.exp(2.0 * params.log_sigma)) - params.log_sigma
    totals = np.zeros((data.num_instruments, params.num_groups))
    np.add.at(totals, data.instrument, log_density)
    logits = np.vstack([params.logits, np.zeros((1, params.num_groups))])
    return logits + totals


def sample_chain(data: ChainData,
                 params: LvbcParameters,
                 lambda0: float,
                 budget: ChainBudget,
                 z_update: str = "prior") -> np.ndarray:
    """Run the sampler and return the retained samples, shape (num_samples - burn_in, num_quantities)."""
    rng = make_rng(budget.seed)
    prior = data.group_probabilities(params)
    values = data.consensus.copy()
    signs = (values > 0).astype(np.int64)
    retained = np.empty((budget.num_samples - budget.burn_in, data.num_quantities))

    for iteration in range(budget.num_samples):
        if z_update == "prior":
            groups = _sample_categorical(prior, rng)
        else:
            groups = _sample_categorical(softmax(_conditional_group_logits(data, params, values, signs), axis=1), rng)
        # signs from the previous iteration select the calibration branch
        mean, precision = data.posterior(params, groups[data.instrument], signs, lambda0)
        values = mean + rng.standard_normal(data.num_quantities) / np.sqrt(precision)
        signs = (values > 0).astype(np.int64)
        if iteration >= budget.burn_in:
            retained[iteration - budget.burn_in] = values
    return retained


def gibbs_run(panel: ForecastPanel,
              params: LvbcParameters,
              lambda0: float = DEFAULT_LAMBDA0,
              num_samples: int = 1000,
              burn_in: int = 100,
              seed: int = 0,
              credible_level: float = 0.95,
              z_update: str = "prior") -> Dict[str, ChainOutput]:
    """Gibbs sampler over the true change of every quantity in ``panel``.

    Every quantity starts at the uniform consensus of its readings, with its sign. Each iteration draws the group of
    every instrument, then every quantity from its conditional posterior given those groups and the previous signs,
    then refreshes the signs.

    Parameters
    ----------
    panel : ForecastPanel
        Readings to infer from; actuals, if any, are ignored.
    params : LvbcParameters
    lambda0 : float, default=1e-4
    num_samples, burn_in, seed, credible_level
        See :class:`ChainBudget`.
    z_update : {"prior", "conditional"}, default="prior"
        Draw groups from ``softmax(logits)`` alone, or from their full conditional given the current quantities.

    Returns
    -------
    dict
        ``{quantity_id: ChainOutput}`` in panel order. Quantities without readings are left out.
    """
    check_type("params", params, LvbcParameters)
    check_positive("lambda0", lambda0)
    budget = ChainBudget(num_samples, burn_in, seed, credible_level)
    if z_update not in Z_UPDATES:
        raise InvalidInputError(f"z_update must be one of {Z_UPDATES}; received {z_update!r}.")

    data = ChainData(panel, params)
    if data.num_quantities == 0:
        return {}
    logger.info(f"Sampling {data.num_quantities} quantities for {budget.num_samples} iterations.")
    samples = sample_chain(data, params, lambda0, budget, z_update)

    tail = (1.0 - budget.credible_level) / 2.0
    points = samples.mean(axis=0)
    lows, highs = np.percentile(samples, [100.0 * tail, 100.0 * (1.0 - tail)], axis=0)
    lows = np.minimum(lows, points)
    highs = np.maximum(highs, points)
    return {q: ChainOutput(quantity_id=q,
                           samples=samples[:, i],
                           point_estimate=float(points[i]),
                           credible_interval=(float(lows[i]), float(highs[i])))
            for i, q in enumerate(data.quantity_ids)}


def infer_point_estimates(panel: ForecastPanel,
                          params: LvbcParameters,
                          lambda0: float = DEFAULT_LAMBDA0,
                          budget: Optional[ChainBudget] = None,
                          z_update: str = "prior") -> Dict[str, float]:
    """Posterior-mean point estimate of every quantity with at least one reading."""
    budget = ChainBudget() if budget is None else budget
    check_type("budget", budget, ChainBudget)
    chains = gibbs_run(panel, params, lambda0, budget.num_samples, budget.burn_in, budget.seed,
                       budget.credible_level, z_update)
    return {q: chain.point_estimate for q, chain in chains.items()}


def closed_form_means(data: ChainData, params: LvbcParameters, lambda0: float) -> np.ndarray:
    groups = np.append(params.group_assignments(), 0)
    signs = (data.consensus > 0).astype(np.int64)
    mean, _ = data.posterior(params, groups[data.instrument], signs, lambda0)
    return mean


def posterior_mean_estimates(panel: ForecastPanel,
                             params: LvbcParameters,
                             lambda0: float = DEFAULT_LAMBDA0) -> Dict[str, float]:
    """Closed-form conditional posterior mean of every quantity at each instrument's most likely group.

    The sign branch is taken from the uniform consensus. Instruments unknown to ``params`` are treated as members of
    group 0.
    """
    check_type("params", params, LvbcParameters)
    check_positive("lambda0", lambda0)
    data = ChainData(panel, params)
    means = closed_form_means(data, params, lambda0)
    return dict(zip(data.quantity_ids, means.tolist()))


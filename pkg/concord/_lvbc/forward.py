"""Draw panels from the forwards model of the latent-variable consensus model."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from .._errors import InvalidInputError
from .._panel import ForecastPanel
from .._seeding import make_rng
from .._utils import check_positive, check_probability, check_sanity_int, check_type
from .parameters import LvbcParameters

logger = logging.getLogger(__name__)

#: Logit of an instrument's own group in a ground-truth parameter set (all other groups get 0).
LOGIT_SCALE = 10.0


def _branches(values, name: str, K: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape == (K,):
        values = np.repeat(values[:, None], 2, axis=1)
    if values.shape != (K, 2):
        raise InvalidInputError(f"{name} needs one value per group, or a (negative, positive) pair per group.")
    return values


def ground_truth_parameters(instruments: Sequence[str],
                            groups: Sequence[int],
                            alpha: Sequence,
                            beta: Sequence,
                            sigma: Sequence[float],
                            pinned: bool = True) -> LvbcParameters:
    """Parameter set with a known group for every instrument.

    ``alpha`` and ``beta`` hold one value per group, or a ``[negative_branch, positive_branch]`` pair per group. When
    ``pinned`` is set, group 0 must be the identity calibration.
    """
    sigma = np.asarray(sigma, dtype=float)
    K = sigma.size
    alpha = _branches(alpha, "alpha", K)
    beta = _branches(beta, "beta", K)
    if np.any(sigma <= 0):
        raise InvalidInputError("Every group noise scale must be positive.")
    groups = np.asarray(groups, dtype=np.int64)
    if groups.shape != (len(instruments),) or groups.min(initial=0) < 0 or groups.max(initial=0) >= K:
        raise InvalidInputError(f"groups must hold one group index in [0, {K}) per instrument.")
    if pinned and not (np.all(alpha[0] == 1.0) and np.all(beta[0] == 0.0)):
        raise InvalidInputError("The pinned group 0 must have alpha = 1 and beta = 0.")
    logits = LOGIT_SCALE * np.eye(K)[groups]
    return LvbcParameters(alpha, beta, np.log(sigma), logits, list(instruments), pinned)


def simulate_panel(params: LvbcParameters,
                   num_quantities: int,
                   seed: int,
                   groups: Optional[Sequence[int]] = None,
                   coverage: float = 1.0,
                   quantity_prefix: str = "q") -> Tuple[ForecastPanel, np.ndarray]:
    """Draw a panel with actuals from the forwards model.

    Truths are Uniform[-5, 5). Each instrument's group is drawn once from ``softmax(logits)`` unless ``groups`` fixes
    it; every reading is then Normal(alpha[z, xi] * X + beta[z, xi], sigma[z]**2) with ``xi = 1{X > 0}``.

    Parameters
    ----------
    params : LvbcParameters
    num_quantities : int
    seed : int
    groups : sequence of int, optional
        Group of every instrument, e.g. to draw train and test panels from the same instruments.
    coverage : float, default=1.0
        Probability that an instrument reads a given quantity.
    quantity_prefix : str, default="q"
        Quantity ids are ``f"{quantity_prefix}{i}"``.

    Returns
    -------
    (ForecastPanel, ndarray)
        The panel and the group of every instrument.
    """
    check_type("params", params, LvbcParameters)
    check_sanity_int("num_quantities", num_quantities)
    check_probability("coverage", coverage)
    check_positive("coverage", coverage)
    check_type("quantity_prefix", quantity_prefix, str)
    rng = make_rng(seed)
    A, K = params.num_instruments, params.num_groups

    if groups is None:
        cumulative = np.cumsum(params.responsibilities(), axis=1)
        groups = np.minimum((cumulative < rng.random(A)[:, None]).sum(axis=1), K - 1)
    else:
        groups = np.asarray(groups, dtype=np.int64)
        if groups.shape != (A,):
            raise InvalidInputError(f"groups must hold one entry per instrument ({A}).")

    truths = rng.uniform(-5.0, 5.0, size=num_quantities)
    signs = (truths > 0).astype(np.int64)
    noise = rng.standard_normal((num_quantities, A))
    observed = rng.random((num_quantities, A)) < coverage

    slope = params.alpha[groups[None, :], signs[:, None]]
    offset = params.beta[groups[None, :], signs[:, None]]
    readings = slope * truths[:, None] + offset + params.sigma[groups][None, :] * noise

    rows, cols = np.nonzero(observed)
    quantity_ids = [f"{quantity_prefix}{i}" for i in range(num_quantities)]
    panel = ForecastPanel([quantity_ids[i] for i in rows],
                          [params.instruments[j] for j in cols],
                          readings[rows, cols],
                          actuals=dict(zip(quantity_ids, truths.tolist())),
                          instruments=params.instruments)
    logger.debug(f"Simulated {panel}.")
    return panel, groups

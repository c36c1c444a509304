"""Closed-form consensus estimators for a single scalar quantity.

A batch holds the readings of ``m`` good instruments (unbiased, variance ``sigma2``) and ``n`` bad instruments (mean
``alpha * mu + beta``, variance ``sigma_star2``). Every estimator here is a function of the two label-wise sums only,
which lets the simulation code evaluate them on whole matrices of realizations at once.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from numbers import Integral, Real
from typing import Optional, Sequence, Union

import numpy as np

from ._errors import DegenerateInputError, InvalidInputError, SingularCalibrationError
from ._utils import check_non_negative, check_non_negative_int, check_positive, check_real, check_type

logger = logging.getLogger(__name__)

#: Prior precision used whenever a caller asks for a "weak prior".
DEFAULT_LAMBDA0 = 1e-4


class EstimatorKind(str, Enum):
    """The four estimators of a single quantity."""
    NE = "NE"  # naive
    CE = "CE"  # conservative
    GE = "GE"  # greedy
    BE = "BE"  # bayesian

    @classmethod
    def parse(cls, kind: Union[str, "EstimatorKind"]) -> "EstimatorKind":
        try:
            return cls(kind.upper() if isinstance(kind, str) else kind)
        except ValueError:
            raise InvalidInputError(f"Unknown estimator kind {kind!r}; expected one of {[k.value for k in cls]}.")


class DominancePair(str, Enum):
    """Estimator comparisons with a known sufficient condition for MSE dominance of the first estimator."""
    GE_VS_CE = "GE_vs_CE"
    BE_VS_CE = "BE_vs_CE"
    BE_VS_GE = "BE_vs_GE"

    @classmethod
    def parse(cls, pair: Union[str, "DominancePair"]) -> "DominancePair":
        if isinstance(pair, cls):
            return pair
        for member in cls:
            if isinstance(pair, str) and member.value.lower() == pair.lower():
                return member
        raise InvalidInputError(f"Unknown comparison {pair!r}; expected one of {[p.value for p in cls]}.")


class MeasurementBatch:
    """One quantity's readings, optionally labelled good (0) or bad (1).

    Parameters
    ----------
    values : sequence of float
        The readings. Must be non-empty and finite.
    class_labels : sequence of int, optional
        One binary flag per reading; 0 marks a good instrument and 1 a bad one.
    """

    def __init__(self, values: Sequence[float], class_labels: Optional[Sequence[int]] = None):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise InvalidInputError(f"values must be one-dimensional; received shape {values.shape}.")
        if values.size == 0:
            raise InvalidInputError("A measurement batch needs at least one value.")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("Measurement values must be finite.")
        self.values = values

        if class_labels is None:
            self.class_labels = None
        else:
            labels = np.asarray(class_labels)
            if labels.shape != values.shape:
                raise InvalidInputError(
                    f"class_labels has length {labels.size} but values has length {values.size}."
                )
            if not np.all((labels == 0) | (labels == 1)):
                raise InvalidInputError("class_labels must contain only 0 (good) and 1 (bad).")
            self.class_labels = labels.astype(np.int8)

    @classmethod
    def from_groups(cls, good: Sequence[float], bad: Sequence[float]) -> "MeasurementBatch":
        """Build a labelled batch from separate lists of good and bad readings."""
        good = list(good)
        bad = list(bad)
        return cls(good + bad, [0] * len(good) + [1] * len(bad))

    def __len__(self):
        return self.values.size

    def __repr__(self):
        if self.class_labels is None:
            return f"<MeasurementBatch: {len(self)} unlabelled values>"
        return f"<MeasurementBatch: m={self.m}, n={self.n}>"

    @property
    def has_labels(self) -> bool:
        return self.class_labels is not None

    def _require_labels(self, estimator: str):
        if not self.has_labels:
            raise InvalidInputError(f"The {estimator} estimator needs class labels for every measurement.")

    @property
    def good(self) -> np.ndarray:
        self._require_labels("requested")
        return self.values[self.class_labels == 0]

    @property
    def bad(self) -> np.ndarray:
        self._require_labels("requested")
        return self.values[self.class_labels == 1]

    @property
    def m(self) -> int:
        return int(self.good.size)

    @property
    def n(self) -> int:
        return int(self.bad.size)


@dataclass(frozen=True)
class GroundTruthParams:
    """Parameters of the two-class measurement world.

    Attributes
    ----------
    mu : float
        The true quantity.
    alpha, beta : float
        Slope and offset of the bad instruments' miscalibration, ``E[bad] = alpha * mu + beta``.
    sigma2, sigma_star2 : float
        Noise variance of good and bad instruments.
    m, n : int
        Number of good and bad instruments.
    lambda0 : float
        Prior precision of the Bayesian estimator.
    """
    mu: float
    alpha: float
    beta: float
    sigma2: float
    sigma_star2: float
    m: int
    n: int
    lambda0: float = DEFAULT_LAMBDA0

    def __post_init__(self):
        check_real("mu", self.mu)
        check_real("alpha", self.alpha)
        check_real("beta", self.beta)
        check_positive("sigma2", self.sigma2)
        check_positive("sigma_star2", self.sigma_star2)
        check_non_negative_int("m", self.m)
        check_non_negative_int("n", self.n)
        check_positive("lambda0", self.lambda0)
        if self.m + self.n < 1:
            raise InvalidInputError("At least one instrument is needed (m + n >= 1).")

    @property
    def variance_ratio(self) -> float:
        return self.sigma_star2 / self.sigma2

    def replace(self, **changes) -> "GroundTruthParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class MomentPair:
    """Bias and variance of an estimator."""
    bias: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise InvalidInputError(f"variance must be non-negative; received {self.variance}.")

    @property
    def mse(self) -> float:
        return self.bias ** 2 + self.variance


def estimate_from_sums(kind: EstimatorKind,
                       good_sum,
                       bad_sum,
                       m,
                       n,
                       alpha: float = 1.0,
                       beta: float = 0.0,
                       lambda0: float = DEFAULT_LAMBDA0):
    """Evaluate an estimator from the label-wise sums of the readings.

    All of ``good_sum``, ``bad_sum``, ``m`` and ``n`` may be numpy arrays of matching shape; no validation is done here,
    callers are expected to have checked the domain (``m > 0`` for CE, ``alpha != 0`` for GE).
    """
    if kind is EstimatorKind.NE:
        return (good_sum + bad_sum) / (m + n)
    if kind is EstimatorKind.CE:
        return good_sum / m
    if kind is EstimatorKind.GE:
        return (good_sum + (bad_sum - n * beta) / alpha) / (m + n)
    if kind is EstimatorKind.BE:
        return (good_sum + alpha * bad_sum - n * alpha * beta) / (m + n * alpha ** 2 + lambda0)
    raise RuntimeError("We should not be here.")


def _sums(batch: MeasurementBatch):
    return batch.good.sum(), batch.bad.sum(), batch.m, batch.n


def estimate_naive(batch: MeasurementBatch) -> float:
    """Uniform average of all measurements; class labels are ignored."""
    check_type("batch", batch, MeasurementBatch)
    return float(batch.values.mean())


def estimate_conservative(batch: MeasurementBatch) -> float:
    """Average of the good measurements only.

    Raises
    ------
    InvalidInputError
        If the batch carries no class labels.
    DegenerateInputError
        If no measurement is labelled good.
    """
    check_type("batch", batch, MeasurementBatch)
    batch._require_labels("conservative")
    if batch.m == 0:
        raise DegenerateInputError("The conservative estimator needs at least one good measurement (m = 0).")
    return float(batch.good.mean())


def estimate_greedy(batch: MeasurementBatch, alpha: float, beta: float) -> float:
    """Average after inverting the known miscalibration of the bad measurements.

    ``(sum(good) + (sum(bad) - n * beta) / alpha) / (m + n)``
    """
    check_type("batch", batch, MeasurementBatch)
    batch._require_labels("greedy")
    check_real("alpha", alpha)
    check_real("beta", beta)
    if alpha == 0:
        raise SingularCalibrationError("The greedy estimator cannot invert a miscalibration slope of alpha = 0.")
    good_sum, bad_sum, m, n = _sums(batch)
    return float(estimate_from_sums(EstimatorKind.GE, good_sum, bad_sum, m, n, alpha, beta))


def estimate_bayesian(batch: MeasurementBatch, alpha: float, beta: float,
                      lambda0: float = DEFAULT_LAMBDA0) -> float:
    """Posterior mean of the quantity under a Normal(0, 1/lambda0) prior and unit-variance readings.

    ``(sum(good) + alpha * sum(bad) - n * alpha * beta) / (m + n * alpha**2 + lambda0)``

    The unit-variance form is used even when the readings are heteroscedastic. Well defined for ``m = 0`` or ``n = 0``.
    """
    check_type("batch", batch, MeasurementBatch)
    batch._require_labels("bayesian")
    check_real("alpha", alpha)
    check_real("beta", beta)
    check_type("lambda0", lambda0, Real)
    if not lambda0 > 0:
        raise InvalidInputError(f"lambda0 must be strictly positive. Received lambda0 = {lambda0}.")
    good_sum, bad_sum, m, n = _sums(batch)
    return float(estimate_from_sums(EstimatorKind.BE, good_sum, bad_sum, m, n, alpha, beta, lambda0))


def estimate(kind: Union[str, EstimatorKind],
             batch: MeasurementBatch,
             alpha: float = 1.0,
             beta: float = 0.0,
             lambda0: float = DEFAULT_LAMBDA0) -> float:
    """Dispatch to the estimator named by ``kind``; ``alpha``, ``beta`` and ``lambda0`` are ignored where unused."""
    kind = EstimatorKind.parse(kind)
    if kind is EstimatorKind.NE:
        return estimate_naive(batch)
    if kind is EstimatorKind.CE:
        return estimate_conservative(batch)
    if kind is EstimatorKind.GE:
        return estimate_greedy(batch, alpha, beta)
    return estimate_bayesian(batch, alpha, beta, lambda0)


def analytic_moments(kind: Union[str, EstimatorKind], params: GroundTruthParams) -> MomentPair:
    """Closed-form bias and variance of an estimator in the two-class world described by ``params``.

    Parameters
    ----------
    kind : str or EstimatorKind
        One of NE, CE, GE, BE.
    params : GroundTruthParams

    Returns
    -------
    MomentPair
    """
    kind = EstimatorKind.parse(kind)
    check_type("params", params, GroundTruthParams)
    mu, alpha, beta = params.mu, params.alpha, params.beta
    s2, s2_star, m, n, lambda0 = params.sigma2, params.sigma_star2, params.m, params.n, params.lambda0

    if kind is EstimatorKind.NE:
        bias = n / (m + n) * ((alpha - 1) * mu + beta)
        variance = (m * s2 + n * s2_star) / (m + n) ** 2
    elif kind is EstimatorKind.CE:
        if m < 1:
            raise DegenerateInputError("The conservative estimator is undefined without good instruments (m = 0).")
        bias = 0.0
        variance = s2 / m
    elif kind is EstimatorKind.GE:
        if alpha == 0:
            raise SingularCalibrationError("The greedy estimator is undefined for alpha = 0.")
        bias = 0.0
        variance = (m * s2 + n * s2_star / alpha ** 2) / (m + n) ** 2
    else:
        denominator = m + n * alpha ** 2 + lambda0
        bias = (m + n * alpha ** 2) * mu / denominator - mu
        variance = (m * s2 + n * alpha ** 2 * s2_star) / denominator ** 2

    return MomentPair(bias=float(bias), variance=float(variance))


def analytic_mse(kind: Union[str, EstimatorKind], params: GroundTruthParams) -> float:
    return analytic_moments(kind, params).mse


def _check_dominance_args(m: int, n: int, alpha: float):
    check_type("m", m, Integral)
    check_type("n", n, Integral)
    if m < 1 or n < 1:
        raise InvalidInputError(f"Dominance conditions need m >= 1 and n >= 1; received m = {m}, n = {n}.")
    check_real("alpha", alpha)


def dominance_threshold(pair: Union[str, DominancePair], m: int, n: int, alpha: float) -> float:
    """Right-hand side of the sufficient condition for the first estimator of ``pair`` to dominate in MSE.

    For GE_vs_CE and BE_vs_CE this is the largest admissible variance ratio ``sigma_star2 / sigma2``; for BE_vs_GE it
    is the bound that ``|alpha|`` has to exceed (with the variance ratio additionally capped at 2).
    """
    pair = DominancePair.parse(pair)
    _check_dominance_args(m, n, alpha)
    if pair is DominancePair.GE_VS_CE:
        return (n / m + 2.0) * alpha ** 2
    if pair is DominancePair.BE_VS_CE:
        return n / m * alpha ** 2 + 2.0
    return float(np.sqrt(1.5 + np.sqrt(2.25 + 2.0 * m / n)))


def dominance_predicate(pair: Union[str, DominancePair], m: int, n: int, alpha: float,
                        variance_ratio: float) -> bool:
    """Whether the sufficient condition for MSE dominance of the first estimator of ``pair`` holds.

    Non-strict inequalities are used wherever the condition is stated non-strictly, so ties return ``True``.

    Parameters
    ----------
    pair : str or DominancePair
        "GE_vs_CE", "BE_vs_CE" or "BE_vs_GE".
    m, n : int
        Good and bad instrument counts, both at least 1.
    alpha : float
        Miscalibration slope of the bad instruments.
    variance_ratio : float
        ``sigma_star2 / sigma2``, strictly positive.
    """
    pair = DominancePair.parse(pair)
    check_non_negative("variance_ratio", variance_ratio)
    if variance_ratio == 0:
        raise InvalidInputError("variance_ratio must be strictly positive.")
    threshold = dominance_threshold(pair, m, n, alpha)
    if pair is DominancePair.BE_VS_GE:
        return bool(abs(alpha) > threshold and variance_ratio <= 2.0)
    return bool(variance_ratio <= threshold)

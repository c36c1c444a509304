"""Reference consensus models: naive, inverse-MSE weighted, per-instrument ridge regression and Bayesian regression."""
import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ._errors import DataError, DegenerateInputError, InvalidInputError, SingularFitError
from ._estimators import DEFAULT_LAMBDA0
from ._gibbs import ChainBudget, infer_point_estimates
from ._lvbc import DEFAULT_LAMBDA_GRID, HyperParams, LvbcParameters, TrainingReport, fit, fit_lambda_grid
from ._lvbc.parameters import FORMAT_VERSION
from ._panel import ForecastPanel
from ._utils import check_non_negative, check_positive, check_sanity_int, check_type

logger = logging.getLogger(__name__)

#: Historical MSEs are floored here before inversion.
MSE_FLOOR = 1e-8

#: Ridge strengths tried by :func:`select_ridge_strength` unless told otherwise.
DEFAULT_RIDGE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


def _check_readings(readings: Mapping[str, float]):
    check_type("readings", readings, Mapping)
    if len(readings) == 0:
        raise InvalidInputError("At least one reading is needed.")


def _write_envelope(document: dict, path: Union[str, Path]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, indent=2)
        f.write("\n")


def _read_envelope(path: Union[str, Path], kind: str) -> dict:
    with open(path, encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: not valid JSON ({e.msg}, line {e.lineno}).") from e
    if document.get("format_version") != FORMAT_VERSION or document.get("kind") != kind:
        raise DataError(f"{path}: expected a {kind} document with format_version {FORMAT_VERSION}.")
    return document


class WeightVector:
    """Non-negative instrument weights summing to one."""

    def __init__(self, weights: Mapping[str, float]):
        check_type("weights", weights, Mapping)
        if len(weights) == 0:
            raise InvalidInputError("A weight vector needs at least one instrument.")
        values = np.array(list(weights.values()), dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInputError("Weights must be finite and non-negative.")
        if abs(values.sum() - 1.0) > 1e-12:
            raise InvalidInputError(f"Weights must sum to 1; they sum to {values.sum()!r}.")
        self.weights = {str(k): float(v) for k, v in weights.items()}

    def __repr__(self):
        return f"<WeightVector: {len(self.weights)} instruments>"

    def __getitem__(self, instrument: str) -> float:
        return self.weights[instrument]

    def __contains__(self, instrument: str) -> bool:
        return instrument in self.weights

    @classmethod
    def normalized(cls, raw: Mapping[str, float]) -> "WeightVector":
        total = float(sum(raw.values()))
        if not total > 0:
            raise DegenerateInputError("Weights cannot be normalized: they sum to zero.")
        weights = {k: v / total for k, v in raw.items()}
        # push the rounding residue onto the largest weight so the sum is 1 to machine precision
        largest = max(weights, key=weights.get)
        weights[largest] += 1.0 - sum(weights.values())
        return cls(weights)

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "kind": "weight_vector", "weights": dict(self.weights)}

    def save(self, path: Union[str, Path]):
        _write_envelope(self.to_dict(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "WeightVector":
        return cls(_read_envelope(path, "weight_vector")["weights"])


def _instrument_errors(panel: ForecastPanel):
    panel.require_actuals("training panel")
    squared = (panel.forecasts - panel.entry_actuals) ** 2
    counts = np.bincount(panel.instrument_index, minlength=panel.n_instruments)
    totals = np.bincount(panel.instrument_index, weights=squared, minlength=panel.n_instruments)
    return counts, totals


def fit_weights(panel_train: ForecastPanel, instruments: Optional[Sequence[str]] = None) -> WeightVector:
    """Weights inversely proportional to each instrument's historical MSE.

    MSEs are floored at ``MSE_FLOOR``. Instruments without history, either listed in ``instruments`` but absent from
    the panel or present without entries, receive the mean inverse-MSE weight of the others.
    """
    check_type("panel_train", panel_train, ForecastPanel)
    counts, totals = _instrument_errors(panel_train)
    inverse = {}
    for position, instrument in enumerate(panel_train.instruments):
        if counts[position] > 0:
            inverse[instrument] = 1.0 / max(totals[position] / counts[position], MSE_FLOOR)
    if not inverse:
        raise DegenerateInputError("No instrument has a training history.")

    wanted = list(panel_train.instruments) if instruments is None else [str(a) for a in instruments]
    missing = [a for a in wanted if a not in inverse]
    if missing:
        logger.warning(f"{len(missing)} instruments have no history and get the mean weight, e.g. {missing[:5]}.")
        mean_weight = float(np.mean(list(inverse.values())))
        for instrument in missing:
            inverse[instrument] = mean_weight
    return WeightVector.normalized({a: inverse[a] for a in dict.fromkeys(wanted)})


def estimate_weighted(readings: Mapping[str, float], weights: WeightVector) -> float:
    """Weighted average of the readings, with the weights of the present instruments renormalized to sum to 1."""
    _check_readings(readings)
    check_type("weights", weights, WeightVector)
    missing = [a for a in readings if a not in weights]
    if missing:
        raise InvalidInputError(f"No weight for instruments {missing[:5]}.")
    w = np.array([weights[a] for a in readings])
    x = np.array([readings[a] for a in readings], dtype=float)
    if not w.sum() > 0:
        raise DegenerateInputError("All present instruments have zero weight.")
    return float(np.dot(w / w.sum(), x))


class RidgeModel:
    """Per-instrument affine maps ``forecast -> slope * forecast + intercept``.

    Instruments without coefficients are mapped by the identity.
    """

    def __init__(self, coefficients: Mapping[str, Tuple[float, float]], ridge_strength: float):
        check_non_negative("ridge_strength", ridge_strength)
        self.coefficients = {str(k): (float(v[0]), float(v[1])) for k, v in coefficients.items()}
        if not np.all(np.isfinite(list(self.coefficients.values()) or [0.0])):
            raise InvalidInputError("Ridge coefficients must be finite.")
        self.ridge_strength = float(ridge_strength)

    def __repr__(self):
        return f"<RidgeModel: {len(self.coefficients)} instruments, ridge_strength={self.ridge_strength:g}>"

    @classmethod
    def identity(cls) -> "RidgeModel":
        return cls({}, 0.0)

    def adjust(self, instrument: str, forecast: float) -> float:
        slope, intercept = self.coefficients.get(instrument, (1.0, 0.0))
        return slope * forecast + intercept

    def arrays(self, instruments: Sequence[str], warn: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Slopes and intercepts aligned with ``instruments``; unknown instruments get the identity map."""
        unknown = [a for a in instruments if a not in self.coefficients]
        if warn and unknown and self.coefficients:
            logger.warning(f"{len(unknown)} instruments have no regression and are used as is, e.g. {unknown[:5]}.")
        pairs = np.array([self.coefficients.get(a, (1.0, 0.0)) for a in instruments], dtype=float).reshape(-1, 2)
        return pairs[:, 0], pairs[:, 1]

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION,
                "kind": "ridge_model",
                "ridge_strength": self.ridge_strength,
                "coefficients": {a: list(c) for a, c in self.coefficients.items()}}

    def save(self, path: Union[str, Path]):
        _write_envelope(self.to_dict(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RidgeModel":
        document = _read_envelope(path, "ridge_model")
        return cls(document["coefficients"], document["ridge_strength"])


def fit_ridge(panel_train: ForecastPanel, ridge_strength: float) -> RidgeModel:
    """Per-instrument regression of the actual on the forecast, shrunk towards the identity map.

    For every instrument this minimises ``sum((X - a * Xhat - b)**2) + ridge_strength * ((a - 1)**2 + b**2)`` through
    its 2x2 normal equations. Instruments with fewer than two training pairs keep the identity map.

    Raises
    ------
    SingularFitError
        If ``ridge_strength`` is 0 and an instrument's forecasts are all identical.
    """
    check_type("panel_train", panel_train, ForecastPanel)
    check_non_negative("ridge_strength", ridge_strength)
    panel_train.require_actuals("training panel")
    lam = float(ridge_strength)
    idx, x, y = panel_train.instrument_index, panel_train.forecasts, panel_train.entry_actuals
    A = panel_train.n_instruments

    n = np.bincount(idx, minlength=A).astype(float)
    sx = np.bincount(idx, weights=x, minlength=A)
    sy = np.bincount(idx, weights=y, minlength=A)
    sxx = np.bincount(idx, weights=x * x, minlength=A)
    sxy = np.bincount(idx, weights=x * y, minlength=A)

    enough = n >= 2
    if not np.all(enough):
        short = [panel_train.instruments[i] for i in np.flatnonzero(~enough)]
        logger.warning(f"{len(short)} instruments have fewer than 2 training pairs and keep the identity map, "
                       f"e.g. {short[:5]}.")

    gram = np.empty((A, 2, 2))
    gram[:, 0, 0] = sxx + lam
    gram[:, 0, 1] = gram[:, 1, 0] = sx
    gram[:, 1, 1] = n + lam
    rhs = np.stack([sxy + lam, sy], axis=1)

    determinant = gram[:, 0, 0] * gram[:, 1, 1] - sx ** 2
    singular = enough & (determinant <= 1e-12 * gram[:, 0, 0] * gram[:, 1, 1])
    if np.any(singular):
        names = [panel_train.instruments[i] for i in np.flatnonzero(singular)]
        raise SingularFitError(f"Singular regression for instruments {names[:5]}; use a positive ridge_strength.")

    coefficients = {}
    if np.any(enough):
        solved = np.linalg.solve(gram[enough], rhs[enough][..., None])[..., 0]
        for position, (slope, intercept) in zip(np.flatnonzero(enough), solved):
            coefficients[panel_train.instruments[position]] = (float(slope), float(intercept))
    return RidgeModel(coefficients, lam)


def estimate_regression(readings: Mapping[str, float], model: RidgeModel) -> float:
    """Average of the readings after each is passed through its instrument's affine map."""
    _check_readings(readings)
    check_type("model", model, RidgeModel)
    unknown = [a for a in readings if a not in model.coefficients]
    if unknown and model.coefficients:
        logger.warning(f"{len(unknown)} instruments have no regression and are used as is, e.g. {unknown[:5]}.")
    return float(np.mean([model.adjust(a, float(x)) for a, x in readings.items()]))


def _rmse(predictions: Dict[str, float], panel: ForecastPanel) -> float:
    actuals = panel.actuals
    errors = np.array([predictions[q] - actuals[q] for q in predictions])
    return float(np.sqrt(np.mean(errors ** 2)))


def select_ridge_strength(panel_train: ForecastPanel,
                          panel_valid: ForecastPanel,
                          grid: Sequence[float] = DEFAULT_RIDGE_GRID) -> Tuple[float, RidgeModel, Dict[float, float]]:
    """Ridge strength from ``grid`` with the lowest validation RMSE (ties to the earlier value).

    Returns
    -------
    (float, RidgeModel, dict)
        The strength, its model, and the validation RMSE of every grid value.
    """
    check_type("panel_valid", panel_valid, ForecastPanel)
    panel_valid.require_actuals("validation panel")
    if len(grid) == 0:
        raise InvalidInputError("The ridge strength grid must not be empty.")
    scores = {}
    best = None
    for strength in grid:
        model = fit_ridge(panel_train, strength)
        scores[float(strength)] = _rmse(RegressionModel.from_model(model).predict(panel_valid), panel_valid)
        if best is None or scores[float(strength)] < scores[best[0]]:
            best = (float(strength), model)
    logger.info(f"Selected ridge strength {best[0]:g} from {scores}.")
    return best[0], best[1], scores


def estimate_bre(panel_train: ForecastPanel,
                 panel_valid: Optional[ForecastPanel],
                 panel_test: ForecastPanel,
                 hyper: HyperParams,
                 lambda0: float = DEFAULT_LAMBDA0,
                 budget: Optional[ChainBudget] = None) -> Dict[str, float]:
    """Bayesian regression estimates: a single free group fitted like an LVBC model, then Gibbs inference."""
    params, _ = fit(panel_train, panel_valid, 1, hyper, pin_reference_group=False)
    return infer_point_estimates(panel_test, params, lambda0, budget)


class ConsensusModel(ABC):
    """A model that learns from a training panel and produces one estimate per quantity of another panel."""

    name = "model"

    @abstractmethod
    def fit(self, panel_train: ForecastPanel, panel_valid: Optional[ForecastPanel] = None) -> "ConsensusModel":
        pass

    @abstractmethod
    def predict(self, panel: ForecastPanel) -> Dict[str, float]:
        pass

    def __repr__(self):
        return f"<{type(self).__name__}: {self.name}>"


def _per_quantity(panel: ForecastPanel, values: np.ndarray, weights: Optional[np.ndarray] = None) -> Dict[str, float]:
    weights = np.ones_like(values) if weights is None else weights
    totals = np.bincount(panel.quantity_index, weights=weights * values, minlength=panel.n_quantities)
    norms = np.bincount(panel.quantity_index, weights=weights, minlength=panel.n_quantities)
    counts = panel.readings_per_quantity
    return {q: float(totals[i] / norms[i]) for i, q in enumerate(panel.quantities) if counts[i] > 0}


class NaiveModel(ConsensusModel):
    """Uniform average of the readings; nothing to learn."""

    name = "NE"

    def fit(self, panel_train: ForecastPanel, panel_valid: Optional[ForecastPanel] = None) -> "NaiveModel":
        return self

    def predict(self, panel: ForecastPanel) -> Dict[str, float]:
        return _per_quantity(panel, panel.forecasts)


class WeightedModel(ConsensusModel):
    """Inverse historical MSE weighting."""

    name = "WE"

    def __init__(self):
        self.weights: Optional[WeightVector] = None

    def fit(self, panel_train: ForecastPanel, panel_valid: Optional[ForecastPanel] = None) -> "WeightedModel":
        self.weights = fit_weights(panel_train)
        return self

    def predict(self, panel: ForecastPanel) -> Dict[str, float]:
        if self.weights is None:
            raise RuntimeError("Call fit() before predict().")
        weights = self.weights
        unknown = [a for a in panel.instruments if a not in weights]
        if unknown:
            logger.warning(f"{len(unknown)} instruments have no weight and get the mean weight, e.g. {unknown[:5]}.")
            mean_weight = float(np.mean(list(weights.weights.values())))
        else:
            mean_weight = 0.0
        per_instrument = np.array([weights.weights.get(a, mean_weight) for a in panel.instruments])
        return _per_quantity(panel, panel.forecasts, per_instrument[panel.instrument_index])


class RegressionModel(ConsensusModel):
    """Per-instrument ridge regression; the strength is chosen on the validation panel when one is given."""

    name = "RE"

    def __init__(self, ridge_strength: Optional[float] = None, grid: Sequence[float] = DEFAULT_RIDGE_GRID):
        if ridge_strength is not None:
            check_non_negative("ridge_strength", ridge_strength)
        self.ridge_strength = ridge_strength
        self.grid = tuple(grid)
        self.model: Optional[RidgeModel] = None

    @classmethod
    def from_model(cls, model: RidgeModel) -> "RegressionModel":
        out = cls(model.ridge_strength)
        out.model = model
        return out

    def fit(self, panel_train: ForecastPanel, panel_valid: Optional[ForecastPanel] = None) -> "RegressionModel":
        if self.ridge_strength is None and panel_valid is not None:
            self.ridge_strength, self.model, _ = select_ridge_strength(panel_train, panel_valid, self.grid)
        else:
            strength = 1.0 if self.ridge_strength is None else self.ridge_strength
            self.model = fit_ridge(panel_train, strength)
            self.ridge_strength = strength
        return self

    def predict(self, panel: ForecastPanel) -> Dict[str, float]:
        if self.model is None:
            raise RuntimeError("Call fit() before predict().")
        slopes, intercepts = self.model.arrays(panel.instruments)
        adjusted = slopes[panel.instrument_index] * panel.forecasts + intercepts[panel.instrument_index]
        return _per_quantity(panel, adjusted)


class LvbcModel(ConsensusModel):
    """Latent-variable consensus model: fit on the training panel, Gibbs inference on the panel to predict.

    Parameters
    ----------
    num_groups : int
    hyper : HyperParams
    lambda0 : float, default=1e-4
        Prior precision at inference time.
    budget : ChainBudget, optional
    lambda_grid : sequence of float, optional
        If given and a validation panel is supplied, the prior strength is chosen from this grid.
    pin_reference_group : bool, default=True
    """

    name = "LVBC"

    def __init__(self,
                 num_groups: int,
                 hyper: HyperParams,
                 lambda0: float = DEFAULT_LAMBDA0,
                 budget: Optional[ChainBudget] = None,
                 lambda_grid: Optional[Sequence[float]] = None,
                 pin_reference_group: bool = True):
        check_sanity_int("num_groups", num_groups)
        check_type("hyper", hyper, HyperParams)
        check_positive("lambda0", lambda0)
        self.num_groups = num_groups
        self.hyper = hyper
        self.lambda0 = lambda0
        self.budget = ChainBudget() if budget is None else budget
        self.lambda_grid = lambda_grid
        self.pin_reference_group = pin_reference_group
        self.params: Optional[LvbcParameters] = None
        self.report: Optional[TrainingReport] = None

    def fit(self, panel_train: ForecastPanel, panel_valid: Optional[ForecastPanel] = None) -> "LvbcModel":
        if self.lambda_grid and panel_valid is not None:
            self.params, self.report = fit_lambda_grid(panel_train, panel_valid, self.num_groups, self.hyper,
                                                       self.lambda_grid, self.pin_reference_group)
        else:
            self.params, self.report = fit(panel_train, panel_valid, self.num_groups, self.hyper,
                                           self.pin_reference_group)
        return self

    def predict(self, panel: ForecastPanel) -> Dict[str, float]:
        if self.params is None:
            raise RuntimeError("Call fit() before predict().")
        return infer_point_estimates(panel, self.params, self.lambda0, self.budget)


class BayesianRegressionModel(LvbcModel):
    """An LVBC model with one free (unpinned) group."""

    name = "BRE"

    def __init__(self,
                 hyper: HyperParams,
                 lambda0: float = DEFAULT_LAMBDA0,
                 budget: Optional[ChainBudget] = None,
                 lambda_grid: Optional[Sequence[float]] = None):
        super().__init__(1, hyper, lambda0, budget, lambda_grid, pin_reference_group=False)


def default_models(num_groups: int,
                   hyper: HyperParams,
                   lambda0: float = DEFAULT_LAMBDA0,
                   budget: Optional[ChainBudget] = None,
                   lambda_grid: Optional[Sequence[float]] = DEFAULT_LAMBDA_GRID) -> Sequence[ConsensusModel]:
    """The five models compared by the evaluation pipeline, in report order."""
    return [NaiveModel(),
            WeightedModel(),
            RegressionModel(),
            BayesianRegressionModel(hyper, lambda0, budget, lambda_grid),
            LvbcModel(num_groups, hyper, lambda0, budget, lambda_grid)]

"""Scoring consensus estimates: RMSE, MAE and R², micro and macro averaged, with bootstrap confidence intervals."""
import logging
from dataclasses import dataclass
from numbers import Integral
from typing import Dict, Mapping, Optional

import numpy as np

from ._errors import InvalidInputError, UndefinedMetricError
from ._seeding import make_rng
from ._utils import check_probability, check_type

logger = logging.getLogger(__name__)

METRICS = ("rmse", "mae", "r2")
MODES = ("micro", "macro")

#: Columns of the flat report table.
REPORT_COLUMNS = ["model", "macro_rmse", "macro_mae", "micro_rmse", "micro_mae", "micro_r2"]

# bootstrap index matrices are built in chunks of at most this many cells
_CHUNK_CELLS = 4_000_000


def _aligned(predictions: Mapping[str, float], actuals: Mapping[str, float]):
    check_type("predictions", predictions, Mapping)
    check_type("actuals", actuals, Mapping)
    if set(predictions) != set(actuals):
        only_pred = sorted(set(predictions) - set(actuals))
        only_act = sorted(set(actuals) - set(predictions))
        raise InvalidInputError(f"Prediction and actual keys differ: {len(only_pred)} only in predictions "
                                f"(e.g. {only_pred[:3]}), {len(only_act)} only in actuals (e.g. {only_act[:3]}).")
    if len(predictions) == 0:
        raise InvalidInputError("Nothing to score: no predictions.")
    keys = sorted(predictions)
    pred = np.array([predictions[k] for k in keys], dtype=float)
    act = np.array([actuals[k] for k in keys], dtype=float)
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(act))):
        raise InvalidInputError("Predictions and actuals must be finite.")
    return keys, pred, act


def _group_codes(keys, groups: Optional[Mapping[str, str]]):
    if groups is None:
        return None
    check_type("groups", groups, Mapping)
    missing = [k for k in keys if k not in groups]
    if missing:
        raise InvalidInputError(f"{len(missing)} quantities have no group, e.g. {missing[:3]}.")
    labels = sorted({str(groups[k]) for k in keys})
    lookup = {g: i for i, g in enumerate(labels)}
    return np.array([lookup[str(groups[k])] for k in keys], dtype=np.int64)


def _rmse(errors: np.ndarray, axis=None):
    return np.sqrt(np.mean(errors ** 2, axis=axis))


def _mae(errors: np.ndarray, axis=None):
    return np.mean(np.abs(errors), axis=axis)


def _r2(pred: np.ndarray, act: np.ndarray, axis=None):
    residual = np.sum((act - pred) ** 2, axis=axis)
    total = np.sum((act - np.mean(act, axis=axis, keepdims=True)) ** 2, axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(total > 0, 1.0 - residual / np.where(total > 0, total, 1.0), np.nan)


def _macro(errors: np.ndarray, codes: np.ndarray) -> Dict[str, float]:
    per_group = [errors[codes == g] for g in range(codes.max() + 1)]
    return {"rmse": float(np.mean([_rmse(e) for e in per_group])),
            "mae": float(np.mean([_mae(e) for e in per_group]))}


def score(predictions: Mapping[str, float],
          actuals: Mapping[str, float],
          groups: Optional[Mapping[str, str]] = None) -> Dict[str, Dict[str, float]]:
    """Metrics of ``predictions`` against ``actuals``.

    Parameters
    ----------
    predictions, actuals : mapping of str to float
        Keyed by quantity id; the key sets must be equal.
    groups : mapping of str to str, optional
        Group (e.g. company) of every quantity. Macro averages need it.

    Returns
    -------
    dict
        ``{"micro": {"rmse", "mae", "r2"}, "macro": {"rmse", "mae"}}``; ``"macro"`` only when ``groups`` is given.

    Raises
    ------
    UndefinedMetricError
        If the actuals are constant, leaving R² undefined.
    """
    keys, pred, act = _aligned(predictions, actuals)
    codes = _group_codes(keys, groups)
    errors = pred - act
    r2 = float(_r2(pred, act))
    if np.isnan(r2):
        raise UndefinedMetricError("R² is undefined for constant actuals.")
    out = {"micro": {"rmse": float(_rmse(errors)), "mae": float(_mae(errors)), "r2": r2}}
    if codes is not None:
        out["macro"] = _macro(errors, codes)
    return out


@dataclass(frozen=True)
class MetricInterval:
    point: float
    ci_low: float
    ci_high: float


class EvalReport:
    """Metric values with bootstrap confidence intervals.

    ``entries`` maps ``(metric, mode)`` pairs such as ``("rmse", "micro")`` to a :class:`MetricInterval`.
    """

    def __init__(self, entries: Dict[tuple, MetricInterval], n_bootstrap: int, ci_level: float, n_quantities: int):
        self.entries = entries
        self.n_bootstrap = n_bootstrap
        self.ci_level = ci_level
        self.n_quantities = n_quantities

    def __repr__(self):
        return f"<EvalReport: {', '.join(f'{m}_{a}={v.point:.4g}' for (m, a), v in self.entries.items())}>"

    def __getitem__(self, key: tuple) -> MetricInterval:
        return self.entries[key]

    def get(self, metric: str, mode: str = "micro") -> MetricInterval:
        return self.entries[(metric, mode)]

    def to_dict(self) -> dict:
        out = {"n_bootstrap": self.n_bootstrap, "ci_level": self.ci_level, "n_quantities": self.n_quantities}
        for mode in MODES:
            block = {metric: {"point": v.point, "ci_low": v.ci_low, "ci_high": v.ci_high}
                     for (metric, m), v in self.entries.items() if m == mode}
            if block:
                out[mode] = block
        return out

    def to_row(self, model: str) -> dict:
        """One row of the flat report table; metrics that were not computed are nan."""
        row = {"model": model}
        for column in REPORT_COLUMNS[1:]:
            mode, metric = column.split("_", 1)
            entry = self.entries.get((metric, mode))
            row[column] = entry.point if entry is not None else np.nan
        return row


def _quantiles(replicates: np.ndarray, point: float, level: float) -> MetricInterval:
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.nanpercentile(replicates, [tail, 100.0 - tail])
    # a resample can put the point outside the percentile interval; the interval is widened to contain it
    return MetricInterval(point=point, ci_low=float(min(low, point)), ci_high=float(max(high, point)))


def _resampled(rng: np.random.Generator, size: int, n_bootstrap: int):
    """Yield index matrices of bootstrap resamples, chunked by rows."""
    rows = max(1, _CHUNK_CELLS // max(size, 1))
    for start in range(0, n_bootstrap, rows):
        yield rng.integers(0, size, size=(min(rows, n_bootstrap - start), size))


def bootstrap_report(predictions: Mapping[str, float],
                     actuals: Mapping[str, float],
                     groups: Optional[Mapping[str, str]] = None,
                     n_bootstrap: int = 1000,
                     ci_level: float = 0.95,
                     seed: int = 0) -> EvalReport:
    """Point metrics of :func:`score` with bootstrap confidence intervals.

    (prediction, actual) pairs are resampled with replacement; for macro averages each group is resampled on its own.
    Resamples whose actuals happen to be constant give no R² and are skipped.

    Parameters
    ----------
    predictions, actuals, groups
        As for :func:`score`.
    n_bootstrap : int, default=1000
        At least 100.
    ci_level : float, default=0.95
    seed : int, default=0

    Returns
    -------
    EvalReport
    """
    check_type("n_bootstrap", n_bootstrap, Integral)
    if n_bootstrap < 100:
        raise InvalidInputError(f"n_bootstrap must be at least 100; received {n_bootstrap}.")
    check_probability("ci_level", ci_level, open_interval=True)
    points = score(predictions, actuals, groups)
    keys, pred, act = _aligned(predictions, actuals)
    codes = _group_codes(keys, groups)
    errors = pred - act
    rng = make_rng(seed)

    micro = {metric: [] for metric in METRICS}
    for index in _resampled(rng, errors.size, n_bootstrap):
        e = errors[index]
        micro["rmse"].append(_rmse(e, axis=1))
        micro["mae"].append(_mae(e, axis=1))
        micro["r2"].append(_r2(pred[index], act[index], axis=1))

    entries = {}
    for metric in METRICS:
        entries[(metric, "micro")] = _quantiles(np.concatenate(micro[metric]), points["micro"][metric], ci_level)

    if codes is not None:
        macro = {"rmse": np.zeros(n_bootstrap), "mae": np.zeros(n_bootstrap)}
        num_groups = int(codes.max()) + 1
        for g in range(num_groups):
            group_errors = errors[codes == g]
            start = 0
            for index in _resampled(rng, group_errors.size, n_bootstrap):
                e = group_errors[index]
                stop = start + e.shape[0]
                macro["rmse"][start:stop] += _rmse(e, axis=1) / num_groups
                macro["mae"][start:stop] += _mae(e, axis=1) / num_groups
                start = stop
        for metric in ("rmse", "mae"):
            entries[(metric, "macro")] = _quantiles(macro[metric], points["macro"][metric], ci_level)

    logger.debug(f"Bootstrapped {n_bootstrap} resamples of {errors.size} quantities.")
    return EvalReport(entries, int(n_bootstrap), float(ci_level), int(errors.size))

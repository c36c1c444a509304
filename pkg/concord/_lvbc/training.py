"""Fitting the latent-variable consensus model by minibatched adaptive-moment ascent on the ELBO."""
import logging
from dataclasses import dataclass, field
from numbers import Integral
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .. import _gibbs
from .._errors import InvalidInputError, TrainingFailureError
from .._panel import ForecastPanel
from .._seeding import derive_seed, make_rng
from .._utils import check_positive, check_sanity_int, check_type
from .objective import EntryData, _elbo, _elbo_gradient
from .parameters import HyperParams, LvbcParameters, ParameterGradient

logger = logging.getLogger(__name__)

#: Prior strengths tried by :func:`fit_lambda_grid` unless told otherwise.
DEFAULT_LAMBDA_GRID = (1e2, 1e3, 1e4, 1e5)

_FIELDS = ("alpha", "beta", "log_sigma", "logits")


class Adam:
    """Adaptive-moment optimizer over the arrays of an :class:`LvbcParameters`.

    Parameters
    ----------
    learning_rate : float
    beta1, beta2 : float, default=0.9, 0.999
        Decay rates of the first and second moment estimates.
    eps : float, default=1e-8
    """
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        check_positive("learning_rate", learning_rate)
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.steps = 0
        self._first = {}
        self._second = {}

    def ascend(self, params: LvbcParameters, gradient: ParameterGradient):
        """Move ``params`` in place one step up ``gradient``. A zero gradient leaves an entry exactly unchanged."""
        self.steps += 1
        correction1 = 1.0 - self.beta1 ** self.steps
        correction2 = 1.0 - self.beta2 ** self.steps
        for name in _FIELDS:
            g = getattr(gradient, name)
            m = self.beta1 * self._first.get(name, 0.0) + (1.0 - self.beta1) * g
            v = self.beta2 * self._second.get(name, 0.0) + (1.0 - self.beta2) * g ** 2
            self._first[name] = m
            self._second[name] = v
            step = self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            setattr(params, name, getattr(params, name) + step)


@dataclass
class RestartResult:
    """Outcome of one random restart.

    ``trace`` holds ``(epoch, train_loss, validation_rmse)`` tuples, where ``train_loss`` is the negative ELBO per
    training entry and ``validation_rmse`` is nan on epochs without a validation check.
    """
    index: int
    status: str
    best_metric: float = np.inf
    epochs: int = 0
    message: str = ""
    trace: List[tuple] = field(default_factory=list)
    params: Optional[LvbcParameters] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class TrainingReport:
    """Per-restart traces of a fit and the restart that was selected.

    Attributes
    ----------
    restarts : list of RestartResult
    selected_restart : int
    num_groups : int
    prior_strength : float
    monitored : str
        ``"validation_rmse"``, or ``"train_loss"`` when no validation panel was given.
    lambda_scores : dict
        Selection metric per prior strength, filled in by :func:`fit_lambda_grid`.
    """
    trace_columns = ["restart", "epoch", "train_loss", "validation_rmse"]

    def __init__(self, restarts: List[RestartResult], selected_restart: int, num_groups: int, prior_strength: float,
                 monitored: str):
        self.restarts = restarts
        self.selected_restart = selected_restart
        self.num_groups = num_groups
        self.prior_strength = prior_strength
        self.monitored = monitored
        self.lambda_scores: Dict[float, float] = {}

    def __repr__(self):
        return (f"<TrainingReport: {len(self.restarts)} restarts, selected {self.selected_restart}, "
                f"best {self.monitored} = {self.best_metric:.6g}>")

    @property
    def best_metric(self) -> float:
        return self.restarts[self.selected_restart].best_metric

    @property
    def failed_restarts(self) -> List[int]:
        return [r.index for r in self.restarts if not r.ok]

    def trace_frame(self) -> pd.DataFrame:
        rows = [(r.index, *row) for r in self.restarts for row in r.trace]
        return pd.DataFrame(rows, columns=self.trace_columns)

    def to_dict(self) -> dict:
        return {
            "num_groups": self.num_groups,
            "prior_strength": self.prior_strength,
            "monitored": self.monitored,
            "selected_restart": self.selected_restart,
            "best_metric": self.best_metric,
            "restarts": [{"index": r.index, "status": r.status, "epochs": r.epochs, "best_metric": r.best_metric,
                          "message": r.message} for r in self.restarts],
            "lambda_scores": {str(k): v for k, v in self.lambda_scores.items()},
        }


class _Validator:
    """Validation RMSE of a parameter set on a fixed panel."""
    def __init__(self, panel: ForecastPanel, instruments: Sequence[str], hyper: HyperParams):
        panel.require_actuals("validation panel")
        reference = LvbcParameters.identity(instruments)
        # warn about dropped quantities and unknown instruments once, not on every epoch
        self.data = _gibbs.ChainData(panel, reference, warn=True)
        self.actuals = panel.actual_values[self.data.quantity_positions]
        self.hyper = hyper
        if self.data.num_quantities == 0:
            raise InvalidInputError("The validation panel has no quantity with readings.")

    def __call__(self, params: LvbcParameters, seed: int) -> float:
        hyper = self.hyper
        if hyper.validation_method == "posterior_mean":
            estimates = _gibbs.closed_form_means(self.data, params, hyper.lambda0)
        else:
            budget = _gibbs.ChainBudget(hyper.validation_samples, hyper.validation_burn_in, seed)
            estimates = _gibbs.sample_chain(self.data, params, hyper.lambda0, budget).mean(axis=0)
        return float(np.sqrt(np.mean((estimates - self.actuals) ** 2)))


def _run_restart(index: int,
                 data: EntryData,
                 validator: Optional[_Validator],
                 instruments: List[str],
                 num_groups: int,
                 hyper: HyperParams,
                 pinned: bool) -> RestartResult:
    rng = make_rng(derive_seed(hyper.seed, index))
    params = LvbcParameters.initialize(instruments, num_groups, hyper, rng, pinned)
    optimizer = Adam(hyper.learning_rate)
    result = RestartResult(index=index, status="ok", params=params.copy())
    total = len(data)
    stale = 0

    for epoch in range(1, hyper.max_epochs + 1):
        order = rng.permutation(total)
        for start in range(0, total, hyper.minibatch_size):
            batch = data.take(order[start:start + hyper.minibatch_size])
            gradient = _elbo_gradient(params, hyper, batch, len(batch) / total)
            if not gradient.is_finite():
                break
            optimizer.ascend(params, gradient)

        loss = -_elbo(params, hyper, data, 1.0) / total
        if not np.isfinite(loss) or not gradient.is_finite():
            result.status = "failed"
            result.message = f"non-finite loss at epoch {epoch}"
            logger.warning(f"Restart {index} failed: {result.message}.")
            break

        validation_rmse = np.nan
        if epoch % hyper.validation_interval == 0 or epoch == hyper.max_epochs:
            if validator is None:
                metric = loss
            else:
                metric = validation_rmse = validator(params, derive_seed(hyper.seed, index, epoch))
                if not np.isfinite(metric):
                    result.status = "failed"
                    result.message = f"non-finite validation RMSE at epoch {epoch}"
                    logger.warning(f"Restart {index} failed: {result.message}.")
                    break
            if metric < result.best_metric:
                result.best_metric = float(metric)
                result.params = params.copy()
                stale = 0
            else:
                stale += 1

        result.trace.append((epoch, float(loss), float(validation_rmse)))
        result.epochs = epoch
        logger.debug(f"Restart {index}, epoch {epoch}: loss {loss:.6g}, validation RMSE {validation_rmse:.6g}.")
        if stale >= hyper.patience:
            logger.debug(f"Restart {index} stopped early after {epoch} epochs.")
            break

    if not result.ok:
        result.params = None
    else:
        logger.info(f"Restart {index} finished after {result.epochs} epochs; best metric {result.best_metric:.6g}.")
    return result


def fit(panel_train: ForecastPanel,
        panel_valid: Optional[ForecastPanel],
        num_groups: int,
        hyper: HyperParams,
        pin_reference_group: bool = True,
        n_jobs: Optional[int] = 1) -> Tuple[LvbcParameters, TrainingReport]:
    """Fit an LVBC model with ``num_groups`` groups.

    Each of ``hyper.num_restarts`` restarts starts from its own random initialization and runs minibatched ascent on
    the ELBO. Every ``hyper.validation_interval`` epochs the validation RMSE is computed; a restart stops after
    ``hyper.patience`` checks without improvement and keeps its best parameters. The restart with the lowest validation
    RMSE wins, ties going to the lowest restart index.

    Parameters
    ----------
    panel_train : ForecastPanel
        Entries to learn from; every quantity needs an actual.
    panel_valid : ForecastPanel, optional
        Panel for early stopping and restart selection. Without one the training loss is monitored instead.
    num_groups : int
        Number of latent groups, K.
    hyper : HyperParams
    pin_reference_group : bool, default=True
        Fix group 0 at the identity calibration.
    n_jobs : int, optional
        joblib workers for the restarts. Results do not depend on it.

    Returns
    -------
    (LvbcParameters, TrainingReport)

    Raises
    ------
    TrainingFailureError
        If every restart hits a non-finite loss.
    """
    check_type("panel_train", panel_train, ForecastPanel)
    check_type("num_groups", num_groups, Integral)
    check_sanity_int("num_groups", num_groups)
    check_type("hyper", hyper, HyperParams)
    check_type("pin_reference_group", pin_reference_group, bool)
    if panel_train.n_entries == 0:
        raise InvalidInputError("The training panel is empty.")

    instruments = list(panel_train.instruments)
    data = EntryData.from_panel(panel_train, instruments)
    validator = None
    if panel_valid is not None:
        check_type("panel_valid", panel_valid, ForecastPanel)
        validator = _Validator(panel_valid, instruments, hyper)

    logger.info(f"Fitting K={num_groups} on {panel_train} with {hyper.num_restarts} restarts.")
    restarts = Parallel(n_jobs=n_jobs)(
        delayed(_run_restart)(index, data, validator, instruments, int(num_groups), hyper, pin_reference_group)
        for index in range(hyper.num_restarts)
    )

    finished = [r for r in restarts if r.ok]
    if not finished:
        raise TrainingFailureError(f"All {hyper.num_restarts} restarts failed: "
                                   f"{'; '.join(r.message for r in restarts)}.")
    best = min(finished, key=lambda r: (r.best_metric, r.index))
    monitored = "train_loss" if validator is None else "validation_rmse"
    logger.info(f"Selected restart {best.index} with {monitored} {best.best_metric:.6g}.")
    report = TrainingReport(restarts, best.index, int(num_groups), float(hyper.prior_strength), monitored)
    return best.params, report


def fit_lambda_grid(panel_train: ForecastPanel,
                    panel_valid: ForecastPanel,
                    num_groups: int,
                    hyper: HyperParams,
                    grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                    pin_reference_group: bool = True,
                    n_jobs: Optional[int] = 1) -> Tuple[LvbcParameters, TrainingReport]:
    """Fit one model per prior strength in ``grid`` and keep the one with the lowest validation RMSE.

    The returned report is the winner's, with ``lambda_scores`` holding the validation RMSE of every grid value. Ties
    go to the earlier grid value.
    """
    check_type("panel_valid", panel_valid, ForecastPanel)
    if len(grid) == 0:
        raise InvalidInputError("The prior strength grid must not be empty.")
    best = None
    scores = {}
    for strength in grid:
        params, report = fit(panel_train, panel_valid, num_groups, hyper.replace(prior_strength=float(strength)),
                             pin_reference_group, n_jobs)
        scores[float(strength)] = report.best_metric
        if best is None or report.best_metric < best[1].best_metric:
            best = (params, report)
    params, report = best
    report.lambda_scores = scores
    logger.info(f"Selected prior strength {report.prior_strength:g} from {scores}.")
    return params, report

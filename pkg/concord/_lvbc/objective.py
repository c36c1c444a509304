"""Evidence lower bound of the latent-variable consensus model and its analytic gradient.

For an entry ``e`` (quantity ``i``, instrument ``j``) and group ``k`` the residual is
``r = Xhat_ij - (alpha[k, xi_i] * X_i + beta[k, xi_i])`` and the log-density, dropping the additive constant, is
``-r**2 / (2 * sigma_k**2) - ln(sigma_k)``. The ELBO weights these by ``softmax(w_j)_k`` and subtracts the prior
penalty ``prior_strength * Omega``. On a subset of the entries the penalty is scaled by the subset's share of all
entries, so the objective of a partition sums to the objective of the whole panel.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import softmax

from .._errors import InvalidInputError
from .._panel import ForecastPanel
from .._utils import check_type
from .parameters import HyperParams, LvbcParameters, ParameterGradient


@dataclass(eq=False)
class EntryData:
    """Training entries aligned with the instrument order of a parameter set."""
    forecasts: np.ndarray
    actuals: np.ndarray
    signs: np.ndarray
    instruments: np.ndarray
    num_instruments: int

    @classmethod
    def from_panel(cls, panel: ForecastPanel, instruments: Sequence[str]) -> "EntryData":
        check_type("panel", panel, ForecastPanel)
        panel.require_actuals("training panel")
        positions = panel.instrument_positions(instruments)
        if np.any(positions < 0):
            unknown = sorted({panel.instruments[i] for i in panel.instrument_index[positions < 0]})
            raise InvalidInputError(f"Instruments {unknown[:5]} have no logits in the parameter set.")
        return cls(forecasts=panel.forecasts,
                   actuals=panel.entry_actuals,
                   signs=panel.entry_signs,
                   instruments=positions,
                   num_instruments=len(instruments))

    def __len__(self):
        return int(self.forecasts.size)

    def take(self, subset: Optional[Sequence[int]]) -> "EntryData":
        if subset is None:
            return self
        subset = np.asarray(subset, dtype=np.int64).reshape(-1)
        if subset.size and (subset.min() < 0 or subset.max() >= len(self)):
            raise InvalidInputError(f"Entry indices must lie in [0, {len(self)}).")
        return EntryData(self.forecasts[subset], self.actuals[subset], self.signs[subset], self.instruments[subset],
                         self.num_instruments)


def _log_densities(params: LvbcParameters, data: EntryData):
    """Residuals and per-group log-densities, both of shape (entries, K)."""
    alpha = params.alpha[:, data.signs].T
    beta = params.beta[:, data.signs].T
    residuals = data.forecasts[:, None] - (alpha * data.actuals[:, None] + beta)
    variance = np.exp(2.0 * params.log_sigma)
    return residuals, -residuals ** 2 / (2.0 * variance) - params.log_sigma


def prior_penalty(params: LvbcParameters, hyper: HyperParams) -> float:
    """Omega: squared distance of the free calibrations and of every noise scale from their prior centres."""
    free = slice(params.first_free_group, None)
    return float(np.sum((params.alpha[free] - hyper.prior_alpha) ** 2)
                 + np.sum((params.beta[free] - hyper.prior_beta) ** 2)
                 + np.sum((params.sigma - hyper.prior_sigma) ** 2))


def _elbo(params: LvbcParameters, hyper: HyperParams, data: EntryData, fraction: float) -> float:
    _, log_density = _log_densities(params, data)
    weights = softmax(params.logits, axis=1)[data.instruments]
    return float(np.sum(weights * log_density) - fraction * hyper.prior_strength * prior_penalty(params, hyper))


def _elbo_gradient(params: LvbcParameters, hyper: HyperParams, data: EntryData, fraction: float) -> ParameterGradient:
    K = params.num_groups
    residuals, log_density = _log_densities(params, data)
    variance = np.exp(2.0 * params.log_sigma)
    responsibilities = softmax(params.logits, axis=1)
    weights = responsibilities[data.instruments]
    strength = fraction * hyper.prior_strength

    scaled = weights * residuals / variance
    grad_alpha = np.zeros((K, 2))
    grad_beta = np.zeros((K, 2))
    for xi in (0, 1):
        branch = data.signs == xi
        grad_alpha[:, xi] = (scaled[branch] * data.actuals[branch, None]).sum(axis=0)
        grad_beta[:, xi] = scaled[branch].sum(axis=0)
    grad_alpha -= 2.0 * strength * (params.alpha - hyper.prior_alpha)
    grad_beta -= 2.0 * strength * (params.beta - hyper.prior_beta)
    if params.pinned:
        grad_alpha[0] = 0.0
        grad_beta[0] = 0.0

    sigma = params.sigma
    grad_log_sigma = (weights * (residuals ** 2 / variance - 1.0)).sum(axis=0)
    grad_log_sigma -= 2.0 * strength * (sigma - hyper.prior_sigma) * sigma

    # log-likelihood of every instrument under every group
    totals = np.zeros((data.num_instruments, K))
    np.add.at(totals, data.instruments, log_density)
    expected = np.sum(responsibilities * totals, axis=1, keepdims=True)
    grad_logits = responsibilities * (totals - expected)

    return ParameterGradient(alpha=grad_alpha, beta=grad_beta, log_sigma=grad_log_sigma, logits=grad_logits)


def _prepare(params, hyper, panel, subset):
    check_type("params", params, LvbcParameters)
    check_type("hyper", hyper, HyperParams)
    data = EntryData.from_panel(panel, params.instruments)
    total = len(data)
    data = data.take(subset)
    fraction = len(data) / total if total else 0.0
    return data, fraction


def elbo(params: LvbcParameters,
         hyper: HyperParams,
         panel: ForecastPanel,
         subset: Optional[Sequence[int]] = None) -> float:
    """Evidence lower bound of ``panel`` (or of the entries listed in ``subset``) under ``params``.

    Parameters
    ----------
    params : LvbcParameters
    hyper : HyperParams
        Supplies the prior centres and ``prior_strength``.
    panel : ForecastPanel
        Training panel; every quantity needs an actual.
    subset : sequence of int, optional
        Entry indices into the panel. The prior penalty is scaled by ``len(subset) / panel.n_entries``.

    Returns
    -------
    float
    """
    data, fraction = _prepare(params, hyper, panel, subset)
    return _elbo(params, hyper, data, fraction)


def elbo_gradient(params: LvbcParameters,
                  hyper: HyperParams,
                  panel: ForecastPanel,
                  subset: Optional[Sequence[int]] = None) -> ParameterGradient:
    """Exact gradient of :func:`elbo` with respect to every parameter array.

    The pinned group's slopes and offsets get a zero gradient. Every logits row sums to zero.
    """
    data, fraction = _prepare(params, hyper, panel, subset)
    return _elbo_gradient(params, hyper, data, fraction)

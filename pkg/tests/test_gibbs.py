import itertools

import numpy as np
import pytest
from scipy.special import softmax

from concord import (ChainBudget, ForecastPanel, InvalidInputError, LvbcParameters, MeasurementBatch,
                     conditional_posterior, estimate_bayesian, gibbs_run, infer_point_estimates,
                     posterior_mean_estimates)


def _identity(instruments=("a",), sigma=1.0):
    return LvbcParameters.identity(list(instruments), sigma)


def _two_groups(instruments, logits, alpha1, beta1, sigma=(0.5, 0.5)):
    return LvbcParameters(alpha=[[1.0, 1.0], alpha1], beta=[[0.0, 0.0], beta1], log_sigma=np.log(sigma),
                          logits=logits, instruments=list(instruments))


def _one_quantity(readings, quantity="q"):
    instruments = [f"a{j}" for j in range(len(readings))]
    return ForecastPanel([quantity] * len(readings), instruments, readings)


def test_single_reading_posterior():
    posterior = conditional_posterior([(2.0, 0)], _identity(), xi=1, lambda0=0.01)
    assert posterior.mean == pytest.approx(2 / 1.01)
    assert posterior.variance == pytest.approx(1 / 1.01)


def test_precisions_add():
    posterior = conditional_posterior([(2.0, 0), (2.0, 0)], _identity(), xi=1, lambda0=1e-12)
    assert posterior.mean == pytest.approx(2.0)
    assert posterior.variance == pytest.approx(0.5)


def test_posterior_matches_matrix_arithmetic():
    rng = np.random.default_rng(0)
    params = LvbcParameters(rng.normal(1, 0.3, (3, 2)), rng.normal(0, 0.3, (3, 2)), rng.normal(0, 0.3, 3),
                            np.zeros((2, 3)), pinned=False)
    values = rng.normal(0, 2, 5)
    groups = rng.integers(0, 3, 5)
    lambda0 = 0.3
    posterior = conditional_posterior(list(zip(values, groups)), params, xi=0, lambda0=lambda0)

    a = params.alpha[groups, 0][:, None]
    b = params.beta[groups, 0]
    noise_precision = np.linalg.inv(np.diag(params.sigma[groups] ** 2))
    precision = lambda0 + (a.T @ noise_precision @ a).item()
    assert posterior.variance == pytest.approx(1 / precision, rel=1e-12)
    assert posterior.mean == pytest.approx((a.T @ noise_precision @ (values - b)).item() / precision, rel=1e-12)


def test_posterior_limits():
    params = LvbcParameters([[1.0, 1.0]], [[0.5, 0.5]], [0.0], [[0.0]], pinned=False)
    assert conditional_posterior([(3.0, 0)], params, 1, lambda0=1e-12).mean == pytest.approx(2.5)
    assert conditional_posterior([(3.0, 0)], params, 1, lambda0=1e12).mean == pytest.approx(0.0, abs=1e-9)


def test_more_readings_shrink_the_variance():
    variances = [conditional_posterior([(1.0, 0)] * n, _identity(), 1).variance for n in range(1, 6)]
    assert np.all(np.diff(variances) < 0)


@pytest.mark.parametrize("readings, xi", [([], 1), ([(1.0, 0)], 2), ([(1.0, 1)], 0)])
def test_posterior_rejects_bad_input(readings, xi):
    with pytest.raises(InvalidInputError):
        conditional_posterior(readings, _identity(), xi)


def test_single_group_chain_matches_the_bayesian_estimator():
    readings = [1.2, 0.4, 2.0]
    lambda0 = 0.5
    chain = gibbs_run(_one_quantity(readings), _identity(["a0", "a1", "a2"]), lambda0, num_samples=5100,
                      burn_in=100, seed=3)["q"]
    expected = estimate_bayesian(MeasurementBatch.from_groups(readings, []), 1.0, 0.0, lambda0)
    stderr = chain.samples.std(ddof=1) / np.sqrt(chain.n_samples)
    assert abs(chain.point_estimate - expected) < 3 * stderr
    assert chain.n_samples == 5000


def test_tight_readings_pin_the_estimate():
    chain = gibbs_run(_one_quantity([1.7] * 4), _identity(["a0", "a1", "a2", "a3"], sigma=1e-3), seed=1)["q"]
    assert chain.point_estimate == pytest.approx(1.7, abs=1e-3)


def test_chain_is_reproducible(test_panel, truth):
    first = gibbs_run(test_panel, truth, num_samples=200, burn_in=20, seed=9)
    second = gibbs_run(test_panel, truth, num_samples=200, burn_in=20, seed=9)
    assert list(first) == list(second)
    for q in first:
        np.testing.assert_array_equal(first[q].samples, second[q].samples)


def test_chain_outputs(test_panel, truth):
    chains = gibbs_run(test_panel.without_actuals(), truth, num_samples=300, burn_in=50, credible_level=0.9)
    assert list(chains) == test_panel.quantities
    for chain in chains.values():
        assert chain.n_samples == 250
        assert chain.ci_low <= chain.point_estimate <= chain.ci_high


def test_quantities_without_readings_are_skipped(caplog):
    panel = ForecastPanel(["q1"], ["a"], [1.0], actuals={"q1": 1.0, "q2": 2.0})
    chains = gibbs_run(panel, _identity(), num_samples=50, burn_in=10)
    assert list(chains) == ["q1"]
    assert "no readings" in caplog.text


def test_unknown_instruments_get_a_uniform_group(caplog):
    panel = ForecastPanel(["q", "q"], ["a", "zz"], [2.0, 4.0])
    estimates = posterior_mean_estimates(panel, _identity(["a"]), lambda0=1e-12)
    assert estimates["q"] == pytest.approx(3.0)
    assert "unknown" in caplog.text
    assert gibbs_run(panel, _identity(["a"]), num_samples=20, burn_in=0)["q"].n_samples == 20


def test_point_estimate_wrapper(test_panel, truth):
    budget = ChainBudget(100, 10, seed=4)
    chains = gibbs_run(test_panel, truth, num_samples=100, burn_in=10, seed=4)
    estimates = infer_point_estimates(test_panel, truth, budget=budget)
    assert estimates == {q: c.point_estimate for q, c in chains.items()}
    assert infer_point_estimates(ForecastPanel([], [], []), truth) == {}


def test_inference_beats_the_consensus(test_panel, truth):
    estimates = infer_point_estimates(test_panel.without_actuals(), truth, budget=ChainBudget(500, 50))
    actuals = test_panel.actuals
    inferred = np.sqrt(np.mean([(estimates[q] - actuals[q]) ** 2 for q in estimates]))
    consensus = np.sqrt(np.mean((test_panel.consensus() - test_panel.actual_values) ** 2))
    assert inferred < consensus


def test_chain_matches_enumerated_mixture():
    readings = [3.1, 2.6, 3.4, 2.9, 3.3, 2.2]
    instruments = [f"a{j}" for j in range(len(readings))]
    logits = np.random.default_rng(5).normal(0, 1, (len(readings), 2))
    # the negative branch is never visited, so its calibration must not matter
    params = _two_groups(instruments, logits, alpha1=[2.0, 0.6], beta1=[5.0, 0.4])
    lambda0 = 0.1

    probabilities = softmax(logits, axis=1)
    expected = 0.0
    for groups in itertools.product((0, 1), repeat=len(readings)):
        weight = np.prod(probabilities[np.arange(len(readings)), groups])
        expected += weight * conditional_posterior(list(zip(readings, groups)), params, 1, lambda0).mean

    chain = gibbs_run(_one_quantity(readings), params, lambda0, num_samples=5100, burn_in=100, seed=11)["q"]
    stderr = chain.samples.std(ddof=1) / np.sqrt(chain.n_samples)
    assert abs(chain.point_estimate - expected) < 3 * stderr


def test_conditional_group_updates_follow_the_readings():
    rng = np.random.default_rng(6)
    instruments = [f"a{j}" for j in range(4)]
    quantities = [f"q{i}" for i in range(30)]
    truths = rng.uniform(1, 5, 30)
    entries = [(q, a, x + rng.normal(0, 0.1)) for q, x in zip(quantities, truths) for a in instruments]
    panel = ForecastPanel(*zip(*entries))
    params = _two_groups(instruments, np.zeros((4, 2)), alpha1=[0.5, 0.5], beta1=[-2.0, -2.0], sigma=(0.1, 0.1))

    def rmse(z_update):
        chains = gibbs_run(panel, params, num_samples=400, burn_in=50, seed=2, z_update=z_update)
        return np.sqrt(np.mean([(chains[q].point_estimate - x) ** 2 for q, x in zip(quantities, truths)]))

    assert rmse("conditional") < 0.1
    assert rmse("prior") > 0.5


def test_closed_form_means_at_a_single_group():
    panel = _one_quantity([1.0, 2.0, 4.5])
    estimates = posterior_mean_estimates(panel, _identity(["a0", "a1", "a2"]), lambda0=0.2)
    expected = estimate_bayesian(MeasurementBatch.from_groups([1.0, 2.0, 4.5], []), 1.0, 0.0, 0.2)
    assert estimates["q"] == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("kwargs", [{"num_samples": 10, "burn_in": 10}, {"credible_level": 1.0}, {"seed": -1},
                                    {"z_update": "posterior"}])
def test_chain_settings_are_checked(kwargs):
    with pytest.raises(InvalidInputError):
        gibbs_run(_one_quantity([1.0]), _identity(["a0"]), **kwargs)

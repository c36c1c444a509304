import numpy as np
import pytest

from concord import (DegenerateInputError, GroundTruthParams, InvalidInputError, SingularCalibrationError,
                     SyntheticConfig, analytic_moments, derive_seed, derive_stream_seed, dominance_predicate,
                     dominance_threshold,
                     generate_realization, make_rng, monte_carlo_moments, run_sweep)
from concord._estimators import EstimatorKind


def test_stream_seeds_are_deterministic_and_distinct():
    assert derive_stream_seed(42, 3, 10) == derive_stream_seed(42, 3, 10)
    assert derive_stream_seed(42, 0, 10) != derive_stream_seed(42, 1, 10)
    assert derive_stream_seed(42, 0, 10) != derive_stream_seed(42, 0, 25)
    assert derive_seed(42) != derive_seed(43)
    assert 0 <= derive_seed(2 ** 64 - 1, -1) < 2 ** 64


def test_seeds_are_checked():
    with pytest.raises(InvalidInputError):
        make_rng(-1)
    with pytest.raises(TypeError):
        derive_seed(1, 2.5)


@pytest.mark.parametrize("changes", [{"delta": 1.5}, {"sigma2": -1.0}, {"instrument_counts": [1, 10]},
                                     {"instrument_counts": []}, {"num_quantities": 0}, {"lambda0": 0.0}])
def test_config_validation(changes):
    with pytest.raises(InvalidInputError):
        SyntheticConfig(**changes)


def test_config_round_trip():
    config = SyntheticConfig(delta=0.25, instrument_counts=[5, 7], seed=9)
    assert SyntheticConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()


def test_zero_noise_identity_readings():
    config = SyntheticConfig(delta=1.0, alpha=1.0, beta=0.0, sigma2=0.0, sigma_star2=0.0, num_quantities=20)
    realization = generate_realization(config, 4, 7)
    np.testing.assert_array_equal(realization.readings, np.repeat(realization.truths[:, None], 4, axis=1))
    assert np.all((realization.truths >= -5) & (realization.truths < 5))


def test_no_bad_labels_at_delta_zero():
    realization = generate_realization(SyntheticConfig(delta=0.0, num_quantities=50), 10, 1)
    assert not realization.labels.any()


def test_label_fraction_concentrates():
    config = SyntheticConfig(delta=0.5, num_quantities=10_000)
    labels = generate_realization(config, 100, derive_stream_seed(0, 0, 100)).labels
    stderr = np.sqrt(0.25 / labels.size)
    assert abs(labels.mean() - 0.5) < 3 * stderr


@pytest.mark.parametrize("delta", [0.25, 0.5, 0.75])
def test_label_fraction_of_every_realization_stays_near_delta(delta):
    config = SyntheticConfig(delta=delta, num_quantities=2000)
    bound = 4 * np.sqrt(delta * (1 - delta) / (2000 * 50))
    for index in range(20):
        labels = generate_realization(config, 50, derive_stream_seed(7, index, 50)).labels
        assert abs(labels.mean() - delta) < bound, index


def test_realization_is_reproducible():
    config = SyntheticConfig(num_quantities=30)
    a = generate_realization(config, 5, 11)
    b = generate_realization(config, 5, 11)
    np.testing.assert_array_equal(a.readings, b.readings)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_realization_to_panel():
    realization = generate_realization(SyntheticConfig(num_quantities=3), 2, 0)
    panel = realization.to_panel()
    assert panel.n_entries == 6
    assert panel.instruments == ["a0", "a1"]
    assert panel.readings_for("q1") == {"a0": realization.readings[1, 0], "a1": realization.readings[1, 1]}
    assert panel.actuals["q2"] == realization.truths[2]


def test_zero_noise_sweep_has_no_error():
    config = SyntheticConfig(delta=0.5, alpha=1.0, beta=0.0, sigma2=0.0, sigma_star2=0.0, num_quantities=50,
                             instrument_counts=[10], num_realizations=3)
    result = run_sweep(config)
    for kind in ("NE", "GE", "CE"):
        assert result.get(10, kind).mean_rmse == pytest.approx(0.0, abs=1e-12)
    # the weak prior shrinks by lambda0 / (A + lambda0)
    assert result.get(10, "BE").mean_rmse < 1e-4


def test_sweep_frame_layout():
    config = SyntheticConfig(num_quantities=20, instrument_counts=[4, 6], num_realizations=4)
    result = run_sweep(config, ["NE", "BE"])
    frame = result.to_frame()
    assert list(frame.columns) == ["instrument_count", "estimator", "mean_rmse", "stderr"]
    assert list(frame["estimator"]) == ["NE", "BE", "NE", "BE"]
    assert (frame["mean_rmse"] >= 0).all()
    assert list(result.to_frame(full=True).columns)[-2:] == ["realization_rmse", "excluded"]


def test_sweep_pools_squared_errors_over_realizations():
    config = SyntheticConfig(num_quantities=5, instrument_counts=[3], num_realizations=50, seed=4)
    squared, count = 0.0, 0
    for index in range(config.num_realizations):
        realization = generate_realization(config, 3, derive_stream_seed(config.seed, index, 3))
        squared += float(((realization.readings.mean(axis=1) - realization.truths) ** 2).sum())
        count += realization.truths.size

    row = run_sweep(config, ["NE"]).get(3, "NE")
    assert row.mean_rmse == pytest.approx(np.sqrt(squared / count), rel=1e-12)
    # with five quantities per realization the two averages differ noticeably
    assert row.realization_rmse < row.mean_rmse
    assert 0 < row.stderr < 0.2 * row.mean_rmse


def test_sweep_is_bit_reproducible_across_workers():
    config = SyntheticConfig(num_quantities=40, instrument_counts=[5], num_realizations=6, seed=5)
    serial = run_sweep(config, n_jobs=1).to_frame(full=True)
    parallel = run_sweep(config, n_jobs=2).to_frame(full=True)
    assert serial.equals(parallel)


def test_sweep_excludes_quantities_without_good_readings(caplog):
    config = SyntheticConfig(delta=0.9, num_quantities=200, instrument_counts=[2], num_realizations=2)
    result = run_sweep(config, ["CE"])
    row = result.get(2, "CE")
    assert row.excluded > 0
    assert "excluded" in caplog.text


def test_sweep_with_only_bad_readings():
    config = SyntheticConfig(delta=1.0, num_quantities=5, instrument_counts=[2], num_realizations=1)
    with pytest.raises(DegenerateInputError):
        run_sweep(config, ["CE"])


def test_sweep_rejects_greedy_at_zero_slope():
    with pytest.raises(SingularCalibrationError):
        run_sweep(SyntheticConfig(alpha=0.0, num_realizations=1), ["GE"])


def test_monte_carlo_moments_are_paired():
    params = GroundTruthParams(mu=0.5, alpha=0.8, beta=-0.2, sigma2=1.0, sigma_star2=1.5, m=4, n=6)
    moments = monte_carlo_moments(params, n_replications=1000, seed=1)
    assert set(moments) == set(EstimatorKind)
    again = monte_carlo_moments(params, n_replications=1000, seed=1)
    np.testing.assert_array_equal(moments[EstimatorKind.BE].errors, again[EstimatorKind.BE].errors)


@pytest.mark.slow
@pytest.mark.parametrize("mu", [-2.0, 1.0, 3.0])
def test_bias_matches_closed_forms(mu):
    params = GroundTruthParams(mu=mu, alpha=0.8, beta=-0.2, sigma2=1.0, sigma_star2=1.5, m=50, n=50, lambda0=0.5)
    moments = monte_carlo_moments(params, n_replications=100_000, seed=2)
    for kind, mc in moments.items():
        expected = analytic_moments(kind, params).bias
        assert abs(mc.bias - expected) < 3 * mc.bias_stderr, kind


VARIANCE_SETTINGS = [
    (1.0, 0.8, -0.2, 1.0, 1.5, 50, 50),
    (-3.0, 1.2, 0.2, 1.0, 1.5, 10, 40),
    (2.0, 2.0, 1.0, 0.5, 3.0, 30, 5),
    (0.0, 0.5, 0.0, 2.0, 1.0, 8, 8),
    (4.0, 1.5, -1.0, 1.0, 1.0, 1, 20),
    (-1.0, 0.9, 0.3, 1.0, 4.0, 25, 75),
    (1.5, 3.0, 0.0, 1.0, 2.0, 12, 3),
    (0.5, 1.1, -0.5, 0.1, 0.2, 100, 100),
]


@pytest.mark.slow
@pytest.mark.parametrize("mu, alpha, beta, sigma2, sigma_star2, m, n", VARIANCE_SETTINGS)
def test_variances_match_closed_forms(mu, alpha, beta, sigma2, sigma_star2, m, n):
    params = GroundTruthParams(mu, alpha, beta, sigma2, sigma_star2, m, n)
    for kind, mc in monte_carlo_moments(params, n_replications=100_000, seed=4).items():
        expected = analytic_moments(kind, params).variance
        assert mc.variance == pytest.approx(expected, rel=0.05), kind


def _dominance_grid(pair, alpha, m, n):
    threshold = dominance_threshold(pair, m, n, alpha)
    return [threshold * 0.9, threshold * 1.1]


@pytest.mark.slow
@pytest.mark.parametrize("pair, first, second", [("GE_vs_CE", "GE", "CE"), ("BE_vs_CE", "BE", "CE")])
@pytest.mark.parametrize("m, n, alpha", [(20, 20, 1.0), (10, 30, 0.7), (40, 10, 1.5)])
def test_variance_ratio_dominance_boundaries(pair, first, second, m, n, alpha):
    for ratio in _dominance_grid(pair, alpha, m, n):
        params = GroundTruthParams(mu=0.0, alpha=alpha, beta=0.0, sigma2=1.0, sigma_star2=ratio, m=m, n=n)
        moments = monte_carlo_moments(params, [first, second], n_replications=100_000, seed=6)
        empirical = moments[EstimatorKind(first)].mse <= moments[EstimatorKind(second)].mse
        assert empirical == dominance_predicate(pair, m, n, alpha, ratio), ratio


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [1.95, 2.5])
def test_bayesian_beats_greedy_for_steep_miscalibration(alpha):
    params = GroundTruthParams(mu=1.0, alpha=alpha, beta=0.0, sigma2=1.0, sigma_star2=1.5, m=20, n=20)
    moments = monte_carlo_moments(params, ["GE", "BE"], n_replications=100_000, seed=8)
    difference = moments[EstimatorKind.BE].errors ** 2 - moments[EstimatorKind.GE].errors ** 2
    assert difference.mean() <= 2 * difference.std(ddof=1) / np.sqrt(difference.size)


@pytest.mark.slow
@pytest.mark.parametrize("delta", [0.25, 0.5, 0.75])
def test_underestimating_regime_ordering(delta):
    config = SyntheticConfig(delta=delta, alpha=0.8, beta=-0.2, num_realizations=200, seed=1)
    result = run_sweep(config, n_jobs=-1)
    for count in (50, 100, 200):
        be, ge, ce, ne = (result.get(count, k) for k in ("BE", "GE", "CE", "NE"))
        assert be.mean_rmse + 2 * be.stderr < ce.mean_rmse
        assert ce.mean_rmse + 2 * ce.stderr < ne.mean_rmse
        assert be.mean_rmse + 2 * be.stderr < ge.mean_rmse


@pytest.mark.slow
@pytest.mark.parametrize("delta", [0.25, 0.5, 0.75])
def test_overestimating_regime_ordering(delta):
    config = SyntheticConfig(delta=delta, alpha=1.2, beta=0.2, num_realizations=200, seed=1)
    result = run_sweep(config, n_jobs=-1)
    for count in (50, 100, 200):
        ce, ne = result.get(count, "CE"), result.get(count, "NE")
        for kind in ("GE", "BE"):
            row = result.get(count, kind)
            assert row.mean_rmse + 2 * row.stderr < ce.mean_rmse
            assert row.mean_rmse + 2 * row.stderr < ne.mean_rmse


@pytest.mark.parametrize("alpha, beta", [(0.8, -0.2), (1.2, 0.2)])
def test_naive_error_plateaus_at_its_bias(alpha, beta):
    config = SyntheticConfig(delta=0.75, alpha=alpha, beta=beta, instrument_counts=[200], num_realizations=5, seed=3)
    result = run_sweep(config, ["NE", "BE"])
    assert result.get(200, "NE").mean_rmse > 2 * result.get(200, "BE").mean_rmse


@pytest.mark.slow
def test_rmse_does_not_grow_with_more_instruments():
    config = SyntheticConfig(delta=0.5, alpha=0.8, beta=-0.2, num_realizations=100, seed=2)
    result = run_sweep(config, ["CE", "GE", "BE"], n_jobs=-1)
    counts = list(config.instrument_counts)
    for kind in ("CE", "GE", "BE"):
        for fewer, more in zip(counts, counts[1:]):
            a, b = result.get(fewer, kind), result.get(more, kind)
            assert b.mean_rmse <= a.mean_rmse + 2 * np.hypot(a.stderr, b.stderr), (kind, more)

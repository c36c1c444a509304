import numpy as np
import pytest

from concord import InvalidInputError, UndefinedMetricError, bootstrap_report, score
from concord._metrics import REPORT_COLUMNS


def _pairs(n, seed, noise=1.0):
    rng = np.random.default_rng(seed)
    actuals = {f"q{i}": float(x) for i, x in enumerate(rng.normal(0, 3, n))}
    predictions = {q: x + noise * float(rng.standard_normal()) for q, x in actuals.items()}
    return predictions, actuals


def test_perfect_predictions():
    actuals = {"a": 1.0, "b": -2.0, "c": 0.5}
    assert score(actuals, actuals) == {"micro": {"rmse": 0.0, "mae": 0.0, "r2": 1.0}}


def test_mean_predictor_has_zero_r2():
    actuals = {"a": 1.0, "b": 2.0, "c": 6.0}
    assert score({q: 3.0 for q in actuals}, actuals)["micro"]["r2"] == pytest.approx(0.0, abs=1e-15)


def test_small_example():
    micro = score({"a": 1.0, "b": 2.0}, {"a": 3.0, "b": 2.0})["micro"]
    assert micro["rmse"] == pytest.approx(np.sqrt(2))
    assert micro["mae"] == pytest.approx(1.0)


def test_macro_is_the_mean_over_groups():
    predictions = {"a": 1.0, "b": 1.0, "c": 4.0}
    actuals = {"a": 0.0, "b": 2.0, "c": 1.0}
    result = score(predictions, actuals, groups={"a": "x", "b": "x", "c": "y"})
    assert result["macro"]["rmse"] == pytest.approx((1.0 + 3.0) / 2)
    assert result["macro"]["mae"] == pytest.approx((1.0 + 3.0) / 2)
    assert result["micro"]["mae"] == pytest.approx(5.0 / 3)
    assert "r2" not in result["macro"]


def test_rmse_bounds_mae():
    micro = score(*_pairs(200, seed=1))["micro"]
    assert micro["rmse"] >= micro["mae"] >= 0


def test_order_does_not_matter():
    predictions, actuals = _pairs(50, seed=2)
    shuffled = dict(reversed(list(predictions.items())))
    assert score(shuffled, actuals) == score(predictions, actuals)


def test_score_errors():
    with pytest.raises(InvalidInputError):
        score({"a": 1.0}, {"b": 1.0})
    with pytest.raises(InvalidInputError):
        score({}, {})
    with pytest.raises(UndefinedMetricError):
        score({"a": 1.0, "b": 2.0}, {"a": 5.0, "b": 5.0})
    with pytest.raises(InvalidInputError):
        score({"a": 1.0, "b": 2.0}, {"a": 0.0, "b": 5.0}, groups={"a": "x"})


def test_bootstrap_of_perfect_predictions():
    actuals = {f"q{i}": float(i) for i in range(30)}
    report = bootstrap_report(actuals, actuals, n_bootstrap=200)
    for metric in ("rmse", "mae"):
        interval = report.get(metric)
        assert (interval.point, interval.ci_low, interval.ci_high) == (0.0, 0.0, 0.0)
    assert report.get("r2").point == 1.0


def test_bootstrap_is_reproducible_and_keeps_the_point():
    predictions, actuals = _pairs(100, seed=3)
    groups = {q: "g1" if i % 3 else "g2" for i, q in enumerate(actuals)}
    first = bootstrap_report(predictions, actuals, groups, n_bootstrap=300, seed=7)
    second = bootstrap_report(predictions, actuals, groups, n_bootstrap=300, seed=7)
    assert first.to_dict() == second.to_dict()
    points = score(predictions, actuals, groups)
    for (metric, mode), interval in first.entries.items():
        assert interval.point == points[mode][metric]
        assert interval.ci_low <= interval.point <= interval.ci_high


def test_bootstrap_half_width_for_normal_errors():
    n = 1000
    predictions, actuals = _pairs(n, seed=4)
    interval = bootstrap_report(predictions, actuals, n_bootstrap=1000, seed=1).get("rmse")
    half_width = (interval.ci_high - interval.ci_low) / 2
    assert half_width == pytest.approx(1.96 / np.sqrt(2 * n), rel=0.3)


def test_wider_level_wider_interval():
    predictions, actuals = _pairs(80, seed=5)
    narrow = bootstrap_report(predictions, actuals, ci_level=0.8, seed=2).get("mae")
    wide = bootstrap_report(predictions, actuals, ci_level=0.99, seed=2).get("mae")
    assert wide.ci_low <= narrow.ci_low and narrow.ci_high <= wide.ci_high


@pytest.mark.parametrize("kwargs", [{"n_bootstrap": 99}, {"ci_level": 1.0}, {"ci_level": 0.0}])
def test_bootstrap_settings_are_checked(kwargs):
    predictions, actuals = _pairs(10, seed=6)
    with pytest.raises(InvalidInputError):
        bootstrap_report(predictions, actuals, **kwargs)


def test_report_layouts():
    predictions, actuals = _pairs(40, seed=8)
    report = bootstrap_report(predictions, actuals, n_bootstrap=100)
    row = report.to_row("NE")
    assert list(row) == REPORT_COLUMNS
    assert np.isnan(row["macro_rmse"])
    assert row["micro_r2"] == report.get("r2").point
    document = report.to_dict()
    assert set(document["micro"]) == {"rmse", "mae", "r2"}
    assert "macro" not in document
    assert document["n_quantities"] == 40

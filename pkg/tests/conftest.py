import numpy as np
import pytest

from concord import ForecastPanel, HyperParams, ground_truth_parameters, simulate_panel

NUM_INSTRUMENTS = 12


@pytest.fixture
def instruments():
    return [f"a{j}" for j in range(NUM_INSTRUMENTS)]


@pytest.fixture
def true_groups():
    return np.arange(NUM_INSTRUMENTS) % 2


@pytest.fixture
def truth(instruments, true_groups):
    """Two groups: calibrated, and underestimating with an offset."""
    return ground_truth_parameters(instruments, true_groups, alpha=[1.0, 0.7], beta=[0.0, -0.3], sigma=[0.5, 0.5])


@pytest.fixture
def train_panel(truth, true_groups):
    panel, _ = simulate_panel(truth, 80, seed=1, groups=true_groups, quantity_prefix="train_q")
    return panel


@pytest.fixture
def valid_panel(truth, true_groups):
    panel, _ = simulate_panel(truth, 30, seed=2, groups=true_groups, quantity_prefix="valid_q")
    return panel


@pytest.fixture
def test_panel(truth, true_groups):
    panel, _ = simulate_panel(truth, 40, seed=3, groups=true_groups, quantity_prefix="test_q")
    return panel


@pytest.fixture
def quick_hyper():
    return HyperParams(learning_rate=0.02, minibatch_size=10_000, max_epochs=40, patience=5, num_restarts=2,
                       prior_strength=1e2, validation_method="posterior_mean")


@pytest.fixture
def tiny_panel():
    return ForecastPanel(["q1", "q1", "q2", "q2", "q2"],
                         ["a", "b", "a", "b", "c"],
                         [1.0, 3.0, -2.0, -4.0, -3.0],
                         actuals={"q1": 2.5, "q2": -3.0})

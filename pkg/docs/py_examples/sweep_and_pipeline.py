from concord import (ChainBudget, HyperParams, SyntheticConfig, bootstrap_report, fit, ground_truth_parameters,
                     infer_point_estimates, run_sweep, simulate_panel)

# Closed-form estimators on the two-class synthetic world
sweep = run_sweep(SyntheticConfig(delta=0.5, alpha=0.8, beta=-0.2, num_realizations=20, seed=1))
print(sweep.to_frame())

# A latent-group world with twenty instruments in two groups
instruments = [f"a{i}" for i in range(20)]
groups = [i % 2 for i in range(20)]
truth = ground_truth_parameters(instruments, groups, alpha=[1.0, 0.7], beta=[0.0, -0.3], sigma=[0.5, 0.5])
train, _ = simulate_panel(truth, 200, seed=1, groups=groups, quantity_prefix="train_q")
valid, _ = simulate_panel(truth, 50, seed=2, groups=groups, quantity_prefix="valid_q")
test, _ = simulate_panel(truth, 100, seed=3, groups=groups, quantity_prefix="test_q")

hyper = HyperParams(learning_rate=0.03, max_epochs=150, num_restarts=2, prior_strength=100.0,
                    validation_method="posterior_mean")
params, report = fit(train, valid, 2, hyper)

estimates = infer_point_estimates(test.without_actuals(), params, 1e-4, ChainBudget(num_samples=500, burn_in=50))
print(bootstrap_report(estimates, test.actuals).to_row("LVBC"))

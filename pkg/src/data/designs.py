# Simulation design: regime schedules, GARCH parameters and published reference values

# piecewise constant schedules: breakpoints as fractions of T (rounded to the
# nearest integer) and the value of every regime; row T+1 stays in the last regime
schedules = {
    "b12": ((1.0 / 3.0, 2.0 / 3.0), (2.0, 0.0, 1.0)),
    "b34": ((0.5,), (0.5, 1.5)),
    "mu12": ((1.0 / 3.0, 2.0 / 3.0), (0.6, 1.5, 0.9)),
    "mu34": ((0.5,), (0.9, 1.1)),
    "rho_y": ((0.5,), (0.2, 0.4)),
    "r": ((0.5,), (0.9, 0.4)),
}

# stable parameter experiments
stable = {"beta": 1.0, "mu": 1.0, "rho_y_dynamic": 0.3}

# (alpha1, alpha2) of the GARCH(1,1) variances
garch_u = (0.2, 0.75)
garch_eta = (0.2, 0.75)
rho_eta = 0.5

# per-covariate draws, uniform on (low, high)
covariate_draws = {"rho": (0.0, 0.95), "alpha1": (0.0, 0.2), "alpha2": (0.6, 0.75)}

signals = 4
deterministic_share = 0.95
fit_targets = {"low": 0.30, "high": 0.50}

calibration = {"eta_paths": 10000, "reps": 200, "tolerance": 0.005, "max_iter": 60}

# N = 20, T = 100, averaged over the four experiments of each panel
published_selection = {
    ("ocmt", False): {"k_hat": 5.03, "tpr": 0.83, "fpr": 0.08},
    ("ocmt", True): {"k_hat": 4.04, "tpr": 0.73},
    ("lasso", False): {"k_hat": 6.82, "tpr": 0.84, "fpr": 0.17},
    ("lasso", True): {"k_hat": 7.28},
    ("alasso", False): {"k_hat": 5.15, "tpr": 0.73},
    ("boosting", False): {"k_hat": 4.59, "tpr": 0.77, "fpr": 0.08},
}

# OCMT, N = 20, T = 100, instability, light grid
published_msfe = {
    "est-weighted": 34.94,
    "both-weighted": 35.62,
    "none": 35.87,
    "oracle_stable_static_low": 25.46,
    "none_stable": 31.76,
}

"""Python interface to the surrovv verification toolkit."""

from ._surrovv import (
    BoundConstants,
    CalibrationSample,
    ConfigError,
    DimensionError,
    Error,
    MlpSurrogate,
    Disturbance,
    SmibConfig,
    __version__,
    benchmark_machine,
    calibrate_amplitude,
    coverage_experiment,
    eps_max,
    forward,
    grad_inputs,
    interval,
    nonconformity,
    novelty_score,
    perturbation_run,
    phi,
    run_config,
    split_quantile,
    surrogate_trajectory,
    theorem_bounds,
    traj_distance,
    ucb_quantile,
    xline_sweep,
)

__all__ = [
    "BoundConstants",
    "CalibrationSample",
    "ConfigError",
    "DimensionError",
    "Error",
    "MlpSurrogate",
    "Disturbance",
    "SmibConfig",
    "__version__",
    "benchmark_machine",
    "calibrate_amplitude",
    "coverage_experiment",
    "eps_max",
    "forward",
    "grad_inputs",
    "interval",
    "nonconformity",
    "novelty_score",
    "perturbation_run",
    "phi",
    "run_config",
    "split_quantile",
    "surrogate_trajectory",
    "theorem_bounds",
    "traj_distance",
    "ucb_quantile",
    "xline_sweep",
]

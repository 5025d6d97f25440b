from ._shiftbench import (
    ConfigError,
    IoError,
    NumericError,
    ShapeError,
    TrainingError,
    beta_qp,
    colorize,
    fingerprint,
    median_bank,
    mmd_linear,
    mmd_quadratic,
    report,
    run_experiment,
    svm_fit_predict,
    synth,
    synthetic_scene,
)

__all__ = [
    "ConfigError",
    "IoError",
    "NumericError",
    "ShapeError",
    "TrainingError",
    "beta_qp",
    "colorize",
    "fingerprint",
    "median_bank",
    "mmd_linear",
    "mmd_quadratic",
    "report",
    "run_experiment",
    "svm_fit_predict",
    "synth",
    "synthetic_scene",
]

"""Self-aware trajectory prediction: metrics, configuration, checkpoints and the CLI."""

from ._core import (
    DataError,
    DivergenceError,
    NumericError,
    SatpError,
    ShapeError,
    UsageError,
    aucoc,
    checkpoint_info,
    config_digest,
    cutoff_curve,
    default_config,
    default_grid,
    generate_csv,
    methods,
    normalize_config,
    run,
    sas,
)

__all__ = [
    "DataError",
    "DivergenceError",
    "NumericError",
    "SatpError",
    "ShapeError",
    "UsageError",
    "aucoc",
    "checkpoint_info",
    "config_digest",
    "cutoff_curve",
    "default_config",
    "default_grid",
    "generate_csv",
    "methods",
    "normalize_config",
    "run",
    "sas",
]

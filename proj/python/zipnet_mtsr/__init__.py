"""Mobile traffic super-resolution: baselines, metrics and the mtsr CLI from Python."""

from ._core import (
    ConfigError,
    DimensionError,
    MtsrError,
    aggregate,
    aggregate_mixture,
    bicubic_upsample,
    nrmse,
    psnr,
    run_cli,
    ssim,
    synth_series,
    uniform_upsample,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "MtsrError",
    "aggregate",
    "aggregate_mixture",
    "bicubic_upsample",
    "nrmse",
    "psnr",
    "run_cli",
    "ssim",
    "synth_series",
    "uniform_upsample",
]

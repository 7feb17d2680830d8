"""Statistical component separation with wavelet phase harmonics."""

from ._statsep import (
    FilterBank,
    StatsepError,
    evaluate,
    mc_loss,
    psnr,
    run_config,
    sample_noise,
    separate,
    spectral_minimum,
    sqrt_threshold,
    texture,
    wph,
    wph_layout,
)

__all__ = [
    "FilterBank",
    "StatsepError",
    "evaluate",
    "mc_loss",
    "psnr",
    "run_config",
    "sample_noise",
    "separate",
    "spectral_minimum",
    "sqrt_threshold",
    "texture",
    "wph",
    "wph_layout",
]

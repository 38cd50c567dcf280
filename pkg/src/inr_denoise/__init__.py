"""Zero-shot blind image denoising with an early-stopped SIREN."""

__version__ = "0.1.0"

from .denoise import RunConfig, RunResult, RunTrajectory, compare_decay, denoise, fit_trajectory
from .errors import (
    FormatError,
    ImageIOError,
    ImageTooSmall,
    InrDenoiseError,
    NonFiniteOutput,
    ShapeMismatch,
)
from .estimate import NoiseEstimate, criterion_threshold, estimate_sigma
from .image import Image, load_png, make_grid, mse, psnr, save_png
from .noise import NoiseSpec, add_gaussian, add_poisson_gaussian
from .siren import SirenConfig, SirenNetwork, forward, neuron_feature, render, width_for

__all__ = [
    "FormatError",
    "Image",
    "ImageIOError",
    "ImageTooSmall",
    "InrDenoiseError",
    "NoiseEstimate",
    "NoiseSpec",
    "NonFiniteOutput",
    "RunConfig",
    "RunResult",
    "RunTrajectory",
    "ShapeMismatch",
    "SirenConfig",
    "SirenNetwork",
    "add_gaussian",
    "add_poisson_gaussian",
    "compare_decay",
    "criterion_threshold",
    "denoise",
    "estimate_sigma",
    "fit_trajectory",
    "forward",
    "load_png",
    "make_grid",
    "mse",
    "neuron_feature",
    "psnr",
    "render",
    "save_png",
    "width_for",
]

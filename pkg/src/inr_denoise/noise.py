"""Synthetic Gaussian and Poisson-Gaussian contamination.

Noise parameters are expressed on the 0-255 intensity scale. The noise level
(and the Poisson scale) is drawn once per image, then every pixel receives
independent noise. Results are clamped back to [0, 1].
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from .image import Image

GAUSSIAN = "gaussian"
POISSON_GAUSSIAN = "poisson_gaussian"

#: Default draw ranges used for the low-noise synthetic setting.
DEFAULT_SIGMA_RANGE = (0.0, 25.0)
DEFAULT_ALPHA_RANGE = (50.0, 100.0)


@dataclass(frozen=True)
class NoiseSpec:
    """What noise to add and how to draw its parameters.

    Give either a fixed ``sigma255`` or a ``sigma_range`` to draw it
    uniformly from; likewise ``alpha`` or ``alpha_range`` for the Poisson
    scale (``poisson_gaussian`` only).
    """

    kind: str = GAUSSIAN
    sigma255: Optional[float] = None
    sigma_range: Optional[Tuple[float, float]] = None
    alpha: Optional[float] = None
    alpha_range: Optional[Tuple[float, float]] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (GAUSSIAN, POISSON_GAUSSIAN):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if (self.sigma255 is None) == (self.sigma_range is None):
            raise ValueError("give exactly one of sigma255 and sigma_range")
        if self.sigma255 is not None and self.sigma255 < 0:
            raise ValueError("sigma255 must be >= 0")
        _check_range(self.sigma_range, "sigma_range")
        if self.kind == POISSON_GAUSSIAN:
            if (self.alpha is None) == (self.alpha_range is None):
                raise ValueError("give exactly one of alpha and alpha_range")
            if self.alpha is not None and not self.alpha > 0:
                raise ValueError("alpha must be > 0")
            _check_range(self.alpha_range, "alpha_range")
            if self.alpha_range is not None and not self.alpha_range[0] > 0:
                raise ValueError("alpha_range must be strictly positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("sigma_range", "alpha_range"):
            if d[key] is not None:
                d[key] = list(d[key])
        return d


def _check_range(r, name):
    if r is None:
        return
    lo, hi = r
    if not 0 <= lo <= hi:
        raise ValueError(f"{name} must satisfy 0 <= lo <= hi, got {r}")


def _draw(rng, fixed, bounds) -> float:
    if fixed is not None:
        return float(fixed)
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def gaussian_raw(clean: np.ndarray, sigma255: float, rng: np.random.Generator) -> np.ndarray:
    """Unclamped ``clean + N(0, (sigma255/255)^2)`` in the unit domain."""
    clean = np.asarray(clean, dtype=np.float64)
    if sigma255 == 0:
        return clean.copy()
    return clean + rng.normal(0.0, sigma255 / 255.0, size=clean.shape)


def poisson_gaussian_raw(
    clean: np.ndarray, sigma255: float, alpha: float, rng: np.random.Generator
) -> np.ndarray:
    """Unclamped Poisson-Gaussian sample, returned on the 0-255 scale.

    ``alpha * Poisson(s / alpha) + N(0, sigma^2)`` with ``s = 255 * clean``.
    Mean is ``s`` and variance ``alpha * s + sigma^2``.
    """
    s = 255.0 * np.asarray(clean, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("Poisson-Gaussian noise needs non-negative intensities")
    shot = alpha * rng.poisson(s / alpha).astype(np.float64)
    if sigma255 == 0:
        return shot
    return shot + rng.normal(0.0, sigma255, size=s.shape)


def add_gaussian(img: Image, spec: NoiseSpec):
    """Returns ``(noisy, drawn_sigma255)``."""
    if spec.kind != GAUSSIAN:
        raise ValueError(f"spec.kind is {spec.kind!r}, expected {GAUSSIAN!r}")
    rng = np.random.default_rng(spec.seed)
    sigma = _draw(rng, spec.sigma255, spec.sigma_range)
    noisy = gaussian_raw(img.data, sigma, rng)
    return Image(np.clip(noisy, 0.0, 1.0), img.bit_depth), sigma


def add_poisson_gaussian(img: Image, spec: NoiseSpec):
    """Returns ``(noisy, drawn_sigma255, drawn_alpha)``."""
    if spec.kind != POISSON_GAUSSIAN:
        raise ValueError(f"spec.kind is {spec.kind!r}, expected {POISSON_GAUSSIAN!r}")
    rng = np.random.default_rng(spec.seed)
    sigma = _draw(rng, spec.sigma255, spec.sigma_range)
    alpha = _draw(rng, spec.alpha, spec.alpha_range)
    noisy255 = poisson_gaussian_raw(img.data, sigma, alpha, rng)
    return Image(np.clip(noisy255 / 255.0, 0.0, 1.0), img.bit_depth), sigma, alpha


def contaminate(img: Image, spec: NoiseSpec):
    """Dispatch on ``spec.kind``; returns ``(noisy, params)`` with drawn values."""
    if spec.kind == GAUSSIAN:
        noisy, sigma = add_gaussian(img, spec)
        return noisy, {"kind": spec.kind, "sigma255": sigma, "alpha": None, "seed": spec.seed}
    noisy, sigma, alpha = add_poisson_gaussian(img, spec)
    return noisy, {"kind": spec.kind, "sigma255": sigma, "alpha": alpha, "seed": spec.seed}

"""Blind noise-level estimation from the eigenvalues of patch covariances.

Natural-image patches occupy a low-dimensional subspace, so most eigenvalues
of the patch covariance matrix carry only noise and cluster around
``sigma^2``. Starting from the full spectrum, the largest eigenvalue is
dropped until the remaining set looks like pure noise, i.e. until its mean
splits it evenly (as many eigenvalues above the mean as below). The mean of
that set estimates ``sigma^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ImageTooSmall
from .image import Image

PATCH_SIZE = 7
MAX_PATCHES = 50_000
DENSE_STRIDE = 1
SPARSE_STRIDE = 3


@dataclass(frozen=True)
class NoiseEstimate:
    sigma: float
    patch_size: int = PATCH_SIZE
    iterations_used: int = 0

    @property
    def sigma255(self) -> float:
        return 255.0 * self.sigma


def extract_patches(channel: np.ndarray, patch_size: int = PATCH_SIZE) -> np.ndarray:
    """All overlapping ``patch_size^2`` patches of a 2-D array, one per row.

    Falls back to stride 3 in both directions when the dense patch count
    would exceed :data:`MAX_PATCHES`.
    """
    windows = sliding_window_view(channel, (patch_size, patch_size))
    stride = DENSE_STRIDE
    if windows.shape[0] * windows.shape[1] > MAX_PATCHES:
        stride = SPARSE_STRIDE
    return windows[::stride, ::stride].reshape(-1, patch_size * patch_size)


def patch_spectrum(channel: np.ndarray, patch_size: int = PATCH_SIZE) -> np.ndarray:
    """Ascending eigenvalues of the patch covariance matrix."""
    patches = extract_patches(channel, patch_size)
    centered = patches - patches.mean(axis=0)
    cov = centered.T @ centered / patches.shape[0]
    return np.linalg.eigvalsh(cov)


def noise_variance_from_spectrum(eigenvalues: np.ndarray):
    """Return ``(variance, iterations)`` from an eigenvalue spectrum.

    ``iterations`` counts how many candidate sets were examined.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=np.float64))
    ev = np.maximum(ev, 0.0)  # eigvalsh can return tiny negatives
    iterations = 0
    for keep in range(ev.size, 0, -1):
        iterations += 1
        kept = ev[:keep]
        tau = kept.mean()
        if np.count_nonzero(kept > tau) == np.count_nonzero(kept < tau):
            return float(tau), iterations
    return float(ev[0]), iterations


def estimate_sigma(img: Image, patch_size: int = PATCH_SIZE) -> NoiseEstimate:
    """Noise standard deviation in unit-intensity scale.

    Channels are estimated separately and combined by root mean square.
    """
    if img.height < patch_size or img.width < patch_size:
        raise ImageTooSmall(
            f"image {img.height}x{img.width} is smaller than the {patch_size}x{patch_size} patch"
        )
    variances, iterations = [], 0
    for c in range(img.channels):
        var, it = noise_variance_from_spectrum(patch_spectrum(img.data[:, :, c], patch_size))
        variances.append(var)
        iterations = max(iterations, it)
    sigma = float(np.sqrt(np.mean(variances)))
    return NoiseEstimate(sigma=sigma, patch_size=patch_size, iterations_used=iterations)


def criterion_threshold(est: NoiseEstimate) -> float:
    """Mean-squared-error level at which training should stop: ``sigma^2``."""
    return est.sigma**2

# How well does the patch-eigenvalue estimator recover the noise level?
#
# Run from the repository root:  python demos/noise_estimate.py  (a few seconds)

import numpy as np

from inr_denoise import estimate_sigma
from inr_denoise.image import Image
from inr_denoise.noise import gaussian_raw

size = 256
y, x = np.mgrid[0:size, 0:size] / size
texture = 0.35 + 0.15 * x + 0.15 * np.sin(2 * np.pi * 3 * y) * np.cos(2 * np.pi * 2 * x)

rng = np.random.default_rng(0)
print(" true   estimated   rel.err")
for sigma in (2, 5, 10, 15, 25, 40):
    noisy = Image(np.clip(gaussian_raw(texture, sigma, rng), 0, 1))
    est = estimate_sigma(noisy)
    print("%5.1f   %9.2f   %+6.1f%%" % (sigma, est.sigma255, 100 * (est.sigma255 / sigma - 1)))

# estimates scale with the image: halving intensities halves sigma
noisy = Image(np.clip(gaussian_raw(texture, 15, rng), 0, 1))
full = estimate_sigma(noisy).sigma
half = estimate_sigma(Image(noisy.data * 0.5)).sigma
print("scaling check: %.4f vs %.4f" % (half, 0.5 * full))

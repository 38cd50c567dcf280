# Fit the same network to a clean image, its noisy copy and pure noise.
#
# The clean target is matched fastest and pure noise slowest, which is the
# gap the stopping rule exploits. Run from the repository root:
#     python demos/spectral_bias.py
# Takes under a minute.

import numpy as np

from inr_denoise import RunConfig, fit_trajectory
from inr_denoise.image import Image
from inr_denoise.noise import NoiseSpec, add_gaussian

y, x = np.mgrid[0:48, 0:48] / 48.0
clean = Image(0.5 + 0.2 * np.sin(2 * np.pi * 2 * x) * np.cos(2 * np.pi * y))
noisy, _ = add_gaussian(clean, NoiseSpec(sigma255=25, seed=1))
pure = Image(np.random.default_rng(1).uniform(0, 1, clean.shape))

cfg = RunConfig(width=32, lr=1e-4, weight_decay=0.0, max_iters=1000, check_every=50, seed=0)
curves = {name: fit_trajectory(img, cfg) for name, img in
          [("clean", clean), ("noisy", noisy), ("pure noise", pure)]}

print("iter   " + "".join("%12s" % name for name in curves))
for k, it in enumerate(curves["clean"].iters):
    print("%5d  " % it + "".join("%12.5f" % c.train_mse[k] for c in curves.values()))

# same seed means same starting point for all three fits
assert len({tuple(c.weight_norms[0]) for c in curves.values()}) == 1

# Denoise a synthetic picture and watch the stopping rule fire.
#
# Run from the repository root:  python demos/fit_and_stop.py
# Takes a few seconds. Writes PNGs to demos/out/.

from pathlib import Path

import numpy as np

from inr_denoise import RunConfig, denoise, psnr, save_png
from inr_denoise.image import Image
from inr_denoise.noise import NoiseSpec, add_gaussian

out = Path(__file__).with_name("out")
out.mkdir(exist_ok=True)

# a 64x64 test card: smooth ramp, a disc and some stripes
y, x = np.mgrid[0:64, 0:64] / 64.0
card = 0.3 + 0.3 * x
card[(x - 0.6) ** 2 + (y - 0.4) ** 2 < 0.04] = 0.85
card[48:58, 8:56] = 0.5 + 0.25 * np.sign(np.sin(2 * np.pi * 6 * x[48:58, 8:56]))
clean = Image(card)

noisy, sigma = add_gaussian(clean, NoiseSpec(sigma255=25, seed=0))
print("noisy PSNR  %.2f dB" % psnr(noisy, clean))

# width 32 instead of the size rule's 16: a 64x64 image would otherwise get
# the minimum width and fit very slowly
result = denoise(noisy, RunConfig(width=32, lr=5e-4, seed=0), clean=clean)
print("estimated sigma  %.2f  (true 25)" % result.estimate.sigma255)
print("stopped at iteration %d (%s)" % (result.stop_iter, result.stop_reason))
print("denoised PSNR  %.2f dB" % psnr(result.denoised, clean))

# the trajectory shows train MSE falling towards the threshold
traj = result.trajectory
for k in range(0, len(traj), max(1, len(traj) // 10)):
    print("  it %5d  mse %.5f  threshold %.5f  psnr_clean %.2f"
          % (traj.iters[k], traj.train_mse[k], traj.threshold[k], traj.psnr["clean"][k]))

save_png(clean, out / "card_clean.png")
save_png(noisy, out / "card_noisy.png")
save_png(result.denoised, out / "card_denoised.png")
(out / "card.trajectory.csv").write_text(traj.to_csv())

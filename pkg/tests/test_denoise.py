import math

import numpy as np
import pytest

from inr_denoise.denoise import (
    CRITERION_MET,
    MAX_ITERS,
    RunConfig,
    RunTrajectory,
    compare_decay,
    denoise,
    fit_trajectory,
)
from inr_denoise.errors import ShapeMismatch
from inr_denoise.image import Image, psnr
from inr_denoise.noise import NoiseSpec, add_gaussian
from inr_denoise.siren import render

from .conftest import textured_image

SMALL = dict(hidden_layers=3, width=16, check_every=5)


@pytest.fixture(scope="module")
def small_pair():
    clean = Image(textured_image(24).data)
    noisy, _ = add_gaussian(clean, NoiseSpec(sigma255=25, seed=0))
    return clean, noisy


def assert_first_crossing(traj):
    k = len(traj) - 1
    assert traj.stopped[k] and not any(traj.stopped[:k])
    assert traj.train_mse[k] <= traj.threshold[k]
    assert all(m > t for m, t in zip(traj.train_mse[:k], traj.threshold[:k]))


class TestRunConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_iters": 0},
            {"check_every": 0},
            {"weight_decay": -1e-3},
            {"lr": 0.0},
            {"width": 0},
            {"width": "wide"},
            {"sigma_override": -0.1},
            {"batch_size": 0},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)

    def test_auto_width(self):
        assert RunConfig().resolve_width(512, 512) == 256
        assert RunConfig().resolve_width(128, 128) == 16
        assert RunConfig(width=40).resolve_width(512, 512) == 40


class TestStopping:
    def test_first_crossing(self, small_pair):
        clean, noisy = small_pair
        res = denoise(noisy, RunConfig(lr=1e-3, max_iters=400, sigma_override=25 / 255, **SMALL), clean=clean)
        assert res.stop_reason == CRITERION_MET
        assert res.stop_iter % 5 == 0 and res.stop_iter > 0
        assert_first_crossing(res.trajectory)
        assert res.manifest["output_iter"] == res.stop_iter
        assert res.manifest["warnings"] == []
        assert res.denoised.shape == noisy.shape
        assert res.denoised.data.min() >= 0 and res.denoised.data.max() <= 1

    def test_zero_sigma_runs_to_max(self, small_pair):
        _, noisy = small_pair
        res = denoise(noisy, RunConfig(lr=1e-3, max_iters=23, sigma_override=0.0, **SMALL))
        assert res.stop_reason == MAX_ITERS and res.stop_iter == 23
        assert res.trajectory.iters == [0, 5, 10, 15, 20, 23]
        assert not any(res.trajectory.stopped)
        assert res.manifest["output_iter"] == 23
        assert np.array_equal(res.denoised.data, render(res.network, 24, 24).data)
        assert res.manifest["warnings"]

    def test_huge_sigma_stops_at_zero(self, small_pair):
        _, noisy = small_pair
        res = denoise(noisy, RunConfig(max_iters=50, sigma_override=1.0, **SMALL))
        assert res.stop_iter == 0 and res.stop_reason == CRITERION_MET
        assert len(res.trajectory) == 1
        assert "iteration 0" in res.manifest["warnings"][0]

    def test_clean_never_changes_training(self, small_pair):
        clean, noisy = small_pair
        cfg = RunConfig(lr=1e-3, max_iters=60, sigma_override=0.0, **SMALL)
        a = denoise(noisy, cfg)
        b = denoise(noisy, cfg, clean=clean)
        assert a.trajectory.train_mse == b.trajectory.train_mse
        assert np.array_equal(a.denoised.data, b.denoised.data)
        assert "clean" in b.trajectory.psnr and "clean" not in a.trajectory.psnr

    def test_estimated_sigma_recorded(self, small_pair):
        _, noisy = small_pair
        res = denoise(noisy, RunConfig(max_iters=5, **SMALL))
        assert res.manifest["estimate"]["source"] == "estimated"
        assert res.manifest["threshold"] == pytest.approx(res.estimate.sigma**2)

    def test_shape_mismatch(self, small_pair):
        _, noisy = small_pair
        with pytest.raises(ShapeMismatch):
            denoise(noisy, RunConfig(max_iters=5, **SMALL), clean=Image(np.zeros((8, 8))))

    def test_deterministic(self, small_pair):
        _, noisy = small_pair
        cfg = RunConfig(lr=1e-3, max_iters=40, sigma_override=0.0, **SMALL)
        a, b = denoise(noisy, cfg), denoise(noisy, cfg)
        assert a.trajectory.to_csv() == b.trajectory.to_csv()
        assert np.array_equal(a.denoised.data, b.denoised.data)
        assert a.manifest == b.manifest

    def test_minibatch_mode(self, small_pair):
        _, noisy = small_pair
        cfg = RunConfig(lr=1e-3, max_iters=30, sigma_override=0.0, batch_size=64, **SMALL)
        a, b = denoise(noisy, cfg), denoise(noisy, cfg)
        assert a.trajectory.train_mse == b.trajectory.train_mse
        assert a.trajectory.train_mse[-1] < a.trajectory.train_mse[0]

    def test_rgb(self):
        rng = np.random.default_rng(0)
        img = Image(rng.uniform(0.2, 0.8, (12, 12, 3)))
        res = denoise(img, RunConfig(max_iters=10, sigma_override=0.0, **SMALL))
        assert res.denoised.shape == (12, 12, 3)
        assert res.network.config.out_dim == 3

    def test_improves_psnr(self, small_pair):
        clean, noisy = small_pair
        res = denoise(noisy, RunConfig(lr=1e-3, max_iters=400, sigma_override=25 / 255, **SMALL), clean=clean)
        assert psnr(res.denoised, clean) > psnr(noisy, clean)


class TestTrajectory:
    def test_fit_trajectory_columns(self, small_pair):
        clean, noisy = small_pair
        traj = fit_trajectory(noisy, RunConfig(lr=1e-3, max_iters=20, **SMALL), {"clean": clean, "noisy": noisy})
        assert traj.iters == [0, 5, 10, 15, 20]
        assert all(math.isnan(t) for t in traj.threshold)
        assert not any(traj.stopped)
        assert set(traj.psnr) == {"clean", "noisy"}
        assert len(traj.weight_norms[0]) == 4

    def test_mse_matches_noisy_psnr(self, small_pair):
        _, noisy = small_pair
        traj = fit_trajectory(noisy, RunConfig(max_iters=10, **SMALL), {"noisy": noisy})
        # the PSNR column uses the clamped render, so it can only be better than train MSE suggests
        for m, p in zip(traj.train_mse, traj.psnr["noisy"]):
            assert p >= -10 * math.log10(m) - 1e-9

    def test_self_reference_psnr_trends_up(self, small_pair):
        _, noisy = small_pair
        traj = fit_trajectory(noisy, RunConfig(lr=1e-3, max_iters=200, **SMALL), {"target": noisy})
        col = traj.column("target")
        q = len(col) // 4
        assert col[-q:].mean() > col[:q].mean()

    def test_reference_shape_checked(self, small_pair):
        _, noisy = small_pair
        with pytest.raises(ShapeMismatch):
            fit_trajectory(noisy, RunConfig(max_iters=5), {"x": Image(np.zeros((3, 3)))})

    def test_csv_roundtrip(self):
        t = RunTrajectory()
        t.append(0, 0.1, 0.01, False, {"clean": 20.5, "noisy": 18.25})
        t.append(10, 1 / 3, 0.01, True, {"clean": math.inf, "noisy": 19.0})
        text = t.to_csv()
        assert text.splitlines()[0] == "iter,train_mse,threshold,stopped,psnr_clean,psnr_noisy"
        back = RunTrajectory.from_csv(text)
        assert back.iters == t.iters and back.train_mse == t.train_mse
        assert back.stopped == [False, True] and back.psnr == t.psnr
        assert back.to_csv() == text

    def test_csv_nan_and_missing(self):
        t = RunTrajectory()
        t.append(0, 0.2, math.nan, False, {"noisy": 10.0})
        line = t.to_csv().splitlines()[1]
        assert line == "0,0.2,,false,,10.0"
        back = RunTrajectory.from_csv(t.to_csv())
        assert math.isnan(back.threshold[0]) and "clean" not in back.psnr


class TestCompareDecay:
    def test_decay_shrinks_last_layers(self, small_pair):
        clean, noisy = small_pair
        cfg = RunConfig(lr=1e-3, max_iters=60, weight_decay=0.5, sigma_override=0.0, **SMALL)
        cmp = compare_decay(noisy, cfg, clean=clean)
        assert cmp.common_iter == 60
        nd, n0 = cmp.norms_at_common["with_decay"], cmp.norms_at_common["without_decay"]
        assert nd[-1] < n0[-1] and nd[-2] < n0[-2]
        rep = cmp.report()
        assert rep["with_decay"]["weight_decay"] == 0.5
        assert rep["without_decay"]["weight_decay"] == 0.0
        assert "psnr_clean_at_stop" in rep["with_decay"]

    def test_zero_decay_arms_identical(self, small_pair):
        _, noisy = small_pair
        cfg = RunConfig(lr=1e-3, max_iters=20, weight_decay=0.0, sigma_override=0.0, **SMALL)
        cmp = compare_decay(noisy, cfg)
        assert cmp.norms_at_common["with_decay"] == cmp.norms_at_common["without_decay"]

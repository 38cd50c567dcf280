"""Zero-shot denoising by fitting a SIREN to the noisy image and stopping early.

Training minimizes the mean squared error between the network render and the
noisy image. Every ``check_every`` iterations the full-grid MSE is compared
with the squared noise estimate; the first time it drops to that level the
network has reproduced roughly everything except the noise, and training
stops. Weight decay on the last two layers slows down the fitting of
high-frequency content.

Clean references can be attached for instrumentation. They are only ever
used to compute PSNR columns and never influence training or stopping.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Union

import numpy as np

from . import _trig, optim, siren
from .errors import NonFiniteOutput, ShapeMismatch
from .estimate import NoiseEstimate, criterion_threshold, estimate_sigma
from .grad import Batch, loss_and_grad
from .image import Image, psnr_from_mse

logger = logging.getLogger(__name__)

CRITERION_MET = "criterion_met"
MAX_ITERS = "max_iters"

BASE_COLUMNS = ("iter", "train_mse", "threshold", "stopped")


@dataclass(frozen=True)
class RunConfig:
    hidden_layers: int = 6
    width: Union[int, str] = "auto"
    lr: float = 1e-4
    weight_decay: float = 0.001
    max_iters: int = 5000
    check_every: int = 10
    seed: int = 0
    sigma_override: Optional[float] = None
    omega0: float = 30.0
    omega_hidden: float = 30.0
    batch_size: Optional[int] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.width != "auto" and not (isinstance(self.width, (int, np.integer)) and self.width >= 1):
            raise ValueError(f"width must be a positive int or 'auto', got {self.width!r}")
        if self.sigma_override is not None and self.sigma_override < 0:
            raise ValueError("sigma_override must be >= 0")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def resolve_width(self, height: int, width: int) -> int:
        if self.width == "auto":
            return siren.width_for(height, width)
        return int(self.width)

    def siren_config(self, img: Image) -> siren.SirenConfig:
        return siren.SirenConfig(
            hidden_layers=self.hidden_layers,
            width=self.resolve_width(img.height, img.width),
            out_dim=img.channels,
            omega0=self.omega0,
            omega_hidden=self.omega_hidden,
        )


@dataclass
class RunTrajectory:
    """Checkpoint log: one row per evaluated iteration.

    ``psnr`` maps a reference label to its PSNR column; ``weight_norms``
    holds the per-layer Frobenius norms at every checkpoint.
    """

    iters: list = field(default_factory=list)
    train_mse: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    stopped: list = field(default_factory=list)
    psnr: dict = field(default_factory=dict)
    weight_norms: list = field(default_factory=list)

    def __len__(self):
        return len(self.iters)

    def append(self, it, mse, threshold, stopped=False, psnr=None, norms=None):
        self.iters.append(int(it))
        self.train_mse.append(float(mse))
        self.threshold.append(float(threshold))
        self.stopped.append(bool(stopped))
        for label, value in (psnr or {}).items():
            self.psnr.setdefault(label, []).append(float(value))
        self.weight_norms.append(list(norms) if norms is not None else None)

    def column(self, label: str) -> np.ndarray:
        return np.asarray(self.psnr[label])

    def index_of(self, it: int) -> int:
        return self.iters.index(it)

    def to_csv(self, labels=("clean", "noisy")) -> str:
        """CSV text with a ``psnr_<label>`` column per label (blank if unrecorded).

        Floats are written with ``repr`` so the file round-trips exactly.
        """
        labels = list(labels) + [l for l in self.psnr if l not in labels]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(BASE_COLUMNS) + [f"psnr_{l}" for l in labels])
        for k in range(len(self)):
            row = [
                self.iters[k],
                _fmt(self.train_mse[k]),
                _fmt(self.threshold[k]),
                "true" if self.stopped[k] else "false",
            ]
            row += [_fmt(self.psnr[l][k]) if l in self.psnr else "" for l in labels]
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunTrajectory":
        reader = csv.DictReader(io.StringIO(text))
        traj = cls()
        for row in reader:
            psnr = {
                key[len("psnr_"):]: float(val)
                for key, val in row.items()
                if key.startswith("psnr_") and val != ""
            }
            traj.append(
                int(row["iter"]),
                float(row["train_mse"]),
                float(row["threshold"]) if row["threshold"] else math.nan,
                row["stopped"] == "true",
                psnr,
            )
        return traj


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    return repr(float(x))


@dataclass
class RunResult:
    denoised: Image
    stop_iter: int
    stop_reason: str
    estimate: NoiseEstimate
    trajectory: RunTrajectory
    manifest: dict
    network: siren.SirenNetwork
    elapsed: float = 0.0


def _psnr_row(rendered: np.ndarray, references: dict) -> dict:
    row = {}
    for label, ref in references.items():
        diff = rendered - ref
        row[label] = psnr_from_mse(float(np.mean(diff * diff)))
    return row


def _train(
    target: Image,
    config: RunConfig,
    threshold: float,
    references: dict,
    stop_early: bool,
):
    """Shared training loop. Returns ``(trajectory, final_net, stop_iter, met)``."""
    net_cfg = config.siren_config(target)
    net = siren.init(net_cfg, config.seed)
    state = optim.new_state(net, lr=config.lr, weight_decay=config.weight_decay)
    batch = Batch.from_image(target)
    refs = {label: img.pixels() for label, img in references.items()}
    batch_rng = np.random.default_rng([config.seed, 1]) if config.batch_size else None
    traj = RunTrajectory()
    met = False
    it = 0
    for it in range(config.max_iters + 1):
        training = it < config.max_iters
        check = it % config.check_every == 0 or not training
        try:
            if training and batch_rng is None:
                _, grads, out = loss_and_grad(net, batch, return_output=True)
            elif check:
                out = siren.forward(net, batch.coords)
            if check:
                resid = out - batch.targets
                train_mse = float(np.mean(resid * resid))
                hit = stop_early and train_mse <= threshold
                traj.append(
                    it,
                    train_mse,
                    threshold,
                    stopped=hit,
                    psnr=_psnr_row(np.clip(out, 0.0, 1.0), refs),
                    norms=net.weight_norms(),
                )
                if hit:
                    met = True
                    break
            if training:
                if batch_rng is not None:
                    idx = batch_rng.choice(len(batch), size=min(config.batch_size, len(batch)), replace=False)
                    _, grads = loss_and_grad(net, Batch(batch.coords[idx], batch.targets[idx]))
                net, state = optim.step(net, grads, state)
        except NonFiniteOutput as exc:
            raise NonFiniteOutput(
                f"training diverged at iteration {it}: {exc} (try a smaller lr or omega0)",
                iteration=it,
            ) from exc
    return traj, net, it, met


def _manifest(config: RunConfig, target: Image, net_cfg: siren.SirenConfig) -> dict:
    return {
        "config": asdict(config),
        "image": {"height": target.height, "width": target.width, "channels": target.channels},
        "network": asdict(net_cfg),
        "trig_backend": _trig.BACKEND,
    }


def denoise(noisy: Image, config: RunConfig = RunConfig(), clean: Optional[Image] = None) -> RunResult:
    """Denoise a single image with no external data.

    Parameters
    ----------
    noisy : Image
    config : RunConfig
    clean : Image, optional
        Ground truth for the ``psnr_clean`` trajectory column only.

    Returns
    -------
    RunResult
        ``denoised`` is the render at the first checkpoint whose MSE reaches
        the noise level. If that never happens within ``max_iters`` the render
        after the last iteration is returned and ``stop_reason`` says so.
    """
    t0 = time.perf_counter()
    if config.sigma_override is not None:
        est = NoiseEstimate(sigma=float(config.sigma_override), iterations_used=0)
        sigma_source = "override"
    else:
        est = estimate_sigma(noisy)
        sigma_source = "estimated"
    threshold = criterion_threshold(est)
    references = {"noisy": noisy}
    if clean is not None:
        if clean.shape != noisy.shape:
            raise ShapeMismatch(f"clean reference shape {clean.shape} != noisy shape {noisy.shape}")
        references = {"clean": clean, "noisy": noisy}

    traj, out_net, stop_iter, met = _train(noisy, config, threshold, references, stop_early=True)
    denoised = siren.render(out_net, noisy.height, noisy.width)

    manifest = _manifest(config, noisy, out_net.config)
    manifest.update(
        {
            "estimate": {
                "source": sigma_source,
                "sigma": est.sigma,
                "sigma255": est.sigma255,
                "patch_size": est.patch_size,
                "iterations_used": est.iterations_used,
            },
            "threshold": threshold,
            "stop_iter": stop_iter,
            "stop_reason": CRITERION_MET if met else MAX_ITERS,
            "output_iter": stop_iter,
            "warnings": [],
        }
    )
    if met and stop_iter == 0:
        manifest["warnings"].append(
            "criterion met at iteration 0; the noise level is probably overestimated"
        )
    elif not met:
        manifest["warnings"].append(
            f"criterion not met within {config.max_iters} iterations; "
            "returning the final render"
        )
    for w in manifest["warnings"]:
        logger.warning(w)
    return RunResult(
        denoised=denoised,
        stop_iter=stop_iter,
        stop_reason=manifest["stop_reason"],
        estimate=est,
        trajectory=traj,
        manifest=manifest,
        network=out_net,
        elapsed=time.perf_counter() - t0,
    )


def fit_trajectory(target: Image, config: RunConfig, references=()) -> RunTrajectory:
    """Train on ``target`` for ``max_iters`` iterations without stopping.

    ``references`` is a mapping or a sequence of ``(label, Image)`` pairs;
    PSNR against each is logged at every checkpoint. The threshold column
    is NaN since no criterion is evaluated.
    """
    refs = dict(references)
    for label, img in refs.items():
        if img.shape != target.shape:
            raise ShapeMismatch(f"reference {label!r} has shape {img.shape}, target {target.shape}")
    traj, _, _, _ = _train(target, config, math.nan, refs, stop_early=False)
    return traj


@dataclass
class DecayComparison:
    """Paired runs with and without the selective decay.

    ``norms_at_common`` holds per-layer weight norms of both arms at
    ``common_iter``, the last checkpoint reached by both runs.
    """

    with_decay: RunResult
    without_decay: RunResult
    common_iter: int
    norms_at_common: dict

    def report(self) -> dict:
        def arm(res: RunResult):
            out = {
                "weight_decay": res.manifest["config"]["weight_decay"],
                "stop_iter": res.stop_iter,
                "stop_reason": res.stop_reason,
                "weight_norms_at_stop": res.network.weight_norms(),
            }
            if "clean" in res.trajectory.psnr:
                out["psnr_clean_at_stop"] = res.trajectory.psnr["clean"][-1]
            return out

        return {
            "with_decay": arm(self.with_decay),
            "without_decay": arm(self.without_decay),
            "common_iter": self.common_iter,
            "weight_norms_at_common_iter": self.norms_at_common,
        }


def compare_decay(noisy: Image, config: RunConfig, clean: Optional[Image] = None) -> DecayComparison:
    """Run :func:`denoise` with ``config.weight_decay`` and with zero decay, same seed."""
    with_decay = denoise(noisy, config, clean=clean)
    without = denoise(noisy, replace(config, weight_decay=0.0), clean=clean)
    common = sorted(set(with_decay.trajectory.iters) & set(without.trajectory.iters))[-1]
    norms = {
        "with_decay": with_decay.trajectory.weight_norms[with_decay.trajectory.index_of(common)],
        "without_decay": without.trajectory.weight_norms[without.trajectory.index_of(common)],
    }
    return DecayComparison(with_decay, without, common, norms)

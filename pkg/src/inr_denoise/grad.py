"""Hand-written reverse-mode gradients for the SIREN squared loss.

The loss is the per-sample mean of the squared error summed over output
channels::

    loss = (1/n) * sum_i || f(c_i) - y_i ||^2

Summing over all pixels instead (the plain least-squares objective)
multiplies loss and gradients by the constant ``n``, which leaves the
minimizers unchanged but keeps the learning rate independent of image size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _trig
from .errors import NonFiniteOutput, ShapeMismatch
from .image import Image, make_grid
from .siren import SirenNetwork, forward_trace


@dataclass(frozen=True)
class Batch:
    """Coordinates ``(n, 2)`` paired with targets ``(n, out_dim)``."""

    coords: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if targets.ndim == 1:
            targets = targets[:, None]
        if coords.ndim != 2 or coords.shape[0] != targets.shape[0]:
            raise ShapeMismatch(
                f"coords {coords.shape} and targets {targets.shape} do not pair up"
            )
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.coords.shape[0]

    @classmethod
    def from_image(cls, img: Image, indices=None) -> "Batch":
        """Full-grid batch, or the pixels at the given row-major ``indices``."""
        coords = make_grid(img.height, img.width)
        targets = img.pixels()
        if indices is not None:
            indices = np.asarray(indices)
            coords, targets = coords[indices], targets[indices]
        return cls(coords, targets)


@dataclass(frozen=True)
class GradientSet:
    """Per-layer ``(dL/dW, dL/db)`` pairs mirroring the network layout."""

    layers: tuple

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([gw.ravel(), gb.ravel()]) for gw, gb in self.layers])

    def max_abs(self) -> float:
        return float(max(max(np.abs(gw).max(), np.abs(gb).max()) for gw, gb in self.layers))


def _check_batch(net: SirenNetwork, batch: Batch):
    if len(batch) == 0:
        raise ValueError("empty batch")
    if batch.coords.shape[1] != net.config.in_dim:
        raise ShapeMismatch(f"coords have {batch.coords.shape[1]} columns, net expects {net.config.in_dim}")
    if batch.targets.shape[1] != net.config.out_dim:
        raise ShapeMismatch(f"targets have {batch.targets.shape[1]} channels, net outputs {net.config.out_dim}")


def loss_and_grad(net: SirenNetwork, batch: Batch, return_output: bool = False):
    """Mean squared loss and its exact gradient with respect to every parameter.

    Parameters
    ----------
    net : SirenNetwork
    batch : Batch
    return_output : bool
        Also return the raw network output, saving a second forward pass when
        the caller needs it.

    Returns
    -------
    loss : float
    grads : GradientSet
    output : ndarray, optional
    """
    _check_batch(net, batch)
    cfg = net.config
    out, inputs, phases = forward_trace(net, batch.coords)
    resid = out - batch.targets
    n = len(batch)
    loss = float(np.einsum("ij,ij->", resid, resid) / n)

    last = cfg.n_layers - 1
    grads = [None] * cfg.n_layers
    delta = resid * (2.0 / n)
    grads[last] = (delta.T @ inputs[last], delta.sum(axis=0))
    delta = delta @ net.layers[last][0]
    for i in range(last - 1, -1, -1):
        # d sin(omega z)/dz = omega cos(omega z); omega is applied to the
        # small per-layer results instead of the (n, width) array
        omega = cfg.omega(i)
        delta *= _trig.cos(phases[i])
        grads[i] = (omega * (delta.T @ inputs[i]), omega * delta.sum(axis=0))
        if i > 0:
            delta = delta @ (omega * net.layers[i][0])

    if not np.isfinite(loss) or not all(
        np.all(np.isfinite(gw)) and np.all(np.isfinite(gb)) for gw, gb in grads
    ):
        raise NonFiniteOutput("loss or gradient is not finite")
    result = GradientSet(tuple(grads))
    if return_output:
        return loss, result, out
    return loss, result


def mean_loss(net: SirenNetwork, batch: Batch) -> float:
    _check_batch(net, batch)
    out, _, _ = forward_trace(net, batch.coords)
    resid = out - batch.targets
    return float(np.einsum("ij,ij->", resid, resid) / len(batch))


def finite_diff_grad(net: SirenNetwork, batch: Batch, step: float = 1e-6) -> GradientSet:
    """Central-difference gradient, one scalar parameter at a time.

    Intended as an independent check of :func:`loss_and_grad` on small nets;
    cost is two forward passes per parameter.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    work = net.copy()
    grads = []
    for w, b in work.layers:
        pair = []
        for arr in (w, b):
            g = np.zeros_like(arr)
            flat, gflat = arr.reshape(-1), g.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                up = mean_loss(work, batch)
                flat[k] = orig - step
                down = mean_loss(work, batch)
                flat[k] = orig
                gflat[k] = (up - down) / (2.0 * step)
            pair.append(g)
        grads.append(tuple(pair))
    return GradientSet(tuple(grads))

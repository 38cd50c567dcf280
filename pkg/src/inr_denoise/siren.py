"""SIREN coordinate network: construction, evaluation and feature probes.

A network with ``hidden_layers`` sine layers maps a 2-D coordinate to
``out_dim`` intensities::

    u      = 2 c - 1
    h_1    = sin(omega0 * (W_0 u + b_0))
    h_k+1  = sin(omega_hidden * (W_k h_k + b_k))      k = 1 .. hidden_layers-1
    f(c)   = W_L h_L + b_L                              (no activation)

Parameters are plain float64 arrays held in a tuple of ``(weight, bias)``
pairs; weight matrices are ``(fan_out, fan_in)``.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from . import _trig
from .errors import NonFiniteOutput
from .image import Image, make_grid

MIN_WIDTH = 16
CHECKPOINT_FORMAT = "inr-denoise/siren"


@dataclass(frozen=True)
class SirenConfig:
    hidden_layers: int = 6
    width: int = 256
    in_dim: int = 2
    out_dim: int = 1
    omega0: float = 30.0
    omega_hidden: float = 30.0

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.in_dim < 1:
            raise ValueError("in_dim must be >= 1")
        if self.out_dim not in (1, 3):
            raise ValueError("out_dim must be 1 or 3")
        if not (self.omega0 > 0 and self.omega_hidden > 0):
            raise ValueError("frequency scales must be positive")

    @property
    def n_layers(self) -> int:
        """Number of linear layers (sine layers plus the output head)."""
        return self.hidden_layers + 1

    def layer_shapes(self):
        dims = [self.in_dim] + [self.width] * self.hidden_layers + [self.out_dim]
        return [(dims[i + 1], dims[i]) for i in range(self.n_layers)]

    def omega(self, layer: int) -> float:
        return self.omega0 if layer == 0 else self.omega_hidden


@dataclass(frozen=True)
class SirenNetwork:
    config: SirenConfig
    layers: tuple

    def __post_init__(self):
        layers = tuple(
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in self.layers
        )
        shapes = self.config.layer_shapes()
        if len(layers) != len(shapes):
            raise ValueError(f"expected {len(shapes)} layers, got {len(layers)}")
        for i, ((w, b), shape) in enumerate(zip(layers, shapes)):
            if w.shape != shape or b.shape != (shape[0],):
                raise ValueError(
                    f"layer {i}: expected weight {shape} and bias ({shape[0]},), "
                    f"got {w.shape} and {b.shape}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def weights(self):
        return [w for w, _ in self.layers]

    @property
    def biases(self):
        return [b for _, b in self.layers]

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) and np.all(np.isfinite(b)) for w, b in self.layers)

    def weight_norms(self) -> list:
        """Frobenius norm of every weight matrix, input layer first."""
        return [float(np.linalg.norm(w)) for w, _ in self.layers]

    def copy(self) -> "SirenNetwork":
        return SirenNetwork(self.config, tuple((w.copy(), b.copy()) for w, b in self.layers))


def width_for(height: int, width: int, base: int = 256) -> int:
    """Hidden width proportional to pixel count, ``base`` at 512x512.

    Rounds half up and never goes below :data:`MIN_WIDTH`.
    """
    if height < 1 or width < 1:
        raise ValueError("image dimensions must be positive")
    raw = base * (height * width) / (512 * 512)
    return max(MIN_WIDTH, int(np.floor(raw + 0.5)))


def init(config: SirenConfig, seed: int) -> SirenNetwork:
    """SIREN initialization with zero biases.

    The first layer is uniform on ``[-1/in_dim, 1/in_dim]``; every later layer
    (output head included) is uniform on ``+-sqrt(6/fan_in)/omega_hidden``.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fan_out, fan_in) in enumerate(config.layer_shapes()):
        if i == 0:
            bound = 1.0 / config.in_dim
        else:
            bound = np.sqrt(6.0 / fan_in) / config.omega_hidden
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return SirenNetwork(config, tuple(layers))


def _input_map(coords: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(coords, dtype=np.float64) - 1.0


def forward_trace(net: SirenNetwork, coords: np.ndarray):
    """Forward pass keeping what backpropagation needs.

    Returns
    -------
    out : ndarray, shape (n, out_dim)
    inputs : list of ndarray
        Input to each linear layer (``inputs[0]`` is the mapped coordinate).
    phases : list of ndarray
        ``omega * (W h + b)`` for every sine layer.
    """
    cfg = net.config
    h = _input_map(coords)
    inputs = [h]
    phases = []
    for i in range(cfg.hidden_layers):
        w, b = net.layers[i]
        omega = cfg.omega(i)
        # scale the small weight matrix rather than the (n, width) product
        z = h @ (omega * w).T
        z += omega * b
        phases.append(z)
        h = _trig.sin(z)
        inputs.append(h)
    w, b = net.layers[-1]
    out = h @ w.T
    out += b
    return out, inputs, phases


def forward(net: SirenNetwork, coords: np.ndarray) -> np.ndarray:
    """Evaluate the network at ``coords`` (``(n, 2)`` in [0, 1]^2), unclamped."""
    out, _, _ = forward_trace(net, coords)
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput("network output contains NaN or Inf")
    return out


def render(net: SirenNetwork, height: int, width: int) -> Image:
    """Evaluate on the full pixel grid, clamp to [0, 1] and reshape."""
    out = forward(net, make_grid(height, width))
    return Image.from_pixels(np.clip(out, 0.0, 1.0), height, width)


def activations(net: SirenNetwork, coords: np.ndarray, layer_index: int) -> np.ndarray:
    """Post-sine outputs of sine layer ``layer_index`` at ``coords``."""
    cfg = net.config
    if not 0 <= layer_index < cfg.hidden_layers:
        raise IndexError(f"layer_index {layer_index} outside [0, {cfg.hidden_layers})")
    h = _input_map(coords)
    for i in range(layer_index + 1):
        w, b = net.layers[i]
        h = _trig.sin(cfg.omega(i) * (h @ w.T + b))
    return h


@dataclass(frozen=True)
class FeatureMap:
    layer_index: int
    neuron_index: int
    values: Image


def neuron_feature(
    net: SirenNetwork, layer_index: int, neuron_index: int, height: int, width: int
) -> FeatureMap:
    """Activation map of one hidden neuron, min-max scaled to [0, 1].

    A constant activation maps to 0.5 everywhere.
    """
    if not 0 <= neuron_index < net.config.width:
        raise IndexError(f"neuron_index {neuron_index} outside [0, {net.config.width})")
    act = activations(net, make_grid(height, width), layer_index)[:, neuron_index]
    lo, hi = act.min(), act.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        values = np.full_like(act, 0.5)
    else:
        values = (act - lo) / (hi - lo)
    return FeatureMap(layer_index, neuron_index, Image(values.reshape(height, width)))


def _encode(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "data": base64.b64encode(data).decode("ascii")}


def _decode(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(obj["shape"]).astype(np.float64)


def to_json(net: SirenNetwork) -> str:
    """Checkpoint as JSON; arrays are base64 little-endian float64, row-major."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "config": asdict(net.config),
        "layers": [{"weight": _encode(w), "bias": _encode(b)} for w, b in net.layers],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> SirenNetwork:
    doc = json.loads(text)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a SIREN checkpoint (format={doc.get('format')!r})")
    config = SirenConfig(**doc["config"])
    layers = tuple((_decode(l["weight"]), _decode(l["bias"])) for l in doc["layers"])
    return SirenNetwork(config, layers)


def save_checkpoint(net: SirenNetwork, path) -> None:
    with open(os.fspath(path), "w") as fh:
        fh.write(to_json(net))


def load_checkpoint(path) -> SirenNetwork:
    with open(os.fspath(path)) as fh:
        return from_json(fh.read())

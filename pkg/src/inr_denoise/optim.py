"""Adam with decoupled weight decay restricted to chosen layers.

After the usual bias-corrected Adam update, weight matrices of the layers in
``decayed_layers`` are shrunk by ``(1 - lr * weight_decay)``. Biases and all
other layers are never decayed. By default the decayed layers are the output
head and the last sine layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteOutput, ShapeMismatch
from .grad import GradientSet
from .siren import SirenNetwork


@dataclass(frozen=True)
class AdamState:
    step_count: int
    m: tuple
    v: tuple
    lr: float = 1e-4
    weight_decay: float = 0.0
    decayed_layers: frozenset = field(default_factory=frozenset)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def last_two_layers(net: SirenNetwork) -> frozenset:
    last = net.config.n_layers - 1
    return frozenset({last - 1, last})


def new_state(net: SirenNetwork, lr: float = 1e-4, weight_decay: float = 0.0, decayed_layers=None) -> AdamState:
    if not lr > 0:
        raise ValueError("lr must be positive")
    if weight_decay < 0:
        raise ValueError("weight_decay must be non-negative")
    if decayed_layers is None:
        decayed_layers = last_two_layers(net)
    decayed_layers = frozenset(int(i) for i in decayed_layers)
    if not decayed_layers <= set(range(net.config.n_layers)):
        raise ValueError(f"decayed_layers {sorted(decayed_layers)} out of range")
    zeros = tuple((np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers)
    return AdamState(
        step_count=0,
        m=zeros,
        v=tuple((np.zeros_like(w), np.zeros_like(b)) for w, b in net.layers),
        lr=float(lr),
        weight_decay=float(weight_decay),
        decayed_layers=decayed_layers,
    )


def _adam(p, g, m, v, state, t):
    m = state.beta1 * m + (1.0 - state.beta1) * g
    v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    p = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return p, m, v


def step(net: SirenNetwork, grads: GradientSet, state: AdamState):
    """One optimizer update; returns new ``(network, state)`` without mutating inputs."""
    if len(grads) != len(net.layers):
        raise ShapeMismatch("gradient set does not match network depth")
    t = state.step_count + 1
    shrink = 1.0 - state.lr * state.weight_decay
    layers, ms, vs = [], [], []
    # overflow is reported below as NonFiniteOutput, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for i, ((w, b), (gw, gb), (mw, mb), (vw, vb)) in enumerate(
            zip(net.layers, grads, state.m, state.v)
        ):
            if gw.shape != w.shape or gb.shape != b.shape:
                raise ShapeMismatch(f"layer {i}: gradient shape does not match parameters")
            w, mw, vw = _adam(w, gw, mw, vw, state, t)
            b, mb, vb = _adam(b, gb, mb, vb, state, t)
            if i in state.decayed_layers and state.weight_decay > 0:
                w = w * shrink
            layers.append((w, b))
            ms.append((mw, mb))
            vs.append((vw, vb))
    new_net = SirenNetwork(net.config, tuple(layers))
    if not new_net.is_finite():
        raise NonFiniteOutput("parameter update produced NaN or Inf", iteration=t)
    return new_net, replace(state, step_count=t, m=tuple(ms), v=tuple(vs))

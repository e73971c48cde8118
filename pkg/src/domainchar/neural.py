"""Small dense network with hand-written reverse mode, plus Adam."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DenseNet:
    """Fully connected net: tanh on hidden layers, identity on the output.

    Parameters live in ``self.params`` as ``[W0, b0, W1, b1, ...]`` with
    ``W`` of shape (fan_in, fan_out), so a batch ``x`` of shape (N, fan_in)
    maps to ``x @ W + b``.
    """

    def __init__(self, sizes, rng: np.random.Generator | None = None,
                 zero_output: bool = False):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"bad layer sizes {sizes}")
        self.sizes = sizes
        self.params: list[np.ndarray] = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            if rng is None or (last and zero_output):
                W = np.zeros((fan_in, fan_out))
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.params += [W, np.zeros(fan_out)]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        out, _ = self.forward_cached(x)
        return out

    def forward_cached(self, x):
        """Forward pass that also returns the activations needed by ``backward``."""
        x = np.asarray(x, float)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[-1]} != {self.sizes[0]}")
        h = x
        acts = [h]
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < self.n_layers - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, g_out):
        """Reverse-mode pass.

        ``acts`` comes from ``forward_cached``; ``g_out`` is dL/d(output).
        Returns ``(param_grads, g_input)`` with grads summed over the batch.
        """
        g = np.asarray(g_out, float)
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                g = g * (1.0 - acts[i + 1] ** 2)
            h_in = acts[i]
            grads[2 * i] = h_in.reshape(-1, h_in.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            grads[2 * i + 1] = g.reshape(-1, g.shape[-1]).sum(axis=0)
            g = g @ self.params[2 * i].T
        return grads, g


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kwargs) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params], **kwargs)


def adam_step(params, grads, state: AdamState):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(state.m) != len(params):
        raise ValueError("params, grads and state do not line up")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state

"""Conditional neural spline flow over the predicted weather dims.

The coupling layers are stored in the *density* direction: layer 0 receives
model coordinates u and the last layer emits the base point z, so
``log q(u | x) = log N(z) + sum of layer log-dets``. Sampling runs the
layers backwards through the closed-form spline inverse.
"""

from __future__ import annotations

import numpy as np

from .neural import DenseNet
from .params import ParamSpace
from .spline import (MIN_BIN_HEIGHT, MIN_BIN_WIDTH, MIN_DERIVATIVE,
                     decode_spline_params, spline_forward, spline_forward_vjp,
                     spline_inverse)

LOG_2PI = float(np.log(2.0 * np.pi))


def coupling_masks(dim: int, num_layers: int) -> list[np.ndarray]:
    """Indices transformed by each layer.

    Layers come in complementary pairs; each pair rotates the half it
    starts from so every dim gets conditioned on every other one.
    """
    half = (dim + 1) // 2
    masks = []
    for layer in range(num_layers):
        start = layer // 2
        first = sorted((start + j) % dim for j in range(half))
        if layer % 2 == 0 or dim == 1:
            masks.append(np.array(first))
        else:
            masks.append(np.array(sorted(set(range(dim)) - set(first))))
    return masks


class ConditionalFlow:
    def __init__(self, space: ParamSpace, context_dim: int, num_layers: int = 6,
                 hidden=(64, 64), num_bins: int = 8, tail_bound: float = 3.0,
                 rng: np.random.Generator | None = None,
                 context_mean=None, context_scale=None):
        self.space = space
        self.dim = space.ndim
        self.context_dim = int(context_dim)
        self.num_layers = int(num_layers)
        self.hidden = tuple(int(h) for h in hidden)
        self.num_bins = int(num_bins)
        self.tail_bound = float(tail_bound)
        self.masks = coupling_masks(self.dim, self.num_layers)
        self.context_mean = (np.zeros(self.context_dim) if context_mean is None
                             else np.asarray(context_mean, float).copy())
        self.context_scale = (np.ones(self.context_dim) if context_scale is None
                              else np.asarray(context_scale, float).copy())
        self.conditioners = []
        for tr in self.masks:
            n_id = self.dim - len(tr) if self.dim > 1 else 0
            sizes = [n_id + self.context_dim, *self.hidden,
                     len(tr) * (3 * self.num_bins + 1)]
            self.conditioners.append(DenseNet(sizes, rng, zero_output=True))

    # -- parameters -------------------------------------------------------

    def parameters(self) -> list[np.ndarray]:
        return [p for net in self.conditioners for p in net.params]

    def get_params(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_params(self, values) -> None:
        for p, v in zip(self.parameters(), values):
            p[...] = v

    def hyperparameters(self) -> dict:
        return {"context_dim": self.context_dim, "num_layers": self.num_layers,
                "hidden": list(self.hidden), "num_bins": self.num_bins,
                "tail_bound": self.tail_bound, "min_bin_width": MIN_BIN_WIDTH,
                "min_bin_height": MIN_BIN_HEIGHT, "min_derivative": MIN_DERIVATIVE,
                "masks": [m.tolist() for m in self.masks]}

    # -- helpers ----------------------------------------------------------

    def _identity_index(self, tr):
        if self.dim == 1:
            return np.array([], dtype=int)
        return np.array(sorted(set(range(self.dim)) - set(tr.tolist())), dtype=int)

    def _context(self, context, n):
        c = np.asarray(context, float)
        if c.shape[-1] != self.context_dim:
            raise ValueError(f"context width {c.shape[-1]} != {self.context_dim}")
        c = np.broadcast_to(c.reshape(-1, self.context_dim) if c.ndim > 1 else c,
                            (n, self.context_dim))
        return (c - self.context_mean) / self.context_scale

    def _raw(self, layer, h, ctx, cached=False):
        tr = self.masks[layer]
        inp = np.concatenate([h[:, self._identity_index(tr)], ctx], axis=1)
        net = self.conditioners[layer]
        if cached:
            out, acts = net.forward_cached(inp)
        else:
            out, acts = net.forward(inp), None
        return out.reshape(len(h), len(tr), 3 * self.num_bins + 1), acts

    @staticmethod
    def base_log_prob(z):
        return -0.5 * np.sum(z ** 2, axis=-1) - 0.5 * z.shape[-1] * LOG_2PI

    # -- density direction -------------------------------------------------

    def to_base(self, u, context):
        """Map model coordinates to base points; returns ``(z, logdet)``."""
        h = np.array(np.atleast_2d(u), float)
        ctx = self._context(context, len(h))
        logdet = np.zeros(len(h))
        for layer, tr in enumerate(self.masks):
            raw, _ = self._raw(layer, h, ctx)
            s = decode_spline_params(raw, self.num_bins, self.tail_bound)
            y, ld = spline_forward(s, h[:, tr])
            h[:, tr] = y
            logdet += ld.sum(axis=1)
        return h, logdet

    def log_prob_model(self, u, context):
        z, logdet = self.to_base(u, context)
        return self.base_log_prob(z) + logdet

    def log_prob(self, theta, context):
        """log q(theta | context) in physical units."""
        theta = np.asarray(theta, float)
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(context)):
            raise ValueError("non-finite input to log_prob")
        single = theta.ndim == 1
        lp = self.log_prob_model(self.space.to_model(np.atleast_2d(theta)), context)
        lp = lp + self.space.log_jacobian
        return float(lp[0]) if single else lp

    # -- generative direction ---------------------------------------------

    def from_base(self, z, context):
        """Map base points to model coordinates; returns ``(u, logdet)``
        with logdet = log |du/dz|."""
        h = np.array(np.atleast_2d(z), float)
        ctx = self._context(context, len(h))
        logdet = np.zeros(len(h))
        for layer in reversed(range(self.num_layers)):
            tr = self.masks[layer]
            raw, _ = self._raw(layer, h, ctx)
            s = decode_spline_params(raw, self.num_bins, self.tail_bound)
            x, ld = spline_inverse(s, h[:, tr])
            h[:, tr] = x
            logdet += ld.sum(axis=1)
        return h, logdet

    def sample_and_log_prob(self, context, n: int, rng: np.random.Generator):
        """Draw ``n`` physical samples with their log-densities."""
        if n < 1:
            raise ValueError("n must be >= 1")
        z = rng.standard_normal((n, self.dim))
        return self.push(z, context)

    def push(self, z, context):
        """Deterministic part of sampling: base points to (theta, log q)."""
        u, logdet = self.from_base(z, context)
        lp = self.base_log_prob(np.atleast_2d(z)) - logdet + self.space.log_jacobian
        return self.space.from_model(u), lp

    def sample(self, context, n: int, rng: np.random.Generator):
        return self.sample_and_log_prob(context, n, rng)[0]

    def given(self, context) -> "Posterior":
        return Posterior(self, np.asarray(context, float))

    # -- training ---------------------------------------------------------

    def loss_and_grad(self, u, context):
        """Mean negative log-density in model coordinates and its gradient
        with respect to ``parameters()``."""
        h = np.array(u, float)
        n = len(h)
        ctx = self._context(context, n)
        caches = []
        logdet = np.zeros(n)
        for layer, tr in enumerate(self.masks):
            raw, acts = self._raw(layer, h, ctx, cached=True)
            y, ld, vjp = spline_forward_vjp(raw, h[:, tr], self.num_bins,
                                            self.tail_bound)
            caches.append((acts, vjp))
            h = h.copy()
            h[:, tr] = y
            logdet += ld.sum(axis=1)
        lp = self.base_log_prob(h) + logdet
        loss = -float(np.mean(lp))

        g_h = h / n
        g_ld = np.full((n, 1), -1.0 / n)
        grads_per_layer = [None] * self.num_layers
        for layer in reversed(range(self.num_layers)):
            tr = self.masks[layer]
            idx = self._identity_index(tr)
            acts, vjp = caches[layer]
            g_x, g_raw = vjp(g_h[:, tr], g_ld)
            net = self.conditioners[layer]
            pgrads, g_in = net.backward(acts, g_raw.reshape(n, -1))
            grads_per_layer[layer] = pgrads
            g_prev = g_h.copy()
            g_prev[:, tr] = g_x
            g_prev[:, idx] += g_in[:, :len(idx)]
            g_h = g_prev
        return loss, [g for pg in grads_per_layer for g in pg]


class Posterior:
    """A flow with its context bound: the unconditional interface used by
    the HDR, corner and domain code."""

    def __init__(self, flow: ConditionalFlow, context):
        self.flow = flow
        self.context = context
        self.space = flow.space

    def log_prob(self, theta):
        return self.flow.log_prob(theta, self.context)

    def sample_and_log_prob(self, n, rng):
        return self.flow.sample_and_log_prob(self.context, n, rng)

    def sample(self, n, rng):
        return self.flow.sample(self.context, n, rng)

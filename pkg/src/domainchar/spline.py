"""Monotone rational-quadratic splines with linear tails.

All functions are vectorised: a spline's knot arrays have shape (..., K+1)
and broadcast against the leading shape of the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_BIN_WIDTH = 1e-3
MIN_BIN_HEIGHT = 1e-3
MIN_DERIVATIVE = 1e-3


@dataclass(frozen=True)
class RqSpline:
    x_knots: np.ndarray
    y_knots: np.ndarray
    derivatives: np.ndarray
    tail_bound: float

    @property
    def num_bins(self) -> int:
        return self.x_knots.shape[-1] - 1

    def is_valid(self, min_derivative: float = 0.0) -> bool:
        B = self.tail_bound
        return bool(
            np.all(np.diff(self.x_knots, axis=-1) > 0)
            and np.all(np.diff(self.y_knots, axis=-1) > 0)
            and np.allclose(self.x_knots[..., [0, -1]], [-B, B], rtol=0, atol=1e-12)
            and np.allclose(self.y_knots[..., [0, -1]], [-B, B], rtol=0, atol=1e-12)
            and np.all(self.derivatives > 0)
            and np.all(self.derivatives >= min_derivative))


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _derivative_shift(min_derivative: float) -> float:
    # softplus(0 + shift) + min_derivative == 1, so raw zeros decode to slope 1
    return float(np.log(np.expm1(1.0 - min_derivative)))


def _knots(raw_bins, tail_bound, min_bin):
    K = raw_bins.shape[-1]
    sm = _softmax(raw_bins)
    widths = min_bin + (1.0 - min_bin * K) * sm
    cum = np.cumsum(widths, axis=-1)
    knots = np.concatenate([np.zeros(cum.shape[:-1] + (1,)), cum], axis=-1)
    knots = 2.0 * tail_bound * knots - tail_bound
    knots[..., 0] = -tail_bound
    knots[..., -1] = tail_bound
    return knots, sm


def decode_spline_params(raw, num_bins: int, tail_bound: float,
                         min_bin_width: float = MIN_BIN_WIDTH,
                         min_bin_height: float = MIN_BIN_HEIGHT,
                         min_derivative: float = MIN_DERIVATIVE) -> RqSpline:
    """Map unconstrained ``raw`` of shape (..., 3K+1) to a valid spline.

    Layout is ``[K width logits, K height logits, K+1 derivative pre-activations]``.
    """
    raw = np.asarray(raw, float)
    K = num_bins
    if raw.shape[-1] != 3 * K + 1:
        raise ValueError(f"expected {3 * K + 1} raw parameters, got {raw.shape[-1]}")
    xk, _ = _knots(raw[..., :K], tail_bound, min_bin_width)
    yk, _ = _knots(raw[..., K:2 * K], tail_bound, min_bin_height)
    d = min_derivative + _softplus(raw[..., 2 * K:] + _derivative_shift(min_derivative))
    return RqSpline(xk, yk, d, float(tail_bound))


def identity_spline(num_bins: int = 8, tail_bound: float = 3.0) -> RqSpline:
    return decode_spline_params(np.zeros(3 * num_bins + 1), num_bins, tail_bound)


def _gather(a, idx):
    return np.take_along_axis(a, idx[..., None], axis=-1)[..., 0]


def _locate(knots, v):
    # bin index in 0..K-1 using interior knots only
    return np.sum(v[..., None] >= knots[..., 1:-1], axis=-1)


def _broadcast(s: RqSpline, shape):
    full = tuple(np.broadcast_shapes(shape, s.x_knots.shape[:-1]))
    K1 = s.x_knots.shape[-1]
    return (np.broadcast_to(s.x_knots, full + (K1,)),
            np.broadcast_to(s.y_knots, full + (K1,)),
            np.broadcast_to(s.derivatives, full + (K1,)), full)


def _bin_values(xk_all, yk_all, d_all, k):
    xk = _gather(xk_all, k)
    wk = _gather(xk_all, k + 1) - xk
    yk = _gather(yk_all, k)
    hk = _gather(yk_all, k + 1) - yk
    dk = _gather(d_all, k)
    dk1 = _gather(d_all, k + 1)
    return xk, wk, yk, hk, dk, dk1


def spline_forward(s: RqSpline, x):
    """Return ``(y, log dy/dx)``; identity with zero log-det outside [-B, B]."""
    x = np.asarray(x, float)
    B = s.tail_bound
    xk_all, yk_all, d_all, shape = _broadcast(s, x.shape)
    x = np.broadcast_to(x, shape)
    inside = (x >= -B) & (x <= B)
    xc = np.clip(x, -B, B)
    k = _locate(xk_all, xc)
    xk, wk, yk, hk, dk, dk1 = _bin_values(xk_all, yk_all, d_all, k)
    xi = (xc - xk) / wk
    sk = hk / wk
    a = xi * (1.0 - xi)
    den = sk + (dk1 + dk - 2.0 * sk) * a
    y = yk + hk * (sk * xi ** 2 + dk * a) / den
    P = dk1 * xi ** 2 + 2.0 * sk * a + dk * (1.0 - xi) ** 2
    logdet = np.log(P) + 2.0 * np.log(sk) - 2.0 * np.log(den)
    return np.where(inside, y, x), np.where(inside, logdet, 0.0)


def spline_inverse(s: RqSpline, y):
    """Closed-form inverse; returns ``(x, log dx/dy)``."""
    y = np.asarray(y, float)
    B = s.tail_bound
    xk_all, yk_all, d_all, shape = _broadcast(s, y.shape)
    y = np.broadcast_to(y, shape)
    inside = (y >= -B) & (y <= B)
    yc = np.clip(y, -B, B)
    k = _locate(yk_all, yc)
    xk, wk, yk, hk, dk, dk1 = _bin_values(xk_all, yk_all, d_all, k)
    sk = hk / wk
    dy = yc - yk
    c1 = dk1 + dk - 2.0 * sk
    qa = hk * (sk - dk) + dy * c1
    qb = hk * dk - dy * c1
    qc = -sk * dy
    disc = np.maximum(qb ** 2 - 4.0 * qa * qc, 0.0)
    # numerically stable root of qa xi^2 + qb xi + qc = 0 lying in [0, 1]
    xi = (2.0 * qc) / (-qb - np.sqrt(disc))
    xi = np.clip(xi, 0.0, 1.0)
    x = xk + xi * wk
    a = xi * (1.0 - xi)
    den = sk + c1 * a
    P = dk1 * xi ** 2 + 2.0 * sk * a + dk * (1.0 - xi) ** 2
    logdet = -(np.log(P) + 2.0 * np.log(sk) - 2.0 * np.log(den))
    return np.where(inside, x, y), np.where(inside, logdet, 0.0)


def spline_forward_vjp(raw, x, num_bins: int, tail_bound: float,
                       min_bin_width: float = MIN_BIN_WIDTH,
                       min_bin_height: float = MIN_BIN_HEIGHT,
                       min_derivative: float = MIN_DERIVATIVE):
    """Decode ``raw`` and apply the spline to ``x`` (same leading shape).

    Returns ``(y, logdet, vjp)`` where ``vjp(g_y, g_logdet)`` gives
    ``(g_x, g_raw)``.
    """
    raw = np.asarray(raw, float)
    x = np.asarray(x, float)
    K, B = num_bins, float(tail_bound)
    uw, uh, ud = raw[..., :K], raw[..., K:2 * K], raw[..., 2 * K:]
    xk_all, sm_w = _knots(uw, B, min_bin_width)
    yk_all, sm_h = _knots(uh, B, min_bin_height)
    shift = _derivative_shift(min_derivative)
    d_all = min_derivative + _softplus(ud + shift)

    inside = (x >= -B) & (x <= B)
    xc = np.clip(x, -B, B)
    k = _locate(xk_all, xc)
    xk, wk, yk, hk, dk, dk1 = _bin_values(xk_all, yk_all, d_all, k)
    xi = (xc - xk) / wk
    sk = hk / wk
    a = xi * (1.0 - xi)
    c1 = dk1 + dk - 2.0 * sk
    den = sk + c1 * a
    num = hk * (sk * xi ** 2 + dk * a)
    y_in = yk + num / den
    P = dk1 * xi ** 2 + 2.0 * sk * a + dk * (1.0 - xi) ** 2
    ld_in = np.log(P) + 2.0 * np.log(sk) - 2.0 * np.log(den)
    y = np.where(inside, y_in, x)
    logdet = np.where(inside, ld_in, 0.0)

    def vjp(g_y, g_ld):
        g_y = np.broadcast_to(np.asarray(g_y, float), x.shape)
        g_ld = np.broadcast_to(np.asarray(g_ld, float), x.shape)
        gy = np.where(inside, g_y, 0.0)
        gl = np.where(inside, g_ld, 0.0)
        # y = yk + num / den
        g_yk = gy
        g_num = gy / den
        g_den = -gy * num / den ** 2
        # logdet = log P + 2 log s - 2 log den
        g_P = gl / P
        g_s = 2.0 * gl / sk
        g_den = g_den - 2.0 * gl / den
        # P
        g_dk1 = g_P * xi ** 2
        g_dk = g_P * (1.0 - xi) ** 2
        g_s = g_s + g_P * 2.0 * a
        g_a = g_P * 2.0 * sk
        g_xi = g_P * (2.0 * dk1 * xi - 2.0 * dk * (1.0 - xi))
        # den = s + (dk1 + dk - 2 s) a
        g_s = g_s + g_den * (1.0 - 2.0 * a)
        g_dk1 = g_dk1 + g_den * a
        g_dk = g_dk + g_den * a
        g_a = g_a + g_den * c1
        # num = h (s xi^2 + dk a)
        g_hk = g_num * (sk * xi ** 2 + dk * a)
        g_s = g_s + g_num * hk * xi ** 2
        g_xi = g_xi + g_num * hk * 2.0 * sk * xi
        g_dk = g_dk + g_num * hk * a
        g_a = g_a + g_num * hk * dk
        # a = xi - xi^2
        g_xi = g_xi + g_a * (1.0 - 2.0 * xi)
        # s = h / w
        g_hk = g_hk + g_s / wk
        g_wk = -g_s * hk / wk ** 2
        # xi = (x - xk) / w
        g_xin = g_xi / wk
        g_xk = -g_xi / wk
        g_wk = g_wk - g_xi * xi / wk

        g_x = np.where(inside, g_xin, g_y)
        g_raw = np.zeros(raw.shape)
        g_raw[..., :K] = _knot_vjp(g_xk, g_wk, k, sm_w, B, min_bin_width)
        g_raw[..., K:2 * K] = _knot_vjp(g_yk, g_hk, k, sm_h, B, min_bin_height)
        g_d = _scatter(g_dk, k, K + 1) + _scatter(g_dk1, k + 1, K + 1)
        g_raw[..., 2 * K:] = g_d * _sigmoid(ud + shift)
        return g_x, g_raw

    return y, logdet, vjp


def _scatter(values, idx, size):
    out = np.zeros(values.shape + (size,))
    np.put_along_axis(out, idx[..., None], values[..., None], axis=-1)
    return out


def _knot_vjp(g_start, g_width, k, sm, B, min_bin):
    K = sm.shape[-1]
    # start = knots[k], width = knots[k+1] - knots[k]
    g_knots = _scatter(g_start - g_width, k, K + 1) + _scatter(g_width, k + 1, K + 1)
    # knots[j] = -B + 2B * sum_{i<j} bins_i
    g_bins = 2.0 * B * np.flip(np.cumsum(np.flip(g_knots[..., 1:], -1), -1), -1)
    g_sm = (1.0 - min_bin * K) * g_bins
    return sm * (g_sm - np.sum(sm * g_sm, axis=-1, keepdims=True))

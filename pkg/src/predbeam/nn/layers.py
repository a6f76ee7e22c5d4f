"""Layer primitives built on the engine: convolution, pooling, dense, LSTM cell.

Image tensors are channels-last, ``(H, W, C)`` or batched ``(B, H, W, C)``.
"""

from __future__ import annotations

import math
from typing import Mapping, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import engine as E
from .engine import Node, const

__all__ = ["conv2d", "maxpool2d", "dense", "lstm_cell", "glorot_uniform", "same_padding"]


def _pair(x) -> Tuple[int, int]:
    if np.isscalar(x):
        return int(x), int(x)
    a, b = x
    return int(a), int(b)


def same_padding(size: int, k: int, stride: int) -> Tuple[int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def conv2d(x, kernels, bias, pad: str = "same", stride=1) -> Node:
    """Cross-correlation of ``x`` with ``kernels`` of shape ``(F, kh, kw, C_in)``."""
    x, kernels, bias = const(x), const(kernels), const(bias)
    batched = x.ndim == 4
    xv = x.value if batched else x.value[None]
    if xv.ndim != 4 or kernels.ndim != 4 or xv.shape[-1] != kernels.shape[-1]:
        raise ValueError(f"conv2d: input {x.shape} incompatible with kernels {kernels.shape}")
    if bias.shape != (kernels.shape[0],):
        raise ValueError(f"conv2d: bias {bias.shape} does not match {kernels.shape[0]} filters")
    F, kh, kw, _ = kernels.shape
    sh, sw = _pair(stride)
    B, H, W, C = xv.shape
    if pad == "same":
        (pt, pb), (pl, pr) = same_padding(H, kh, sh), same_padding(W, kw, sw)
    elif pad == "valid":
        pt = pb = pl = pr = 0
    else:
        raise ValueError(f"conv2d: unknown padding {pad!r}")
    if H + pt + pb < kh or W + pl + pr < kw:
        raise ValueError(f"conv2d: kernel {(kh, kw)} larger than padded input {(H, W)}")
    xp = np.pad(xv, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]  # B,H',W',C,kh,kw
    Ho, Wo = win.shape[1], win.shape[2]
    out = np.einsum("bhwcij,fijc->bhwf", win, kernels.value, optimize=True) + bias.value

    def bw(g):
        g4 = g if batched else g[None]
        if kernels.requires_grad:
            E._acc(kernels, np.einsum("bhwcij,bhwf->fijc", win, g4, optimize=True))
        if bias.requires_grad:
            E._acc(bias, g4.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            gp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gp[:, i:i + sh * Ho:sh, j:j + sw * Wo:sw, :] += g4 @ kernels.value[:, i, j, :]
            gx = gp[:, pt:pt + H, pl:pl + W, :]
            E._acc(x, gx if batched else gx[0])
    return Node(out if batched else out[0], (x, kernels, bias), "conv2d", bw)


def maxpool2d(x, kh: int, kw: int, stride_h: int = None, stride_w: int = None) -> Node:
    """Valid max pooling; the adjoint goes to the first maximal cell of each window."""
    x = const(x)
    sh = kh if stride_h is None else stride_h
    sw = kw if stride_w is None else stride_w
    batched = x.ndim == 4
    xv = x.value if batched else x.value[None]
    B, H, W, C = xv.shape
    if kh > H or kw > W:
        raise ValueError(f"maxpool2d: window {(kh, kw)} larger than input {(H, W)}")
    win = sliding_window_view(xv, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    Ho, Wo = win.shape[1], win.shape[2]
    flat = win.reshape(B, Ho, Wo, C, kh * kw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def bw(g):
        g4 = g if batched else g[None]
        b, oy, ox, c = np.indices(arg.shape)
        rows = oy * sh + arg // kw
        cols = ox * sw + arg % kw
        gx = np.zeros_like(xv)
        np.add.at(gx, (b, rows, cols, c), g4)
        E._acc(x, gx if batched else gx[0])
    return Node(out if batched else out[0], (x,), "maxpool2d", bw)


def dense(x, weight, bias) -> Node:
    """``x @ weight + bias`` with ``weight`` shaped ``(d_in, d_out)``."""
    return E.add(E.matmul(x, weight), bias)


GATES = ("i", "f", "o", "g")


def lstm_cell(x, h_prev, c_prev, params: Mapping[str, Node]) -> Tuple[Node, Node]:
    """One LSTM step with input, forget and output gates and a tanh candidate.

    ``params`` holds ``W_<gate>`` of shape ``(d_in + d_h, d_h)`` and ``b_<gate>``
    of shape ``(d_h,)`` for gates i, f, o, g.
    """
    x, h_prev, c_prev = const(x), const(h_prev), const(c_prev)
    d_h = h_prev.shape[-1]
    if c_prev.shape != h_prev.shape:
        raise ValueError(f"lstm_cell: hidden {h_prev.shape} and cell {c_prev.shape} differ")
    z = E.concat([x, h_prev], axis=-1)
    for gname in GATES:
        W = params[f"W_{gname}"]
        if W.shape != (z.shape[-1], d_h):
            raise ValueError(f"lstm_cell: W_{gname} is {W.shape}, expected {(z.shape[-1], d_h)}")
    pre = {gname: dense(z, params[f"W_{gname}"], params[f"b_{gname}"]) for gname in GATES}
    i = E.sigmoid(pre["i"])
    f = E.sigmoid(pre["f"])
    o = E.sigmoid(pre["o"])
    g = E.tanh(pre["g"])
    c = E.add(E.mul(f, c_prev), E.mul(i, g))
    h = E.mul(o, E.tanh(c))
    return h, c


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)

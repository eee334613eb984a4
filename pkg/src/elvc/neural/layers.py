"""Batched float64 layers with hand-derived gradients.

Every array is laid out (batch, time, features). ``*_forward`` returns the
output and a cache; ``*_backward`` takes that cache and the output gradient
and returns ``(grad_input, param_grads)``.
"""

import numpy as np


def conv1d_forward(x, W, b):
    """Same-length 1-D convolution over time; W has shape (kernel, in, out)."""
    k = W.shape[0]
    pad = (k - 1) // 2
    T = x.shape[1]
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    y = np.broadcast_to(b, x.shape[:2] + b.shape).copy()
    for s in range(k):
        y += xp[:, s : s + T, :] @ W[s]
    return y, (xp, W)


def conv1d_backward(cache, gy):
    xp, W = cache
    k = W.shape[0]
    pad = (k - 1) // 2
    T = gy.shape[1]
    gW = np.empty_like(W)
    gxp = np.zeros_like(xp)
    for s in range(k):
        window = xp[:, s : s + T, :]
        gW[s] = np.einsum("bti,bto->io", window, gy)
        gxp[:, s : s + T, :] += gy @ W[s].T
    gb = gy.sum(axis=(0, 1))
    return gxp[:, pad : pad + T, :], {"W": gW, "b": gb}


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(mask, gy):
    return gy * mask


def linear_forward(x, W, b):
    return x @ W + b, x


def linear_backward(x, W, gy):
    gW = np.einsum("bti,bto->io", x, gy)
    return gy @ W.T, {"W": gW, "b": gy.sum(axis=(0, 1))}


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gru_forward(x, Wx, Wh, bx, bh):
    """Unidirectional GRU from a zero initial state.

    Gate layout along the 3H axis is (reset, update, candidate):

        r = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)
        z = sigmoid(x Wx_z + bx_z + h Wh_z + bh_z)
        n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
        h' = (1 - z) * n + z * h
    """
    B, T, _ = x.shape
    H = Wh.shape[0]
    xs = x @ Wx + bx
    h = np.zeros((B, H))
    hs = np.empty((B, T, H))
    h_prev = np.empty((B, T, H))
    r = np.empty((B, T, H))
    z = np.empty((B, T, H))
    n = np.empty((B, T, H))
    hh_n = np.empty((B, T, H))
    for t in range(T):
        h_prev[:, t] = h
        hh = h @ Wh + bh
        r[:, t] = sigmoid(xs[:, t, :H] + hh[:, :H])
        z[:, t] = sigmoid(xs[:, t, H : 2 * H] + hh[:, H : 2 * H])
        hh_n[:, t] = hh[:, 2 * H :]
        n[:, t] = np.tanh(xs[:, t, 2 * H :] + r[:, t] * hh_n[:, t])
        h = (1.0 - z[:, t]) * n[:, t] + z[:, t] * h
        hs[:, t] = h
    return hs, (x, Wx, Wh, h_prev, r, z, n, hh_n)


def gru_backward(cache, gh):
    """Backpropagation through time for :func:`gru_forward`."""
    x, Wx, Wh, h_prev, r, z, n, hh_n = cache
    B, T, H = gh.shape
    dxs = np.empty((B, T, 3 * H))
    gWh = np.zeros_like(Wh)
    gbh = np.zeros(3 * H)
    dh_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = gh[:, t] + dh_next
        rt, zt, nt = r[:, t], z[:, t], n[:, t]
        dn = dh * (1.0 - zt)
        dz = dh * (h_prev[:, t] - nt)
        da_n = dn * (1.0 - nt * nt)
        da_r = da_n * hh_n[:, t] * rt * (1.0 - rt)
        da_z = dz * zt * (1.0 - zt)
        dhh = np.concatenate([da_r, da_z, da_n * rt], axis=1)
        dxs[:, t] = np.concatenate([da_r, da_z, da_n], axis=1)
        gWh += h_prev[:, t].T @ dhh
        gbh += dhh.sum(axis=0)
        dh_next = dh * zt + dhh @ Wh.T
    gWx = np.einsum("bti,btg->ig", x, dxs)
    gbx = dxs.sum(axis=(0, 1))
    return dxs @ Wx.T, {"Wx": gWx, "Wh": gWh, "bx": gbx, "bh": gbh}

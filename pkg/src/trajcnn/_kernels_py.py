"""Pure numpy conv1d kernels, used when the compiled extension is unavailable.

Layouts: input ``(B, T, C_in)``, kernel ``(K, C_in, C_out)``, output
``(B, T_out, C_out)`` with ``T_out = T + 2*pad - K + 1``. Padding is zero.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _im2col(x, K, pad):
    """``(B*T_out, K*C_in)`` matrix of padded windows, tap-major per row."""
    B, _, C = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0))) if pad else x
    win = sliding_window_view(xp, K, axis=1)  # (B, T_out, C, K)
    return win.transpose(0, 1, 3, 2).reshape(-1, K * C)


def conv1d_forward(x, w, b, pad):
    B = x.shape[0]
    K, C_in, C_out = w.shape
    col = _im2col(x, K, pad)
    out = col @ w.reshape(K * C_in, C_out)
    out += b
    return out.reshape(B, -1, C_out)


def conv1d_backward(x, w, gout, pad):
    """Return ``(grad_x, grad_w, grad_b)`` for :func:`conv1d_forward`."""
    B, T, C_in = x.shape
    K, _, C_out = w.shape
    T_out = gout.shape[1]
    g2 = gout.reshape(-1, C_out)
    col = _im2col(x, K, pad)
    gw = (col.T @ g2).reshape(K, C_in, C_out)
    gb = g2.sum(axis=0)
    gcol = (g2 @ w.reshape(K * C_in, C_out).T).reshape(B, T_out, K, C_in)
    gxp = np.zeros((B, T + 2 * pad, C_in), dtype=x.dtype)
    for k in range(K):
        gxp[:, k:k + T_out, :] += gcol[:, :, k, :]
    return np.ascontiguousarray(gxp[:, pad:pad + T, :]), gw, gb

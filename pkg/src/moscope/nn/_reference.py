"""Pure-numpy kernels; the fallback when the compiled extension is absent.

Arrays are float64 with layout (batch, positions, channels).
"""
import numpy as np


def conv1d_forward(x, w, b):
    n_filters, kernel, _ = w.shape
    t_out = x.shape[1] - kernel + 1
    out = np.broadcast_to(b, (x.shape[0], t_out, n_filters)).copy()
    for k in range(kernel):
        out += x[:, k:k + t_out, :] @ w[:, k, :].T
    return out


def conv1d_backward(x, w, g):
    n_filters, kernel, channels = w.shape
    t_out = g.shape[1]
    g2 = g.reshape(-1, n_filters)
    dx = np.zeros_like(x)
    dw = np.empty_like(w)
    for k in range(kernel):
        dw[:, k, :] = g2.T @ x[:, k:k + t_out, :].reshape(-1, channels)
        dx[:, k:k + t_out, :] += g @ w[:, k, :]
    return dx, dw, g2.sum(axis=0)


def maxpool_forward(x, pool):
    n, t, c = x.shape
    t_out = t // pool
    windows = x[:, :t_out * pool, :].reshape(n, t_out, pool, c)
    # argmax returns the first index on ties
    idx = windows.argmax(axis=2)
    out = np.take_along_axis(windows, idx[:, :, None, :], axis=2)[:, :, 0, :]
    return out, idx.astype(np.int64)


def maxpool_backward(g, idx, pool, t_in):
    n, t_out, c = g.shape
    dx = np.zeros((n, t_in, c))
    rows = np.arange(t_out)[None, :, None] * pool + idx
    np.put_along_axis(dx, rows, g, axis=1)
    return dx


def kendall_counts(x, y):
    """Concordant, discordant, x-tied and y-tied pair counts over i < j."""
    i, j = np.triu_indices(len(x), k=1)
    sx = np.sign(x[i] - x[j])
    sy = np.sign(y[i] - y[j])
    prod = sx * sy
    return (int(np.count_nonzero(prod > 0)), int(np.count_nonzero(prod < 0)),
            int(np.count_nonzero(sx == 0)), int(np.count_nonzero(sy == 0)))

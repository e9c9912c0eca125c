"""Layers with explicit forward/backward passes.

Sequence tensors have shape ``(batch, positions, channels)``; vector tensors
``(batch, features)``. Everything is float64. Each layer caches what its
backward pass needs during ``forward``, so an instance must not be shared
between concurrent forward passes.
"""
from __future__ import annotations

import numpy as np

from ._backend import c_array, kernels


class ShapeError(ValueError):
    """Raised when an input is too short or has the wrong channel count."""


def glorot_uniform(rng, shape, fan_in, fan_out):
    # float32-representable so a freshly built model survives serialization exactly
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(np.float32).astype(np.float64)


class Layer:
    params: list = []
    l2: float = 0.0

    def __init__(self):
        self.params = []
        self.grads = []

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError

    def output_length(self, t):
        return t

    def penalty(self):
        """L2 penalty on the weight tensor (biases are not regularized)."""
        if self.l2 and self.params:
            return self.l2 * float(np.sum(self.params[0] ** 2))
        return 0.0

    def state(self):
        """Arrays that define the layer besides trainable params (serialized too)."""
        return []

    def __repr__(self):
        return f"{type(self).__name__}()"


class Conv1D(Layer):
    """Valid-padding, stride-1 convolution along the position axis."""

    def __init__(self, in_channels, filters, kernel, l2=0.0, rng=None):
        super().__init__()
        if kernel < 1 or filters < 1 or in_channels < 1:
            raise ValueError("kernel, filters and in_channels must be >= 1")
        if l2 < 0:
            raise ValueError("l2 must be >= 0")
        self.in_channels, self.filters, self.kernel, self.l2 = in_channels, filters, kernel, l2
        rng = rng if rng is not None else np.random.default_rng(0)
        w = glorot_uniform(rng, (filters, kernel, in_channels),
                           kernel * in_channels, kernel * filters)
        self.params = [w, np.zeros(filters)]
        self.grads = [np.zeros_like(w), np.zeros(filters)]

    def output_length(self, t):
        return t - self.kernel + 1

    def forward(self, x, train=False):
        if x.shape[1] < self.kernel:
            raise ShapeError(f"Conv1D needs at least {self.kernel} positions, got {x.shape[1]}")
        if x.shape[2] != self.in_channels:
            raise ShapeError(f"Conv1D expects {self.in_channels} channels, got {x.shape[2]}")
        self._x = c_array(x)
        return kernels.conv1d_forward(self._x, self.params[0], self.params[1])

    def backward(self, g):
        dx, dw, db = kernels.conv1d_backward(self._x, self.params[0], c_array(g))
        if self.l2:
            dw = dw + 2.0 * self.l2 * self.params[0]
        self.grads = [dw, db]
        return dx

    def __repr__(self):
        return f"Conv1D(filters={self.filters}, kernel={self.kernel}, l2={self.l2})"


class MaxPool1D(Layer):
    """Non-overlapping max pooling; a trailing remainder is dropped."""

    def __init__(self, pool):
        super().__init__()
        if pool < 1:
            raise ValueError("pool must be >= 1")
        self.pool = pool

    def output_length(self, t):
        return t // self.pool

    def forward(self, x, train=False):
        if x.shape[1] < self.pool:
            raise ShapeError(f"MaxPool1D needs at least {self.pool} positions, got {x.shape[1]}")
        self._t_in = x.shape[1]
        out, self._idx = kernels.maxpool_forward(c_array(x), self.pool)
        return out

    def backward(self, g):
        return kernels.maxpool_backward(c_array(g), self._idx, self.pool, self._t_in)

    def __repr__(self):
        return f"MaxPool1D(pool={self.pool})"


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        if x.shape[1] < 1:
            raise ShapeError("GlobalAvgPool needs at least one position")
        self._t = x.shape[1]
        return x.mean(axis=1)

    def backward(self, g):
        return np.repeat(g[:, None, :] / self._t, self._t, axis=1)


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, g):
        return np.where(self._mask, g, 0.0)


class Dense(Layer):
    """Affine map on the last axis; applied per position on sequence input."""

    def __init__(self, in_features, units, l2=0.0, rng=None):
        super().__init__()
        if units < 1 or in_features < 1:
            raise ValueError("units and in_features must be >= 1")
        self.in_features, self.units, self.l2 = in_features, units, l2
        rng = rng if rng is not None else np.random.default_rng(0)
        w = glorot_uniform(rng, (units, in_features), in_features, units)
        self.params = [w, np.zeros(units)]
        self.grads = [np.zeros_like(w), np.zeros(units)]

    def forward(self, x, train=False):
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"Dense expects {self.in_features} features, got {x.shape[-1]}")
        self._x = x
        return x @ self.params[0].T + self.params[1]

    def backward(self, g):
        x2 = self._x.reshape(-1, self.in_features)
        g2 = g.reshape(-1, self.units)
        dw = g2.T @ x2
        if self.l2:
            dw = dw + 2.0 * self.l2 * self.params[0]
        self.grads = [dw, g2.sum(axis=0)]
        return g @ self.params[0]

    def __repr__(self):
        return f"Dense(units={self.units}, l2={self.l2})"


class Dropout(Layer):
    """Inverted dropout; the identity in eval mode."""

    def __init__(self, rate, rng=None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._mask = None
            return x
        keep = self.rng.random(x.shape) >= self.rate
        self._mask = keep / (1.0 - self.rate)
        return x * self._mask

    def backward(self, g):
        return g if self._mask is None else g * self._mask

    def __repr__(self):
        return f"Dropout(rate={self.rate})"


class BatchNorm(Layer):
    """Per-channel normalization; statistics pool the batch and position axes."""

    def __init__(self, channels, momentum=0.99, epsilon=1e-5):
        super().__init__()
        self.channels, self.momentum, self.epsilon = channels, momentum, epsilon
        self.params = [np.ones(channels), np.zeros(channels)]
        self.grads = [np.zeros(channels), np.zeros(channels)]
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def state(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, train=False):
        if x.shape[-1] != self.channels:
            raise ShapeError(f"BatchNorm expects {self.channels} channels, got {x.shape[-1]}")
        axes = tuple(range(x.ndim - 1))
        gamma, beta = self.params
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean[:] = self.momentum * self.running_mean + (1 - self.momentum) * mean
            self.running_var[:] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean) * inv
        self._cache = (train, xhat, inv, axes)
        return gamma * xhat + beta

    def backward(self, g):
        train, xhat, inv, axes = self._cache
        gamma = self.params[0]
        self.grads = [np.sum(g * xhat, axis=axes), np.sum(g, axis=axes)]
        gx = g * gamma
        if not train:
            return gx * inv
        m = xhat.size // self.channels
        return inv / m * (m * gx - gx.sum(axis=axes) - xhat * np.sum(gx * xhat, axis=axes))

    def __repr__(self):
        return f"BatchNorm(channels={self.channels})"

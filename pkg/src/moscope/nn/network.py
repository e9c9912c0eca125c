"""A plain sequential container over :mod:`layers`."""
from __future__ import annotations

import numpy as np

from .layers import BatchNorm, Dropout, Layer


class Sequential:
    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def params(self):
        return [p for layer in self.layers for p in layer.params]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads]

    def penalty(self):
        return sum(layer.penalty() for layer in self.layers)

    def output_length(self, t):
        for layer in self.layers:
            t = layer.output_length(t)
        return t

    def reseed_dropout(self, rng: np.random.Generator):
        for layer in self.layers:
            if isinstance(layer, Dropout):
                layer.rng = rng

    def snapshot(self):
        """Copies of every parameter and state array, in layer order."""
        return [[a.copy() for a in layer.params + layer.state()] for layer in self.layers]

    def restore(self, snap):
        for layer, arrays in zip(self.layers, snap):
            for dst, src in zip(layer.params + layer.state(), arrays):
                dst[...] = src

    def has_batchnorm(self):
        return any(isinstance(layer, BatchNorm) for layer in self.layers)

    def __repr__(self):
        return "Sequential(" + ", ".join(map(repr, self.layers)) + ")"

"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)


def mse_loss(output, target):
    diff = output - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def gradient_check(model, x, target, loss=mse_loss, h=1e-6, tolerance=None,
                   max_params=None, rng=None, train=False, wrt_input=False):
    """Max over parameters of ``|analytic - numeric| / max(1, |analytic|, |numeric|)``.

    ``model`` needs ``forward``, ``backward``, ``params``, ``grads`` and
    ``penalty``; the objective is ``loss(output, target) + penalty``. Forward
    passes run in eval mode unless ``train`` is set, in which case the model
    must be deterministic in train mode (no active dropout). ``max_params``
    checks a random subset of coordinates per array. With ``wrt_input`` the
    input gradient returned by ``backward`` is checked as well.
    """
    x = np.array(x, dtype=np.float64)
    out = model.forward(x, train=train)
    _, g = loss(out, target)
    dx = model.backward(g)
    analytic = [a.copy() for a in model.grads()]
    arrays = list(model.params())
    if wrt_input:
        arrays.append(x)
        analytic.append(np.asarray(dx, dtype=np.float64).copy())
    rng = rng if rng is not None else np.random.default_rng(0)

    def f():
        return loss(model.forward(x, train=train), target)[0] + model.penalty()

    worst = 0.0
    for p, a in zip(arrays, analytic):
        flat = p.reshape(-1)
        coords = np.arange(flat.size)
        if max_params is not None and flat.size > max_params:
            coords = rng.choice(flat.size, size=max_params, replace=False)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            up = f()
            flat[i] = orig - h
            down = f()
            flat[i] = orig
            num = (up - down) / (2 * h)
            an = a.reshape(-1)[i]
            worst = max(worst, abs(an - num) / max(1.0, abs(an), abs(num)))
    if tolerance is not None and worst >= tolerance:
        log.warning("gradient check failed: max relative error %.3g >= %.3g", worst, tolerance)
    return worst

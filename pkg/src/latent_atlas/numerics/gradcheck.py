"""Finite-difference validation of analytic gradients, run in float64."""

from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError
from .rng import RngState


def grad_check(params, loss_and_grads, eps: float = 1e-4, n_samples: int = 64, seed: int = 0):
    """Max relative error between analytic and central-difference gradients.

    ``params`` is a list of float64 arrays that ``loss_and_grads()`` reads;
    it returns ``(loss, grads)`` with grads aligned to ``params``. Entries are
    perturbed in place and restored. Up to ``n_samples`` entries per array
    are checked, chosen by a seeded stream.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    loss, grads = loss_and_grads()
    if not np.isfinite(loss):
        raise TrainingDivergedError(f"non-finite loss {loss}")
    rng = RngState(seed)
    worst = 0.0
    for p, g in zip(params, grads):
        if p.dtype != np.float64:
            raise TypeError("grad_check requires float64 parameters")
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        idx = rng.choice(flat.size, min(n_samples, flat.size))
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_and_grads()
            flat[i] = orig - eps
            lm, _ = loss_and_grads()
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise TrainingDivergedError("non-finite loss under perturbation")
            cd = (lp - lm) / (2 * eps)
            an = gflat[i]
            err = abs(an - cd) / max(abs(an), abs(cd), 1e-8)
            worst = max(worst, err)
    return float(worst)


def grad_check_net(net, loss_fn, inputs, eps: float = 1e-4, n_samples: int = 64, seed: int = 0):
    """Check a DenseNet under ``loss_fn(output) -> (loss, grad_output)``.

    The network is promoted to a float64 shadow copy; input gradients are
    checked alongside the parameters.
    """
    net64 = net.astype(np.float64)
    x = np.array(inputs, dtype=np.float64)
    params = net64.params() + [x]

    def loss_and_grads():
        out, cache = net64.forward(x)
        loss, g_out = loss_fn(out)
        pgrads, xgrad = net64.backward(cache, g_out)
        return loss, pgrads + [xgrad]

    return grad_check(params, loss_and_grads, eps=eps, n_samples=n_samples, seed=seed)

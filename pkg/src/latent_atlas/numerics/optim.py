from __future__ import annotations

import numpy as np

from ..errors import TrainingDivergedError


class Adam:
    """Adaptive-moment optimizer updating parameter arrays in place.

    The moment buffers are created lazily on the first step and must keep the
    parameter shapes; ``step`` raises on any non-finite gradient before touching
    state, so a failed step leaves both params and moments unchanged.
    """

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads):
        if len(params) != len(grads):
            raise ValueError("params and grads differ in length")
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ValueError(f"param {i}: shape {p.shape} vs grad {g.shape}")
            if not np.all(np.isfinite(g)):
                bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
                raise TrainingDivergedError(
                    f"non-finite gradient in param {i} (shape {p.shape}, {bad} bad entries) "
                    f"at step {self.t + 1}"
                )
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = g.astype(p.dtype, copy=False)
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype)
        return params


def adam_step(params, grads, opt: Adam):
    opt.step(params, grads)
    return params, opt

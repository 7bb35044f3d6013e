"""Latent recovery for given images: learned recoder, decoder-gradient descent, and range probes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, MissingRecoderError, TrainingDivergedError
from .models.base import _flatten, per_image_mse


@dataclass
class InversionResult:
    code: np.ndarray
    final_image_mse: float
    steps_used: int
    method: str
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "code": [float(v) for v in self.code],
            "final_image_mse": self.final_image_mse,
            "steps_used": self.steps_used,
            "method": self.method,
        }


@dataclass
class GradientConfig:
    steps: int = 500
    lr: float = 1.0
    grow: float = 1.5
    max_halvings: int = 40
    prior: float = 0.0
    tol: float = 0.0


def _objective(model, z, targets, prior):
    flat, cache = model.decode_forward(z)
    diff = flat.astype(np.float64) - targets
    mse = (diff**2).mean(axis=1)
    loss = mse + prior * (z.astype(np.float64) ** 2).sum(axis=1)
    return loss, mse, diff, cache


def inversion_loss_and_grad(model, z, targets, prior: float = 0.0):
    """Per-row ``MSE(decode(z), target) + prior * ||z||^2`` and its gradient w.r.t. z."""
    loss, mse, diff, cache = _objective(model, z, targets, prior)
    p = targets.shape[1]
    g = model.decode_backward(cache, (2.0 / p) * diff.astype(z.dtype)).astype(np.float64)
    g += 2.0 * prior * z
    return loss, mse, g


def invert_gradient_batch(model, targets, init, cfg: GradientConfig | None = None, **overrides) -> list[InversionResult]:
    """Independent gradient-descent inversions, one per row, with step halving.

    Each row keeps its own step size. A trial step that raises the row's loss
    is rejected and the step is halved; accepted steps grow the step by
    ``grow``. The loss trace of every row is therefore non-increasing.
    """
    cfg = replace(cfg or GradientConfig(), **overrides)
    t = _flatten(targets, model.n_pixels).astype(np.float64)
    z = np.array(init, dtype=np.float64).reshape(len(t), -1)
    if z.shape[1] != model.latent_dim:
        raise DimensionError(f"init width {z.shape[1]} != latent_dim {model.latent_dim}")
    # Batched float32 decoding can differ in the last bit with row position, so
    # rows run in a canonical order; permuting the inputs permutes the outputs exactly.
    order = sorted(range(len(t)), key=lambda i: (t[i].tobytes(), z[i].tobytes()))
    results = _descend(model, t[order], z[order], cfg)
    out = [None] * len(t)
    for k, i in enumerate(order):
        out[i] = results[k]
    return out


def _descend(model, t, z, cfg):
    n = len(t)
    lr = np.full(n, cfg.lr)
    loss, _, g = inversion_loss_and_grad(model, z.astype(np.float32), t, cfg.prior)
    if not np.all(np.isfinite(loss)):
        raise TrainingDivergedError("non-finite inversion loss at initialization")
    steps_used = np.zeros(n, dtype=int)
    active = loss > cfg.tol
    traces = [[float(v)] for v in loss]
    for _ in range(cfg.steps):
        if not active.any():
            break
        rows = np.flatnonzero(active)
        cand_lr = lr[rows].copy()
        accepted = np.zeros(len(rows), dtype=bool)
        new_loss = loss[rows].copy()
        new_z = z[rows].copy()
        pending = np.arange(len(rows))
        for _h in range(cfg.max_halvings):
            if len(pending) == 0:
                break
            r = rows[pending]
            trial = z[r] - cand_lr[pending, None] * g[r]
            tl, _, _, _ = _objective(model, trial.astype(np.float32), t[r], cfg.prior)
            ok = np.isfinite(tl) & (tl <= loss[r])
            accepted[pending[ok]] = True
            new_loss[pending[ok]] = tl[ok]
            new_z[pending[ok]] = trial[ok]
            cand_lr[pending[~ok]] *= 0.5
            pending = pending[~ok]
        # rows that never found a descent step are converged to precision
        z[rows[accepted]] = new_z[accepted]
        lr[rows] = np.where(accepted, cand_lr * cfg.grow, cand_lr)
        steps_used[rows[accepted]] += 1
        active[rows[~accepted]] = False
        if accepted.any():
            ra = rows[accepted]
            # keep the loss the step was accepted on, so the trace cannot tick up
            _, _, g[ra] = inversion_loss_and_grad(model, z[ra].astype(np.float32), t[ra], cfg.prior)
            loss[ra] = new_loss[accepted]
            active[ra] &= loss[ra] > cfg.tol
        for i in rows:
            traces[i].append(float(loss[i]))
    codes = z.astype(np.float32)
    final = per_image_mse(t, model.decode(codes))
    return [
        InversionResult(codes[i], float(final[i]), int(steps_used[i]), "gradient", traces[i])
        for i in range(n)
    ]


def invert_gradient(model, target, init, cfg: GradientConfig | None = None, **overrides) -> InversionResult:
    """Invert a single image by gradient descent through the decoder."""
    return invert_gradient_batch(model, np.asarray(target)[None], np.asarray(init)[None], cfg, **overrides)[0]


def invert_recoder(model, images, refine: GradientConfig | None = None) -> list[InversionResult]:
    """One recoder pass per image; with ``refine`` the codes seed gradient descent.

    The refined variant descends from two starts, the recoder code and the
    prior mean, and keeps the lower final MSE per image. The prior-mean start
    is the one plain gradient inversion uses, so the hybrid is never worse
    than it; a single descent from the recoder code alone can be, since the
    objective is not convex.
    """
    if getattr(model, "recoder", None) is None:
        raise MissingRecoderError(f"{model.kind} model has no recoder")
    flat = _flatten(images, model.n_pixels)
    codes = model.encode(flat)
    if refine is not None:
        from_code = invert_gradient_batch(model, flat, codes, refine)
        from_prior = invert_gradient_batch(model, flat, _prior_start(model, len(flat)), refine)
        out = [a if a.final_image_mse <= b.final_image_mse else b for a, b in zip(from_code, from_prior)]
        for r in out:
            r.method = "recoder+gradient"
        return out
    mse = per_image_mse(flat, model.decode(codes))
    return [InversionResult(codes[i], float(mse[i]), 0, "recoder") for i in range(len(flat))]


def _prior_start(model, n):
    # position-independent, so results do not depend on image order
    return np.zeros((n, model.latent_dim), dtype=np.float32)


def _invert(model, images, method, cfg):
    flat = _flatten(images, model.n_pixels)
    if method == "gradient":
        return invert_gradient_batch(model, flat, _prior_start(model, len(flat)), cfg)
    if method == "recoder":
        return invert_recoder(model, flat)
    if method == "recoder+gradient":
        return invert_recoder(model, flat, cfg or GradientConfig())
    raise ValueError(f"unknown inversion method {method!r}")


def range_probe(model, in_range, out_range, method: str = "gradient", cfg: GradientConfig | None = None) -> dict:
    """Median inversion MSE inside and outside the model's generative range."""
    if len(in_range) == 0 or len(out_range) == 0:
        raise ValueError("both image sets must be non-empty")
    res_in = _invert(model, in_range, method, cfg)
    res_out = _invert(model, out_range, method, cfg)
    med_in = float(np.median([r.final_image_mse for r in res_in]))
    med_out = float(np.median([r.final_image_mse for r in res_out]))
    return {
        "method": method,
        "median_in": med_in,
        "median_out": med_out,
        "ratio": med_out / med_in if med_in > 0 else float("inf"),
        "n_in": len(res_in),
        "n_out": len(res_out),
    }

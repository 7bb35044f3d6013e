"""Learned generator inversion: a network regressing latent codes from generated images."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..numerics.dense import DenseNet
from ..numerics.optim import Adam
from ..numerics.rng import RngState
from .training import Stopwatch, TrainLog, check_finite


@dataclass
class RecoderConfig:
    steps: int = 12000
    batch: int = 128
    lr: float = 1e-3
    final_lr_fraction: float = 0.02
    hidden: tuple = (256, 256, 128)
    seed: int = 0
    log_every: int = 200


def new_recoder(n_pixels: int, latent_dim: int, hidden, rng: RngState) -> DenseNet:
    h = list(hidden)
    return DenseNet.init([n_pixels] + h + [latent_dim], ["leaky_relu"] * len(h) + ["identity"], rng)


def recoder_latent_mse(model, recoder: DenseNet | None = None, n: int = 1024, seed: int = 12345) -> float:
    """Per-component latent MSE of the recoder on fresh generated pairs."""
    recoder = recoder or model.recoder
    images, target = model.recoder_pairs(RngState(seed), n)
    pred = recoder(images)
    return float(np.mean((pred.astype(np.float64) - target) ** 2))


def train_recoder(model, cfg: RecoderConfig | None = None, **overrides):
    """Fit ``model.recoder`` on freshly sampled (code, generated image) pairs.

    Every step draws a new batch, so there is no fixed training set to overfit.
    For style proxies the regression target is the intermediate code ``w``.
    Returns ``(model, log)``; the model is updated in place.
    """
    cfg = replace(cfg or RecoderConfig(), **overrides)
    rng = RngState(cfg.seed)
    net = new_recoder(model.n_pixels, model.latent_dim, cfg.hidden, rng.spawn(0))
    pair_rng = rng.spawn(1)
    opt = Adam(lr=cfg.lr)
    log = TrainLog(cfg.seed)
    watch = Stopwatch()
    running = 0.0
    for step in range(1, cfg.steps + 1):
        # cosine decay from lr to lr * final_lr_fraction
        frac = cfg.final_lr_fraction
        opt.lr = cfg.lr * (frac + (1 - frac) * 0.5 * (1 + np.cos(np.pi * (step - 1) / cfg.steps)))
        images, target = model.recoder_pairs(pair_rng, cfg.batch)
        pred, cache = net.forward(images)
        diff = pred - target
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        check_finite(loss, "recoder loss", 0, step)
        grads, _ = net.backward(cache, (2.0 / diff.size) * diff, need_input_grad=False)
        opt.step(net.params(), grads)
        running += loss
        if step % cfg.log_every == 0 or step == cfg.steps:
            k = step % cfg.log_every or cfg.log_every
            log.record(step, latent_mse=running / k)
            running = 0.0
    model.recoder = net
    log.heldout_mse = recoder_latent_mse(model, net)
    log.wall_clock = watch.elapsed()
    return model, log

"""Adversarial generator/discriminator pair with an optional recoder for inversion."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import DimensionError, MissingRecoderError, ModeCollapseError
from ..numerics.dense import DenseNet
from ..numerics.optim import Adam
from ..numerics.rng import RngState
from .base import LatentModel
from .training import Stopwatch, TrainLog, check_finite, iterate_minibatches

N_PIXELS = 256
LOSSES = ("least-squares", "nonsaturating")


@dataclass
class GanConfig:
    latent_dim: int = 16
    epochs: int = 60
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    beta1: float = 0.5
    batch: int = 64
    loss: str = "least-squares"
    hidden: tuple = (128, 256)
    seed: int = 0
    collapse_var: float = 1e-4
    collapse_patience: int = 5

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class GanModel(LatentModel):
    kind = "gan"

    def __init__(self, generator: DenseNet, discriminator: DenseNet, latent_dim: int, recoder: DenseNet | None = None, loss="least-squares", seed=0, hyper=None):
        if generator.d_in != latent_dim:
            raise DimensionError("generator input width != latent_dim")
        if discriminator.d_out != 1 or discriminator.d_in != generator.d_out:
            raise DimensionError("discriminator must map images to one score")
        if recoder is not None and (recoder.d_in != generator.d_out or recoder.d_out != latent_dim):
            raise DimensionError("recoder must map images to latent_dim")
        self.generator = generator
        self.discriminator = discriminator
        self.recoder = recoder
        self.latent_dim = latent_dim
        self.loss = loss
        self.seed = seed
        self.hyper = dict(hyper or {})

    def encode_flat(self, flat):
        if self.recoder is None:
            raise MissingRecoderError("GAN has no trained recoder; run train_recoder first")
        return self.recoder(flat)

    def decode_forward(self, codes):
        return self.generator.forward(codes)

    def decode_backward(self, cache, grad_flat):
        return self.generator.backward(cache, grad_flat)[1]

    # recoder protocol shared with the style proxy
    def recoder_pairs(self, rng: RngState, n: int):
        z = rng.normal((n, self.latent_dim))
        return self.generator(z), z

    def nets(self) -> dict:
        out = {"generator": self.generator, "discriminator": self.discriminator}
        if self.recoder is not None:
            out["recoder"] = self.recoder
        return out

    def real_threshold(self) -> float:
        return 0.5 if self.loss == "least-squares" else 0.0


def _softplus(x):
    return np.logaddexp(0, x)


def _sigmoid(x):
    return 0.5 * (1 + np.tanh(0.5 * x))


def discriminator_loss(disc: DenseNet, real, fake, loss: str):
    """Returns ``(loss, grads)`` for one discriminator update."""
    out_r, cr = disc.forward(real)
    out_f, cf = disc.forward(fake)
    nr, nf = len(real), len(fake)
    if loss == "least-squares":
        val = 0.5 * np.mean((out_r - 1) ** 2) + 0.5 * np.mean(out_f**2)
        g_r = (out_r - 1) / nr
        g_f = out_f / nf
    else:
        val = np.mean(_softplus(-out_r)) + np.mean(_softplus(out_f))
        g_r = -_sigmoid(-out_r) / nr
        g_f = _sigmoid(out_f) / nf
    gr, _ = disc.backward(cr, g_r, need_input_grad=False)
    gf, _ = disc.backward(cf, g_f, need_input_grad=False)
    return float(val), [a + b for a, b in zip(gr, gf)]


def generator_loss(gen: DenseNet, disc: DenseNet, z, loss: str):
    """Generator objective through a frozen discriminator.

    Returns ``(loss, generator_grads, z_grads)``.
    """
    fake, cg = gen.forward(z)
    out, cd = disc.forward(fake)
    n = len(z)
    if loss == "least-squares":
        val = 0.5 * np.mean((out - 1) ** 2)
        g_out = (out - 1) / n
    else:
        val = np.mean(_softplus(-out))
        g_out = -_sigmoid(-out) / n
    _, g_fake = disc.backward(cd, g_out)
    ggrads, gz = gen.backward(cg, g_fake)
    return float(val), ggrads, gz


def pixel_variance(images) -> float:
    """Across-sample pixel variance averaged over pixels (collapse statistic)."""
    x = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    return float(x.var(axis=0).mean())


def train_gan(images, cfg: GanConfig | None = None, **overrides):
    """Alternating discriminator/generator updates; deterministic per seed.

    Raises ModeCollapseError when the generated-batch pixel variance stays
    below ``collapse_var`` for ``collapse_patience`` consecutive epochs.
    """
    cfg = replace(cfg or GanConfig(), **overrides)
    if cfg.loss not in LOSSES:
        raise ValueError(f"loss must be one of {LOSSES}")
    images = np.asarray(images, dtype=np.float32)
    if len(images) == 0:
        raise ValueError("dataset is empty")
    flat = images.reshape(len(images), -1)
    rng = RngState(cfg.seed)
    init = rng.spawn(0)
    h = list(cfg.hidden)
    gen = DenseNet.init([cfg.latent_dim] + h + [N_PIXELS], ["leaky_relu"] * len(h) + ["sigmoid"], init.spawn(0))
    disc = DenseNet.init([N_PIXELS] + h[::-1] + [1], ["leaky_relu"] * len(h) + ["identity"], init.spawn(1))
    model = GanModel(gen, disc, cfg.latent_dim, None, cfg.loss, cfg.seed, cfg.to_dict())
    log = TrainLog(cfg.seed)
    watch = Stopwatch()
    data_rng, z_rng = rng.spawn(1), rng.spawn(2)
    z_eval = rng.spawn(3).normal((256, cfg.latent_dim))
    opt_g = Adam(lr=cfg.lr_g, beta1=cfg.beta1)
    opt_d = Adam(lr=cfg.lr_d, beta1=cfg.beta1)
    low_var_run = 0
    for epoch in range(1, cfg.epochs + 1):
        tot_d = tot_g = 0.0
        nb = 0
        for step, idx in enumerate(iterate_minibatches(len(flat), cfg.batch, data_rng)):
            real = flat[idx]
            z = z_rng.normal((len(real), cfg.latent_dim))
            ld, gd = discriminator_loss(disc, real, gen(z), cfg.loss)
            check_finite(ld, "discriminator loss", epoch, step)
            opt_d.step(disc.params(), gd)
            z = z_rng.normal((len(real), cfg.latent_dim))
            lg, gg, _ = generator_loss(gen, disc, z, cfg.loss)
            check_finite(lg, "generator loss", epoch, step)
            opt_g.step(gen.params(), gg)
            tot_d += ld
            tot_g += lg
            nb += 1
        var = pixel_variance(gen(z_eval))
        log.record(epoch, d_loss=tot_d / max(nb, 1), g_loss=tot_g / max(nb, 1), sample_var=var)
        low_var_run = low_var_run + 1 if var < cfg.collapse_var else 0
        if low_var_run >= cfg.collapse_patience:
            raise ModeCollapseError(
                f"generated pixel variance {var:.2e} < {cfg.collapse_var:.0e} "
                f"for {low_var_run} consecutive epochs (epoch {epoch})"
            )
    log.wall_clock = watch.elapsed()
    return model, log


def discriminator_accuracy(model: GanModel, real, rng: RngState) -> float:
    """Accuracy on a balanced batch: len(real) real images and as many fakes."""
    real = np.asarray(real, dtype=np.float32).reshape(len(real), -1)
    fake = model.generator(rng.normal((len(real), model.latent_dim)))
    t = model.real_threshold()
    hits = np.sum(model.discriminator(real) > t) + np.sum(model.discriminator(fake) <= t)
    return float(hits / (2 * len(real)))


def nearest_neighbor_mse(samples, dataset_images, chunk: int = 256) -> np.ndarray:
    """Per-sample minimum per-pixel MSE to any dataset image."""
    s = np.asarray(samples, dtype=np.float64).reshape(len(samples), -1)
    d = np.asarray(dataset_images, dtype=np.float64).reshape(len(dataset_images), -1)
    p = s.shape[1]
    dn = (d * d).sum(axis=1)
    out = np.empty(len(s))
    for i in range(0, len(s), chunk):
        blk = s[i : i + chunk]
        dist = (blk * blk).sum(axis=1)[:, None] + dn[None, :] - 2 * blk @ d.T
        out[i : i + chunk] = np.maximum(dist.min(axis=1), 0) / p
    return out

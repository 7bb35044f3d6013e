"""Variational autoencoders: plain decoder and split (two-image + mask) decoder."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import DimensionError, TrainingDivergedError
from ..numerics.dense import DenseNet
from ..numerics.optim import Adam
from ..numerics.rng import RngState
from .base import LatentModel, combine_split, per_image_mse
from .training import Stopwatch, TrainLog, check_finite, iterate_minibatches

N_PIXELS = 256


@dataclass
class VaeConfig:
    latent_dim: int = 16
    gamma: float = 0.002
    epochs: int = 40
    lr: float = 1e-3
    batch: int = 64
    hidden: tuple = (256, 128)
    seed: int = 0
    holdout: float = 0.1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def plain_decode(decoder: DenseNet, z):
    return decoder.forward(z)


def plain_decode_backward(decoder: DenseNet, cache, grad):
    return decoder.backward(cache, grad)


def split_decode(decoder: DenseNet, z):
    """The decoder emits (x1, x2, sigma) stacked, all squashed by its final sigmoid."""
    out, cache = decoder.forward(z)
    p = out.shape[1] // 3
    x1, x2, s = out[:, :p], out[:, p : 2 * p], out[:, 2 * p :]
    return combine_split(x1, x2, s), (cache, x1, x2, s)


def split_decode_backward(decoder: DenseNet, cache, grad):
    net_cache, x1, x2, s = cache
    g_out = np.concatenate([grad * s, grad * (1 - s), grad * (x1 - x2)], axis=1)
    return decoder.backward(net_cache, g_out)


class VaeModel(LatentModel):
    kind = "vae"

    def __init__(self, encoder: DenseNet, decoder: DenseNet, latent_dim: int, gamma: float, seed=0, hyper=None):
        if encoder.d_out != 2 * latent_dim:
            raise DimensionError(f"encoder width {encoder.d_out} != 2 * latent_dim")
        if decoder.d_in != latent_dim:
            raise DimensionError("decoder input width != latent_dim")
        if gamma <= 0:
            raise ValueError("gamma must be > 0")
        self.encoder = encoder
        self.decoder = decoder
        self.latent_dim = latent_dim
        self.gamma = gamma
        self.seed = seed
        self.hyper = dict(hyper or {})

    _decode = staticmethod(plain_decode)
    _decode_backward = staticmethod(plain_decode_backward)

    def posterior(self, flat):
        h = self.encoder(flat)
        return h[:, : self.latent_dim], h[:, self.latent_dim :]

    def encode_flat(self, flat):
        return self.posterior(flat)[0]

    def decode_forward(self, codes):
        return self._decode(self.decoder, codes)

    def decode_backward(self, cache, grad_flat):
        return self._decode_backward(self.decoder, cache, grad_flat)[1]

    def nets(self) -> dict:
        return {"encoder": self.encoder, "decoder": self.decoder}


class SvaeModel(VaeModel):
    kind = "svae"

    def __init__(self, encoder, decoder, latent_dim, gamma, seed=0, hyper=None):
        if decoder.d_out % 3:
            raise DimensionError("split decoder must emit 3 * n_pixels values")
        super().__init__(encoder, decoder, latent_dim, gamma, seed, hyper)

    _decode = staticmethod(split_decode)
    _decode_backward = staticmethod(split_decode_backward)

    def split_outputs(self, codes):
        _, (_, x1, x2, s) = self.decode_forward(np.asarray(codes, dtype=np.float32))
        return x1, x2, s


def autoencoder_loss(encoder, decoder, x, eps, gamma, split=False):
    """Loss ``MSE(x, x_hat) + gamma * KL(N(mu, sigma^2) || N(0, 1))`` with its gradients.

    The KL is summed over latent dims and averaged over the batch; ``eps`` is the
    reparameterization noise. Returns ``(loss, rec, kl, enc_grads, dec_grads)``.
    """
    dec_fwd, dec_bwd = (split_decode, split_decode_backward) if split else (plain_decode, plain_decode_backward)
    b, p = x.shape
    d = decoder.d_in
    h, ecache = encoder.forward(x)
    mu, lv = h[:, :d], h[:, d:]
    std = np.exp(0.5 * lv)
    z = mu + std * eps
    xh, dcache = dec_fwd(decoder, z)
    diff = xh - x
    rec = float(np.mean(diff.astype(np.float64) ** 2))
    ev = np.exp(lv)
    kl = float(0.5 * np.sum((mu * mu + ev - lv - 1).astype(np.float64)) / b)
    loss = rec + gamma * kl

    g_xh = (2.0 / (b * p)) * diff
    dec_grads, gz = dec_bwd(decoder, dcache, g_xh)
    g_mu = gz + (gamma / b) * mu
    g_lv = gz * 0.5 * std * eps + (gamma / b) * 0.5 * (ev - 1)
    enc_grads, _ = encoder.backward(ecache, np.concatenate([g_mu, g_lv], axis=1), need_input_grad=False)
    return loss, rec, kl, enc_grads, dec_grads


def _init_nets(cfg: VaeConfig, rng: RngState, n_out: int):
    h = list(cfg.hidden)
    enc = DenseNet.init([N_PIXELS] + h + [2 * cfg.latent_dim], ["leaky_relu"] * len(h) + ["identity"], rng.spawn(0))
    # shrink the log-variance head so training starts near unit posterior noise
    enc.layers[-1].weight[cfg.latent_dim :] *= 0.1
    dec = DenseNet.init([cfg.latent_dim] + h[::-1] + [n_out], ["leaky_relu"] * len(h) + ["sigmoid"], rng.spawn(1))
    return enc, dec


def _train(cls, images, cfg: VaeConfig):
    if cfg.gamma <= 0:
        raise ValueError("gamma must be > 0")
    images = np.asarray(images, dtype=np.float32)
    if len(images) == 0:
        raise ValueError("dataset is empty")
    flat = images.reshape(len(images), -1)
    n_hold = max(1, int(round(len(flat) * cfg.holdout))) if len(flat) > 1 else 0
    train, held = flat[: len(flat) - n_hold], flat[len(flat) - n_hold :]

    split = cls is SvaeModel
    rng = RngState(cfg.seed)
    enc, dec = _init_nets(cfg, rng.spawn(0), 3 * N_PIXELS if split else N_PIXELS)
    model = cls(enc, dec, cfg.latent_dim, cfg.gamma, cfg.seed, cfg.to_dict())
    log = TrainLog(cfg.seed)
    watch = Stopwatch()
    data_rng, noise_rng = rng.spawn(1), rng.spawn(2)
    opt = Adam(lr=cfg.lr)
    params = enc.params() + dec.params()
    for epoch in range(1, cfg.epochs + 1):
        tot = np.zeros(3)
        nb = 0
        for step, idx in enumerate(iterate_minibatches(len(train), cfg.batch, data_rng)):
            x = train[idx]
            eps = noise_rng.normal((len(x), cfg.latent_dim))
            loss, rec, kl, eg, dg = autoencoder_loss(enc, dec, x, eps, cfg.gamma, split)
            check_finite(loss, "loss", epoch, step)
            opt.step(params, eg + dg)
            tot += (loss, rec, kl)
            nb += 1
        tot /= max(nb, 1)
        held_mse = _heldout(model, held)
        log.record(epoch, loss=tot[0], rec=tot[1], kl=tot[2], heldout_mse=held_mse)
    log.heldout_mse = _heldout(model, held)
    log.wall_clock = watch.elapsed()
    return model, log


def _heldout(model, held):
    if len(held) == 0:
        return float("nan")
    mse = float(per_image_mse(held, model.decode(model.encode_flat(held))).mean())
    if not np.isfinite(mse):
        raise TrainingDivergedError("held-out reconstruction became non-finite")
    return mse


def train_vae(images, cfg: VaeConfig | None = None, **overrides):
    """Train a VAE on ``images`` (n, 16, 16); deterministic per ``cfg.seed``."""
    cfg = _resolve(cfg, overrides, 16)
    return _train(VaeModel, images, cfg)


def train_svae(images, cfg: VaeConfig | None = None, **overrides):
    cfg = _resolve(cfg, overrides, 24)
    return _train(SvaeModel, images, cfg)


def _resolve(cfg, overrides, default_dim):
    if cfg is None:
        cfg = VaeConfig(latent_dim=overrides.pop("latent_dim", default_dim))
    return replace(cfg, **overrides)

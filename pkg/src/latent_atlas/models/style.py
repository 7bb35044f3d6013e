"""Style-proxy generator: a nonlinear mapping network z -> w feeding a synthesis network.

Training has two stages. The synthesis network is the decoder of a VAE
trained on the data with latent width ``latent_dim``, so its input space W
is organized like any other autoencoder latent space. The mapping network
(two leaky-ReLU hidden layers) is then regressed onto a fixed swirl: each
coordinate pair of z is rotated by an angle proportional to the pair's
radius. The swirl preserves the standard normal exactly, so ancestral
samples w = mapping(z) follow the same prior the synthesis network was
trained under, while z and w are far from linearly related.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DimensionError, MissingRecoderError
from ..numerics.dense import DenseNet
from ..numerics.optim import Adam
from ..numerics.rng import RngState
from .base import LatentModel
from .training import Stopwatch, TrainLog, check_finite
from .vae import VaeConfig, train_vae


@dataclass
class StyleConfig:
    latent_dim: int = 32
    gamma: float = 0.002
    epochs: int = 30
    lr: float = 1e-3
    swirl: float = 1.0
    mapping_hidden: tuple = (256, 256)
    mapping_steps: int = 6000
    mapping_lr: float = 2e-3
    mapping_batch: int = 256
    seed: int = 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["mapping_hidden"] = list(self.mapping_hidden)
        return d


def swirl(z, strength: float):
    """Rotate each coordinate pair (2k, 2k+1) by ``strength * radius``; odd tail passes through."""
    z = np.asarray(z, dtype=np.float64)
    out = z.copy()
    k = z.shape[1] // 2 * 2
    a, b = z[:, 0:k:2], z[:, 1:k:2]
    theta = strength * np.sqrt(a * a + b * b)
    c, s = np.cos(theta), np.sin(theta)
    out[:, 0:k:2] = a * c - b * s
    out[:, 1:k:2] = a * s + b * c
    return out


class StyleProxyModel(LatentModel):
    """Its code space for encode/decode is W; the prior lives in Z."""

    kind = "style"

    def __init__(self, mapping_net: DenseNet, synthesis: DenseNet, latent_dim: int, w_recoder: DenseNet | None = None, seed=0, hyper=None):
        if mapping_net.d_in != latent_dim or mapping_net.d_out != latent_dim:
            raise DimensionError("mapping network must be latent_dim -> latent_dim")
        if synthesis.d_in != latent_dim:
            raise DimensionError("synthesis input width != latent_dim")
        if all(lay.activation == "identity" for lay in mapping_net.layers):
            raise ValueError("mapping network must contain a nonlinearity")
        self.mapping_net = mapping_net
        self.synthesis = synthesis
        self.w_recoder = w_recoder
        self.latent_dim = latent_dim
        self.seed = seed
        self.hyper = dict(hyper or {})

    @property
    def recoder(self):
        return self.w_recoder

    @recoder.setter
    def recoder(self, net):
        self.w_recoder = net

    def sample_zw(self, rng: RngState, n: int):
        z = rng.normal((n, self.latent_dim))
        return z, self.mapping_net(z)

    def sample_latent(self, rng: RngState, n: int):
        return self.sample_zw(rng, n)[1]

    def encode_flat(self, flat):
        if self.w_recoder is None:
            raise MissingRecoderError("style proxy has no trained w-recoder; run train_recoder first")
        return self.w_recoder(flat)

    def decode_forward(self, codes):
        return self.synthesis.forward(codes)

    def decode_backward(self, cache, grad_flat):
        return self.synthesis.backward(cache, grad_flat)[1]

    def recoder_pairs(self, rng: RngState, n: int):
        _, w = self.sample_zw(rng, n)
        return self.synthesis(w), w

    def nets(self) -> dict:
        out = {"mapping_net": self.mapping_net, "synthesis": self.synthesis}
        if self.w_recoder is not None:
            out["w_recoder"] = self.w_recoder
        return out


def fit_mapping_net(latent_dim: int, strength: float, hidden, steps: int, lr: float, batch: int, rng: RngState, log: TrainLog | None = None):
    h = list(hidden)
    net = DenseNet.init([latent_dim] + h + [latent_dim], ["leaky_relu"] * len(h) + ["identity"], rng.spawn(0))
    data = rng.spawn(1)
    opt = Adam(lr=lr)
    running = 0.0
    for step in range(1, steps + 1):
        opt.lr = lr * (0.02 + 0.98 * 0.5 * (1 + np.cos(np.pi * (step - 1) / steps)))
        z = data.normal((batch, latent_dim))
        target = swirl(z, strength).astype(np.float32)
        pred, cache = net.forward(z)
        diff = pred - target
        loss = float(np.mean(diff.astype(np.float64) ** 2))
        check_finite(loss, "mapping loss", 0, step)
        grads, _ = net.backward(cache, (2.0 / diff.size) * diff, need_input_grad=False)
        opt.step(net.params(), grads)
        running += loss
        if log is not None and step % 500 == 0:
            log.record(step, mapping_mse=running / 500)
            running = 0.0
    return net


def train_style_proxy(images, cfg: StyleConfig | None = None, **overrides):
    """Returns ``(model, synthesis_log, mapping_log)``; the w-recoder is left untrained."""
    cfg = replace(cfg or StyleConfig(), **overrides)
    watch = Stopwatch()
    rng = RngState(cfg.seed)
    vae_cfg = VaeConfig(latent_dim=cfg.latent_dim, gamma=cfg.gamma, epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed)
    synth_vae, synth_log = train_vae(images, vae_cfg)
    map_log = TrainLog(cfg.seed)
    mapping = fit_mapping_net(
        cfg.latent_dim, cfg.swirl, cfg.mapping_hidden, cfg.mapping_steps,
        cfg.mapping_lr, cfg.mapping_batch, rng.spawn(7), map_log,
    )
    map_log.wall_clock = watch.elapsed()
    model = StyleProxyModel(mapping, synth_vae.decoder, cfg.latent_dim, None, cfg.seed, cfg.to_dict())
    return model, synth_log, map_log


def linear_fit_residual(X, Y) -> float:
    """Relative residual ||Y - X A||_F / ||Y - mean(Y)||_F of the best affine fit."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    Xa = np.hstack([X, np.ones((len(X), 1))])
    coef, *_ = np.linalg.lstsq(Xa, Y, rcond=None)
    resid = Y - Xa @ coef
    return float(np.linalg.norm(resid) / np.linalg.norm(Y - Y.mean(axis=0)))

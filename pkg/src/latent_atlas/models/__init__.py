from .base import (
    LatentModel,
    combine_split,
    decode,
    encode,
    latent_traversal,
    per_image_mse,
    reconstruction_mse,
    sample_ancestral,
)
from .gan import GanConfig, GanModel, discriminator_accuracy, nearest_neighbor_mse, pixel_variance, train_gan
from .recoder import RecoderConfig, recoder_latent_mse, train_recoder
from .style import StyleConfig, StyleProxyModel, linear_fit_residual, swirl, train_style_proxy
from .training import TrainLog
from .vae import SvaeModel, VaeConfig, VaeModel, train_svae, train_vae

TRAINERS = {"vae": train_vae, "svae": train_svae}


def train_ensemble(kind: str, images, seeds, **overrides):
    """Train one autoencoder instance per seed; returns ``(models, logs)``."""
    if kind not in TRAINERS:
        raise ValueError(f"ensembles are supported for {sorted(TRAINERS)}, not {kind!r}")
    pairs = [TRAINERS[kind](images, seed=int(s), **overrides) for s in seeds]
    return [m for m, _ in pairs], [log for _, log in pairs]


__all__ = [
    "GanConfig",
    "GanModel",
    "LatentModel",
    "RecoderConfig",
    "StyleConfig",
    "StyleProxyModel",
    "SvaeModel",
    "TrainLog",
    "VaeConfig",
    "VaeModel",
    "combine_split",
    "decode",
    "discriminator_accuracy",
    "encode",
    "latent_traversal",
    "linear_fit_residual",
    "nearest_neighbor_mse",
    "per_image_mse",
    "pixel_variance",
    "reconstruction_mse",
    "recoder_latent_mse",
    "sample_ancestral",
    "swirl",
    "train_ensemble",
    "train_gan",
    "train_recoder",
    "train_style_proxy",
    "train_svae",
    "train_vae",
]

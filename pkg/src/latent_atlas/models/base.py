"""Uniform encode/decode/sample contract over every latent-variable model."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError
from ..numerics.rng import RngState

IMAGE_SHAPE = (16, 16)


class LatentModel:
    """Base class. Subclasses set ``kind`` and ``latent_dim`` and implement
    ``encode_flat``, ``decode_forward`` and ``decode_backward``."""

    kind = "abstract"
    image_shape: tuple[int, ...] = IMAGE_SHAPE
    latent_dim: int
    seed: int = 0

    @property
    def n_pixels(self) -> int:
        return int(np.prod(self.image_shape))

    def encode_flat(self, flat):
        raise NotImplementedError

    def decode_forward(self, codes):
        """Returns ``(flat_images, cache)``."""
        raise NotImplementedError

    def decode_backward(self, cache, grad_flat):
        """Vector-Jacobian product of the decoder: image-space grad -> code-space grad."""
        raise NotImplementedError

    def sample_latent(self, rng: RngState, n: int):
        return rng.normal((n, self.latent_dim))

    def encode(self, images):
        flat = _flatten(images, self.n_pixels)
        return self.encode_flat(flat)

    def decode(self, codes):
        codes = np.asarray(codes)
        if codes.ndim != 2 or codes.shape[1] != self.latent_dim:
            raise DimensionError(
                f"{self.kind} decodes width {self.latent_dim}, got codes of shape {codes.shape}"
            )
        flat, _ = self.decode_forward(codes.astype(np.float32, copy=False))
        return flat.reshape((len(codes),) + tuple(self.image_shape))

    def describe(self) -> str:
        return f"{self.kind}(d={self.latent_dim}, seed={self.seed})"


def _flatten(images, n_pixels):
    x = np.asarray(images, dtype=np.float32)
    if x.ndim <= 2 and x.size == n_pixels:
        # a single image, flat or 2-D
        x = x.reshape(1, -1)
    x = x.reshape(len(x), -1)
    if x.shape[1] != n_pixels:
        raise DimensionError(f"expected {n_pixels} pixels per image, got {x.shape[1]}")
    return x


def encode(model: LatentModel, images):
    return model.encode(images)


def decode(model: LatentModel, codes):
    return model.decode(codes)


def sample_ancestral(model: LatentModel, rng: RngState, n: int):
    """Draw codes from the prior (through the mapping network for style proxies) and decode."""
    if n == 0:
        return np.zeros((0,) + tuple(model.image_shape), dtype=np.float32)
    return model.decode(model.sample_latent(rng, n))


def per_image_mse(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(len(a), -1)
    b = np.asarray(b, dtype=np.float64).reshape(len(b), -1)
    return ((a - b) ** 2).mean(axis=1)


def reconstruction_mse(model: LatentModel, images) -> float:
    """Mean over images and pixels of the encode-decode squared error (R-MSE)."""
    rec = model.decode(model.encode(images))
    return float(per_image_mse(images, rec).mean())


def latent_traversal(model: LatentModel, z, var_index: int, lo=-2.25, hi=2.25, steps=11):
    """Decode ``z`` with one coordinate swept over ``steps`` evenly spaced values.

    Returns ``(strip, images)`` where ``strip`` places the images side by side.
    """
    z = np.asarray(z, dtype=np.float32).reshape(-1)
    if not 0 <= var_index < model.latent_dim:
        raise IndexError(f"var_index {var_index} outside [0, {model.latent_dim})")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if z.shape[0] != model.latent_dim:
        raise DimensionError(f"z has width {z.shape[0]}, model expects {model.latent_dim}")
    codes = np.repeat(z[None], steps, axis=0)
    codes[:, var_index] = np.linspace(lo, hi, steps, dtype=np.float64).astype(np.float32)
    images = model.decode(codes)
    strip = np.concatenate(list(images), axis=1)
    return strip, images


def combine_split(x1, x2, sigma):
    """Split-decoder output: sigma * x1 + (1 - sigma) * x2."""
    return sigma * x1 + (1 - sigma) * x2

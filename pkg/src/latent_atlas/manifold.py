"""Deterministic 16x16 Gaussian-blob image manifold with six factors."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .numerics.rng import RngState

SIZE = 16
FACTOR_NAMES = ("cx", "cy", "r", "a", "b", "e")
FACTOR_RANGES = {
    "cx": (0.2, 0.8),
    "cy": (0.2, 0.8),
    "r": (0.08, 0.30),
    "a": (0.5, 1.0),
    "b": (0.0, 0.3),
    "e": (0.5, 2.0),
}
_LO = np.array([FACTOR_RANGES[k][0] for k in FACTOR_NAMES])
_HI = np.array([FACTOR_RANGES[k][1] for k in FACTOR_NAMES])

# pixel centers; u runs along columns (px), v along rows (py)
_COORDS = (np.arange(SIZE) + 0.5) / SIZE


@dataclass(frozen=True)
class BlobFactors:
    cx: float
    cy: float
    r: float
    a: float
    b: float
    e: float

    def __post_init__(self):
        check_factors(np.array(self.as_tuple(), dtype=np.float64)[None])

    def as_tuple(self):
        return (self.cx, self.cy, self.r, self.a, self.b, self.e)


def check_factors(factors, atol: float = 1e-6):
    factors = np.asarray(factors, dtype=np.float64)
    bad = (factors < _LO - atol) | (factors > _HI + atol)
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        name = FACTOR_NAMES[col]
        raise ValueError(
            f"factor {name}={factors[row, col]:.6g} (row {row}) outside {FACTOR_RANGES[name]}"
        )


def render_batch(factors) -> np.ndarray:
    """Render an (n, 6) factor matrix to float32 images of shape (n, 16, 16)."""
    f = np.atleast_2d(np.asarray(factors, dtype=np.float64))
    if f.shape[1] != 6:
        raise ValueError(f"expected 6 factors per row, got {f.shape[1]}")
    check_factors(f)
    cx, cy, r, a, b, e = (f[:, i, None, None] for i in range(6))
    u = _COORDS[None, None, :]
    v = _COORDS[None, :, None]
    q = ((u - cx) ** 2 * e + (v - cy) ** 2 / e) / (2 * r * r)
    img = b + a * np.exp(-q)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def render_blob(f) -> np.ndarray:
    if isinstance(f, BlobFactors):
        f = f.as_tuple()
    return render_batch(np.asarray(f, dtype=np.float64)[None])[0]


def sample_factors(rng: RngState, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    u = rng.uniform((n, 6))
    # uniforms live on (0, 1]; clip guards the top edge against rounding
    return np.clip(_LO + (_HI - _LO) * u, _LO, _HI).astype(np.float32)


@dataclass
class Dataset:
    images: np.ndarray  # (n, 16, 16) float32 in [0, 1]
    factors: np.ndarray  # (n, 6) float32
    seed: int

    @property
    def n(self) -> int:
        return len(self.images)

    @property
    def flat(self) -> np.ndarray:
        return self.images.reshape(self.n, -1)

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "n": self.n,
            "factor_ranges": {k: list(v) for k, v in FACTOR_RANGES.items()},
            "sha256": self.checksum(),
        }

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images, dtype="<f4").tobytes())
        h.update(np.ascontiguousarray(self.factors, dtype="<f4").tobytes())
        return h.hexdigest()

    def split(self, holdout: float = 0.1):
        """Deterministic train/held-out split: the last ``holdout`` fraction is held out."""
        k = self.n - max(1, int(round(self.n * holdout)))
        return self.images[:k], self.images[k:]


def make_dataset(seed: int, n: int) -> Dataset:
    factors = sample_factors(RngState(seed), n)
    return Dataset(render_batch(factors), factors, int(seed))


def out_of_range_probe_set(dataset, k: int) -> np.ndarray:
    """Intensity-inverted copies of the first ``k`` images."""
    images = dataset.images if isinstance(dataset, Dataset) else np.asarray(dataset)
    if k > len(images):
        raise ValueError(f"k={k} exceeds dataset size {len(images)}")
    return (1.0 - images[:k]).astype(np.float32)


def mean_pairwise_mse(images) -> float:
    """Mean per-pixel MSE over all unordered pairs, accumulated in float64."""
    x = np.asarray(images, dtype=np.float64).reshape(len(images), -1)
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least two images")
    sq = (x * x).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    iu = np.triu_indices(n, k=1)
    return float(np.maximum(d[iu], 0.0).mean() / p)

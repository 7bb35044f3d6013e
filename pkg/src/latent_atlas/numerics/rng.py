"""Portable splitmix64 stream with Box-Muller normals.

The stream is counter based: the i-th raw output of a state seeded with ``s``
is ``mix(s + (i + 1) * GOLDEN)``, so a block of outputs is computed with
vectorized uint64 arithmetic and is bit-identical on every platform.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def splitmix64(x: int) -> int:
    """One splitmix64 step applied to ``x`` (used for seed derivation)."""
    z = np.array([(x + GOLDEN) & _MASK], dtype=np.uint64)
    with np.errstate(over="ignore"):
        return int(_mix(z)[0])


def child_seed(parent_seed: int, stream_index: int) -> int:
    return splitmix64((parent_seed ^ stream_index) & _MASK)


class RngState:
    """Single-owner random stream. Do not share between workers; use ``spawn``."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _MASK
        self.counter = int(counter)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, counter={self.counter})"

    def spawn(self, stream_index: int) -> "RngState":
        return RngState(child_seed(self.seed, stream_index))

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + steps * np.uint64(GOLDEN)
            out = _mix(z)
        self.counter += n
        return out

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Float64 uniforms on (0, 1] scaled to (low, high]."""
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        u = ((self.next_u64(n) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        return (low + (high - low) * u).reshape(shape)

    def normal(self, shape, dtype=np.float32) -> np.ndarray:
        shape = _as_shape(shape)
        n = int(np.prod(shape, dtype=np.int64))
        half = (n + 1) // 2
        u = self.uniform(2 * half)
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * half, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape).astype(dtype)

    def permutation(self, n: int) -> np.ndarray:
        # argsort of uniforms; stable sort makes ties deterministic
        return np.argsort(self.uniform(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        return self.permutation(n)[:k]


def _as_shape(shape) -> tuple[int, ...]:
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0:
        raise ValueError("shape must be non-empty")
    return shape


def rng_normal(state: RngState, shape) -> np.ndarray:
    return state.normal(shape)

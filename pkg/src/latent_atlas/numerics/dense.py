"""Feed-forward dense networks with hand-written reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from .rng import RngState

ACTIVATIONS = ("identity", "relu", "leaky_relu", "sigmoid", "tanh")


def sigmoid(x):
    # split by sign so large |x| never overflows exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activate(name: str, x, alpha: float = 0.2):
    if name == "identity":
        return x
    if name == "relu":
        return np.maximum(x, 0)
    if name == "leaky_relu":
        return np.where(x > 0, x, alpha * x)
    if name == "sigmoid":
        return sigmoid(x)
    if name == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation {name!r}")


def activate_grad(name: str, pre, post, grad, alpha: float = 0.2):
    """Chain ``grad`` (w.r.t. the activation output) back to the pre-activation."""
    if name == "identity":
        return grad
    if name == "relu":
        return grad * (pre > 0)
    if name == "leaky_relu":
        return grad * np.where(pre > 0, 1.0, alpha).astype(pre.dtype)
    if name == "sigmoid":
        return grad * post * (1 - post)
    if name == "tanh":
        return grad * (1 - post * post)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (d_out, d_in)
    bias: np.ndarray  # (d_out,)
    activation: str = "identity"
    alpha: float = 0.2

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} disagree"
            )

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]


@dataclass
class Cache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


class DenseNet:
    """An ordered stack of affine layers, each followed by an activation."""

    def __init__(self, layers: list[Layer]):
        for a, b in zip(layers, layers[1:]):
            if a.d_out != b.d_in:
                raise DimensionError(f"layer widths do not chain: {a.d_out} -> {b.d_in}")
        self.layers = list(layers)

    @classmethod
    def init(cls, sizes, activations, rng: RngState, alpha: float = 0.2, dtype=np.float32):
        """He-style initialization: W ~ N(0, 2/d_in), b = 0."""
        if isinstance(activations, str):
            activations = [activations] * (len(sizes) - 1)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for d_in, d_out, act in zip(sizes[:-1], sizes[1:], activations):
            w = rng.normal((d_out, d_in), dtype=np.float64) * np.sqrt(2.0 / d_in)
            layers.append(
                Layer(w.astype(dtype), np.zeros(d_out, dtype=dtype), act, alpha)
            )
        return cls(layers)

    def __repr__(self) -> str:
        dims = [self.d_in] + [lay.d_out for lay in self.layers]
        acts = ",".join(lay.activation for lay in self.layers)
        return f"DenseNet({'->'.join(map(str, dims))}; {acts})"

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.layers[-1].d_out

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def params(self) -> list[np.ndarray]:
        out = []
        for lay in self.layers:
            out.extend((lay.weight, lay.bias))
        return out

    def copy(self) -> "DenseNet":
        return self.astype(self.dtype)

    def astype(self, dtype) -> "DenseNet":
        return DenseNet(
            [
                Layer(lay.weight.astype(dtype), lay.bias.astype(dtype), lay.activation, lay.alpha)
                for lay in self.layers
            ]
        )

    def forward(self, x):
        x = np.asarray(x)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise DimensionError(f"expected batch of width {self.d_in}, got shape {x.shape}")
        cache = Cache()
        h = x.astype(self.dtype, copy=False)
        for lay in self.layers:
            cache.inputs.append(h)
            pre = h @ lay.weight.T + lay.bias
            h = activate(lay.activation, pre, lay.alpha)
            cache.pre.append(pre)
            cache.post.append(h)
        return h, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache: Cache, grad_output, need_input_grad: bool = True):
        """Returns ``(param_grads, input_grads)``; param grads follow ``params()``."""
        g = np.asarray(grad_output, dtype=self.dtype)
        if g.shape != cache.post[-1].shape:
            raise DimensionError(
                f"grad_output shape {g.shape} != output shape {cache.post[-1].shape}"
            )
        grads: list[np.ndarray] = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            lay = self.layers[i]
            g = activate_grad(lay.activation, cache.pre[i], cache.post[i], g, lay.alpha)
            grads[2 * i] = g.T @ cache.inputs[i]
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0 or need_input_grad:
                g = g @ lay.weight
        return grads, (g if need_input_grad else None)

    def to_spec(self) -> list[dict]:
        return [
            {
                "d_in": lay.d_in,
                "d_out": lay.d_out,
                "activation": lay.activation,
                "alpha": lay.alpha,
            }
            for lay in self.layers
        ]


def forward(net: DenseNet, batch):
    return net.forward(batch)


def backward(net: DenseNet, cache: Cache, grad_output):
    return net.backward(cache, grad_output)

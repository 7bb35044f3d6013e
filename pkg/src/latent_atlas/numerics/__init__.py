from .dense import ACTIVATIONS, DenseNet, Layer, backward, forward, sigmoid
from .gradcheck import grad_check, grad_check_net
from .linalg import solve_least_squares
from .optim import Adam, adam_step
from .rng import RngState, child_seed, rng_normal, splitmix64

__all__ = [
    "ACTIVATIONS",
    "Adam",
    "DenseNet",
    "Layer",
    "RngState",
    "adam_step",
    "backward",
    "child_seed",
    "forward",
    "grad_check",
    "grad_check_net",
    "rng_normal",
    "sigmoid",
    "solve_least_squares",
    "splitmix64",
]

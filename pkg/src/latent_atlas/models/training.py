from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingDivergedError
from ..numerics.rng import RngState


@dataclass
class TrainLog:
    seed: int
    epochs: list[dict] = field(default_factory=list)
    wall_clock: float = 0.0
    heldout_mse: float | None = None

    def record(self, epoch: int, **components):
        if self.epochs and epoch <= self.epochs[-1]["epoch"]:
            raise ValueError("epoch indices must increase")
        row = {"epoch": epoch}
        row.update({k: float(v) for k, v in components.items()})
        self.epochs.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        if not self.epochs:
            buf.write("epoch\n")
            return buf.getvalue()
        keys = list(self.epochs[0])
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in self.epochs:
            w.writerow({k: (f"{row[k]:.8g}" if k != "epoch" else row[k]) for k in keys})
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "n_epochs": len(self.epochs),
            "heldout_mse": self.heldout_mse,
            "final": self.epochs[-1] if self.epochs else None,
        }


class Stopwatch:
    def __init__(self):
        self.start = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def iterate_minibatches(n: int, batch: int, rng: RngState):
    order = rng.permutation(n)
    for i in range(0, n, batch):
        yield order[i : i + batch]


def check_finite(value, what: str, epoch: int, step: int):
    if not np.isfinite(value):
        raise TrainingDivergedError(f"{what} became {value} at epoch {epoch}, step {step}")

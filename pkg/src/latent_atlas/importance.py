"""Latent-variable ranking by reconstruction gain (error increase when a coordinate is zeroed)."""

from __future__ import annotations

import csv
import io
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models.base import per_image_mse

THREADS_ENV = "LATENT_ATLAS_THREADS"


@dataclass
class GainReport:
    gains: np.ndarray  # (d,) float64, mean per-pixel MSE units
    order: np.ndarray  # descending gain, ties by ascending index
    dataset_size: int

    @property
    def cumulative_share(self) -> np.ndarray:
        """Running share of total positive gain, in rank order."""
        pos = np.clip(self.gains[self.order], 0.0, None)
        total = pos.sum()
        if total <= 0:
            return np.zeros(len(pos))
        return np.cumsum(pos) / total

    def to_csv(self) -> str:
        rank = np.empty(len(self.order), dtype=int)
        rank[self.order] = np.arange(len(self.order))
        share = self.cumulative_share
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable_index", "gain", "rank", "cumulative_share"])
        for i, g in enumerate(self.gains):
            w.writerow([i, f"{g:.10g}", rank[i], f"{share[rank[i]]:.6f}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "gains": [float(g) for g in self.gains],
            "order": [int(i) for i in self.order],
            "cumulative_share": [float(s) for s in self.cumulative_share],
            "dataset_size": self.dataset_size,
        }


def _baseline(model, images):
    codes = model.encode(images)
    return codes, per_image_mse(images, model.decode(codes))


def _gain_from(model, images, codes, base_err, var_index) -> float:
    z = codes.copy()
    z[:, var_index] = 0.0
    err = per_image_mse(images, model.decode(z))
    return float(np.mean(err - base_err))


def reconstruction_gain(model, images, var_index: int) -> float:
    """Mean over images of MSE(x, D(E(x) with z[var] = 0)) - MSE(x, D(E(x)))."""
    if not 0 <= var_index < model.latent_dim:
        raise IndexError(f"var_index {var_index} outside [0, {model.latent_dim})")
    if len(images) == 0:
        raise ValueError("empty dataset")
    codes, base = _baseline(model, images)
    return _gain_from(model, images, codes, base, var_index)


def rank_variables(model, images, threads: int | None = None) -> GainReport:
    if len(images) == 0:
        raise ValueError("empty dataset")
    codes, base = _baseline(model, images)
    d = model.latent_dim
    threads = threads or int(os.environ.get(THREADS_ENV, "1"))
    job = lambda i: _gain_from(model, images, codes, base, i)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            gains = list(pool.map(job, range(d)))
    else:
        gains = [job(i) for i in range(d)]
    gains = np.array(gains, dtype=np.float64)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(d), -gains))
    return GainReport(gains, order, len(images))


def select_top(report: GainReport, n: int, support_size: int | None = None) -> np.ndarray:
    d = len(report.order)
    if not 1 <= n <= d:
        raise ValueError(f"n={n} outside [1, {d}]")
    if support_size is not None and 2**n >= support_size:
        warnings.warn(
            f"2^{n} = {2**n} sectors is not below the support-set size {support_size}",
            stacklevel=2,
        )
    return report.order[:n].copy()

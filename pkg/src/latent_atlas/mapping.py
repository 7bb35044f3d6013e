"""Linear maps between latent spaces: fitting, application, and three-metric evaluation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .models.base import per_image_mse
from .numerics.linalg import solve_least_squares
from .numerics.optim import Adam
from .numerics.rng import RngState


@dataclass
class LinearMap:
    A: np.ndarray  # (dst_dim, src_dim) float32
    bias: np.ndarray | None = None
    src_model_id: str = ""
    dst_model_id: str = ""
    fit_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float32)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float32)
            if self.bias.shape != (self.A.shape[0],):
                raise DimensionError("bias length must equal dst_dim")

    @property
    def src_dim(self) -> int:
        return self.A.shape[1]

    @property
    def dst_dim(self) -> int:
        return self.A.shape[0]

    @classmethod
    def identity(cls, d: int, model_id: str = "") -> "LinearMap":
        return cls(np.eye(d, dtype=np.float32), None, model_id, model_id, {"method": "identity"})

    def __call__(self, codes):
        return apply_map(self, codes)


def apply_map(m: LinearMap, codes) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.float32)
    if codes.ndim != 2 or codes.shape[1] != m.src_dim:
        raise DimensionError(f"map expects width {m.src_dim}, got shape {codes.shape}")
    out = codes @ m.A.T
    if m.bias is not None:
        out = out + m.bias
    return out


def latent_mse(pred, target) -> float:
    """Per-component latent MSE: mean over samples and dimensions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean((pred - target) ** 2))


def fit_linear_map(Z1, Z2, bias: bool = False, ridge: float = 1e-4, src_id="", dst_id="", source="full-data") -> LinearMap:
    """Least-squares map from rows of ``Z1`` to rows of ``Z2``.

    Minimizes ``sum ||A z1 (+ b) - z2||^2 + ridge * ||A||^2``; the bias, when
    requested, is not penalized (data are centered before solving).
    """
    Z1 = np.asarray(Z1, dtype=np.float64)
    Z2 = np.asarray(Z2, dtype=np.float64)
    if Z1.ndim != 2 or Z2.ndim != 2:
        raise DimensionError("code matrices must be 2-D")
    if len(Z1) != len(Z2):
        raise DimensionError(f"row-count mismatch: {len(Z1)} vs {len(Z2)}")
    if bias:
        m1, m2 = Z1.mean(axis=0), Z2.mean(axis=0)
        X = solve_least_squares(Z1 - m1, Z2 - m2, ridge).astype(np.float64)
        b = m2 - m1 @ X
    else:
        X = solve_least_squares(Z1, Z2, ridge).astype(np.float64)
        b = None
    meta = {"method": "closed-form", "ridge": ridge, "bias": bias, "fit_on": source, "m": len(Z1)}
    return LinearMap(X.T, b, src_id, dst_id, meta)


def fit_linear_map_minibatch(sampler, src_dim: int, dst_dim: int, steps: int = 2000, lr: float = 1e-2, bias: bool = False, seed: int = 0, src_id="", dst_id="") -> LinearMap:
    """Iterative least squares with Adam from a zero-initialized map.

    ``sampler(rng)`` returns a matched ``(z1, z2)`` batch; it may resample
    fresh pairs on every call or draw minibatches from fixed data.
    """
    A = np.zeros((dst_dim, src_dim), dtype=np.float64)
    b = np.zeros(dst_dim, dtype=np.float64)
    params = [A, b] if bias else [A]
    opt = Adam(lr=lr)
    rng = RngState(seed)
    trace = []
    for _ in range(steps):
        z1, z2 = sampler(rng)
        z1 = np.asarray(z1, dtype=np.float64)
        z2 = np.asarray(z2, dtype=np.float64)
        resid = z1 @ A.T + (b if bias else 0.0) - z2
        scale = 2.0 / resid.size
        grads = [scale * resid.T @ z1] + ([scale * resid.sum(axis=0)] if bias else [])
        opt.step(params, grads)
        trace.append(float(np.mean(resid**2)))
    meta = {"method": "minibatch", "steps": steps, "lr": lr, "bias": bias, "seed": seed, "fit_on": "sampler"}
    m = LinearMap(A, b if bias else None, src_id, dst_id, meta)
    m.fit_meta["final_batch_l_mse"] = trace[-1] if trace else None
    return m


def array_sampler(Z1, Z2, batch: int = 128):
    """Minibatches drawn with replacement from fixed matched code arrays."""
    Z1 = np.asarray(Z1)
    Z2 = np.asarray(Z2)

    def sample(rng: RngState):
        idx = (rng.uniform(batch) * len(Z1)).astype(int) % len(Z1)
        return Z1[idx], Z2[idx]

    return sample


@dataclass
class EvalReport:
    l_mse: float
    r_mse: float
    m_mse: float
    n_eval: int
    l_mse_raw: float = 0.0
    src: str = ""
    dst: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "src": self.src,
            "dst": self.dst,
            "l_mse": self.l_mse,
            "l_mse_raw": self.l_mse_raw,
            "r_mse": self.r_mse,
            "m_mse": self.m_mse,
            "n_eval": self.n_eval,
        }
        d.update(self.extra)
        return d


def evaluate_mapping(src_model, dst_model, m: LinearMap, images) -> EvalReport:
    """L-MSE (per component), R-MSE of the source model, and M-MSE after mapping."""
    if m.src_dim != src_model.latent_dim or m.dst_dim != dst_model.latent_dim:
        raise DimensionError(
            f"map {m.src_dim}->{m.dst_dim} does not fit models "
            f"{src_model.latent_dim}->{dst_model.latent_dim}"
        )
    z1 = src_model.encode(images)
    z2 = dst_model.encode(images)
    mapped = apply_map(m, z1)
    l_mse = latent_mse(mapped, z2)
    r_mse = float(per_image_mse(images, src_model.decode(z1)).mean())
    m_mse = float(per_image_mse(images, dst_model.decode(mapped)).mean())
    return EvalReport(l_mse, r_mse, m_mse, len(images), l_mse * m.dst_dim, m.src_model_id, m.dst_model_id)


# ---------------------------------------------------------------- type matrix

TYPE2_KINDS = {"vae", "svae"}


def relocation_type(kind_a: str, kind_b: str, same_instance: bool) -> str:
    if same_instance:
        return "identity"
    if kind_a == kind_b:
        return "type1"
    if {kind_a, kind_b} <= TYPE2_KINDS:
        return "type2"
    return "type3"


@dataclass
class MatrixResult:
    names: list[str]
    kinds: list[str]
    cells: dict  # (i, j) -> EvalReport
    fit_on: str
    maps: dict = field(default_factory=dict)  # (i, j) -> LinearMap, off-diagonal only

    def rows(self) -> list[dict]:
        out = []
        for (i, j), rep in sorted(self.cells.items()):
            row = rep.to_dict()
            row.update(
                {
                    "from": self.names[i],
                    "to": self.names[j],
                    "from_kind": self.kinds[i],
                    "to_kind": self.kinds[j],
                    "type": relocation_type(self.kinds[i], self.kinds[j], i == j),
                    "fit_on": self.fit_on if i != j else "identity",
                }
            )
            out.append(row)
        return out

    def kind_table(self) -> list[dict]:
        """Average cells by (from kind, to kind), preferring distinct-instance pairs.

        Same-kind rows fall back to the identity diagonal only when a kind has a
        single instance.
        """
        groups: dict = {}
        for row in self.rows():
            groups.setdefault((row["from_kind"], row["to_kind"]), []).append(row)
        table = []
        order = list(dict.fromkeys(self.kinds))
        for ka in order:
            for kb in order:
                rows = groups.get((ka, kb), [])
                real = [r for r in rows if r["type"] != "identity"]
                use = real or rows
                if not use:
                    continue
                vals = {k: np.array([r[k] for r in use]) for k in ("l_mse", "r_mse", "m_mse")}
                entry = {"from": ka, "to": kb, "n_pairs": len(use), "type": use[0]["type"]}
                for k, v in vals.items():
                    entry[k] = float(v.mean())
                    entry[k + "_std"] = float(v.std())
                table.append(entry)
        return table

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["From", "To", "Type", "Pairs", "L-MSE", "R-MSE", "M-MSE", "L-MSE std", "R-MSE std", "M-MSE std"])
        for e in self.kind_table():
            w.writerow(
                [e["from"].upper(), e["to"].upper(), e["type"], e["n_pairs"]]
                + [f"{e[k]:.6f}" for k in ("l_mse", "r_mse", "m_mse", "l_mse_std", "r_mse_std", "m_mse_std")]
            )
        return buf.getvalue()


def run_type_matrix(
    models, images_fit, images_eval, names=None, bias=False, ridge=1e-4, fit_on="full-data",
    method="closed-form", minibatch_steps=2000,
) -> MatrixResult:
    """Fit and evaluate maps for all ordered model pairs.

    ``images_fit`` are the visible samples whose paired encodings define each
    map (a support set or the full data); ``images_eval`` are held out.
    Diagonal cells use the identity map on the same instance. The minibatch
    method ignores ``ridge``.
    """
    if method not in ("closed-form", "minibatch"):
        raise ValueError(f"unknown fit method {method!r}")
    if len(models) < 2:
        raise ValueError("need at least two models")
    names = names or [f"{m.kind}{i}" for i, m in enumerate(models)]
    codes_fit = [m.encode(images_fit) for m in models]
    cells, maps = {}, {}
    for i, a in enumerate(models):
        for j, b in enumerate(models):
            if i == j:
                mp = LinearMap.identity(a.latent_dim, names[i])
            elif method == "minibatch":
                sampler = array_sampler(codes_fit[i], codes_fit[j], min(128, len(images_fit)))
                mp = fit_linear_map_minibatch(
                    sampler, a.latent_dim, b.latent_dim, minibatch_steps, bias=bias,
                    seed=i * len(models) + j, src_id=names[i], dst_id=names[j],
                )
                mp.fit_meta["fit_on"] = fit_on
            else:
                mp = fit_linear_map(codes_fit[i], codes_fit[j], bias, ridge, names[i], names[j], fit_on)
            rep = evaluate_mapping(a, b, mp, images_eval)
            rep.src, rep.dst = names[i], names[j]
            if i != j:
                maps[(i, j)] = mp
                rep.extra["l_mse_fit"] = latent_mse(apply_map(mp, codes_fit[i]), codes_fit[j])
            cells[(i, j)] = rep
    return MatrixResult(list(names), [m.kind for m in models], cells, fit_on, maps)


def zw_separation(style_model, target_model, n: int = 10000, seed: int = 0, train_fraction: float = 0.8) -> dict:
    """Held-out L-MSE of linear maps into ``target_model``'s latent space from z and from w.

    Both maps see the same samples: z from the prior, w = mapping(z), images
    synthesized from w and encoded by the target model.
    """
    z, w = style_model.sample_zw(RngState(seed), n)
    target = target_model.encode(style_model.synthesis(w))
    k = int(n * train_fraction)
    out = {"n_train": k, "n_test": n - k}
    for name, src in (("z", z), ("w", w)):
        mp = fit_linear_map(src[:k], target[:k])
        out[f"l_mse_{name}"] = latent_mse(apply_map(mp, src[k:]), target[k:])
    out["ratio"] = out["l_mse_z"] / out["l_mse_w"]
    return out

"""End-to-end toy study driven by a validated run config.

Layout of the output directory::

    data/            dataset tensors + manifest
    models/          one model file per trained instance
    logs/            per-instance training curves (CSV)
    maps/            one linear-map file per ordered model pair
    reports/         gains, support set, diversity, matrix, table, probes
    figures/         PGM figure analogs
    summary.json     artifact digests and headline numbers
    timings.json     wall-clock seconds (the only non-reproducible file)
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import storage
from .config import HYPER_CLASSES
from .errors import ConfigError
from .importance import rank_variables
from .inversion import GradientConfig, _invert, range_probe
from .manifold import make_dataset, mean_pairwise_mse, out_of_range_probe_set
from .mapping import run_type_matrix, zw_separation
from .models import (
    RecoderConfig,
    latent_traversal,
    sample_ancestral,
    train_gan,
    train_recoder,
    train_style_proxy,
    train_svae,
    train_vae,
)
from .models.training import Stopwatch
from .numerics.rng import RngState
from .support import build_support_set, diversity_score


def _say(msg: str, quiet: bool):
    if not quiet:
        print(msg, file=sys.stderr, flush=True)


def train_instance(kind: str, latent_dim: int, seed: int, hyper: dict, recoder: dict | None, images):
    """Train one model; returns ``(model, logs)`` where logs maps a stage to its TrainLog."""
    cls = HYPER_CLASSES[kind]
    try:
        cfg = replace(cls(), latent_dim=latent_dim, seed=seed, **hyper)
    except TypeError as exc:
        raise ConfigError(f"{kind} hyperparams: {exc}") from None
    if kind == "vae":
        model, log = train_vae(images, cfg)
        logs = {"train": log}
    elif kind == "svae":
        model, log = train_svae(images, cfg)
        logs = {"train": log}
    elif kind == "gan":
        model, log = train_gan(images, cfg)
        logs = {"train": log}
    else:
        model, synth_log, map_log = train_style_proxy(images, cfg)
        logs = {"synthesis": synth_log, "mapping": map_log}
    if recoder is not None:
        rcfg = replace(RecoderConfig(), seed=seed, **recoder)
        model, rlog = train_recoder(model, rcfg)
        logs["recoder"] = rlog
    return model, logs


def tile(images, ncols: int, gap: int = 1, fill: float = 1.0) -> np.ndarray:
    """Arrange (n, h, w) images on a grid separated by ``gap`` pixels of ``fill``."""
    images = np.asarray(images, dtype=np.float32)
    n, h, w = images.shape
    nrows = -(-n // ncols)
    out = np.full((nrows * (h + gap) - gap, ncols * (w + gap) - gap), fill, dtype=np.float32)
    for k, img in enumerate(images):
        r, c = divmod(k, ncols)
        out[r * (h + gap) : r * (h + gap) + h, c * (w + gap) : c * (w + gap) + w] = img
    return out


def columns(*stacks, gap: int = 1) -> np.ndarray:
    """Rows of side-by-side images: column k comes from ``stacks[k]``."""
    n = len(stacks[0])
    inter = [img for i in range(n) for img in (s[i] for s in stacks)]
    return tile(np.clip(np.stack(inter), 0, 1), len(stacks), gap)


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: dict, out, threads: int | None = None, quiet: bool = False) -> dict:
    """Run the full study; every artifact except ``timings.json`` is reproducible bit for bit."""
    out = Path(out)
    dirs = {k: out / k for k in ("data", "models", "logs", "maps", "reports", "figures")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    timings = {}
    clock = Stopwatch()

    # dataset
    dcfg = cfg["dataset"]
    ds = make_dataset(dcfg["seed"], dcfg["n"])
    storage.save_dataset(dirs["data"], ds)
    fit, held = ds.split(dcfg["holdout"])
    n_eval = min(cfg["eval"]["n_images"], len(held))
    ev = held[:n_eval]
    baseline = mean_pairwise_mse(ev)
    _say(f"dataset: {ds.n} images, fit {len(fit)}, eval {n_eval}", quiet)

    # models
    models, names = [], []
    train_summary = {}
    for entry in cfg["models"]:
        for seed in entry["seeds"]:
            name = f"{entry['kind']}{seed}"
            if name in names:
                raise ConfigError(f"duplicate model instance {name}")
            t0 = clock.elapsed()
            _say(f"training {name}", quiet)
            model, logs = train_instance(
                entry["kind"], entry["latent_dim"], seed, entry["hyperparams"], entry.get("recoder"), fit
            )
            timings[f"train_{name}"] = clock.elapsed() - t0
            storage.save_model(dirs["models"] / f"{name}.bin", model)
            for stage, log in logs.items():
                (dirs["logs"] / f"{name}_{stage}.csv").write_text(log.to_csv())
            train_summary[name] = {stage: log.summary() for stage, log in logs.items()}
            models.append(model)
            names.append(name)

    # feature importance and support set on the reference autoencoder
    scfg = cfg["support"]
    ref_name = scfg["reference"] or next(n for n, m in zip(names, models) if m.kind in ("vae", "svae"))
    if ref_name not in names:
        raise ConfigError(f"support.reference {ref_name!r} is not a trained instance; have {names}")
    ref = models[names.index(ref_name)]
    t0 = clock.elapsed()
    report = rank_variables(ref, fit[: scfg["gain_images"]], threads=threads)
    timings["gains"] = clock.elapsed() - t0
    (dirs["reports"] / "gains.csv").write_text(report.to_csv())
    storage.write_json(dirs["reports"] / "gains.json", {"model": ref_name, **report.to_dict()})

    Z = ref.encode(fit)
    support = build_support_set(
        Z, report, scfg["n_features"], scfg["threshold"], scfg["target_size"],
        rule=scfg["rule"], random_pick=scfg["pick"] == "random", seed=scfg["seed"],
    )
    storage.write_json(dirs["reports"] / "support.json", {"model": ref_name, **support.to_dict()})
    rand_idx = RngState(scfg["seed"]).spawn(99).choice(len(fit), len(support))
    div_support = diversity_score(fit[support.indices])
    div_random = diversity_score(fit[rand_idx])
    diversity = {
        "support": div_support,
        "random": div_random,
        "ratio": div_support / div_random,
        "dataset_baseline": baseline,
        "size": len(support),
    }
    storage.write_json(dirs["reports"] / "diversity.json", diversity)

    # map matrix
    mcfg = cfg["mapping"]
    usable = [i for i, m in enumerate(models) if m.kind in ("vae", "svae") or m.recoder is not None]
    fit_images = fit[support.indices] if mcfg["fit_on"] == "support" else fit[: mcfg["full_fit_images"]]
    t0 = clock.elapsed()
    matrix = run_type_matrix(
        [models[i] for i in usable], fit_images, ev, [names[i] for i in usable],
        bias=mcfg["bias"], ridge=mcfg["ridge"], fit_on=mcfg["fit_on"],
        method=mcfg["method"], minibatch_steps=mcfg["minibatch_steps"],
    )
    timings["matrix"] = clock.elapsed() - t0
    for (i, j), mp in sorted(matrix.maps.items()):
        storage.save_map(dirs["maps"] / f"{matrix.names[i]}__{matrix.names[j]}.bin", mp)
    (dirs["reports"] / "table2.csv").write_text(matrix.to_csv())
    storage.write_json(
        dirs["reports"] / "matrix.json",
        {"cells": matrix.rows(), "by_kind": matrix.kind_table(), "dataset_baseline": baseline, "fit_size": len(fit_images)},
    )

    # probes: generated vs intensity-inverted images
    pcfg = cfg["probe"]
    gcfg = GradientConfig(steps=pcfg["steps"])
    probes = {}
    t0 = clock.elapsed()
    out_range = out_of_range_probe_set(ev, min(pcfg["k"], len(ev)))
    for name, model in zip(names, models):
        if model.kind in ("svae", "style"):
            continue
        if pcfg["method"] != "gradient" and model.recoder is None:
            continue
        in_range = sample_ancestral(model, RngState(dcfg["seed"]).spawn(7), len(out_range))
        probes[name] = range_probe(model, in_range, out_range, pcfg["method"], gcfg)
        shown = 8
        res_in = _invert(model, in_range[:shown], pcfg["method"], gcfg)
        res_out = _invert(model, out_range[:shown], pcfg["method"], gcfg)
        rec_in = model.decode(np.stack([r.code for r in res_in]))
        rec_out = model.decode(np.stack([r.code for r in res_out]))
        storage.write_image_pgm(
            dirs["figures"] / f"inversion_{name}.pgm",
            columns(in_range[:shown], rec_in, out_range[:shown], rec_out),
        )
    timings["probes"] = clock.elapsed() - t0
    storage.write_json(dirs["reports"] / "probe.json", probes)

    # figure analogs
    top = [int(v) for v in report.order[:3]]
    base_code = ref.encode(ev[:1])[0]
    for v in top:
        strip, _ = latent_traversal(ref, base_code, v)
        storage.write_image_pgm(dirs["figures"] / f"traversal_{ref_name}_var{v}.pgm", strip)
    storage.write_image_pgm(dirs["figures"] / "support_set.pgm", tile(fit[support.indices], 8))
    storage.write_image_pgm(dirs["figures"] / "random_subset.pgm", tile(fit[rand_idx], 8))
    for name, model in zip(names, models):
        samples = sample_ancestral(model, RngState(dcfg["seed"]).spawn(11), 64)
        storage.write_image_pgm(dirs["figures"] / f"samples_{name}.pgm", tile(np.clip(samples, 0, 1), 8))
    shown = ev[:8]
    for (i, j) in sorted(matrix.maps):
        a, b = matrix.names[i], matrix.names[j]
        src, dst = models[names.index(a)], models[names.index(b)]
        z1 = src.encode(shown)
        storage.write_image_pgm(
            dirs["figures"] / f"mapping_{a}__{b}.pgm",
            columns(shown, src.decode(z1), dst.decode(matrix.maps[(i, j)](z1))),
        )

    # Z-vs-W separation for every style proxy with a recoder-free target
    zw = {}
    for name, model in zip(names, models):
        if model.kind == "style":
            zw[name] = {"target": ref_name, **zw_separation(model, ref, seed=dcfg["seed"])}
    if zw:
        storage.write_json(dirs["reports"] / "zw.json", zw)

    timings["total"] = clock.elapsed()
    summary = {
        "config": cfg,
        "models": names,
        "reference": ref_name,
        "training": train_summary,
        "support": {"size": len(support), "sector_picks": support.n_sector_picks, "selected_vars": support.selected},
        "diversity_ratio": diversity["ratio"],
        "dataset_baseline": baseline,
        "table": matrix.kind_table(),
        "probes": {k: v["ratio"] for k, v in probes.items()},
        "zw": {k: v["ratio"] for k, v in zw.items()},
    }
    artifacts = sorted(p for p in out.rglob("*") if p.is_file() and p.name not in ("summary.json", "timings.json"))
    summary["artifacts"] = {str(p.relative_to(out)): _digest(p) for p in artifacts}
    storage.write_json(out / "summary.json", summary)
    storage.write_json(out / "timings.json", timings)
    return summary

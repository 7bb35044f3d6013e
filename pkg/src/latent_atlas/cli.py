"""Command-line entry point: ``latent-atlas <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 runtime or data error,
3 training divergence. Every successful run prints a JSON summary on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import storage
from .config import DEFAULT_DIMS, demo_config, load_config
from .errors import FormatError, LatentAtlasError, TrainingDivergedError
from .importance import THREADS_ENV, rank_variables
from .inversion import GradientConfig, _invert, range_probe
from .manifold import make_dataset, out_of_range_probe_set
from .mapping import evaluate_mapping, fit_linear_map, fit_linear_map_minibatch, array_sampler
from .models import latent_traversal, sample_ancestral
from .numerics.rng import RngState
from .pipeline import columns, run_pipeline, tile, train_instance
from .support import SupportSet, build_support_set

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this tool reserves 2 for runtime errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------------------------------------------ helpers


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int | None:
    if args.threads is not None:
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return None
    try:
        value = int(env)
    except ValueError:
        raise UsageError(f"{THREADS_ENV}={env!r} is not an integer") from None
    if value < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1")
    return value


def _images(args):
    """Images from --data, sliced by --offset/--limit."""
    ds = storage.load_dataset(args.data)
    images = ds.images[args.offset :]
    if args.limit is not None:
        images = images[: args.limit]
    if len(images) == 0:
        raise UsageError(f"--offset/--limit select no images from {args.data}")
    return images


def _model(path):
    return storage.load_model(path)


# ------------------------------------------------------------------ commands


def cmd_gen_data(args):
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    ds = make_dataset(args.seed, args.n)
    out = _out_dir(args)
    storage.save_dataset(out, ds)
    return {"dataset": str(out), **ds.manifest()}


def cmd_train(args):
    images = _images(args)
    hyper = json.loads(args.hyper) if args.hyper else {}
    if not isinstance(hyper, dict):
        raise UsageError("--hyper must be a JSON object")
    if args.epochs is not None:
        hyper["epochs"] = args.epochs
    if args.gamma is not None:
        if args.kind not in ("vae", "svae", "style"):
            raise UsageError("--gamma applies to vae, svae and style")
        hyper["gamma"] = args.gamma
    recoder = None
    if args.kind in ("gan", "style") and args.recoder_steps > 0:
        recoder = {"steps": args.recoder_steps}
    dim = args.latent_dim or DEFAULT_DIMS[args.kind]
    model, logs = train_instance(args.kind, dim, args.seed, hyper, recoder, images)
    out = _out_dir(args)
    path = out / f"{args.kind}{args.seed}.bin"
    storage.save_model(path, model)
    for stage, log in logs.items():
        (out / f"{args.kind}{args.seed}_{stage}.csv").write_text(log.to_csv())
    return {"model": str(path), "kind": args.kind, "latent_dim": dim, "logs": {k: v.summary() for k, v in logs.items()}}


def cmd_encode(args):
    model = _model(args.model)
    codes = model.encode(_images(args))
    path = _out_dir(args) / "codes.lsat"
    storage.write_tensor(path, codes)
    return {"codes": str(path), "shape": list(codes.shape)}


def cmd_gain(args):
    model = _model(args.model)
    report = rank_variables(model, _images(args), threads=_threads(args))
    out = _out_dir(args)
    (out / "gains.csv").write_text(report.to_csv())
    storage.write_json(out / "gains.json", report.to_dict())
    return {"gains": str(out / "gains.csv"), "order": [int(i) for i in report.order], "top_gain": float(report.gains[report.order[0]])}


def cmd_support_set(args):
    model = _model(args.model)
    images = _images(args)
    report = rank_variables(model, images[: args.gain_images], threads=_threads(args))
    support = build_support_set(
        model.encode(images), report, args.n_features, args.threshold, args.target_size,
        rule=args.rule, random_pick=args.random, seed=args.seed,
    )
    support.meta = {}
    out = _out_dir(args)
    d = support.to_dict()
    # indices refer to the dataset, not the sliced view
    for e in d["entries"]:
        e["dataset_index"] += args.offset
    storage.write_json(out / "support.json", d)
    storage.write_image_pgm(out / "support_set.pgm", tile(images[support.indices], 8))
    return {"support": str(out / "support.json"), "size": len(support), "sector_picks": support.n_sector_picks}


def _fit_images(args):
    ds = storage.load_dataset(args.data)
    if args.support:
        sset = SupportSet.from_dict(storage.read_json(args.support))
        if max(sset.indices, default=-1) >= ds.n:
            raise FormatError(f"{args.support} indexes beyond the dataset")
        return ds.images[sset.indices], "support"
    images = ds.images[args.offset :]
    return (images[: args.limit] if args.limit else images), "full-data"


def cmd_fit_map(args):
    src, dst = _model(args.src), _model(args.dst)
    images, source = _fit_images(args)
    z1, z2 = src.encode(images), dst.encode(images)
    sid, did = Path(args.src).stem, Path(args.dst).stem
    if args.method == "minibatch":
        mp = fit_linear_map_minibatch(array_sampler(z1, z2), src.latent_dim, dst.latent_dim, args.steps, bias=args.bias, src_id=sid, dst_id=did)
        mp.fit_meta["fit_on"] = source
    else:
        mp = fit_linear_map(z1, z2, args.bias, args.ridge, sid, did, source)
    path = _out_dir(args) / f"{sid}__{did}.bin"
    storage.save_map(path, mp)
    return {"map": str(path), "fit_on": source, "m": len(images), **{k: v for k, v in mp.fit_meta.items() if k != "fit_on"}}


def cmd_eval_map(args):
    src, dst, mp = _model(args.src), _model(args.dst), storage.load_map(args.map)
    images = _images(args)
    rep = evaluate_mapping(src, dst, mp, images)
    rep.src, rep.dst = Path(args.src).stem, Path(args.dst).stem
    out = _out_dir(args)
    storage.write_json(out / "report.json", rep.to_dict())
    shown = images[:8]
    z1 = src.encode(shown)
    storage.write_image_pgm(out / "mapping.pgm", columns(shown, src.decode(z1), dst.decode(mp(z1))))
    return rep.to_dict()


def cmd_matrix(args):
    cfg = load_config(args.config)
    summary = run_pipeline(cfg, _out_dir(args), threads=_threads(args), quiet=args.quiet)
    return {"out": str(args.out), "table": summary["table"], "models": summary["models"]}


def cmd_demo(args):
    cfg = load_config(args.config) if args.config else demo_config()
    summary = run_pipeline(cfg, _out_dir(args), threads=_threads(args), quiet=args.quiet)
    summary.pop("artifacts")
    summary.pop("config")
    return {"out": str(args.out), **summary}


def cmd_traverse(args):
    model = _model(args.model)
    if args.data:
        z = model.encode(_images(args)[:1])[0]
    else:
        z = np.zeros(model.latent_dim, dtype=np.float32)
    if not 0 <= args.var < model.latent_dim:
        raise UsageError(f"--var {args.var} outside [0, {model.latent_dim})")
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    strip, _ = latent_traversal(model, z, args.var, args.lo, args.hi, args.steps)
    path = _out_dir(args) / f"traverse_var{args.var}.pgm"
    storage.write_image_pgm(path, np.clip(strip, 0, 1))
    return {"strip": str(path), "var": args.var, "steps": args.steps, "range": [args.lo, args.hi]}


def cmd_sample(args):
    model = _model(args.model)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    images = sample_ancestral(model, RngState(args.seed), args.n)
    out = _out_dir(args)
    storage.write_tensor(out / "samples.lsat", images)
    storage.write_image_pgm(out / "samples.pgm", tile(np.clip(images, 0, 1), min(8, args.n)))
    return {"samples": str(out / "samples.lsat"), "n": args.n, "mean_pixel": float(images.mean())}


def cmd_invert(args):
    model = _model(args.model)
    images = _images(args)
    if args.out_of_range:
        images = 1.0 - images
    results = _invert(model, images, args.method, GradientConfig(steps=args.steps, prior=args.prior))
    out = _out_dir(args)
    storage.write_json(out / "inversion.json", [r.to_dict() for r in results])
    rec = model.decode(np.stack([r.code for r in results]))
    storage.write_image_pgm(out / "inversion.pgm", columns(images[:16], rec[:16]))
    mses = [r.final_image_mse for r in results]
    return {"results": str(out / "inversion.json"), "n": len(results), "median_mse": float(np.median(mses)), "method": args.method}


def cmd_probe(args):
    model = _model(args.model)
    if args.data:
        source = _images(args)
    else:
        source = make_dataset(args.seed, args.k).images
    out_range = out_of_range_probe_set(source, min(args.k, len(source)))
    in_range = sample_ancestral(model, RngState(args.seed), len(out_range))
    rep = range_probe(model, in_range, out_range, args.method, GradientConfig(steps=args.steps))
    storage.write_json(_out_dir(args) / "probe.json", rep)
    return rep


# ------------------------------------------------------------------ parser


def build_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (created if missing; default: out)")
    common.add_argument(
        "--threads", type=int, default=None,
        help=f"bound on evaluation parallelism; falls back to ${THREADS_ENV}, then 1",
    )
    common.add_argument("--quiet", action="store_true", help="suppress progress messages on stderr")

    data = Parser(add_help=False)
    data.add_argument("--data", help="dataset directory written by gen-data")
    data.add_argument("--offset", type=int, default=0, help="skip this many leading images (default 0)")
    data.add_argument("--limit", type=int, default=None, help="use at most this many images")

    p = Parser(prog="latent-atlas", description="Linear relocation between latent spaces of toy generative models.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    sub.required = True

    def add(name, func, help_, parents=(common,)):
        sp = sub.add_parser(name, help=help_, description=help_, parents=list(parents))
        sp.set_defaults(func=func)
        return sp

    sp = add("gen-data", cmd_gen_data, "render the synthetic blob dataset")
    sp.add_argument("--seed", type=int, default=42, help="dataset seed (default 42)")
    sp.add_argument("--n", type=int, default=8000, help="number of images (default 8000)")

    sp = add("train", cmd_train, "train one model instance", (common, data))
    sp.add_argument("--kind", required=True, choices=["vae", "svae", "gan", "style"], help="model family")
    sp.add_argument("--seed", type=int, default=0, help="training seed (default 0)")
    sp.add_argument("--latent-dim", type=int, default=None, help="latent width (default: 16, svae 24, style 32)")
    sp.add_argument("--epochs", type=int, default=None, help="training epochs (family default if omitted)")
    sp.add_argument("--gamma", type=float, default=None, help="KL weight for vae/svae/style")
    sp.add_argument("--recoder-steps", type=int, default=12000, help="recoder steps for gan/style; 0 skips (default 12000)")
    sp.add_argument("--hyper", default=None, help="extra hyperparameters as a JSON object")

    sp = add("encode", cmd_encode, "encode images to latent codes", (common, data))
    sp.add_argument("--model", required=True, help="model file")

    sp = add("gain", cmd_gain, "rank latent variables by reconstruction gain", (common, data))
    sp.add_argument("--model", required=True, help="model file")

    sp = add("support-set", cmd_support_set, "build a sector-based support set", (common, data))
    sp.add_argument("--model", required=True, help="reference model file")
    sp.add_argument("--n-features", type=int, default=4, help="number of top variables (default 4)")
    sp.add_argument("--threshold", type=float, default=1.0, help="sector threshold th (default 1.0)")
    sp.add_argument("--target-size", type=int, default=32, help="support set size (default 32)")
    sp.add_argument("--rule", choices=["coordinate", "euclidean"], default="coordinate", help="sector membership rule")
    sp.add_argument("--random", action="store_true", help="pick sector members at random instead of the most extreme")
    sp.add_argument("--seed", type=int, default=0, help="seed for random picks (default 0)")
    sp.add_argument("--gain-images", type=int, default=2000, help="images used for ranking (default 2000)")

    sp = add("fit-map", cmd_fit_map, "fit a linear map between two latent spaces", (common, data))
    sp.add_argument("--src", required=True, help="source model file")
    sp.add_argument("--dst", required=True, help="destination model file")
    sp.add_argument("--support", default=None, help="support.json; fit on these images only")
    sp.add_argument("--bias", action="store_true", help="fit an unpenalized bias term")
    sp.add_argument("--ridge", type=float, default=1e-4, help="ridge penalty (default 1e-4)")
    sp.add_argument("--method", choices=["closed-form", "minibatch"], default="closed-form", help="solver")
    sp.add_argument("--steps", type=int, default=2000, help="minibatch steps (default 2000)")

    sp = add("eval-map", cmd_eval_map, "report L-MSE, R-MSE and M-MSE of a map", (common, data))
    sp.add_argument("--src", required=True, help="source model file")
    sp.add_argument("--dst", required=True, help="destination model file")
    sp.add_argument("--map", required=True, help="map file from fit-map")

    sp = add("matrix", cmd_matrix, "run a config end to end and emit the model-pair table")
    sp.add_argument("--config", required=True, help="run config JSON")

    sp = add("traverse", cmd_traverse, "decode a sweep of one latent variable", (common, data))
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--var", type=int, required=True, help="latent variable index")
    sp.add_argument("--steps", type=int, default=11, help="number of frames (default 11)")
    sp.add_argument("--lo", type=float, default=-2.25, help="sweep start (default -2.25)")
    sp.add_argument("--hi", type=float, default=2.25, help="sweep end (default 2.25)")

    sp = add("sample", cmd_sample, "draw ancestral samples", (common,))
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--n", type=int, default=64, help="number of samples (default 64)")
    sp.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")

    sp = add("invert", cmd_invert, "recover latent codes for images", (common, data))
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--method", choices=["gradient", "recoder", "recoder+gradient"], default="gradient", help="inversion method")
    sp.add_argument("--steps", type=int, default=500, help="gradient steps (default 500)")
    sp.add_argument("--prior", type=float, default=0.0, help="weight of the ||z||^2 penalty (default 0)")
    sp.add_argument("--out-of-range", action="store_true", help="invert intensity-inverted copies instead")

    sp = add("probe", cmd_probe, "compare inversion error on generated vs inverted-intensity images", (common, data))
    sp.add_argument("--model", required=True, help="model file")
    sp.add_argument("--k", type=int, default=64, help="images per set (default 64)")
    sp.add_argument("--method", choices=["gradient", "recoder", "recoder+gradient"], default="gradient", help="inversion method")
    sp.add_argument("--steps", type=int, default=500, help="gradient steps (default 500)")
    sp.add_argument("--seed", type=int, default=0, help="seed for generated images (default 0)")

    sp = add("demo", cmd_demo, "run the bundled toy study (or --config) end to end")
    sp.add_argument("--config", default=None, help="run config JSON (default: bundled demo)")
    return p


_NEEDS_DATA = {"train", "encode", "gain", "support-set", "fit-map", "eval-map", "invert"}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code
    if args.command in _NEEDS_DATA and not getattr(args, "data", None):
        print(f"latent-atlas {args.command}: error: --data is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = args.func(args)
    except UsageError as exc:
        print(f"latent-atlas {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"latent-atlas {args.command}: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (LatentAtlasError, OSError, ValueError, KeyError) as exc:
        print(f"latent-atlas {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(storage.dumps_json({"command": args.command, "status": "ok", **result}), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

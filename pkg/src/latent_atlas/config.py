"""Run configuration: JSON schema, defaults, and the bundled demo config."""

from __future__ import annotations

import copy
import json
from dataclasses import fields
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .models import GanConfig, RecoderConfig, StyleConfig, VaeConfig

_INT = {"type": "integer", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "seeds"],
    "properties": {
        "kind": {"enum": ["vae", "svae", "gan", "style"]},
        "latent_dim": _POS_INT,
        "seeds": {"type": "array", "items": _INT, "minItems": 1, "uniqueItems": True},
        "hyperparams": {"type": "object"},
        "recoder": {"type": "object"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "models"],
    "properties": {
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["seed", "n"],
            "properties": {
                "seed": _INT,
                "n": {"type": "integer", "minimum": 16},
                "holdout": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
            },
        },
        "models": {"type": "array", "items": _MODEL, "minItems": 1},
        "support": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "reference": {"type": "string"},
                "n_features": _POS_INT,
                "threshold": {"type": "number", "minimum": 0},
                "target_size": _POS_INT,
                "pick": {"enum": ["extreme", "random"]},
                "rule": {"enum": ["coordinate", "euclidean"]},
                "gain_images": _POS_INT,
                "seed": _INT,
            },
        },
        "mapping": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "bias": {"type": "boolean"},
                "ridge": {"type": "number", "minimum": 0},
                "method": {"enum": ["closed-form", "minibatch"]},
                "fit_on": {"enum": ["support", "full"]},
                "full_fit_images": _POS_INT,
                "minibatch_steps": _POS_INT,
            },
        },
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_images": _POS_INT},
        },
        "probe": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": _POS_INT,
                "steps": _INT,
                "method": {"enum": ["gradient", "recoder", "recoder+gradient"]},
            },
        },
    },
}

DEFAULTS = {
    "dataset": {"holdout": 0.1},
    "support": {
        "reference": "",
        "n_features": 4,
        "threshold": 1.0,
        "target_size": 32,
        "pick": "extreme",
        "rule": "coordinate",
        "gain_images": 2000,
        "seed": 0,
    },
    "mapping": {
        "bias": False,
        "ridge": 0.1,
        "method": "closed-form",
        "fit_on": "support",
        "full_fit_images": 2000,
        "minibatch_steps": 2000,
    },
    "eval": {"n_images": 500},
    "probe": {"k": 64, "steps": 500, "method": "gradient"},
}

HYPER_CLASSES = {"vae": VaeConfig, "svae": VaeConfig, "gan": GanConfig, "style": StyleConfig}
DEFAULT_DIMS = {"vae": 16, "svae": 24, "gan": 16, "style": 32}
_RESERVED = {"latent_dim", "seed"}


def _check_keys(obj: dict, cls, where: str):
    allowed = {f.name for f in fields(cls)} - _RESERVED
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed {sorted(allowed)}")


def validate_config(cfg: dict) -> dict:
    """Validate against the schema and fill defaults; returns a new dict."""
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    out = copy.deepcopy(cfg)
    for section, defaults in DEFAULTS.items():
        out[section] = {**defaults, **out.get(section, {})}
    for k, m in enumerate(out["models"]):
        m.setdefault("latent_dim", DEFAULT_DIMS[m["kind"]])
        m.setdefault("hyperparams", {})
        _check_keys(m["hyperparams"], HYPER_CLASSES[m["kind"]], f"models/{k}/hyperparams")
        if m["kind"] in ("gan", "style"):
            m.setdefault("recoder", {})
            _check_keys(m["recoder"], RecoderConfig, f"models/{k}/recoder")
        elif "recoder" in m:
            raise ConfigError(f"models/{k}: recoder settings only apply to gan and style models")
    if sum(len(m["seeds"]) for m in out["models"]) < 2:
        raise ConfigError("models: need at least two model instances to fit maps")
    if not any(m["kind"] in ("vae", "svae") for m in out["models"]):
        raise ConfigError("models: need at least one vae or svae to rank features and build the support set")
    return out


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    try:
        return validate_config(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def demo_config() -> dict:
    text = resources.files("latent_atlas").joinpath("data/demo.json").read_text()
    return validate_config(json.loads(text))

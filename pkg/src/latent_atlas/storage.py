"""Bit-exact persistence: tensors, models, datasets, maps, PGM images and JSON reports.

Tensor layout (all little-endian)::

    b"LSAT" | version u8 = 1 | dtype u8 = 1 (float32) | ndim u8 | ndim x u32 dims | payload

Model layout::

    u32 header length | UTF-8 JSON header | tensor blobs in header order
"""

from __future__ import annotations

import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DimensionError,
    DtypeMismatchError,
    FormatError,
    ImageRangeError,
    ShapeMismatchError,
    TrailingDataError,
    TruncatedFileError,
    VersionMismatchError,
)
from .numerics.dense import DenseNet, Layer

MAGIC = b"LSAT"
TENSOR_VERSION = 1
DTYPE_F32 = 1
MODEL_FORMAT_VERSION = 1
_LE_F32 = np.dtype("<f4")

# ------------------------------------------------------------------ tensors


def encode_tensor(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype != np.float32:
        raise DtypeMismatchError(f"only float32 tensors are storable, got {arr.dtype}")
    if arr.ndim > 255:
        raise ShapeMismatchError("at most 255 dimensions")
    if any(d >= 2**32 for d in arr.shape):
        raise ShapeMismatchError("dimension does not fit in u32")
    head = MAGIC + struct.pack("<BBB", TENSOR_VERSION, DTYPE_F32, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr, dtype=_LE_F32).tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Parse one tensor starting at ``offset``; returns ``(array, end_offset)``."""
    view = memoryview(buf)
    if len(view) - offset < 7:
        if bytes(view[offset : offset + 4]) != MAGIC[: len(view) - offset]:
            raise BadMagicError("not a tensor file")
        raise TruncatedFileError("tensor header truncated")
    if bytes(view[offset : offset + 4]) != MAGIC:
        raise BadMagicError(f"bad magic {bytes(view[offset:offset + 4])!r}")
    version, dtype, ndim = struct.unpack_from("<BBB", view, offset + 4)
    if version != TENSOR_VERSION:
        raise VersionMismatchError(f"tensor version {version}, expected {TENSOR_VERSION}")
    if dtype != DTYPE_F32:
        raise DtypeMismatchError(f"dtype code {dtype}, expected {DTYPE_F32} (float32)")
    pos = offset + 7
    if len(view) - pos < 4 * ndim:
        raise TruncatedFileError("tensor dims truncated")
    shape = struct.unpack_from(f"<{ndim}I", view, pos)
    pos += 4 * ndim
    nbytes = 4 * math.prod(shape)
    if len(view) - pos < nbytes:
        raise TruncatedFileError(f"payload has {len(view) - pos} bytes, expected {nbytes}")
    arr = np.frombuffer(view[pos : pos + nbytes], dtype=_LE_F32).astype(np.float32).reshape(shape)
    return arr, pos + nbytes


def write_tensor(target, arr) -> None:
    """Write to a path or a binary file object."""
    data = encode_tensor(arr)
    if hasattr(target, "write"):
        target.write(data)
    else:
        Path(target).write_bytes(data)


def read_tensor(source) -> np.ndarray:
    data = source.read() if hasattr(source, "read") else Path(source).read_bytes()
    arr, end = decode_tensor(data)
    if end != len(data):
        raise TrailingDataError(f"{len(data) - end} bytes after tensor payload")
    return arr


# ------------------------------------------------------------------ containers


def encode_container(header: dict, tensors: list) -> bytes:
    header = dict(header)
    header["tensors"] = [list(np.shape(t)) for t in tensors]
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw + b"".join(encode_tensor(t) for t in tensors)


def decode_container(data: bytes) -> tuple[dict, list]:
    if len(data) < 4:
        raise TruncatedFileError("missing header length")
    (hlen,) = struct.unpack_from("<I", data, 0)
    if len(data) < 4 + hlen:
        raise TruncatedFileError("header truncated")
    try:
        header = json.loads(data[4 : 4 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BadMagicError(f"header is not JSON: {exc}") from None
    if not isinstance(header, dict) or "format_version" not in header:
        raise BadMagicError("header lacks format_version")
    if header["format_version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatchError(f"format_version {header['format_version']}, expected {MODEL_FORMAT_VERSION}")
    shapes = header.get("tensors", [])
    pos = 4 + hlen
    tensors = []
    for k, shape in enumerate(shapes):
        arr, pos = decode_tensor(data, pos)
        if list(arr.shape) != list(shape):
            raise ShapeMismatchError(f"blob {k} has shape {list(arr.shape)}, header says {shape}")
        tensors.append(arr)
    if pos != len(data):
        raise TrailingDataError(f"{len(data) - pos} bytes after last blob")
    return header, tensors


# ------------------------------------------------------------------ models

_NET_NAMES = {
    "vae": ("encoder", "decoder"),
    "svae": ("encoder", "decoder"),
    "gan": ("generator", "discriminator", "recoder"),
    "style": ("mapping_net", "synthesis", "w_recoder"),
}


def _net_tensors(net: DenseNet) -> list:
    return [p for lay in net.layers for p in (lay.weight, lay.bias)]


def _net_from(spec: list, tensors: list, name: str) -> DenseNet:
    if len(tensors) != 2 * len(spec):
        raise ShapeMismatchError(f"{name}: {len(tensors)} blobs for {len(spec)} layers")
    layers = []
    for k, ls in enumerate(spec):
        w, b = tensors[2 * k], tensors[2 * k + 1]
        if w.shape != (ls["d_out"], ls["d_in"]) or b.shape != (ls["d_out"],):
            raise ShapeMismatchError(
                f"{name} layer {k}: blobs {w.shape}/{b.shape} disagree with spec {ls['d_in']}->{ls['d_out']}"
            )
        layers.append(Layer(w, b, ls["activation"], ls.get("alpha", 0.2)))
    try:
        return DenseNet(layers)
    except DimensionError as exc:
        raise ShapeMismatchError(f"{name}: {exc}") from None


def model_to_bytes(model) -> bytes:
    kind = model.kind
    if kind not in _NET_NAMES:
        raise ValueError(f"unknown model kind {kind!r}")
    nets = {name: net for name, net in model.nets().items() if net is not None}
    order = [n for n in _NET_NAMES[kind] if n in nets]
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": kind,
        "latent_dim": int(model.latent_dim),
        "seed": int(model.seed),
        "hyperparameters": model.hyper,
        "nets": {n: nets[n].to_spec() for n in order},
        "net_order": order,
    }
    if kind in ("vae", "svae"):
        header["gamma"] = float(model.gamma)
    if kind == "gan":
        header["loss"] = model.loss
    tensors = [t for n in order for t in _net_tensors(nets[n])]
    return encode_container(header, tensors)


def model_from_bytes(data: bytes):
    from .models import GanModel, StyleProxyModel, SvaeModel, VaeModel

    header, tensors = decode_container(data)
    kind = header.get("kind")
    if kind not in _NET_NAMES:
        raise FormatError(f"unknown model kind {kind!r}")
    nets, pos = {}, 0
    for name in header["net_order"]:
        spec = header["nets"][name]
        nets[name] = _net_from(spec, tensors[pos : pos + 2 * len(spec)], name)
        pos += 2 * len(spec)
    if pos != len(tensors):
        raise ShapeMismatchError(f"{len(tensors) - pos} unclaimed blobs")
    d, seed, hyper = header["latent_dim"], header["seed"], header["hyperparameters"]
    try:
        if kind in ("vae", "svae"):
            cls = VaeModel if kind == "vae" else SvaeModel
            return cls(nets["encoder"], nets["decoder"], d, header["gamma"], seed, hyper)
        if kind == "gan":
            return GanModel(nets["generator"], nets["discriminator"], d, nets.get("recoder"), header["loss"], seed, hyper)
        return StyleProxyModel(nets["mapping_net"], nets["synthesis"], d, nets.get("w_recoder"), seed, hyper)
    except DimensionError as exc:
        raise ShapeMismatchError(str(exc)) from None


def save_model(path, model) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())


# ------------------------------------------------------------------ linear maps


def save_map(path, m) -> None:
    header = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "linear-map",
        "src_model_id": m.src_model_id,
        "dst_model_id": m.dst_model_id,
        "fit_meta": m.fit_meta,
        "has_bias": m.bias is not None,
    }
    blobs = [m.A] + ([m.bias] if m.bias is not None else [])
    Path(path).write_bytes(encode_container(header, blobs))


def load_map(path):
    from .mapping import LinearMap

    header, tensors = decode_container(Path(path).read_bytes())
    if header.get("kind") != "linear-map":
        raise FormatError(f"expected a linear-map file, got kind {header.get('kind')!r}")
    want = 2 if header["has_bias"] else 1
    if len(tensors) != want or tensors[0].ndim != 2:
        raise ShapeMismatchError("linear-map blobs disagree with header")
    try:
        return LinearMap(tensors[0], tensors[1] if want == 2 else None, header["src_model_id"], header["dst_model_id"], header["fit_meta"])
    except DimensionError as exc:
        raise ShapeMismatchError(str(exc)) from None


# ------------------------------------------------------------------ datasets


def save_dataset(directory, dataset) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_tensor(d / "images.lsat", dataset.images)
    write_tensor(d / "factors.lsat", dataset.factors)
    write_json(d / "manifest.json", dataset.manifest())


def load_dataset(directory):
    from .manifold import Dataset

    d = Path(directory)
    manifest = read_json(d / "manifest.json")
    ds = Dataset(read_tensor(d / "images.lsat"), read_tensor(d / "factors.lsat"), int(manifest["seed"]))
    if ds.n != manifest["n"] or ds.checksum() != manifest["sha256"]:
        raise FormatError(f"dataset in {d} does not match its manifest")
    return ds


# ------------------------------------------------------------------ images


def pgm_bytes(image) -> bytes:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise DimensionError(f"PGM needs a 2-D image, got shape {img.shape}")
    if not np.all((img >= 0) & (img <= 1)):
        raise ImageRangeError("pixel values must lie in [0, 1]")
    q = np.floor(255 * img + 0.5).astype(np.uint8)
    h, w = q.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()


def write_image_pgm(path, image) -> None:
    Path(path).write_bytes(pgm_bytes(image))


def read_image_pgm(path) -> np.ndarray:
    """Inverse of write_image_pgm up to quantization; returns uint8."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5" or int(parts[3]) != 255:
        raise BadMagicError("not an 8-bit binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def side_by_side(left, right, gap: int = 1) -> np.ndarray:
    """Pairs of images (original | reconstruction) stacked into one strip per row."""
    left = np.asarray(left, dtype=np.float32)
    right = np.asarray(right, dtype=np.float32)
    sep = np.ones((left.shape[0], left.shape[1], gap), dtype=np.float32)
    rows = np.concatenate([left, sep, right], axis=2)
    return rows.reshape(-1, rows.shape[2])


# ------------------------------------------------------------------ json


def _jsonable(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, tuple)):
        return list(obj)
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


__all__ = [
    "MAGIC",
    "decode_container",
    "decode_tensor",
    "dumps_json",
    "encode_container",
    "encode_tensor",
    "load_dataset",
    "load_map",
    "load_model",
    "model_from_bytes",
    "model_to_bytes",
    "pgm_bytes",
    "read_image_pgm",
    "read_json",
    "read_tensor",
    "save_dataset",
    "save_map",
    "save_model",
    "side_by_side",
    "write_image_pgm",
    "write_json",
    "write_tensor",
]

"""Model serialization: a text manifest plus a binary weight container.

Manifest (plain text, ``#`` starts a comment)::

    format 1
    input 32 32 3
    classes 2
    layer conv name=c1 out=8 bias=1
    layer relu
    layer maxpool
    layer gap
    layer dense name=head out=2 bias=0
    layer softmax

Weight container: magic ``SISEW1\\0`` followed by one record per tensor,
each record being name length, name bytes, rank, extents (all 64-bit
little-endian unsigned) and the row-major float32 little-endian payload.
Records are written in manifest order (weight, then bias when present),
so a load/save round trip is bit exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError
from .model import (
    AvgPool2,
    Conv3x3,
    Dense,
    GlobalAvgPool,
    InspectableModel,
    MaxPool2,
    ReLU,
    Softmax,
)

MAGIC = b"SISEW1\x00"

_PLAIN_KINDS = {
    "relu": ReLU,
    "maxpool": MaxPool2,
    "avgpool": AvgPool2,
    "gap": GlobalAvgPool,
    "softmax": Softmax,
}
_PARAM_KINDS = ("conv", "dense")


@dataclass
class LayerSpec:
    kind: str
    name: str | None = None
    out: int | None = None
    bias: bool = True


@dataclass
class ManifestSpec:
    input_shape: tuple
    num_classes: int
    layers: list = field(default_factory=list)


def parse_manifest(path) -> ManifestSpec:
    input_shape = None
    num_classes = None
    layers = []
    fmt_seen = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            key = tokens[0]
            try:
                if not fmt_seen:
                    if key != "format" or tokens[1:] != ["1"]:
                        raise ModelFormatError(
                            "%s:%d: manifest must start with 'format 1'" % (path, lineno)
                        )
                    fmt_seen = True
                elif key == "input":
                    input_shape = tuple(int(t) for t in tokens[1:])
                    if len(input_shape) != 3 or min(input_shape) < 1 or input_shape[2] != 3:
                        raise ModelFormatError(
                            "%s:%d: input must be 'input H W 3'" % (path, lineno)
                        )
                elif key == "classes":
                    (num_classes,) = (int(t) for t in tokens[1:])
                    if num_classes < 1:
                        raise ModelFormatError("%s:%d: classes must be >= 1" % (path, lineno))
                elif key == "layer":
                    layers.append(_parse_layer(tokens[1:], path, lineno))
                else:
                    raise ModelFormatError("%s:%d: unknown directive %r" % (path, lineno, key))
            except (ValueError, IndexError) as exc:
                raise ModelFormatError("%s:%d: %s" % (path, lineno, exc)) from exc
    if input_shape is None or num_classes is None or not layers:
        raise ModelFormatError("%s: manifest needs input, classes and at least one layer" % path)
    names = [l.name for l in layers if l.name is not None]
    if len(names) != len(set(names)):
        raise ModelFormatError("%s: duplicate layer names" % path)
    return ManifestSpec(input_shape=input_shape, num_classes=num_classes, layers=layers)


def _parse_layer(tokens, path, lineno) -> LayerSpec:
    if not tokens:
        raise ModelFormatError("%s:%d: empty layer line" % (path, lineno))
    kind = tokens[0]
    attrs = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ModelFormatError("%s:%d: bad layer attribute %r" % (path, lineno, tok))
        k, v = tok.split("=", 1)
        attrs[k] = v
    if kind in _PLAIN_KINDS:
        if attrs:
            raise ModelFormatError("%s:%d: layer %s takes no attributes" % (path, lineno, kind))
        return LayerSpec(kind=kind)
    if kind in _PARAM_KINDS:
        if "name" not in attrs or "out" not in attrs:
            raise ModelFormatError(
                "%s:%d: layer %s needs name= and out=" % (path, lineno, kind)
            )
        bias = attrs.get("bias", "1")
        if bias not in ("0", "1"):
            raise ModelFormatError("%s:%d: bias must be 0 or 1" % (path, lineno))
        out = int(attrs["out"])
        if out < 1:
            raise ModelFormatError("%s:%d: out must be >= 1" % (path, lineno))
        return LayerSpec(kind=kind, name=attrs["name"], out=out, bias=bias == "1")
    raise ModelFormatError("%s:%d: unknown layer kind %r" % (path, lineno, kind))


def write_manifest(spec: ManifestSpec, path):
    lines = ["format 1"]
    lines.append("input %d %d %d" % spec.input_shape)
    lines.append("classes %d" % spec.num_classes)
    for l in spec.layers:
        if l.kind in _PARAM_KINDS:
            lines.append(
                "layer %s name=%s out=%d bias=%d" % (l.kind, l.name, l.out, int(l.bias))
            )
        else:
            lines.append("layer %s" % l.kind)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_weights(path, entries):
    """Write (name, array) pairs in the given order; payload stored as f32."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        for name, arr in entries:
            data = np.ascontiguousarray(arr, dtype="<f4")
            nb = name.encode("utf-8")
            fh.write(struct.pack("<Q", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<Q", data.ndim))
            fh.write(struct.pack("<%dQ" % data.ndim, *data.shape))
            fh.write(data.tobytes())


def read_weights(path):
    """Read the container back as an ordered list of (name, float32 array)."""
    entries = []
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ModelFormatError("%s: bad magic, not a weight container" % path)

        def need(n, what):
            buf = fh.read(n)
            if len(buf) != n:
                raise ModelFormatError("%s: truncated while reading %s" % (path, what))
            return buf

        while True:
            head = fh.read(8)
            if not head:
                break
            if len(head) != 8:
                raise ModelFormatError("%s: truncated record header" % path)
            (name_len,) = struct.unpack("<Q", head)
            name = need(name_len, "record name").decode("utf-8")
            (rank,) = struct.unpack("<Q", need(8, "rank of %r" % name))
            shape = struct.unpack("<%dQ" % rank, need(8 * rank, "shape of %r" % name))
            count = int(np.prod(shape)) if rank else 1
            payload = need(4 * count, "payload of %r" % name)
            arr = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
            entries.append((name, arr))
    return entries


def _weight_entries(model: InspectableModel):
    for layer in model.layers:
        if layer.kind in _PARAM_KINDS:
            yield layer.name + ".weight", layer.weight
            if layer.has_bias:
                yield layer.name + ".bias", layer.bias


def save_model(model: InspectableModel, manifest_path, weights_path):
    layers = []
    for l in model.layers:
        if l.kind == "conv":
            layers.append(LayerSpec("conv", l.name, l.weight.shape[3], l.has_bias))
        elif l.kind == "dense":
            layers.append(LayerSpec("dense", l.name, l.weight.shape[1], l.has_bias))
        else:
            layers.append(LayerSpec(l.kind))
    spec = ManifestSpec(model.input_shape, model.num_classes, layers)
    write_manifest(spec, manifest_path)
    write_weights(weights_path, _weight_entries(model))


def load_model(manifest_path, weights_path, dtype=np.float32) -> InspectableModel:
    """Build a ready model, rejecting any manifest/payload inconsistency.

    `dtype` selects the compute precision (float32 by default, float64
    for verification runs); the container payload itself is always f32.
    """
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    spec = parse_manifest(manifest_path)
    stored = read_weights(weights_path)
    by_name = dict(stored)
    if len(by_name) != len(stored):
        raise ModelFormatError("%s: duplicate weight records" % weights_path)

    def take(name, want_shape, layer_name):
        if name not in by_name:
            raise ModelFormatError(
                "%s: missing record %r for layer '%s'" % (weights_path, name, layer_name)
            )
        arr = by_name.pop(name)
        if arr.shape != want_shape:
            raise ModelFormatError(
                "layer '%s': record %r has shape %s, manifest implies %s"
                % (layer_name, name, arr.shape, want_shape)
            )
        return arr.astype(dtype, copy=False)

    layers = []
    shape = spec.input_shape
    for i, ls in enumerate(spec.layers):
        if ls.kind == "conv":
            if len(shape) != 3:
                raise ModelFormatError("layer %d (conv '%s'): needs an HxWxC input" % (i, ls.name))
            w = take(ls.name + ".weight", (3, 3, shape[2], ls.out), ls.name)
            b = take(ls.name + ".bias", (ls.out,), ls.name) if ls.bias else None
            layer = Conv3x3(ls.name, w, b)
        elif ls.kind == "dense":
            din = int(np.prod(shape))
            w = take(ls.name + ".weight", (din, ls.out), ls.name)
            b = take(ls.name + ".bias", (ls.out,), ls.name) if ls.bias else None
            layer = Dense(ls.name, w, b)
        else:
            layer = _PLAIN_KINDS[ls.kind]()
        shape = layer.out_shape(shape, i)
        layers.append(layer)
    if by_name:
        raise ModelFormatError(
            "%s: unexpected records: %s" % (weights_path, ", ".join(sorted(by_name)))
        )
    return InspectableModel(layers, spec.input_shape, spec.num_classes)

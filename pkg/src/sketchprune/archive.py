"""Model/weight data model and the on-disk archive format.

An archive is a directory holding ``manifest.json`` plus one ``.npy``
file per declared tensor. The manifest schema is versioned
(``sketchprune-manifest-v1``); see ``data/manifest.schema.json``.

Weights are stored as little-endian float32 and promoted to float64 for
all in-memory numerics. Filter matrices use the (input-channel,
kernel-row, kernel-col) flatten order, so column ``j`` of the matrix is
output filter ``j``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    MissingFileError,
    NonFiniteError,
    ShapeMismatchError,
    TopologyError,
    ValidationError,
)
from .npyio import read_npy, write_npy

SCHEMA_ID = "sketchprune-manifest-v1"

LAYER_KINDS = ("conv", "fc", "bn", "pool", "add", "concat")

# tensor roles expected per layer kind
TENSOR_ROLES = {
    "conv": ("weight", "bias"),
    "fc": ("weight", "bias"),
    "bn": ("weight", "bias", "running_mean", "running_var"),
}


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    out_channels: int
    in_channels: int
    kernel_h: int = 1
    kernel_w: int = 1
    stride: int = 1
    padding: int = 0
    prune_group: str | None = None
    prunable: bool = False
    has_bias: bool = False

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValidationError(f"layer {self.name}: unknown kind {self.kind!r}")
        if self.out_channels < 1 or self.in_channels < 1:
            raise ValidationError(f"layer {self.name}: channel counts must be >= 1")
        if self.kind == "conv" and (self.kernel_h < 1 or self.kernel_w < 1):
            raise ValidationError(f"layer {self.name}: conv kernel must be >= 1")
        if self.stride < 0 or self.padding < 0:
            raise ValidationError(f"layer {self.name}: stride/padding must be >= 0")

    @property
    def flat_dim(self) -> int:
        """Row count of the layer's filter matrix: in_channels * kh * kw."""
        return self.in_channels * self.kernel_h * self.kernel_w

    def weight_shape(self) -> tuple[int, ...] | None:
        if self.kind == "conv":
            return (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)
        if self.kind == "fc":
            return (self.out_channels, self.in_channels)
        if self.kind == "bn":
            return (self.out_channels,)
        return None


@dataclass(frozen=True)
class ModelManifest:
    layers: tuple[LayerSpec, ...]
    edges: tuple[tuple[str, str], ...]
    input_spatial: tuple[int, int]
    num_classes: int

    def __post_init__(self):
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise TopologyError("duplicate layer names in manifest")
        byname = {l.name: l for l in self.layers}
        for src, dst in self.edges:
            if src not in byname or dst not in byname:
                raise TopologyError(f"edge ({src} -> {dst}) references unknown layer")
        self.toposort()  # raises on cycles
        self._check_channels()
        groups = {}
        for l in self.layers:
            if l.prune_group:
                groups.setdefault(l.prune_group, []).append(l)
        for gname, members in groups.items():
            widths = {m.out_channels for m in members}
            if len(widths) != 1:
                raise TopologyError(f"prune group {gname!r} members disagree on out_channels: {widths}")

    @property
    def layer_map(self) -> dict[str, LayerSpec]:
        return {l.name: l for l in self.layers}

    def producers(self, name: str) -> list[str]:
        return [s for s, d in self.edges if d == name]

    def consumers(self, name: str) -> list[str]:
        return [d for s, d in self.edges if s == name]

    def toposort(self) -> list[str]:
        """Kahn's algorithm over the layer graph; manifest order breaks ties."""
        indeg = {l.name: 0 for l in self.layers}
        for _, dst in self.edges:
            indeg[dst] += 1
        order, ready = [], [l.name for l in self.layers if indeg[l.name] == 0]
        while ready:
            node = ready.pop(0)
            order.append(node)
            for dst in self.consumers(node):
                indeg[dst] -= 1
                if indeg[dst] == 0:
                    ready.append(dst)
        if len(order) != len(self.layers):
            raise TopologyError("manifest edges contain a cycle")
        return order

    def _check_channels(self):
        byname = self.layer_map
        for layer in self.layers:
            prods = self.producers(layer.name)
            if not prods:
                continue
            widths = [byname[p].out_channels for p in prods]
            if layer.kind == "concat":
                expect = sum(widths)
            elif layer.kind == "add":
                if len(set(widths)) != 1:
                    raise TopologyError(f"add layer {layer.name}: producer widths differ: {widths}")
                expect = widths[0]
            else:
                if len(prods) != 1:
                    raise TopologyError(f"layer {layer.name}: expected one producer, got {prods}")
                expect = widths[0]
            if layer.in_channels != expect:
                raise TopologyError(
                    f"layer {layer.name}: in_channels {layer.in_channels} != producer width {expect}"
                )
            if layer.kind in ("bn", "pool", "add", "concat"):
                if layer.out_channels != layer.in_channels:
                    raise TopologyError(f"layer {layer.name}: pass-through layer must keep width")

    def conv_layer_count(self) -> int:
        return sum(1 for l in self.layers if l.kind == "conv")

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            "input_spatial": list(self.input_spatial),
            "num_classes": self.num_classes,
            "layers": [
                {
                    "name": l.name,
                    "kind": l.kind,
                    "out_channels": l.out_channels,
                    "in_channels": l.in_channels,
                    "kernel": [l.kernel_h, l.kernel_w],
                    "stride": l.stride,
                    "padding": l.padding,
                    "prune_group": l.prune_group,
                    "prunable": l.prunable,
                    "has_bias": l.has_bias,
                }
                for l in self.layers
            ],
            "edges": [[s, d] for s, d in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelManifest":
        if doc.get("schema") != SCHEMA_ID:
            raise ValidationError(f"unsupported manifest schema: {doc.get('schema')!r}")
        layers = tuple(
            LayerSpec(
                name=entry["name"],
                kind=entry["kind"],
                out_channels=entry["out_channels"],
                in_channels=entry["in_channels"],
                kernel_h=entry.get("kernel", [1, 1])[0],
                kernel_w=entry.get("kernel", [1, 1])[1],
                stride=entry.get("stride", 1),
                padding=entry.get("padding", 0),
                prune_group=entry.get("prune_group"),
                prunable=entry.get("prunable", False),
                has_bias=entry.get("has_bias", False),
            )
            for entry in doc["layers"]
        )
        edges = tuple((s, d) for s, d in doc.get("edges", []))
        return cls(
            layers=layers,
            edges=edges,
            input_spatial=tuple(doc["input_spatial"]),
            num_classes=doc["num_classes"],
        )


@dataclass
class TensorArchive:
    """A manifest plus the named weight tensors it declares."""

    manifest: ModelManifest
    tensors: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def validate(self) -> None:
        for layer in self.manifest.layers:
            expect = layer.weight_shape()
            if expect is None:
                continue
            ts = self.tensors.get(layer.name)
            if ts is None or "weight" not in ts:
                raise MissingFileError(f"layer {layer.name}: weight tensor missing")
            got = tuple(ts["weight"].shape)
            if got != expect:
                raise ShapeMismatchError(f"layer {layer.name}: weight shape {got} != manifest {expect}")
            if layer.kind in ("conv", "fc"):
                if layer.has_bias and "bias" not in ts:
                    raise MissingFileError(f"layer {layer.name}: bias tensor declared but missing")
                if "bias" in ts and tuple(ts["bias"].shape) != (layer.out_channels,):
                    raise ShapeMismatchError(f"layer {layer.name}: bias shape mismatch")
            if layer.kind == "bn":
                for role in ("bias", "running_mean", "running_var"):
                    if role not in ts:
                        raise MissingFileError(f"layer {layer.name}: bn tensor {role!r} missing")
                    if tuple(ts[role].shape) != (layer.out_channels,):
                        raise ShapeMismatchError(f"layer {layer.name}: bn tensor {role!r} shape mismatch")
            for role, arr in ts.items():
                if not np.all(np.isfinite(arr)):
                    raise NonFiniteError(f"layer {layer.name}: tensor {role!r} has non-finite values")


def _tensor_filename(layer: str, role: str) -> str:
    return f"{layer}.{role}.npy"


def save_archive(archive: TensorArchive, path) -> None:
    """Write an archive directory; byte-deterministic for a given archive."""
    archive.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    doc = archive.manifest.to_dict()
    files = {}
    for layer in archive.manifest.layers:
        for role in sorted(archive.tensors.get(layer.name, {})):
            files.setdefault(layer.name, {})[role] = _tensor_filename(layer.name, role)
    doc["tensors"] = files
    (root / "manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for layer_name, roles in files.items():
        for role, fname in roles.items():
            write_npy(root / fname, archive.tensors[layer_name][role])


def load_archive(path) -> TensorArchive:
    """Load and fully validate an archive directory."""
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise MissingFileError(f"missing manifest: {mpath}")
    try:
        doc = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{mpath}: invalid JSON: {exc}") from exc
    manifest = ModelManifest.from_dict(doc)
    tensors: dict[str, dict[str, np.ndarray]] = {}
    for layer_name, roles in doc.get("tensors", {}).items():
        tensors[layer_name] = {role: read_npy(root / fname) for role, fname in roles.items()}
    archive = TensorArchive(manifest=manifest, tensors=tensors)
    archive.validate()
    return archive


def flatten_filters(tensor: np.ndarray) -> np.ndarray:
    """4-D conv weight [c, c_in, h, w] -> float64 matrix (c_in*h*w, c).

    Column j is filter j flattened in (channel, row, col) order.
    """
    if tensor.ndim != 4:
        raise ValidationError(f"flatten_filters needs a 4-D tensor, got ndim={tensor.ndim}")
    c = tensor.shape[0]
    return np.asarray(tensor, dtype=np.float64).reshape(c, -1).T.copy()


def unflatten_filters(matrix: np.ndarray, c_in: int, h: int, w: int) -> np.ndarray:
    """Exact inverse of :func:`flatten_filters`; returns float32 storage."""
    d, c = matrix.shape
    if d != c_in * h * w:
        raise ShapeMismatchError(f"row count {d} != c_in*h*w = {c_in * h * w}")
    return np.asarray(matrix.T, dtype=np.float32).reshape(c, c_in, h, w).copy()

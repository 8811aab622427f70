"""Reader/writer for the sketchprune archive file format.

This is a clean-room consumer of the documented on-disk interface only:
``manifest.json`` (schema ``sketchprune-manifest-v1``) plus one NPY v1.0
float32 file per tensor, named ``<layer>.<role>.npy``. Nothing here
imports the sketchprune package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_ID = "sketchprune-manifest-v1"


class BridgeError(Exception):
    """Any bridge-side validation or mapping failure."""


@dataclass
class Archive:
    """Parsed manifest document plus the tensors it references."""

    manifest: dict
    tensors: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def layers(self) -> list[dict]:
        return self.manifest["layers"]

    def layer(self, name: str) -> dict:
        for entry in self.layers:
            if entry["name"] == name:
                return entry
        raise BridgeError(f"unknown layer {name!r}")

    def toposort(self) -> list[str]:
        names = [l["name"] for l in self.layers]
        indeg = {n: 0 for n in names}
        consumers: dict[str, list[str]] = {n: [] for n in names}
        for src, dst in self.manifest.get("edges", []):
            indeg[dst] += 1
            consumers[src].append(dst)
        order = [n for n in names if indeg[n] == 0]
        for node in order:
            for dst in consumers[node]:
                indeg[dst] -= 1
                if indeg[dst] == 0:
                    order.append(dst)
        if len(order) != len(names):
            raise BridgeError("manifest edges contain a cycle")
        return order

    def producers(self, name: str) -> list[str]:
        return [s for s, d in self.manifest.get("edges", []) if d == name]


def load_archive(path) -> Archive:
    root = Path(path)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise BridgeError(f"missing manifest: {mpath}")
    doc = json.loads(mpath.read_text(encoding="utf-8"))
    if doc.get("schema") != SCHEMA_ID:
        raise BridgeError(f"unsupported manifest schema {doc.get('schema')!r}")
    tensors: dict[str, dict[str, np.ndarray]] = {}
    for layer_name, roles in doc.get("tensors", {}).items():
        tensors[layer_name] = {}
        for role, fname in roles.items():
            try:
                arr = np.load(root / fname)
            except (OSError, ValueError) as exc:
                raise BridgeError(f"{fname}: unreadable tensor file: {exc}") from exc
            if arr.dtype != np.float32:
                raise BridgeError(f"{fname}: expected float32, got {arr.dtype}")
            tensors[layer_name][role] = arr
    return Archive(manifest=doc, tensors=tensors)


def save_archive(archive: Archive, path) -> None:
    """Write manifest + tensors; numpy's NPY v1.0 writer matches the format."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    doc = dict(archive.manifest)
    doc["tensors"] = {
        name: {role: f"{name}.{role}.npy" for role in sorted(roles)}
        for name, roles in archive.tensors.items()
    }
    (root / "manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for name, roles in archive.tensors.items():
        for role, arr in roles.items():
            if not np.all(np.isfinite(arr)):
                raise BridgeError(f"{name}.{role}: refusing to save non-finite values")
            np.save(root / f"{name}.{role}.npy", np.ascontiguousarray(arr, dtype="<f4"))

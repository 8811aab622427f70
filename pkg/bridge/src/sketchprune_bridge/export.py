"""Export framework checkpoints into the archive format."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .formats import Archive, BridgeError, save_archive

log = logging.getLogger(__name__)

# tensor roles each layer kind contributes to the archive
_ROLES = {
    "conv": ("weight", "bias"),
    "fc": ("weight", "bias"),
    "bn": ("weight", "bias", "running_mean", "running_var"),
}


@dataclass
class ExportSpec:
    """What to export: a checkpoint, the manifest describing it, where to.

    ``mapping`` renames manifest layers to checkpoint prefixes; layers not
    listed map to their own name (``conv1`` -> ``conv1.weight`` ...).
    State dicts produced by :class:`ManifestNet` carry a ``blocks.``
    prefix, which is stripped automatically.
    """

    checkpoint: dict | str | Path
    manifest: dict | str | Path
    out_dir: str | Path
    mapping: dict[str, str] = field(default_factory=dict)


def _load_state(checkpoint) -> dict[str, torch.Tensor]:
    if isinstance(checkpoint, (str, Path)):
        loaded = torch.load(checkpoint, map_location="cpu", weights_only=True)
    else:
        loaded = checkpoint
    if hasattr(loaded, "state_dict"):
        loaded = loaded.state_dict()
    return {k.removeprefix("blocks."): v for k, v in loaded.items()}


def _load_manifest(manifest) -> dict:
    if isinstance(manifest, (str, Path)):
        import json

        return json.loads(Path(manifest).read_text(encoding="utf-8"))
    return manifest


def export_checkpoint(spec: ExportSpec) -> Path:
    """Write an archive for the checkpoint; returns the archive directory."""
    state = _load_state(spec.checkpoint)
    manifest = _load_manifest(spec.manifest)
    tensors: dict[str, dict[str, np.ndarray]] = {}

    for layer in manifest["layers"]:
        kind, name = layer["kind"], layer["name"]
        if kind not in _ROLES:
            continue
        prefix = spec.mapping.get(name, name)
        out: dict[str, np.ndarray] = {}
        for role in _ROLES[kind]:
            key = f"{prefix}.{role}"
            if key not in state:
                if role == "bias" and not layer.get("has_bias", False) and kind != "bn":
                    continue
                raise BridgeError(f"layer {name}: no checkpoint tensor for {key!r}")
            t = state[key].detach().cpu()
            if t.dtype != torch.float32:
                log.warning("layer %s role %s: converting %s to float32", name, role, t.dtype)
                t = t.float()
            out[role] = t.numpy()
        tensors[name] = out

    archive = Archive(manifest=manifest, tensors=tensors)
    save_archive(archive, spec.out_dir)
    return Path(spec.out_dir)

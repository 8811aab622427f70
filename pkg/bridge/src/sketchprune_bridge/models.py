"""Build runnable PyTorch modules from archive manifests.

The manifest describes a DAG of conv/fc/bn/pool/add/concat layers but no
activations; ``ManifestNet`` inserts ReLU after each batch-norm and after
each conv that is not immediately followed by one. Pool layers are
realized as average pooling (the manifest does not distinguish pool
types; average is what the shipped classifier heads use).
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .formats import Archive, BridgeError


def _consumers(archive: Archive, name: str) -> list[str]:
    return [d for s, d in archive.manifest.get("edges", []) if s == name]


class ManifestNet(nn.Module):
    """Executes the manifest graph in topological order."""

    def __init__(self, archive: Archive):
        super().__init__()
        self.order = archive.toposort()
        self.spec = {l["name"]: l for l in archive.layers}
        self.producers = {n: archive.producers(n) for n in self.order}
        self.relu_after = set()
        mods: dict[str, nn.Module] = {}
        for name in self.order:
            layer = self.spec[name]
            kind = layer["kind"]
            kh, kw = layer.get("kernel", [1, 1])
            stride = max(layer.get("stride", 1), 1)
            padding = layer.get("padding", 0)
            if kind == "conv":
                mods[name] = nn.Conv2d(
                    layer["in_channels"], layer["out_channels"], (kh, kw),
                    stride=stride, padding=padding, bias=layer.get("has_bias", False),
                )
                downstream = [self.spec[c]["kind"] for c in _consumers(archive, name)]
                if "bn" not in downstream:
                    self.relu_after.add(name)
            elif kind == "bn":
                mods[name] = nn.BatchNorm2d(layer["out_channels"])
                self.relu_after.add(name)
            elif kind == "fc":
                mods[name] = nn.Linear(
                    layer["in_channels"], layer["out_channels"],
                    bias=layer.get("has_bias", False),
                )
            elif kind == "pool":
                mods[name] = nn.AvgPool2d((kh, kw), stride=stride, padding=padding)
            elif kind in ("add", "concat"):
                pass
            else:
                raise BridgeError(f"layer {name}: unsupported kind {kind!r}")
        self.blocks = nn.ModuleDict(mods)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        outs: dict[str, torch.Tensor] = {}
        result = x
        for name in self.order:
            kind = self.spec[name]["kind"]
            prods = self.producers[name]
            if kind == "add":
                cur = outs[prods[0]]
                for p in prods[1:]:
                    cur = cur + outs[p]
            elif kind == "concat":
                cur = torch.cat([outs[p] for p in prods], dim=1)
            else:
                inp = outs[prods[0]] if prods else x
                if kind == "fc" and inp.dim() > 2:
                    inp = inp.flatten(1)
                cur = self.blocks[name](inp)
            if name in self.relu_after:
                cur = torch.relu(cur)
            outs[name] = cur
            result = cur
        return result


def load_weights(net: ManifestNet, archive: Archive) -> ManifestNet:
    state: dict[str, torch.Tensor] = {}
    for name, roles in archive.tensors.items():
        for role, arr in roles.items():
            state[f"blocks.{name}.{role}"] = torch.from_numpy(np.ascontiguousarray(arr))
    missing, unexpected = net.load_state_dict(state, strict=False)
    # bn trackers (num_batches_tracked) are the only tolerated gap
    hard_missing = [m for m in missing if not m.endswith("num_batches_tracked")]
    if hard_missing or unexpected:
        raise BridgeError(f"weight mismatch: missing={hard_missing}, unexpected={unexpected}")
    return net


def import_archive(path) -> ManifestNet:
    """Archive directory -> runnable module with the archived weights."""
    from .formats import load_archive

    archive = load_archive(path)
    net = ManifestNet(archive)
    return load_weights(net, archive)


def dummy_forward(net: ManifestNet, archive: Archive, batch: int = 2) -> torch.Tensor:
    """Run a shape-checking forward pass on a zero input."""
    h, w = archive.manifest["input_spatial"]
    root = archive.toposort()[0]
    cin = archive.layer(root)["in_channels"]
    net.eval()
    with torch.no_grad():
        return net(torch.zeros(batch, cin, h, w))

"""Built-in architecture manifests and random archive generation.

The CLI ships these as JSON data files (``data/architectures/*.json``);
this module is the generator behind those files and the fallback when a
name is requested programmatically.

Channel layouts follow the standard CIFAR ResNet (16/32/64, conv
shortcuts), the ImageNet bottleneck ResNet-50, and the CIFAR flavor of
GoogLeNet (3x3 stem at 32x32, the 5x5 branch realized as two 3x3
convs). Convolutions carry no bias (a batch-norm follows each);
classifiers do.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .archive import LayerSpec, ModelManifest, TensorArchive
from .errors import ValidationError
from .rng import name_stream

ARCHITECTURES = ("resnet56", "resnet110", "resnet50", "googlenet")


class _Graph:
    def __init__(self, input_spatial, num_classes):
        self.layers: list[LayerSpec] = []
        self.edges: list[tuple[str, str]] = []
        self.input_spatial = input_spatial
        self.num_classes = num_classes

    def add(self, spec: LayerSpec, inputs: list[str]) -> str:
        self.layers.append(spec)
        for src in inputs:
            self.edges.append((src, spec.name))
        return spec.name

    def conv(self, name, src, cin, cout, k, stride=1, pad=None, prunable=True, group=None):
        pad = (k // 2) if pad is None else pad
        self.add(
            LayerSpec(name=name, kind="conv", out_channels=cout, in_channels=cin,
                      kernel_h=k, kernel_w=k, stride=stride, padding=pad,
                      prunable=prunable, prune_group=group),
            [src] if src else [],
        )
        return name

    def bn(self, name, src, c):
        self.add(LayerSpec(name=name, kind="bn", out_channels=c, in_channels=c), [src])
        return name

    def pool(self, name, src, c, k, stride=1, pad=0):
        self.add(LayerSpec(name=name, kind="pool", out_channels=c, in_channels=c,
                           kernel_h=k, kernel_w=k, stride=stride, padding=pad), [src])
        return name

    def addnode(self, name, srcs, c):
        self.add(LayerSpec(name=name, kind="add", out_channels=c, in_channels=c), srcs)
        return name

    def concat(self, name, srcs, c):
        self.add(LayerSpec(name=name, kind="concat", out_channels=c, in_channels=c), srcs)
        return name

    def fc(self, name, src, cin, cout):
        self.add(LayerSpec(name=name, kind="fc", out_channels=cout, in_channels=cin,
                           has_bias=True), [src])
        return name

    def manifest(self) -> ModelManifest:
        return ModelManifest(
            layers=tuple(self.layers),
            edges=tuple(self.edges),
            input_spatial=self.input_spatial,
            num_classes=self.num_classes,
        )


def _resnet_cifar(depth: int, num_classes: int = 10) -> ModelManifest:
    if (depth - 2) % 6 != 0:
        raise ValidationError(f"CIFAR ResNet depth must be 6n+2, got {depth}")
    n = (depth - 2) // 6
    g = _Graph((32, 32), num_classes)
    cur = g.conv("conv1", None, 3, 16, 3, prunable=False, group="stage1")
    cur = g.bn("bn1", cur, 16)
    cin = 16
    for s, planes in enumerate((16, 32, 64), start=1):
        group = f"stage{s}"
        for b in range(n):
            stride = 2 if (s > 1 and b == 0) else 1
            pre = cur
            a = g.conv(f"s{s}.b{b}.conv1", pre, cin, planes, 3, stride=stride)
            a = g.bn(f"s{s}.b{b}.bn1", a, planes)
            c2 = g.conv(f"s{s}.b{b}.conv2", a, planes, planes, 3, group=group)
            c2 = g.bn(f"s{s}.b{b}.bn2", c2, planes)
            if cin != planes:
                sc = g.conv(f"s{s}.b{b}.down", pre, cin, planes, 1, stride=stride, pad=0, group=group)
                sc = g.bn(f"s{s}.b{b}.down_bn", sc, planes)
            else:
                sc = pre
            cur = g.addnode(f"s{s}.b{b}.add", [c2, sc], planes)
            cin = planes
    cur = g.pool("avgpool", cur, 64, 8)
    g.fc("fc", cur, 64, num_classes)
    return g.manifest()


def _resnet50(num_classes: int = 1000) -> ModelManifest:
    g = _Graph((224, 224), num_classes)
    cur = g.conv("conv1", None, 3, 64, 7, stride=2, pad=3, prunable=False)
    cur = g.bn("bn1", cur, 64)
    cur = g.pool("maxpool", cur, 64, 3, stride=2, pad=1)
    cin = 64
    blocks = (3, 4, 6, 3)
    for s, (planes, nblocks) in enumerate(zip((64, 128, 256, 512), blocks), start=1):
        group = f"stage{s}"
        cout = planes * 4
        for b in range(nblocks):
            stride = 2 if (s > 1 and b == 0) else 1
            pre = cur
            x = g.conv(f"s{s}.b{b}.conv1", pre, cin, planes, 1, pad=0)
            x = g.bn(f"s{s}.b{b}.bn1", x, planes)
            x = g.conv(f"s{s}.b{b}.conv2", x, planes, planes, 3, stride=stride)
            x = g.bn(f"s{s}.b{b}.bn2", x, planes)
            x = g.conv(f"s{s}.b{b}.conv3", x, planes, cout, 1, pad=0, group=group)
            x = g.bn(f"s{s}.b{b}.bn3", x, cout)
            if b == 0:
                sc = g.conv(f"s{s}.b{b}.down", pre, cin, cout, 1, stride=stride, pad=0, group=group)
                sc = g.bn(f"s{s}.b{b}.down_bn", sc, cout)
            else:
                sc = pre
            cur = g.addnode(f"s{s}.b{b}.add", [x, sc], cout)
            cin = cout
    cur = g.pool("avgpool", cur, 2048, 7)
    g.fc("fc", cur, 2048, num_classes)
    return g.manifest()


_INCEPTION_CFG = {
    "a3": (192, 64, 96, 128, 16, 32, 32),
    "b3": (256, 128, 128, 192, 32, 96, 64),
    "a4": (480, 192, 96, 208, 16, 48, 64),
    "b4": (512, 160, 112, 224, 24, 64, 64),
    "c4": (512, 128, 128, 256, 24, 64, 64),
    "d4": (512, 112, 144, 288, 32, 64, 64),
    "e4": (528, 256, 160, 320, 32, 128, 128),
    "a5": (832, 256, 160, 320, 32, 128, 128),
    "b5": (832, 384, 192, 384, 48, 128, 128),
}


def _googlenet(num_classes: int = 10) -> ModelManifest:
    g = _Graph((32, 32), num_classes)
    cur = g.conv("pre.conv", None, 3, 192, 3, prunable=False)
    cur = g.bn("pre.bn", cur, 192)

    def inception(tag, src, cfg):
        cin, n1, n3r, n3, n5r, n5, pp = cfg
        b1 = g.conv(f"{tag}.b1.conv", src, cin, n1, 1, pad=0)
        b1 = g.bn(f"{tag}.b1.bn", b1, n1)
        b2 = g.conv(f"{tag}.b2.conv1", src, cin, n3r, 1, pad=0)
        b2 = g.bn(f"{tag}.b2.bn1", b2, n3r)
        b2 = g.conv(f"{tag}.b2.conv2", b2, n3r, n3, 3)
        b2 = g.bn(f"{tag}.b2.bn2", b2, n3)
        b3 = g.conv(f"{tag}.b3.conv1", src, cin, n5r, 1, pad=0)
        b3 = g.bn(f"{tag}.b3.bn1", b3, n5r)
        b3 = g.conv(f"{tag}.b3.conv2", b3, n5r, n5, 3)
        b3 = g.bn(f"{tag}.b3.bn2", b3, n5)
        b3 = g.conv(f"{tag}.b3.conv3", b3, n5, n5, 3)
        b3 = g.bn(f"{tag}.b3.bn3", b3, n5)
        b4 = g.pool(f"{tag}.b4.pool", src, cin, 3, stride=1, pad=1)
        b4 = g.conv(f"{tag}.b4.conv", b4, cin, pp, 1, pad=0)
        b4 = g.bn(f"{tag}.b4.bn", b4, pp)
        total = n1 + n3 + n5 + pp
        return g.concat(f"{tag}.cat", [b1, b2, b3, b4], total), total

    cur, width = inception("a3", cur, _INCEPTION_CFG["a3"])
    cur, width = inception("b3", cur, _INCEPTION_CFG["b3"])
    cur = g.pool("pool3", cur, width, 3, stride=2, pad=1)
    for tag in ("a4", "b4", "c4", "d4", "e4"):
        cur, width = inception(tag, cur, _INCEPTION_CFG[tag])
    cur = g.pool("pool4", cur, width, 3, stride=2, pad=1)
    for tag in ("a5", "b5"):
        cur, width = inception(tag, cur, _INCEPTION_CFG[tag])
    cur = g.pool("avgpool", cur, width, 8)
    g.fc("fc", cur, width, num_classes)
    return g.manifest()


def build_manifest(name: str) -> ModelManifest:
    """Construct one of the built-in architecture manifests by name."""
    if name == "resnet56":
        return _resnet_cifar(56)
    if name == "resnet110":
        return _resnet_cifar(110)
    if name == "resnet50":
        return _resnet50()
    if name == "googlenet":
        return _googlenet()
    raise ValidationError(f"unknown architecture {name!r}; known: {', '.join(ARCHITECTURES)}")


def load_manifest(name: str) -> ModelManifest:
    """Load a shipped manifest data file, falling back to the builder."""
    try:
        res = resources.files("sketchprune") / "data" / "architectures" / f"{name}.json"
        doc = json.loads(res.read_text(encoding="utf-8"))
        return ModelManifest.from_dict(doc)
    except (FileNotFoundError, ModuleNotFoundError):
        return build_manifest(name)


def random_archive(manifest: ModelManifest, seed: int) -> TensorArchive:
    """Seeded random-weight archive matching a manifest (for benches and tests)."""
    tensors: dict[str, dict[str, np.ndarray]] = {}
    for layer in manifest.layers:
        shape = layer.weight_shape()
        if shape is None:
            continue
        rng = name_stream(seed, layer.name)
        if layer.kind == "bn":
            tensors[layer.name] = {
                "weight": np.ones(shape, dtype=np.float32),
                "bias": np.zeros(shape, dtype=np.float32),
                "running_mean": np.zeros(shape, dtype=np.float32),
                "running_var": np.ones(shape, dtype=np.float32),
            }
            continue
        fan_in = layer.flat_dim
        w = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        entry = {"weight": w.astype(np.float32)}
        if layer.has_bias:
            entry["bias"] = np.zeros(layer.out_channels, dtype=np.float32)
        tensors[layer.name] = entry
    return TensorArchive(manifest=manifest, tensors=tensors)


def export_manifest_data(outdir) -> None:
    """Write all built-in manifests as JSON data files."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ARCHITECTURES:
        doc = build_manifest(name).to_dict()
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")

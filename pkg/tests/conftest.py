"""Shared fixtures: small hand-built manifests and seeded archives."""

import numpy as np
import pytest

from sketchprune.architectures import random_archive
from sketchprune.archive import LayerSpec, ModelManifest, TensorArchive


def chain_edges(names):
    return tuple((a, b) for a, b in zip(names, names[1:]))


def toy_manifest() -> ModelManifest:
    """conv1 -> bn1 -> conv2 -> fc, CIFAR-sized input."""
    layers = (
        LayerSpec(name="conv1", kind="conv", out_channels=8, in_channels=3,
                  kernel_h=3, kernel_w=3, stride=1, padding=1, prunable=True),
        LayerSpec(name="bn1", kind="bn", out_channels=8, in_channels=8),
        LayerSpec(name="conv2", kind="conv", out_channels=4, in_channels=8,
                  kernel_h=3, kernel_w=3, stride=1, padding=1, prunable=True),
        LayerSpec(name="fc", kind="fc", out_channels=10, in_channels=4, has_bias=True),
    )
    return ModelManifest(
        layers=layers,
        edges=chain_edges([l.name for l in layers]),
        input_spatial=(32, 32),
        num_classes=10,
    )


def residual_manifest() -> ModelManifest:
    """Two grouped convs feeding an add, as in a residual stage."""
    layers = (
        LayerSpec(name="stem", kind="conv", out_channels=8, in_channels=3,
                  kernel_h=3, kernel_w=3, padding=1),
        LayerSpec(name="branch_a", kind="conv", out_channels=16, in_channels=8,
                  kernel_h=3, kernel_w=3, padding=1, prunable=True, prune_group="g"),
        LayerSpec(name="branch_b", kind="conv", out_channels=16, in_channels=8,
                  kernel_h=1, kernel_w=1, prunable=True, prune_group="g"),
        LayerSpec(name="join", kind="add", out_channels=16, in_channels=16),
        LayerSpec(name="fc", kind="fc", out_channels=10, in_channels=16, has_bias=True),
    )
    edges = (
        ("stem", "branch_a"),
        ("stem", "branch_b"),
        ("branch_a", "join"),
        ("branch_b", "join"),
        ("join", "fc"),
    )
    return ModelManifest(layers=layers, edges=edges, input_spatial=(32, 32), num_classes=10)


@pytest.fixture
def toy_archive() -> TensorArchive:
    return random_archive(toy_manifest(), seed=11)


@pytest.fixture
def residual_archive() -> TensorArchive:
    return random_archive(residual_manifest(), seed=12)


def tensors_equal(a: TensorArchive, b: TensorArchive) -> bool:
    if set(a.tensors) != set(b.tensors):
        return False
    for name, roles in a.tensors.items():
        if set(roles) != set(b.tensors[name]):
            return False
        for role, arr in roles.items():
            other = b.tensors[name][role]
            if arr.shape != other.shape or not np.array_equal(arr, other):
                return False
    return True

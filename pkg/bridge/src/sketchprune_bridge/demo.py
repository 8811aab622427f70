"""Fine-tuning demo: sketched vs randomly subsampled warm-ups on a toy task.

The task is a small synthetic image classification problem: each class is
a fixed template image and samples are templates plus Gaussian noise.
A "pretrained" toy net is exported, pruned both ways by the sketchprune
CLI (outside this package), and each pruned archive is fine-tuned under
an identical schedule. Training uses SGD with Nesterov momentum 0.9.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .formats import Archive
from .models import ManifestNet, import_archive

NUM_CLASSES = 4
IMAGE_SIZE = 8


def toy_manifest(channels: int = 16, num_classes: int | None = None,
                 prunable: tuple[str, ...] = ("conv1", "conv2", "conv3")) -> dict:
    """Three conv-bn stages, then pool and fc, over 3x8x8 inputs."""
    if num_classes is None:
        num_classes = NUM_CLASSES
    names = ["conv1", "bn1", "conv2", "bn2", "conv3", "bn3", "pool", "fc"]

    def conv(name, cin, cout):
        return {"name": name, "kind": "conv", "out_channels": cout,
                "in_channels": cin, "kernel": [3, 3], "stride": 1, "padding": 1,
                "prune_group": None, "prunable": name in prunable, "has_bias": False}

    def bn(name, c):
        return {"name": name, "kind": "bn", "out_channels": c, "in_channels": c,
                "kernel": [1, 1], "stride": 1, "padding": 0, "prune_group": None,
                "prunable": False, "has_bias": False}

    layers = [
        conv("conv1", 3, channels), bn("bn1", channels),
        conv("conv2", channels, channels), bn("bn2", channels),
        conv("conv3", channels, channels), bn("bn3", channels),
        {"name": "pool", "kind": "pool", "out_channels": channels,
         "in_channels": channels, "kernel": [IMAGE_SIZE, IMAGE_SIZE], "stride": 1,
         "padding": 0, "prune_group": None, "prunable": False, "has_bias": False},
        {"name": "fc", "kind": "fc", "out_channels": num_classes,
         "in_channels": channels, "kernel": [1, 1], "stride": 1, "padding": 0,
         "prune_group": None, "prunable": False, "has_bias": True},
    ]
    return {
        "schema": "sketchprune-manifest-v1",
        "input_spatial": [IMAGE_SIZE, IMAGE_SIZE],
        "num_classes": num_classes,
        "layers": layers,
        "edges": [[a, b] for a, b in zip(names, names[1:])],
    }


@dataclass
class Dataset:
    train_x: torch.Tensor
    train_y: torch.Tensor
    test_x: torch.Tensor
    test_y: torch.Tensor


def make_dataset(seed: int, n_train: int = 512, n_test: int = 256,
                 noise: float = 0.8, num_classes: int | None = None) -> Dataset:
    """Template-plus-noise classification images; templates fixed across seeds."""
    if num_classes is None:
        num_classes = NUM_CLASSES
    tpl_gen = torch.Generator().manual_seed(20_240_101)  # task identity, never varies
    templates = torch.randn(num_classes, 3, IMAGE_SIZE, IMAGE_SIZE, generator=tpl_gen)
    gen = torch.Generator().manual_seed(seed)

    def draw(n):
        y = torch.randint(0, num_classes, (n,), generator=gen)
        x = templates[y] + noise * torch.randn(n, 3, IMAGE_SIZE, IMAGE_SIZE, generator=gen)
        return x, y

    train_x, train_y = draw(n_train)
    test_x, test_y = draw(n_test)
    return Dataset(train_x, train_y, test_x, test_y)


def accuracy(net: ManifestNet, x: torch.Tensor, y: torch.Tensor) -> float:
    net.eval()
    with torch.no_grad():
        pred = net(x).argmax(dim=1)
    return float((pred == y).float().mean())


def train(net: ManifestNet, data: Dataset, epochs: int, seed: int,
          lr: float = 0.05, batch_size: int = 64) -> float:
    """Fine-tune and return final test accuracy. epochs=0 just evaluates."""
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.SGD(net.parameters(), lr=lr, momentum=0.9, nesterov=True)
    loss_fn = nn.CrossEntropyLoss()
    n = data.train_x.shape[0]
    for _ in range(epochs):
        net.train()
        for idx in torch.randperm(n, generator=gen).split(batch_size):
            opt.zero_grad()
            loss = loss_fn(net(data.train_x[idx]), data.train_y[idx])
            loss.backward()
            opt.step()
    return accuracy(net, data.test_x, data.test_y)


def finetune_demo(pruned_a, pruned_b, data: Dataset, epochs: int,
                  seed: int = 0) -> tuple[float, float]:
    """Fine-tune two pruned archives under the identical schedule."""
    results = []
    for path in (pruned_a, pruned_b):
        torch.manual_seed(seed)  # identical init for any re-learned parts
        net = import_archive(path)
        results.append(train(net, data, epochs=epochs, seed=seed))
    return results[0], results[1]


def pretrain_toy(data: Dataset, epochs: int = 30, seed: int = 1,
                 manifest: dict | None = None) -> ManifestNet:
    """Train a fresh toy net to serve as the 'pretrained' checkpoint."""
    torch.manual_seed(seed)
    net = ManifestNet(Archive(manifest=manifest or toy_manifest()))
    train(net, data, epochs=epochs, seed=seed)
    return net

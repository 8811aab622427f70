"""Shared fixtures: a pretrained toy checkpoint and CLI-pruned archives.

The bridge consumes the primary toolkit only through its external
interfaces, so pruned archives are produced by invoking the installed
``sketchprune`` command-line tool as a subprocess.
"""

from __future__ import annotations

import shutil
import subprocess

import pytest
import torch

from sketchprune_bridge import (
    Archive,
    ExportSpec,
    export_checkpoint,
    make_dataset,
    toy_manifest,
)
from sketchprune_bridge.models import ManifestNet
from sketchprune_bridge.demo import train

SKETCHPRUNE = shutil.which("sketchprune")


def run_cli(*args: str) -> subprocess.CompletedProcess:
    if SKETCHPRUNE is None:
        pytest.skip("sketchprune CLI not installed")
    return subprocess.run(
        [SKETCHPRUNE, *map(str, args)], capture_output=True, text=True, check=False
    )


@pytest.fixture(scope="session")
def toy_data():
    return make_dataset(seed=11, n_train=256, n_test=128)


@pytest.fixture(scope="session")
def pretrained_net(toy_data):
    torch.manual_seed(3)
    net = ManifestNet(Archive(manifest=toy_manifest()))
    train(net, toy_data, epochs=8, seed=3)
    return net


@pytest.fixture(scope="session")
def base_archive(pretrained_net, tmp_path_factory):
    out = tmp_path_factory.mktemp("base") / "archive"
    export_checkpoint(ExportSpec(
        checkpoint=pretrained_net.state_dict(),
        manifest=toy_manifest(),
        out_dir=out,
    ))
    return out


@pytest.fixture(scope="session")
def pruned_fd(base_archive, tmp_path_factory):
    out = tmp_path_factory.mktemp("fd") / "pruned"
    proc = run_cli("sketch", "--model", base_archive, "--rate", "0.5",
                   "--out", out, "--baseline", "fd")
    assert proc.returncode == 0, proc.stderr
    return out


@pytest.fixture(scope="session")
def pruned_random(base_archive, tmp_path_factory):
    out = tmp_path_factory.mktemp("rn") / "pruned"
    proc = run_cli("sketch", "--model", base_archive, "--rate", "0.5",
                   "--out", out, "--baseline", "random", "--seed", "0")
    assert proc.returncode == 0, proc.stderr
    return out

"""Deterministic random streams for test matrices and golden cases.

All seeded randomness in this project flows through the Philox4x64-10
counter-based generator (numpy's ``np.random.Philox``), keyed directly by
the 64-bit case seed with the counter starting at zero. Philox is fully
specified by published constants, so the same (seed, shape) pair yields
the same stream in any implementation of the generator.
"""

from __future__ import annotations

import hashlib

import numpy as np


def philox_generator(seed: int, *streams: int) -> np.random.Generator:
    """Generator keyed by ``seed`` and optional sub-stream integers."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) ^ _mix(streams)))


def _mix(streams) -> np.uint64:
    if not streams:
        return np.uint64(0)
    digest = hashlib.sha256(repr(tuple(streams)).encode()).digest()
    return np.uint64(int.from_bytes(digest[:8], "little"))


def standard_normal_matrix(seed: int, d: int, c: int) -> np.ndarray:
    """Deterministic float64 standard-normal d x c matrix."""
    return philox_generator(seed).standard_normal((d, c))


def name_stream(seed: int, name: str) -> np.random.Generator:
    """Sub-stream derived from a string label (layer or group name)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return philox_generator(seed, int.from_bytes(digest[:8], "little"))

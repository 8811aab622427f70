"""Independent brute-force Frequent Directions reference and golden cases.

``reference_fd`` re-states the streaming algorithm with none of the main
implementation's bookkeeping: it scans for an actual all-zero column on
every insertion and recomputes a fresh full SVD per shrink. It shares
only the SVD sign convention with :func:`sketchprune.sketch.fd_sketch`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import NonFiniteError, ValidationError
from .rng import standard_normal_matrix
from .sketch import fix_svd_signs

__all__ = ["GoldenCase", "reference_fd", "generate_case", "load_golden_cases", "matrix_checksum"]


@dataclass(frozen=True)
class GoldenCase:
    seed: int
    d: int
    c: int
    ell: int
    input_sha256: str
    omega_sha256: str
    gram_err_spec: float


def matrix_checksum(m: np.ndarray) -> str:
    """SHA-256 over the canonical little-endian float64 row-major bytes."""
    canon = np.ascontiguousarray(m, dtype="<f8")
    return hashlib.sha256(canon.tobytes(order="C")).hexdigest()


def reference_fd(W: np.ndarray, ell: int) -> np.ndarray:
    """Naive line-by-line Frequent Directions; independent of fd_sketch."""
    W = np.asarray(W, dtype=np.float64)
    if ell < 1:
        raise ValidationError(f"sketch width must be >= 1, got {ell}")
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("input matrix contains non-finite values")
    d, c = W.shape
    omega = np.zeros((d, ell))
    occupied = np.zeros(ell, dtype=bool)  # a zero input still occupies its slot
    for j in range(c):
        slot = int(np.argmin(occupied))
        omega[:, slot] = W[:, j]
        occupied[slot] = True
        if occupied.all():
            U, S, Vt = np.linalg.svd(omega, full_matrices=False)
            U, Vt = fix_svd_signs(U, Vt)
            k = (ell + 1) // 2  # 1-based shrink index
            delta = S[k - 1] ** 2 if k - 1 < S.shape[0] else 0.0
            s_hat = np.sqrt(np.maximum(S**2 - delta, 0.0))
            omega = np.zeros((d, ell))
            omega[:, : U.shape[1]] = U * s_hat
            occupied = np.zeros(ell, dtype=bool)
            occupied[: k - 1] = True
    return omega


def _spectral_gram_error(W: np.ndarray, omega: np.ndarray) -> float:
    diff = W @ W.T - omega @ omega.T
    return float(np.max(np.linalg.eigvalsh(diff)))


def generate_case(seed: int, d: int, c: int, ell: int) -> tuple[GoldenCase, np.ndarray]:
    """Materialize a seeded case; golden fields come from the reference path."""
    if min(d, c, ell) < 1:
        raise ValidationError("dimensions must be positive")
    W = standard_normal_matrix(seed, d, c)
    omega = reference_fd(W, ell)
    case = GoldenCase(
        seed=seed,
        d=d,
        c=c,
        ell=ell,
        input_sha256=matrix_checksum(W),
        omega_sha256=matrix_checksum(omega),
        gram_err_spec=_spectral_gram_error(W, omega),
    )
    return case, W


def golden_cases_path() -> Path:
    return Path(str(resources.files("sketchprune") / "data" / "golden_cases.json"))


def load_golden_cases(path=None) -> list[GoldenCase]:
    doc = json.loads(Path(path or golden_cases_path()).read_text(encoding="utf-8"))
    return [GoldenCase(**entry) for entry in doc["cases"]]


def dump_golden_cases(cases: list[GoldenCase], path) -> None:
    doc = {"generator": "philox4x64-10, key=seed, counter=0", "cases": [asdict(c) for c in cases]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")

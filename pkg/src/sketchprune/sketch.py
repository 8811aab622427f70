"""Frequent Directions sketching of filter matrices.

The sketcher streams the columns of a d x c matrix into a d x l buffer.
Whenever the buffer fills, it is rotated by its thin SVD and the squared
singular values are shrunk by delta = s_k^2 with k = ceil(l/2) (1-based),
which zeroes at least ceil(l/2) trailing columns. The resulting sketch
Omega satisfies 0 <= Omega Omega^T <= W W^T (PSD order) and
lambda_max(W W^T - Omega Omega^T) <= (2/l) * ||W||_F^2.

Determinism: slots are tracked with a fill counter (a zero input column
still occupies a slot), and every SVD is post-processed with a fixed
sign convention so identical inputs give bit-identical sketches.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError, NumericalError, ValidationError

__all__ = [
    "SketchResult",
    "SvdShrinkState",
    "sketch_size",
    "fd_sketch",
    "svd_shrink",
    "frobenius_normalize",
    "fix_svd_signs",
]


@dataclass
class SketchResult:
    omega: np.ndarray          # d x l sketch
    shrink_count: int
    elapsed_seconds: float
    fro_norm_omega: float


@dataclass
class SvdShrinkState:
    U: np.ndarray              # d x min(d, l), orthonormal columns, signs fixed
    S: np.ndarray              # length l, non-increasing (zero-padded if d < l)
    V: np.ndarray              # l x min(d, l)
    delta: float
    s_hat: np.ndarray          # length l, shrunk singular values


def sketch_size(p: float, c: int) -> int:
    """Number of sketched columns: round(p*c) with half-up ties, clamped to [1, c]."""
    if not 0.0 < p <= 1.0:
        raise ValidationError(f"rate must be in (0, 1], got {p}")
    if c < 1:
        raise ValidationError(f"column count must be >= 1, got {c}")
    return int(min(max(math.floor(p * c + 0.5), 1), c))


def fix_svd_signs(U: np.ndarray, Vt: np.ndarray | None = None):
    """Fix each left singular vector so its largest-|.| entry is positive.

    Ties break toward the lowest index (np.argmax). Vt rows are flipped in
    lockstep so U @ diag(S) @ Vt is unchanged.
    """
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if Vt is not None:
        Vt = Vt * signs[:, None]
        return U, Vt
    return U


#: Buffers with at least this many rows (and no more columns than rows)
#: take the Gram-eigendecomposition path below instead of a direct
#: LAPACK SVD. The golden reference cases all have d <= 512, so they
#: always exercise the exact path.
GRAM_SVD_MIN_ROWS = 768


def _thin_svd(m: np.ndarray):
    d, ell = m.shape
    if d >= GRAM_SVD_MIN_ROWS and d >= ell:
        return _thin_svd_gram(m)
    try:
        U, S, Vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge on a {m.shape} buffer") from exc
    U, Vt = fix_svd_signs(U, Vt)
    return U, S, Vt


def _thin_svd_gram(m: np.ndarray):
    """Thin SVD of a tall matrix via the small Gram l x l eigenproblem.

    Much faster than a direct SVD when d >> l. Left vectors belonging to
    (near-)zero singular values are returned as zero columns; the shrink
    step multiplies them by a zero coefficient, so they never reach the
    output sketch.
    """
    d, ell = m.shape
    try:
        vals, vecs = np.linalg.eigh(m.T @ m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram eigendecomposition failed on a {m.shape} buffer") from exc
    vals = np.maximum(vals[::-1], 0.0)
    vecs = np.ascontiguousarray(vecs[:, ::-1])
    S = np.sqrt(vals)
    U = np.zeros((d, ell))
    alive = S > (S[0] * 1e-12 if S[0] > 0.0 else 0.0)
    if np.any(alive):
        U[:, alive] = m @ (vecs[:, alive] / S[alive])
    U, Vt = fix_svd_signs(U, vecs.T)
    return U, S, Vt


def svd_shrink(omega: np.ndarray) -> tuple[SvdShrinkState, np.ndarray]:
    """One FD shrink of a full d x l buffer; returns state and the shrunk buffer.

    At least ceil(l/2) trailing columns of the result are exactly zero and
    the remaining columns are mutually orthogonal.
    """
    d, ell = omega.shape
    U, S, Vt = _thin_svd(omega)
    k0 = _ceil_half(ell) - 1  # 0-based shrink index
    delta = float(S[k0] ** 2) if k0 < S.shape[0] else 0.0
    s_full = np.zeros(ell)
    s_full[: S.shape[0]] = S
    s_hat = np.sqrt(np.maximum(s_full**2 - delta, 0.0))
    out = np.zeros((d, ell))
    out[:, : U.shape[1]] = U * s_hat[: U.shape[1]]
    state = SvdShrinkState(U=U, S=s_full, V=Vt.T, delta=delta, s_hat=s_hat)
    return state, out


def _ceil_half(ell: int) -> int:
    return (ell + 1) // 2


def fd_sketch(W: np.ndarray, ell: int) -> SketchResult:
    """Sketch the columns of W (d x c) into a d x ell Frequent Directions buffer."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got ndim={W.ndim}")
    if ell < 1:
        raise ValidationError(f"sketch width must be >= 1, got {ell}")
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("input matrix contains non-finite values")

    d, c = W.shape
    t0 = time.perf_counter()
    omega = np.zeros((d, ell))
    fill = 0
    shrinks = 0
    j = 0
    while j < c:
        take = min(ell - fill, c - j)
        omega[:, fill : fill + take] = W[:, j : j + take]
        fill += take
        j += take
        if fill == ell:
            _, omega = svd_shrink(omega)
            # slots from the shrink index onward are exactly zero
            fill = _ceil_half(ell) - 1
            shrinks += 1
    elapsed = time.perf_counter() - t0
    return SketchResult(
        omega=omega,
        shrink_count=shrinks,
        elapsed_seconds=elapsed,
        fro_norm_omega=float(np.linalg.norm(omega)),
    )


def frobenius_normalize(result: SketchResult) -> np.ndarray:
    """Scale the sketch to unit Frobenius norm (the fine-tuning warm-up form)."""
    from .errors import DegenerateSketchError

    if result.fro_norm_omega == 0.0:
        raise DegenerateSketchError("sketch is all-zero; cannot normalize")
    return result.omega / result.fro_norm_omega

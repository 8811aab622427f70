"""Covariance-preservation diagnostics and complexity accounting.

Covers three concerns:

* ``sketch_quality`` - how well a sketch preserves the Gram/covariance
  structure of the original filter matrix, plus the 2/l error-bound
  certificate.
* ``weight_stats`` - per-layer weight statistics (the zero-mean check
  that justifies dropping the mean-centering term).
* ``count_flops_params`` / ``compare_models`` - MAC and parameter
  accounting. Convention: one multiply-accumulate = one FLOP; biases and
  batch-norm are excluded from FLOPs; parameters count conv/fc weights
  plus biases plus batch-norm affine pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .archive import ModelManifest, TensorArchive
from .errors import NumericalError, ShapeMismatchError, TopologyError, ValidationError

FLOPS_CONVENTION = "1 MAC = 1 FLOP; bias and batch-norm excluded from FLOPs; params = conv/fc weights + biases + BN affine pairs"

# d x d eigensolves above this size fall back to power iteration
DENSE_EIG_CAP = 4096
POWER_ITER_TOL = 1e-8
HISTOGRAM_BINS = 64


@dataclass
class QualityReport:
    sigma_w_err: float
    gram_err_fro: float
    gram_err_spec: float
    min_eig_diff: float
    min_eig_omega: float
    epsilon_bound: float
    bound_satisfied: bool

    def to_dict(self) -> dict:
        return {
            "sigma_w_err": self.sigma_w_err,
            "gram_err_fro": self.gram_err_fro,
            "gram_err_spec": self.gram_err_spec,
            "min_eig_diff": self.min_eig_diff,
            "min_eig_omega": self.min_eig_omega,
            "epsilon_bound": self.epsilon_bound,
            "bound_satisfied": self.bound_satisfied,
        }


@dataclass
class LayerStats:
    layer: str
    mean: float
    std: float
    filter_means: list[float]
    histogram_counts: list[int]
    histogram_edges: list[float]
    zero_mean_strained: bool


@dataclass
class WeightStats:
    layers: list[LayerStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "layer": s.layer,
                    "mean": s.mean,
                    "std": s.std,
                    "filter_means": s.filter_means,
                    "histogram": {"counts": s.histogram_counts, "edges": s.histogram_edges},
                    "zero_mean_strained": s.zero_mean_strained,
                }
                for s in self.layers
            ]
        }


@dataclass
class ComplexityReport:
    per_layer: dict[str, dict[str, int]]
    total_macs: int
    total_params: int
    convention: str = FLOPS_CONVENTION
    pruning_rate_flops: float | None = None
    pruning_rate_params: float | None = None

    def to_dict(self) -> dict:
        doc = {
            "per_layer": self.per_layer,
            "total_macs": self.total_macs,
            "total_params": self.total_params,
            "convention": self.convention,
        }
        if self.pruning_rate_flops is not None:
            doc["pruning_rate_flops_percent"] = self.pruning_rate_flops
            doc["pruning_rate_params_percent"] = self.pruning_rate_params
        return doc


def _power_extreme_eig(sym: np.ndarray, largest: bool) -> float:
    """Extreme eigenvalue of a symmetric matrix via shifted power iteration."""
    n = sym.shape[0]
    bound = float(np.linalg.norm(sym, ord=1))  # >= spectral radius
    shifted = sym + bound * np.eye(n) if largest else bound * np.eye(n) - sym
    v = np.full(n, 1.0 / np.sqrt(n))
    prev = 0.0
    for _ in range(10_000):
        w = shifted @ v
        lam = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return -bound if largest else bound  # shifted operator is zero
        v = w / nrm
        if abs(lam - prev) <= POWER_ITER_TOL * max(abs(lam), 1.0):
            break
        prev = lam
    else:
        raise NumericalError("power iteration did not converge")
    return lam - bound if largest else bound - lam


def extreme_eigs(sym: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalues of a symmetric matrix."""
    if sym.shape[0] <= DENSE_EIG_CAP:
        vals = np.linalg.eigvalsh(sym)
        return float(vals[0]), float(vals[-1])
    return _power_extreme_eig(sym, largest=False), _power_extreme_eig(sym, largest=True)


def gram_diff_extreme_eigs(W: np.ndarray, omega: np.ndarray) -> tuple[float, float]:
    """(min, max) eigenvalues of W W^T - omega omega^T.

    For small d the d x d difference is solved directly. Otherwise the
    stacked form A = [W | omega] is used: the nonzero spectrum of
    A diag(I, -I) A^T equals that of the (c + c_tilde)-sized symmetric
    matrix M^(1/2) diag(I, -I) M^(1/2) with M = A^T A, padded with zeros
    whenever rank < d. Power iteration remains as a last resort.
    """
    d = W.shape[0]
    m = W.shape[1] + omega.shape[1]
    if d <= 1024 or (d <= DENSE_EIG_CAP and d <= m):
        diff = W @ W.T - omega @ omega.T
        return extreme_eigs(diff)
    if m < d:
        A = np.hstack([W, omega])
        return _stacked_extreme_eigs(A.T @ A, W.shape[1], d)
    diff = W @ W.T - omega @ omega.T
    return _power_extreme_eig(diff, largest=False), _power_extreme_eig(diff, largest=True)


def _stacked_extreme_eigs(M: np.ndarray, c_w: int, d: int) -> tuple[float, float]:
    """(min, max) eigenvalues of A diag(I, -I) A^T from M = A^T A.

    The nonzero spectrum equals that of sqrt(S) (V^T diag(lam) V) sqrt(S)
    where M = V S V^T, which only needs one m x m product; rank < d adds
    zero eigenvalues, folded in by clamping toward zero.
    """
    m = M.shape[0]
    lam = np.ones(m)
    lam[c_w:] = -1.0
    vals, vecs = np.linalg.eigh(M)
    s = np.sqrt(np.maximum(vals, 0.0))
    B = vecs.T @ (lam[:, None] * vecs)
    sym = (s[:, None] * B) * s[None, :]
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if m < d:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    return lo, hi


def _gram_fro_err(W: np.ndarray, omega: np.ndarray) -> float:
    # ||WW^T - OO^T||_F^2 via c x c Grams, avoiding the d x d product
    www = np.linalg.norm(W.T @ W) ** 2
    ooo = np.linalg.norm(omega.T @ omega) ** 2
    cross = np.linalg.norm(W.T @ omega) ** 2
    return float(np.sqrt(max(www - 2.0 * cross + ooo, 0.0)))


def sketch_quality(W: np.ndarray, omega: np.ndarray, c_tilde: int) -> QualityReport:
    """Gram/covariance errors of a sketch plus the 2/c_tilde certificate."""
    W = np.asarray(W, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if W.shape[0] != omega.shape[0]:
        raise ShapeMismatchError(f"row mismatch: W has {W.shape[0]}, sketch has {omega.shape[0]}")
    if c_tilde < 1:
        raise ValidationError("c_tilde must be >= 1")

    d = W.shape[0]
    w_fro_sq = float(np.linalg.norm(W) ** 2)
    slack = 1e-6 * w_fro_sq

    min_eig_diff, gram_err_spec = gram_diff_extreme_eigs(W, omega)
    if d <= DENSE_EIG_CAP:
        gram_err_fro = float(np.linalg.norm(W @ W.T - omega @ omega.T))
        min_eig_omega = float(np.linalg.eigvalsh(omega @ omega.T)[0])
    else:
        gram_err_fro = _gram_fro_err(W, omega)
        # Omega Omega^T shares its nonzero spectrum with the small Gram Omega^T Omega;
        # the d x d operator additionally has zero eigenvalues whenever rank < d
        small = np.linalg.eigvalsh(omega.T @ omega)
        min_eig_omega = float(min(small[0], 0.0)) if omega.shape[1] < d else float(small[0])

    centered_w = W - W.mean(axis=1, keepdims=True)
    centered_o = omega - omega.mean(axis=1, keepdims=True)
    sigma_w_err = _gram_fro_err(centered_w, centered_o)

    epsilon_bound = (2.0 / c_tilde) * w_fro_sq
    return QualityReport(
        sigma_w_err=sigma_w_err,
        gram_err_fro=gram_err_fro,
        gram_err_spec=gram_err_spec,
        min_eig_diff=min_eig_diff,
        min_eig_omega=min_eig_omega,
        epsilon_bound=epsilon_bound,
        bound_satisfied=bool(gram_err_spec <= epsilon_bound + slack),
    )


def gram_certificate(W: np.ndarray, omega: np.ndarray, c_tilde: int) -> tuple[float, float, float, bool]:
    """Lightweight certificate: (fro_err, spec_err, epsilon_bound, satisfied).

    Avoids materializing the d x d difference for large d, so it is cheap
    enough to run inside the pruning pipeline itself.
    """
    W = np.asarray(W, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    d = W.shape[0]
    c_w = W.shape[1]
    m = c_w + omega.shape[1]
    w_fro_sq = float(np.linalg.norm(W) ** 2)
    if d > 1024 and m < d:
        # one stacked Gram feeds both error norms
        A = np.hstack([W, omega])
        M = A.T @ A
        www = float(np.linalg.norm(M[:c_w, :c_w]) ** 2)
        cross = float(np.linalg.norm(M[:c_w, c_w:]) ** 2)
        ooo = float(np.linalg.norm(M[c_w:, c_w:]) ** 2)
        fro_err = float(np.sqrt(max(www - 2.0 * cross + ooo, 0.0)))
        _, spec_err = _stacked_extreme_eigs(M, c_w, d)
    else:
        fro_err = _gram_fro_err(W, omega)
        _, spec_err = gram_diff_extreme_eigs(W, omega)
    eps = (2.0 / c_tilde) * w_fro_sq
    return fro_err, spec_err, eps, bool(spec_err <= eps + 1e-6 * w_fro_sq)


def weight_stats(archive: TensorArchive) -> WeightStats:
    """Per-conv-layer statistics supporting the zero-mean approximation check."""
    out = WeightStats()
    for layer in archive.manifest.layers:
        if layer.kind != "conv":
            continue
        w = np.asarray(archive.tensors[layer.name]["weight"], dtype=np.float64)
        mean = float(w.mean())
        std = float(w.std())
        filter_means = [float(m) for m in w.reshape(w.shape[0], -1).mean(axis=1)]
        lo, hi = float(w.min()), float(w.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(w, bins=HISTOGRAM_BINS, range=(lo, hi))
        out.layers.append(
            LayerStats(
                layer=layer.name,
                mean=mean,
                std=std,
                filter_means=filter_means,
                histogram_counts=[int(c) for c in counts],
                histogram_edges=[float(e) for e in edges],
                zero_mean_strained=bool(abs(mean) > 0.1 * std),
            )
        )
    return out


def _spatial_through(layer, h: int, w: int) -> tuple[int, int]:
    if layer.kind in ("conv", "pool"):
        s = max(layer.stride, 1)
        ho = (h + 2 * layer.padding - layer.kernel_h) // s + 1
        wo = (w + 2 * layer.padding - layer.kernel_w) // s + 1
        if ho < 1 or wo < 1:
            raise TopologyError(f"layer {layer.name}: spatial size collapsed to {ho}x{wo}")
        return ho, wo
    if layer.kind == "fc":
        return 1, 1
    return h, w


def count_flops_params(manifest: ModelManifest) -> ComplexityReport:
    """MACs and parameters per layer, propagating spatial sizes through the DAG."""
    byname = manifest.layer_map
    spatial: dict[str, tuple[int, int]] = {}
    per_layer: dict[str, dict[str, int]] = {}
    for name in manifest.toposort():
        layer = byname[name]
        prods = manifest.producers(name)
        if prods:
            in_hw = spatial[prods[0]]
            if layer.kind in ("add", "concat"):
                mismatched = {spatial[p] for p in prods}
                if len(mismatched) != 1:
                    raise TopologyError(f"layer {name}: producers disagree on spatial size")
        else:
            in_hw = manifest.input_spatial
        out_hw = _spatial_through(layer, *in_hw)
        spatial[name] = out_hw

        macs = params = 0
        if layer.kind == "conv":
            macs = layer.out_channels * layer.in_channels * layer.kernel_h * layer.kernel_w * out_hw[0] * out_hw[1]
            params = layer.out_channels * layer.in_channels * layer.kernel_h * layer.kernel_w
            if layer.has_bias:
                params += layer.out_channels
        elif layer.kind == "fc":
            macs = layer.out_channels * layer.in_channels
            params = layer.out_channels * layer.in_channels
            if layer.has_bias:
                params += layer.out_channels
        elif layer.kind == "bn":
            params = 2 * layer.out_channels
        per_layer[name] = {"macs": macs, "params": params}

    return ComplexityReport(
        per_layer=per_layer,
        total_macs=sum(v["macs"] for v in per_layer.values()),
        total_params=sum(v["params"] for v in per_layer.values()),
    )


def compare_models(base: TensorArchive, pruned: TensorArchive) -> ComplexityReport:
    """Complexity of the pruned model with pruning rates relative to the base."""
    base_names = [(l.name, l.kind) for l in base.manifest.layers]
    pruned_names = [(l.name, l.kind) for l in pruned.manifest.layers]
    if base_names != pruned_names:
        raise TopologyError("archives are not the same topology family")
    before = count_flops_params(base.manifest)
    after = count_flops_params(pruned.manifest)
    return ComplexityReport(
        per_layer=after.per_layer,
        total_macs=after.total_macs,
        total_params=after.total_params,
        pruning_rate_flops=round(100.0 * (1.0 - after.total_macs / before.total_macs), 1),
        pruning_rate_params=round(100.0 * (1.0 - after.total_params / before.total_params), 1),
    )

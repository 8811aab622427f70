"""End-to-end pruning of a tensor archive.

Builds per-layer plans, sketches every prunable layer in topological
order, reconciles cross-layer channel counts, and emits a pruned archive
plus a report. Three column-reduction strategies share the same walk:

* ``fd`` - Frequent Directions on the output-filter axis (normalized to
  unit Frobenius norm) and, where an upstream layer shrank, on the
  input-channel axis as well. Sketched filters are new linear
  combinations, so downstream batch-norm layers are re-initialized.
* ``random`` - seeded order-preserving column subsampling; consumers
  keep the matching input slices by index.
* ``svdtrunc`` - truncated-SVD factor, the Gram-error-optimal
  comparator.

Layers with rate 1.0 and unchanged input width are copied through
bit-exactly, so an all-ones plan is the identity.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import count_flops_params, gram_certificate
from .archive import (
    LayerSpec,
    ModelManifest,
    TensorArchive,
    flatten_filters,
    unflatten_filters,
)
from .errors import TopologyError, ValidationError
from .rng import name_stream
from .sketch import fd_sketch, fix_svd_signs, frobenius_normalize, sketch_size

log = logging.getLogger(__name__)

STRATEGIES = ("fd", "random", "svdtrunc")


@dataclass
class PrunePlan:
    alpha: float
    rates: dict[str, float]
    sketch_sizes: dict[str, int]
    group_rates: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "rates": dict(sorted(self.rates.items())),
            "sketch_sizes": dict(sorted(self.sketch_sizes.items())),
            "group_rates": dict(sorted(self.group_rates.items())),
        }


@dataclass
class LayerRecord:
    layer: str
    c: int
    c_tilde: int
    shrink_count: int
    elapsed: float
    covariance_error_frobenius: float
    bound_epsilon: float
    bound_satisfied: bool
    fallback: str | None = None


@dataclass
class PruneReport:
    strategy: str
    plan: PrunePlan
    layers: list[LayerRecord] = field(default_factory=list)
    elapsed_total: float = 0.0
    flops_before: int = 0
    flops_after: int = 0
    params_before: int = 0
    params_after: int = 0

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "strategy": self.strategy,
            "plan": self.plan.to_dict(),
            "layers": [
                {
                    "layer": r.layer,
                    "c": r.c,
                    "c_tilde": r.c_tilde,
                    "shrink_count": r.shrink_count,
                    "covariance_error_frobenius": r.covariance_error_frobenius,
                    "bound_epsilon": r.bound_epsilon,
                    "bound_satisfied": r.bound_satisfied,
                    "fallback": r.fallback,
                }
                for r in self.layers
            ],
            "totals": {
                "flops_before": self.flops_before,
                "flops_after": self.flops_after,
                "params_before": self.params_before,
                "params_after": self.params_after,
            },
        }
        if include_timing:
            doc["timing"] = {
                "elapsed_total": self.elapsed_total,
                "per_layer": {r.layer: r.elapsed for r in self.layers},
            }
        return doc


def build_plan(manifest: ModelManifest, alpha: float, overrides: dict[str, float] | None = None) -> PrunePlan:
    """Uniform-rate plan with per-layer overrides and group reconciliation.

    Prunable conv/fc layers get ``alpha``; non-prunable layers get 1.0.
    Explicit overrides win either way. All members of a prune group are
    forced to the minimum rate among them so shared output widths stay
    consistent.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError(f"alpha must be in (0, 1], got {alpha}")
    overrides = dict(overrides or {})
    byname = manifest.layer_map
    for name, rate in overrides.items():
        if name not in byname:
            raise ValidationError(f"override references unknown layer {name!r}")
        if not 0.0 < rate <= 1.0:
            raise ValidationError(f"override rate for {name!r} must be in (0, 1], got {rate}")

    rates: dict[str, float] = {}
    for layer in manifest.layers:
        if layer.kind not in ("conv", "fc"):
            continue
        if layer.name in overrides:
            rates[layer.name] = overrides[layer.name]
        else:
            rates[layer.name] = alpha if layer.prunable else 1.0

    group_rates: dict[str, float] = {}
    for layer in manifest.layers:
        if layer.prune_group and layer.name in rates:
            g = layer.prune_group
            group_rates[g] = min(group_rates.get(g, 1.0), rates[layer.name])
    for layer in manifest.layers:
        if layer.prune_group and layer.name in rates:
            rates[layer.name] = group_rates[layer.prune_group]

    sizes = {name: sketch_size(rate, byname[name].out_channels) for name, rate in rates.items()}
    for layer in manifest.layers:
        if layer.prune_group and layer.name in sizes:
            peers = {sizes[m.name] for m in manifest.layers if m.prune_group == layer.prune_group and m.name in sizes}
            if len(peers) != 1:
                raise TopologyError(f"group {layer.prune_group!r} derived inconsistent sketch sizes {peers}")
    return PrunePlan(alpha=alpha, rates=rates, sketch_sizes=sizes, group_rates=group_rates)


def svd_truncate(W: np.ndarray, c_tilde: int) -> np.ndarray:
    """Top-c_tilde SVD factor U_k diag(S_k): the optimal width-c_tilde Gram approximation."""
    W = np.asarray(W, dtype=np.float64)
    d, c = W.shape
    if c_tilde > min(d, c):
        raise ValidationError(f"c_tilde={c_tilde} exceeds min(d, c)={min(d, c)}")
    if c_tilde < 1:
        raise ValidationError("c_tilde must be >= 1")
    U, S, Vt = np.linalg.svd(W, full_matrices=False)
    U, _ = fix_svd_signs(U, Vt)
    return U[:, :c_tilde] * S[:c_tilde]


def random_columns(c: int, c_tilde: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted size-c_tilde subset of column indices, drawn without replacement."""
    return np.sort(rng.choice(c, size=c_tilde, replace=False))


def sketch_model(archive: TensorArchive, plan: PrunePlan) -> tuple[TensorArchive, PruneReport]:
    """Frequent-Directions pruning of every planned layer."""
    return _prune_archive(archive, plan, "fd", seed=0)


def random_subsample(archive: TensorArchive, plan: PrunePlan, seed: int) -> tuple[TensorArchive, PruneReport]:
    """Seeded random filter subsampling with index-matched consumer slices."""
    return _prune_archive(archive, plan, "random", seed=seed)


def svdtrunc_model(archive: TensorArchive, plan: PrunePlan) -> tuple[TensorArchive, PruneReport]:
    """Truncated-SVD comparator over the same walk as sketch_model."""
    return _prune_archive(archive, plan, "svdtrunc", seed=0)


def _reduce_columns(W: np.ndarray, c_tilde: int, strategy: str, rng_factory, layer_name: str):
    """Reduce W (d x c) to d x c_tilde columns.

    Returns (final matrix, raw sketch for certification, shrink_count,
    elapsed, fallback). For the fd strategy the final matrix is the
    Frobenius-normalized sketch while the raw sketch is what the error
    bound is certified against.
    """
    d, c = W.shape
    if strategy == "fd":
        result = fd_sketch(W, c_tilde)
        if result.fro_norm_omega == 0.0 and np.linalg.norm(W) > 0.0:
            # degenerate shrink (equal singular values); fall back to column subsampling
            log.warning("layer %s: degenerate all-zero sketch, falling back to random columns", layer_name)
            idx = random_columns(c, c_tilde, rng_factory(layer_name))
            picked = W[:, idx]
            return picked, picked, result.shrink_count, result.elapsed_seconds, "random"
        if result.fro_norm_omega == 0.0:
            return result.omega, result.omega, result.shrink_count, result.elapsed_seconds, None
        return frobenius_normalize(result), result.omega, result.shrink_count, result.elapsed_seconds, None
    if strategy == "svdtrunc":
        t0 = time.perf_counter()
        k = min(c_tilde, d, c)
        out = np.zeros((d, c_tilde))
        out[:, :k] = svd_truncate(W, k)
        return out, out, 0, time.perf_counter() - t0, None
    raise ValidationError(f"unknown strategy {strategy!r}")


def _prune_archive(archive: TensorArchive, plan: PrunePlan, strategy: str, seed: int):
    if strategy not in STRATEGIES:
        raise ValidationError(f"strategy must be one of {STRATEGIES}")
    manifest = archive.manifest
    byname = manifest.layer_map
    order = manifest.toposort()

    def rng_for(label: str) -> np.random.Generator:
        return name_stream(seed, label)

    # --- plan arithmetic: new widths and (random strategy) kept-index maps ---
    new_in: dict[str, int] = {}
    new_out: dict[str, int] = {}
    sel: dict[str, np.ndarray] = {}  # output channels as indices into the original ones
    group_pick: dict[str, np.ndarray] = {}

    for name in order:
        layer = byname[name]
        prods = manifest.producers(name)
        if not prods:
            new_in[name] = layer.in_channels
            in_sel = None
        elif layer.kind == "concat":
            new_in[name] = sum(new_out[p] for p in prods)
            parts, offset = [], 0
            for p in prods:
                parts.append(sel[p] + offset)
                offset += byname[p].out_channels
            in_sel = np.concatenate(parts)
        elif layer.kind == "add":
            widths = {new_out[p] for p in prods}
            if len(widths) != 1:
                raise TopologyError(f"add layer {name}: reconciled producer widths differ: {widths}")
            new_in[name] = widths.pop()
            picks = {tuple(sel[p]) for p in prods}
            if strategy == "random" and len(picks) != 1:
                raise TopologyError(f"add layer {name}: producers kept different filter subsets")
            in_sel = sel[prods[0]]
        else:
            new_in[name] = new_out[prods[0]]
            in_sel = sel[prods[0]]

        if layer.kind in ("conv", "fc"):
            c_tilde = plan.sketch_sizes.get(name, layer.out_channels)
            new_out[name] = c_tilde
            if c_tilde < layer.out_channels and strategy == "random":
                label = f"group:{layer.prune_group}" if layer.prune_group else f"layer:{name}"
                if layer.prune_group and layer.prune_group in group_pick:
                    sel[name] = group_pick[layer.prune_group]
                else:
                    picked = random_columns(layer.out_channels, c_tilde, rng_for(label))
                    if layer.prune_group:
                        group_pick[layer.prune_group] = picked
                    sel[name] = picked
            else:
                sel[name] = np.arange(new_out[name])
        else:
            new_out[name] = new_in[name]
            sel[name] = in_sel if in_sel is not None else np.arange(new_out[name])
        sel.setdefault(name, np.arange(new_out[name]))

    # --- tensor transforms ---
    report = PruneReport(strategy=strategy, plan=plan)
    new_tensors: dict[str, dict[str, np.ndarray]] = {}
    changed: set[str] = set()

    for name in order:
        layer = byname[name]
        ts = archive.tensors.get(name, {})
        prods = manifest.producers(name)
        in_sel = sel[prods[0]] if prods else None

        if layer.kind == "conv":
            out, record = _transform_conv(layer, ts, new_in[name], new_out[name], strategy,
                                          in_sel, sel[name], rng_for)
            new_tensors[name] = out
            report.layers.append(record)
            if record.c_tilde < record.c or new_in[name] < layer.in_channels:
                changed.add(name)
        elif layer.kind == "fc":
            out, record = _transform_fc(layer, ts, new_in[name], new_out[name], strategy,
                                        in_sel, sel[name], rng_for)
            new_tensors[name] = out
            if record is not None:
                report.layers.append(record)
            if new_out[name] < layer.out_channels or new_in[name] < layer.in_channels:
                changed.add(name)
        elif layer.kind == "bn":
            producer = prods[0]
            width = new_out[name]
            if producer in changed:
                if strategy == "random":
                    idx = sel[producer]
                    new_tensors[name] = {role: ts[role][idx].copy() for role in ts}
                else:
                    # sketched filters carry no per-channel correspondence
                    new_tensors[name] = {
                        "weight": np.ones(width, dtype=np.float32),
                        "bias": np.zeros(width, dtype=np.float32),
                        "running_mean": np.zeros(width, dtype=np.float32),
                        "running_var": np.ones(width, dtype=np.float32),
                    }
                changed.add(name)
            else:
                new_tensors[name] = {role: arr.copy() for role, arr in ts.items()}
        else:
            if prods and any(p in changed for p in prods):
                changed.add(name)

    new_manifest = ModelManifest(
        layers=tuple(
            LayerSpec(
                name=l.name,
                kind=l.kind,
                out_channels=new_out[l.name],
                in_channels=new_in[l.name],
                kernel_h=l.kernel_h,
                kernel_w=l.kernel_w,
                stride=l.stride,
                padding=l.padding,
                prune_group=l.prune_group,
                prunable=l.prunable,
                has_bias=l.has_bias,
            )
            for l in manifest.layers
        ),
        edges=manifest.edges,
        input_spatial=manifest.input_spatial,
        num_classes=manifest.num_classes,
    )
    pruned = TensorArchive(manifest=new_manifest, tensors=new_tensors)
    pruned.validate()  # shape-consistency bug guard

    report.elapsed_total = sum(r.elapsed for r in report.layers)
    report.flops_before = count_flops_params(manifest).total_macs
    report.flops_after = count_flops_params(new_manifest).total_macs
    report.params_before = count_flops_params(manifest).total_params
    report.params_after = count_flops_params(new_manifest).total_params
    return pruned, report


def _transform_conv(layer, ts, new_cin, new_c, strategy, in_sel, out_sel, rng_for):
    w = ts["weight"]
    c, cin, kh, kw = w.shape
    elapsed = 0.0
    shrinks = 0
    fallback = None

    if strategy == "random":
        cur = w
        if new_cin < cin:
            cur = cur[:, in_sel, :, :]
        if new_c < c:
            cur = cur[out_sel]
        out = {"weight": np.ascontiguousarray(cur, dtype=np.float32)}
        if "bias" in ts:
            out["bias"] = ts["bias"][out_sel].copy() if new_c < c else ts["bias"].copy()
        record = LayerRecord(
            layer=layer.name, c=c, c_tilde=new_c, shrink_count=0, elapsed=0.0,
            covariance_error_frobenius=0.0, bound_epsilon=0.0, bound_satisfied=True,
        )
        if new_c < c:
            W64 = flatten_filters(np.asarray(w if new_cin == cin else w[:, in_sel, :, :]))
            fro, spec, eps, ok = gram_certificate(W64, W64[:, out_sel], new_c)
            record.covariance_error_frobenius = fro
            record.bound_epsilon = eps
            record.bound_satisfied = ok
        return out, record

    cur64 = np.asarray(w, dtype=np.float64)
    touched = False
    if new_cin < cin:
        # columns of this matrix are input channels (each stacks that
        # channel's kernel slices across all filters)
        A = cur64.transpose(1, 0, 2, 3).reshape(cin, -1).T
        B, _, s, e, fb = _reduce_columns(A, new_cin, strategy, rng_for, layer.name + ":in")
        shrinks += s
        elapsed += e
        fallback = fallback or fb
        cur64 = B.T.reshape(new_cin, c, kh, kw).transpose(1, 0, 2, 3)
        touched = True

    cov_err = 0.0
    eps = 0.0
    satisfied = True
    if new_c < c:
        Wmat = cur64.reshape(c, -1).T  # (new_cin*kh*kw, c)
        final, raw, s, e, fb = _reduce_columns(Wmat, new_c, strategy, rng_for, layer.name)
        shrinks += s
        elapsed += e
        fallback = fallback or fb
        cov_err, _spec, eps, satisfied = gram_certificate(Wmat, raw, new_c)
        cur64 = unflatten_filters(final, new_cin, kh, kw).astype(np.float64)
        touched = True

    if not touched:
        out = {role: arr.copy() for role, arr in ts.items()}
    else:
        out = {"weight": np.ascontiguousarray(cur64, dtype=np.float32)}
        if "bias" in ts:
            # sketched outputs are new linear combinations; per-filter biases
            # have no correspondence to carry
            out["bias"] = (np.zeros(new_c, dtype=np.float32) if new_c < c else ts["bias"].copy())

    record = LayerRecord(
        layer=layer.name, c=c, c_tilde=new_c, shrink_count=shrinks, elapsed=elapsed,
        covariance_error_frobenius=cov_err, bound_epsilon=eps, bound_satisfied=satisfied,
        fallback=fallback,
    )
    return out, record


def _transform_fc(layer, ts, new_in, new_out, strategy, in_sel, out_sel, rng_for):
    w = ts["weight"]
    out_dim, in_dim = w.shape
    record = None
    elapsed = 0.0
    shrinks = 0

    if strategy == "random":
        cur = w
        if new_in < in_dim:
            cur = cur[:, in_sel]
        if new_out < out_dim:
            cur = cur[out_sel]
        out = {"weight": np.ascontiguousarray(cur, dtype=np.float32)}
        if "bias" in ts:
            out["bias"] = ts["bias"][out_sel].copy() if new_out < out_dim else ts["bias"].copy()
        return out, record

    cur64 = np.asarray(w, dtype=np.float64)
    touched = False
    if new_in < in_dim:
        B, _, s, e, _ = _reduce_columns(cur64, new_in, strategy, rng_for, layer.name + ":in")
        shrinks += s
        elapsed += e
        cur64 = B
        touched = True
    if new_out < out_dim:
        B, _, s, e, _ = _reduce_columns(cur64.T, new_out, strategy, rng_for, layer.name)
        shrinks += s
        elapsed += e
        cur64 = B.T
        touched = True
        record = LayerRecord(
            layer=layer.name, c=out_dim, c_tilde=new_out, shrink_count=shrinks, elapsed=elapsed,
            covariance_error_frobenius=0.0, bound_epsilon=0.0, bound_satisfied=True,
        )

    if not touched:
        out = {role: arr.copy() for role, arr in ts.items()}
    else:
        out = {"weight": np.ascontiguousarray(cur64, dtype=np.float32)}
        if "bias" in ts:
            out["bias"] = (np.zeros(new_out, dtype=np.float32) if new_out < out_dim else ts["bias"].copy())
    return out, record

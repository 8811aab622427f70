"""Acceptance gate: one test per primary criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they print. Every criterion is asserted at its stated tolerance; the
sweep fixtures are shared so the whole gate stays fast.
"""

import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from sketchprune import cli
from sketchprune.analysis import count_flops_params, gram_diff_extreme_eigs
from sketchprune.architectures import build_manifest, random_archive
from sketchprune.archive import load_archive, save_archive
from sketchprune.oracle import load_golden_cases, reference_fd
from sketchprune.planner import build_plan, random_columns, sketch_model, svd_truncate
from sketchprune.rng import philox_generator, standard_normal_matrix
from sketchprune.sketch import fd_sketch


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def golden_sweep():
    """Sketch + extreme Gram eigenvalues for all 100 committed cases."""
    t0 = time.perf_counter()
    rows = []
    for case in load_golden_cases(None):
        W = standard_normal_matrix(case.seed, case.d, case.c)
        omega = fd_sketch(W, case.ell).omega
        lo, hi = gram_diff_extreme_eigs(W, omega)
        rows.append({
            "case": case,
            "W": W,
            "omega": omega,
            "lam_min": lo,
            "lam_max": hi,
            "w2": float(np.linalg.norm(W) ** 2),
        })
    return rows, time.perf_counter() - t0


def test_error_bound_certificate(golden_sweep):
    """lambda_max(WW^T - OO^T) <= (2/ell + 1e-6) * ||W||_F^2, zero violations, < 60 s."""
    rows, elapsed = golden_sweep
    violations = [
        r for r in rows
        if r["lam_max"] > (2.0 / r["case"].ell) * r["w2"] + 1e-6 * r["w2"]
    ]
    ok = not violations and elapsed < 60.0
    _verdict("spectral error bound (2/width certificate)", ok,
             f"{len(rows)} cases, {len(violations)} violations, sweep {elapsed:.1f}s")


def test_psd_sandwich(golden_sweep):
    """lambda_min(WW^T - OO^T) >= -1e-6 * ||W||_F^2 on the same sweep."""
    rows, _ = golden_sweep
    violations = [r for r in rows if r["lam_min"] < -1e-6 * r["w2"]]
    _verdict("PSD sandwich (sketch Gram below original)", not violations,
             f"{len(rows)} cases, {len(violations)} violations")


def test_scale_equivariance():
    """fd(beta*W) == beta*fd(W) within relative 1e-5, beta in {0.5, 2, 10}."""
    picker = philox_generator(31337)
    failures = 0
    for i in range(25):
        d = int(picker.integers(8, 64))
        c = int(picker.integers(4, 48))
        ell = int(picker.integers(2, c + 1))
        W = standard_normal_matrix(50_000 + i, d, c)
        base = fd_sketch(W, ell).omega
        for beta in (0.5, 2.0, 10.0):
            scaled = fd_sketch(beta * W, ell).omega
            tol = 1e-5 * max(beta * float(np.abs(base).max()), 1e-30)
            if not np.allclose(scaled, beta * base, rtol=1e-5, atol=tol):
                failures += 1
    _verdict("positive scale equivariance", failures == 0,
             f"25 matrices x 3 scales, {failures} mismatches")


def test_oracle_equivalence():
    """fd_sketch matches the independent reference within 1e-10 on all goldens."""
    worst = 0.0
    cases = load_golden_cases(None)
    for case in cases:
        W = standard_normal_matrix(case.seed, case.d, case.c)
        a = fd_sketch(W, case.ell).omega
        b = reference_fd(W, case.ell)
        worst = max(worst, float(np.abs(a - b).max()))
    _verdict("oracle equivalence", worst <= 1e-10,
             f"{len(cases)} golden cases, max |diff| = {worst:.2e}")


def test_comparator_ordering():
    """Spectral Gram error: svd_truncate <= fd <= random on >= 95 of 100 seeds.

    Trials use spiked matrices (low-rank + 5% noise, widths strictly
    below the column count) — the regime filter banks live in and the
    one where sketching is meant to beat subsampling. On isotropic
    Gaussian columns the middle inequality genuinely does not hold.
    """
    picker = philox_generator(777)
    wins = 0
    for seed in range(100):
        d = int(picker.integers(16, 97))
        c = int(picker.integers(8, 49))
        ell = int(picker.integers(2, min(c - 1, d) + 1))
        rank = max(1, ell // 2)
        g = philox_generator(seed, 2)
        W = g.standard_normal((d, rank)) @ g.standard_normal((rank, c)) / np.sqrt(rank)
        W += 0.05 * g.standard_normal((d, c))
        tol = 1e-9 * float(np.linalg.norm(W) ** 2)

        def spec(omega):
            return float(np.linalg.eigvalsh(W @ W.T - omega @ omega.T)[-1])

        e_svd = spec(svd_truncate(W, ell))
        e_fd = spec(fd_sketch(W, ell).omega)
        e_rand = spec(W[:, random_columns(c, ell, philox_generator(seed, 5))])
        if e_svd <= e_fd + tol and e_fd <= e_rand + tol:
            wins += 1
    _verdict("comparator ordering svd <= fd <= random", wins >= 95,
             f"{wins}/100 ordered trials")


def test_complexity_accounting():
    """Built-in manifests within 2% of published FLOPs/params base rows."""
    targets = {
        "resnet56": (125.49e6, 0.85e6),
        "resnet110": (252.89e6, 1.72e6),
        "googlenet": (1.52e9, 6.15e6),
        "resnet50": (4.09e9, 25.50e6),
    }
    misses = []
    for arch, (flops, params) in targets.items():
        rep = count_flops_params(build_manifest(arch))
        if abs(rep.total_macs - flops) > 0.02 * flops:
            misses.append(f"{arch} flops {rep.total_macs}")
        if abs(rep.total_params - params) > 0.02 * params:
            misses.append(f"{arch} params {rep.total_params}")
    _verdict("complexity accounting within 2%", not misses,
             "4 architectures" + ("" if not misses else f"; off: {misses}"))


_BENCH_SCRIPT = """
import time
from sketchprune.architectures import build_manifest, random_archive
from sketchprune.planner import build_plan, sketch_model
manifest = build_manifest("resnet50")
archive = random_archive(manifest, seed=1)
plan = build_plan(manifest, 0.6)
t0 = time.perf_counter()
pruned, report = sketch_model(archive, plan)
print(time.perf_counter() - t0)
print(int(all(r.bound_satisfied for r in report.layers)))
"""


def test_sketch_efficiency_single_threaded():
    """ResNet-50-shaped archive sketches in < 10 s on one thread."""
    env = dict(os.environ)
    env.update({
        "OMP_NUM_THREADS": "1",
        "OPENBLAS_NUM_THREADS": "1",
        "MKL_NUM_THREADS": "1",
        "NUMEXPR_NUM_THREADS": "1",
        "SKETCHPRUNE_THREADS": "1",
    })
    proc = subprocess.run([sys.executable, "-c", _BENCH_SCRIPT],
                          env=env, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    wall_line, bounds_line = proc.stdout.split()
    wall = float(wall_line)
    _verdict("single-threaded sketch efficiency", wall < 10.0 and bounds_line == "1",
             f"resnet50 sketched in {wall:.2f}s, bounds_ok={bounds_line == '1'}")


def test_pipeline_identity_and_end_to_end():
    """Rate 1.0 is bit-exact; resnet56 at 0.6 revalidates with all certificates."""
    manifest = build_manifest("resnet56")
    archive = random_archive(manifest, seed=3)

    identity, _ = sketch_model(archive, build_plan(manifest, 1.0))
    bit_exact = all(
        np.array_equal(identity.tensors[n][r], archive.tensors[n][r])
        for n in archive.tensors for r in archive.tensors[n]
    )

    pruned, report = sketch_model(archive, build_plan(manifest, 0.6))
    pruned.validate()
    certs_ok = all(r.bound_satisfied for r in report.layers)
    shrunk = report.flops_after < report.flops_before
    _verdict("pipeline identity + end-to-end certificates",
             bit_exact and certs_ok and shrunk,
             f"identity bit-exact={bit_exact}, {len(report.layers)} certificates ok={certs_ok}")


def test_cli_determinism(tmp_path, toy_archive, capsys):
    """Identical CLI sketch runs emit byte-identical deterministic payloads."""
    model = tmp_path / "model"
    save_archive(toy_archive, model)
    outs = []
    for label in ("a", "b"):
        out = tmp_path / label
        code = cli.main(["sketch", "--model", str(model), "--rate", "0.6", "--out", str(out)])
        assert code == 0
        outs.append(out)
    capsys.readouterr()

    identical = True
    for name in sorted(p.name for p in outs[0].iterdir()):
        if name == "report.json":
            rep = [json.loads((o / "report.json").read_text()) for o in outs]
            for r in rep:
                r.pop("timing", None)
            identical &= rep[0] == rep[1]
        else:
            identical &= (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    _verdict("CLI determinism", identical, "2 runs, payloads byte-identical")

#!/usr/bin/env python3
"""Regenerate the shipped data files: architecture manifests and golden cases.

Run from the repo root:  python3 scripts/generate_data.py
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from sketchprune.architectures import export_manifest_data  # noqa: E402
from sketchprune.oracle import dump_golden_cases, generate_case  # noqa: E402
from sketchprune.rng import philox_generator  # noqa: E402


def golden_sweep(n_cases: int = 100):
    """100 seeded cases spanning d in {8..512}, c in {4..256}, ell in {2..c}."""
    picker = philox_generator(20240501)
    cases = []
    for i in range(n_cases):
        d = int(picker.integers(8, 513))
        c = int(picker.integers(4, 257))
        ell = int(picker.integers(2, c + 1))
        case, _ = generate_case(seed=1000 + i, d=d, c=c, ell=ell)
        cases.append(case)
    return cases


def main():
    data = ROOT / "src" / "sketchprune" / "data"
    export_manifest_data(data / "architectures")
    print("wrote architecture manifests")
    cases = golden_sweep()
    dump_golden_cases(cases, data / "golden_cases.json")
    print(f"wrote {len(cases)} golden cases")


if __name__ == "__main__":
    main()

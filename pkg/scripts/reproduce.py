"""Run the figure-style experiments and render SVGs.

    python scripts/reproduce.py [--out results] [--quick] [only ...]

Targets: spectrum, curves, phase, compare, compare-weak, compare-slow.
``--quick`` cuts ensemble sizes by 10x for a smoke run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from nrlz.cli import main as nrlz

HERE = Path(__file__).resolve().parent
CONFIGS = HERE / "configs"


def targets(out: Path, quick: bool):
    def m(n):
        return ["--M", str(max(2, n // 10))] if quick else []

    def io(name):
        return ["--csv", str(out / f"{name}.csv"), "--manifest", str(out / f"{name}.manifest.json"),
                "--svg", str(out / f"{name}.svg")]

    spectra = []
    for delta, D in (("0.5", "1"), ("1", "0"), ("1.5", "1"), ("2", "0")):
        name = f"spectrum_delta{delta}_D{D}"
        spectra += [["spectrum", "--config", str(CONFIGS / "spectrum.ini"), "--delta", delta, "--D", D,
                     "--csv", str(out / f"{name}.csv"), "--svg", str(out / f"{name}.svg")]]
    return {
        "spectrum": spectra,
        "curves": [["curve", "--config", str(CONFIGS / "curves.ini"), *m(200), *io("curves")]],
        "phase": [["phase-diagram", "--config", str(CONFIGS / "phase.ini"), *m(100), *io("phase")]],
        "compare": [["compare", "--config", str(CONFIGS / "compare.ini"), *m(500), *io("compare")]],
        "compare-weak": [["compare", "--config", str(CONFIGS / "compare.ini"), "--gamma-eff", "0.4",
                          *m(500), *io("compare_weak")]],
        "compare-slow": [["compare", "--config", str(CONFIGS / "compare.ini"), "--gamma-eff", "40",
                          "--gamma", "0.1", *m(500), *io("compare_slow")]],
    }


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("only", nargs="*")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = targets(out, args.quick)
    unknown = set(args.only) - set(table)
    if unknown:
        ap.error(f"unknown target(s): {', '.join(sorted(unknown))}")
    worst = 0
    for name in args.only or table:
        for cmd in table[name]:
            print(f"== {name}: nrlz {' '.join(cmd)}", flush=True)
            worst = max(worst, nrlz(cmd))
    return worst


if __name__ == "__main__":
    sys.exit(run())

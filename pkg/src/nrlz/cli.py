"""Command-line front end: sweeps, phase diagrams, comparisons, spectra, plots.

Exit codes: 0 success, 2 configuration error, 3 integration failure,
4 convergence or regime-consistency flag, 5 manifest mismatch.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .analytic import evaluate
from .config import ConfigError, RunConfig, config_text, load_config
from .dynamics import (
    EnsembleError,
    IntegrationError,
    convergence_check,
    default_grid,
    ensemble_average,
    worker_count,
)
from .hierarchy import TruncationError, evolve_hierarchy, subspace_grid, evolve_subspace
from .io import SchemaError, file_checksum, row_checksum, write_csv
from .model import NoiseParams, SystemParams, TimeGrid
from .noise import RngStream, generate_path
from .spectrum import find_exceptional_points, write_eps_csv, write_spectrum_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_FLAGGED = 4
EXIT_MANIFEST = 5

# closed form vs subspace must agree this well once Gamma >= REGIME_GAMMA
REGIME_GAMMA = 10.0
REGIME_TOL = 0.01

PHASE_DEFAULTS = {
    "physics": {"alpha": "symlogspace(0.05, 5, 21)", "delta": "linspace(0, 2, 21)"},
    "method": {"m": "200"},
}


class Flagged(Exception):
    """A run finished but a convergence or regime check failed."""


class ManifestMismatch(Exception):
    pass


# ---------------------------------------------------------------------------
# cell evaluation


def _noise(cfg: RunConfig) -> NoiseParams:
    return NoiseParams(cfg.D, cfg.gamma)


def _grid(cfg: RunConfig, p: SystemParams, method: str) -> TimeGrid | None:
    noise = _noise(cfg)
    if method == "subspace":
        return subspace_grid(p, cfg.Gamma, cfg.window_c, cfg.step_h)
    if method in ("sse", "hierarchy"):
        return default_grid(p, noise, cfg.window_c, cfg.step_h, cfg.noise_step_h)
    return None


def compute_cell(cfg: RunConfig, alpha: float, delta: float, method: str, workers: int = 1, check: bool = False):
    """``(P, stderr, flag)`` for one cell; ``flag`` is a message or ``None``."""
    p = SystemParams(alpha, cfg.v, delta)
    noise = _noise(cfg)
    grid = _grid(cfg, p, method)
    if method == "sse":
        res = ensemble_average(p, noise, grid, cfg.M, cfg.seed, workers)
        flag = None
        if check:
            res2 = ensemble_average(p, noise, grid, 2 * cfg.M, cfg.seed, workers)
            rep = convergence_check(res, res2)
            if not rep.converged:
                flag = f"M={cfg.M} vs {2 * cfg.M} differ by {rep.difference:.3g} at alpha={alpha}, delta={delta}"
        return res.mean_probability, res.standard_error, flag
    if method == "hierarchy":
        return evolve_hierarchy(p, noise, grid, n_max=cfg.n_max), 0.0, None
    if method == "subspace":
        return evolve_subspace(p, cfg.Gamma, grid), 0.0, None
    kind = method.split(":", 1)[1]
    return evaluate(kind, p, cfg.Gamma if cfg.Gamma > 0 else None), 0.0, None


def run_cells(cfg: RunConfig, workers: int | None = None, check: bool = False):
    """Evaluate every (delta, alpha, method) cell; rows come back in cell order."""
    cells = list(itertools.product(cfg.deltas, cfg.alphas, cfg.methods))
    n = worker_count(workers)
    if n > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda c: compute_cell(cfg, c[1], c[0], c[2], 1, check), cells))
    else:
        results = [compute_cell(cfg, a, d, m, n, check) for d, a, m in cells]
    rows = [(a, d, cfg.D, cfg.gamma, m, P, se) for (d, a, m), (P, se, _) in zip(cells, results)]
    flags = [f for _, _, f in results if f]
    return rows, flags


# ---------------------------------------------------------------------------
# diagnostics


def symmetry_statistic(rows) -> dict:
    """Deviation from the mirror symmetry ``P(alpha, delta) = P(alpha, 2 - delta)``."""
    table = {(r[4], r[0], round(r[1], 9)): r[5] for r in rows}
    diffs = []
    for (m, a, d), P in table.items():
        if d < 1.0:
            mirror = table.get((m, a, round(2.0 - d, 9)))
            if mirror is not None:
                diffs.append(abs(P - mirror))
    if not diffs:
        return {"pairs": 0, "max_abs_diff": None, "mean_abs_diff": None}
    return {"pairs": len(diffs), "max_abs_diff": max(diffs), "mean_abs_diff": math.fsum(diffs) / len(diffs)}


def pairwise_deviation(rows) -> dict:
    """Max |P_i - P_j| over the shared alpha axis for every method pair."""
    by_method: dict[str, dict] = {}
    for a, d, _, _, m, P, _ in rows:
        by_method.setdefault(m, {})[(a, d)] = P
    out = {}
    for m1, m2 in itertools.combinations(by_method, 2):
        keys = by_method[m1].keys() & by_method[m2].keys()
        out[f"{m1} vs {m2}"] = max(abs(by_method[m1][k] - by_method[m2][k]) for k in keys)
    return out


def regime_flags(cfg: RunConfig, deviations: dict) -> list[str]:
    flags = []
    if cfg.Gamma >= REGIME_GAMMA:
        for pair, dev in deviations.items():
            names = pair.split(" vs ")
            if "subspace" in names and any(n.startswith("analytic:white") for n in names) and dev > REGIME_TOL:
                flags.append(f"{pair}: {dev:.3g} > {REGIME_TOL} at Gamma = {cfg.Gamma:.3g}")
    return flags


# ---------------------------------------------------------------------------
# outputs


def _csv_path(cfg: RunConfig, command: str) -> str:
    return cfg.csv or f"{command}.csv"


def write_manifest(path, command: str, cfg: RunConfig, rows, csv_path, started: float, diagnostics=None) -> None:
    manifest = {
        "tool": "nrlz",
        "version": __version__,
        "command": command,
        "config": cfg.source,
        "master_seed": cfg.seed,
        "cells": [
            {"index": i, "alpha": r[0], "delta": r[1], "method": r[4], "sha256": row_checksum(r)}
            for i, r in enumerate(rows)
        ],
        "outputs": {"csv": {"path": str(csv_path), "sha256": file_checksum(csv_path)}},
        "diagnostics": diagnostics or {},
        "wall_clock_s": time.time() - started,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")


def _finish_table(command, cfg, rows, kind, started, diagnostics=None):
    csv_path = _csv_path(cfg, command)
    write_csv(csv_path, kind, rows)
    if cfg.manifest:
        write_manifest(cfg.manifest, command, cfg, rows, csv_path, started, diagnostics)
    if cfg.svg:
        from .plots import render

        render(csv_path, cfg.svg)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return csv_path


# ---------------------------------------------------------------------------
# commands


def cmd_curve(cfg: RunConfig, args) -> int:
    started = time.time()
    rows, flags = run_cells(cfg, args.workers, args.check_convergence)
    _finish_table("curve", cfg, rows, "curve", started)
    if flags:
        raise Flagged("; ".join(flags))
    return EXIT_OK


def cmd_phase_diagram(cfg: RunConfig, args) -> int:
    started = time.time()
    rows, flags = run_cells(cfg, args.workers, args.check_convergence)
    sym = symmetry_statistic(rows)
    print(f"delta=1 mirror symmetry: {sym}")
    _finish_table("phase-diagram", cfg, rows, "phase", started, {"delta_one_symmetry": sym})
    if flags:
        raise Flagged("; ".join(flags))
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    if len(cfg.methods) < 2:
        raise ConfigError("[method] methods: compare needs at least two methods")
    started = time.time()
    rows, flags = run_cells(cfg, args.workers, args.check_convergence)
    devs = pairwise_deviation(rows)
    for pair, dev in devs.items():
        print(f"max |{pair}| = {dev:.6g}")
    flags += regime_flags(cfg, devs)
    _finish_table("compare", cfg, rows, "compare", started, {"max_pairwise_deviation": devs, "Gamma": cfg.Gamma})
    if flags:
        raise Flagged("; ".join(flags))
    return EXIT_OK


def spectrum_grid(p: SystemParams, D: float, half_width: float | None, points: int) -> TimeGrid:
    if half_width is None:
        scale = max(p.v, p.v * math.sqrt(abs(p.delta - 1.0)), 3.0 * D)
        half_width = 4.0 * scale / abs(p.alpha)
    return TimeGrid.symmetric(half_width, 2.0 * half_width / (points - 1))


def cmd_spectrum(cfg: RunConfig, args) -> int:
    if len(cfg.alphas) != 1 or len(cfg.deltas) != 1:
        raise ConfigError("[physics] alpha/delta: spectrum takes a single cell")
    p = SystemParams(cfg.alphas[0], cfg.v, cfg.deltas[0])
    noise = _noise(cfg)
    grid = spectrum_grid(p, cfg.D, args.half_width, args.points)
    path = None if noise.silent else generate_path(noise, grid, RngStream(cfg.seed, 0))
    csv_path = _csv_path(cfg, "spectrum")
    write_spectrum_csv(csv_path, p, path, grid)
    eps = find_exceptional_points(p, path, grid)
    eps_path = str(Path(csv_path).with_suffix("")) + ".eps.csv"
    write_eps_csv(eps_path, eps)
    for r in eps:
        print(f"EP at t = {r.t_ep:.10g} ({r.kind.value})")
    print(f"wrote {csv_path} and {eps_path} ({len(eps)} exceptional points)")
    if cfg.svg:
        from .plots import render

        render(csv_path, cfg.svg)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plots import render

    out = args.out or str(Path(args.csv).with_suffix(".svg"))
    try:
        kind = render(args.csv, out)
    except (SchemaError, ValueError, KeyError, OSError) as exc:
        raise ConfigError(f"{args.csv}: {exc}") from exc
    print(f"wrote {out} ({kind})")
    return EXIT_OK


def cmd_manifest_rerun(args) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        command = manifest["command"]
        source = manifest["config"]
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"{args.manifest}: unreadable manifest ({exc})") from exc
    source = {s: dict(v) for s, v in source.items()}
    source.get("output", {}).pop("manifest", None)
    source.get("output", {}).pop("svg", None)
    if args.csv:
        source.setdefault("output", {})["csv"] = args.csv
    cfg = load_config(text=config_text(source))
    rows, _ = run_cells(cfg, args.workers)
    expected = manifest["cells"]
    bad = [
        c["index"] for c, r in itertools.zip_longest(expected, rows)
        if c is None or r is None or c["sha256"] != row_checksum(r)
    ]
    csv_path = _csv_path(cfg, command)
    kind = {"curve": "curve", "phase-diagram": "phase", "compare": "compare"}[command]
    write_csv(csv_path, kind, rows)
    if bad:
        raise ManifestMismatch(f"{len(bad)} cell(s) differ from the manifest: {bad[:10]}")
    if file_checksum(csv_path) != manifest["outputs"]["csv"]["sha256"]:
        raise ManifestMismatch("cells match but the CSV bytes differ")
    print(f"reproduced {len(rows)} cells of {args.manifest} into {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_options(sp, with_check=True):
    sp.add_argument("--config", help="INI run configuration")
    g = sp.add_argument_group("overrides (win over the config file)")
    g.add_argument("--alpha", help="sweep rate(s): value, comma list or axis function")
    g.add_argument("--delta", help="nonreciprocity value(s)")
    g.add_argument("--v", help="coupling")
    g.add_argument("--D", dest="D", help="noise amplitude")
    g.add_argument("--gamma", help="noise bandwidth")
    g.add_argument("--gamma-eff", dest="gamma_eff", help="effective decoherence rate D^2/gamma (sets D)")
    g.add_argument("--method", help="comma-separated methods: sse, hierarchy, subspace, analytic:<kind>")
    g.add_argument("--M", dest="M", help="realizations per SSE cell")
    g.add_argument("--seed", help="master seed")
    g.add_argument("--n-max", dest="n_max", help="initial hierarchy truncation")
    g.add_argument("--window-c", dest="window_c", help="window multiplier")
    g.add_argument("--step-h", dest="step_h", help="step-size constant")
    g.add_argument("--csv", help="output CSV")
    g.add_argument("--manifest", help="output JSON manifest")
    g.add_argument("--svg", help="also render an SVG")
    sp.add_argument("--workers", type=int, help="worker threads (default: NRLZ_WORKERS or CPU count)")
    if with_check:
        sp.add_argument("--check-convergence", action="store_true", help="rerun SSE cells at 2M and flag disagreement")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nrlz", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"nrlz {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("curve", "P versus alpha"),
        ("phase-diagram", "P over the (alpha, delta) grid"),
        ("compare", "several methods on a shared alpha axis"),
    ):
        _add_run_options(sub.add_parser(name, help=helptext))
    sp = sub.add_parser("spectrum", help="instantaneous eigenvalues and exceptional points")
    _add_run_options(sp, with_check=False)
    sp.add_argument("--half-width", type=float, help="scan window half width")
    sp.add_argument("--points", type=int, default=4001, help="samples along the scan")
    sp = sub.add_parser("plot", help="render a CSV produced by this tool to SVG")
    sp.add_argument("csv")
    sp.add_argument("--out")
    sp = sub.add_parser("manifest-rerun", help="recompute a manifest and verify its checksums")
    sp.add_argument("manifest")
    sp.add_argument("--csv", help="write the rerun CSV here instead of the recorded path")
    sp.add_argument("--workers", type=int)
    return ap


def _overrides(args) -> dict:
    return {
        "physics": {"alpha": args.alpha, "delta": args.delta, "v": args.v, "d": args.D,
                    "gamma": args.gamma, "gamma_eff": args.gamma_eff},
        "method": {"methods": args.method, "m": args.M, "seed": args.seed, "n_max": args.n_max},
        "grid": {"window_c": args.window_c, "step_h": args.step_h},
        "output": {"csv": args.csv, "manifest": args.manifest, "svg": args.svg},
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            return cmd_plot(args)
        if args.command == "manifest-rerun":
            return cmd_manifest_rerun(args)
        defaults = PHASE_DEFAULTS if args.command == "phase-diagram" else None
        cfg = load_config(args.config, _overrides(args), defaults=defaults)
        handler = {
            "curve": cmd_curve,
            "phase-diagram": cmd_phase_diagram,
            "compare": cmd_compare,
            "spectrum": cmd_spectrum,
        }[args.command]
        return handler(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, EnsembleError, FloatingPointError) as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (Flagged, TruncationError) as exc:
        print(f"flagged: {exc}", file=sys.stderr)
        return EXIT_FLAGGED
    except ManifestMismatch as exc:
        print(f"manifest mismatch: {exc}", file=sys.stderr)
        return EXIT_MANIFEST


if __name__ == "__main__":
    sys.exit(main())

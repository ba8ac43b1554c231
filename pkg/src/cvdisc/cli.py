"""Command-line front end.

Subcommands ``rate-sweep``, ``boundary``, ``wigner`` and ``validate``.  Each
writes its CSV plus ``manifest.json`` into ``--out``; the manifest carries
the resolved configuration and can be passed back as ``--config``.

Exit codes: 0 success, 1 configuration error, 2 numeric failure, 3 partial
results.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import random
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, fock
from .boundary import numeric_boundary, weak_boundary
from .config import RunConfig, load_config, resolve_boundary, resolve_s_grid, resolve_scenario, resolve_wigner
from .errors import ConfigError, CVDiscError
from .rates import rate_sweep, traced_environment_state
from .validation import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3

RATE_COLUMNS = ("s", "I_nats", "chi_nats", "R_nats", "cutoff", "tail_mass", "classicality")
BOUNDARY_COLUMNS = ("omega_hz", "r_e_star", "method", "bracket_lo", "bracket_hi", "status")
WIGNER_COLUMNS = ("x", "p", "w")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_manifest(out: Path, command: str, cfg: RunConfig, outputs, diagnostics, started, resolved=None):
    doc = {
        "command": command,
        "resolved": resolved or {},
        "tool": "cvdisc",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_source": cfg.source,
        "outputs": list(outputs),
        "diagnostics": diagnostics,
        "wall_time_s": round(time.perf_counter() - started, 3),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    atomic_write(out / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- commands


def cmd_rate_sweep(cfg: RunConfig, out: Path, threads: int = 1):
    started = time.perf_counter()
    scenario = resolve_scenario(cfg)
    grid = resolve_s_grid(cfg)
    curve = rate_sweep(scenario, grid, workers=threads)
    rows = [(p.s, p.I, p.chi, p.R, p.cutoff, p.tail_mass, p.classicality) for p in curve.points]
    atomic_write(out / "rates.csv", csv_text(RATE_COLUMNS, rows))
    errors = [{"s": p.s, "error": p.error} for p in curve.errors]
    diag = {
        "points": len(curve.points),
        "failed_points": errors,
        "max_cutoff": max((p.cutoff for p in curve.points), default=0),
        "max_tail_mass": max((p.tail_mass for p in curve.points if not p.error), default=0.0),
        "n_E": scenario.n_E,
        "sigma2": scenario.sigma2,
    }
    resolved = {"scenario": scenario.to_dict(), "s_grid": [float(v) for v in grid]}
    write_manifest(out, "rate-sweep", cfg, ["rates.csv"], diag, started, resolved)
    if errors and len(errors) == len(curve.points):
        return EXIT_NUMERIC
    return EXIT_PARTIAL if errors else EXIT_OK


def cmd_boundary(cfg: RunConfig, out: Path, threads: int = 1):
    started = time.perf_counter()
    b = resolve_boundary(cfg)
    curves = []
    common = dict(profile=b["profile"], constellation=b["constellation"], r_range=b["r_range"], tol=b["tol"],
                  scan=b["scan"], workers=threads)
    if b["method"] in ("weak", "both"):
        curves.append(weak_boundary(b["omegas"], b["constraint"], **common))
    if b["method"] in ("numeric", "both"):
        curves.append(numeric_boundary(b["omegas"], b["constraint"], s_grid=b["s_grid"], **common))
    rows = []
    for curve in curves:
        for p in curve.points:
            star = p.r_E_star if p.status == "root" else None
            rows.append((p.omega, star, p.method, p.bracket_lo, p.bracket_hi, p.status))
    atomic_write(out / "boundary.csv", csv_text(BOUNDARY_COLUMNS, rows))
    diag = {"T": b["constraint"].T, "rule": b["constraint"].rule, "tolerance": b["tol"],
            "evaluations": sum(p.evaluations for c in curves for p in c.points)}
    resolved = {
        "omegas_hz": [float(v) for v in b["omegas"]],
        "method": b["method"],
        "temperature_k": b["constraint"].T,
        "temperature_rule": b["constraint"].rule,
        "channel_occupation": "thermal" if b["profile"].occupation is None else b["profile"].occupation,
        "r_range": list(b["r_range"]),
        "scan": b["scan"],
        "constellation": b["constellation"].to_dict(),
        "s_grid": [float(v) for v in b["s_grid"]],
    }
    write_manifest(out, "boundary", cfg, ["boundary.csv"], diag, started, resolved)
    return EXIT_OK


def cmd_wigner(cfg: RunConfig, out: Path, threads: int = 1):
    started = time.perf_counter()
    scenario = resolve_scenario(cfg)
    w = resolve_wigner(cfg)
    rho = traced_environment_state(scenario, w["s"], keep=w["keep"])
    grid = fock.wigner_grid(rho, w["x"], w["p"])
    xx, pp = np.meshgrid(grid.x, grid.p, indexing="ij")
    rows = zip(xx.reshape(-1), pp.reshape(-1), grid.values.reshape(-1))
    atomic_write(out / "wigner.csv", csv_text(WIGNER_COLUMNS, rows))
    diag = {
        "normalization": grid.metadata["normalization"],
        "coverage_ok": grid.metadata["coverage_ok"],
        "cutoff": rho.dim - 1,
        "tail_mass": rho.tail_mass,
        "local_maxima_above_half": len(fock.local_maxima(grid.values, 0.5)),
    }
    if not grid.metadata["coverage_ok"]:
        diag["warning"] = "grid does not cover the distribution: normalization differs from 1 by more than 1e-3"
        print(f"warning: {diag['warning']}", file=sys.stderr)
    resolved = {"scenario": scenario.to_dict(), "s": w["s"], "keep": w["keep"],
                "x": [float(w["x"][0]), float(w["x"][-1]), int(w["x"].size)],
                "p": [float(w["p"][0]), float(w["p"][-1]), int(w["p"].size)]}
    write_manifest(out, "wigner", cfg, ["wigner.csv"], diag, started, resolved)
    return EXIT_OK


def _determinism_check(cfg: RunConfig):
    def check(_scenario):
        sections = cfg.to_dict()
        sections["sweep"] = {"s_values": "0.05 0.5 2"}
        sub = RunConfig(sections, cfg.source)
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            cmd_rate_sweep(sub, Path(a))
            cmd_rate_sweep(sub, Path(b))
            same = (Path(a) / "rates.csv").read_bytes() == (Path(b) / "rates.csv").read_bytes()
        return same, "rerun rates.csv byte-identical" if same else "rerun rates.csv differs"

    return ("CLI determinism", check)


def cmd_validate(cfg: RunConfig, out: Path | None = None, threads: int = 1):
    started = time.perf_counter()
    scenario = resolve_scenario(cfg)
    results = run_checks(scenario, extra=(_determinism_check(cfg),))
    for r in results:
        print(r.line())
    failed = [r for r in results if r.status == "fail"]
    print(f"{len(results) - len(failed)}/{len(results)} checks without failure")
    if out is not None:
        diag = {"checks": [{"name": r.name, "status": r.status, "detail": r.detail} for r in results]}
        write_manifest(out, "validate", cfg, [], diag, started, {"scenario": scenario.to_dict()})
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {"rate-sweep": cmd_rate_sweep, "boundary": cmd_boundary, "wigner": cmd_wigner, "validate": cmd_validate}


def _rng_state():
    return random.getstate(), np.random.get_state(legacy=False)["state"]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvdisc", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI configuration or a previous manifest.json")
        p.add_argument("--out", default=None if name == "validate" else ".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for data-parallel points")
        p.add_argument("--seedless", action="store_true",
                       help="fail unless the run leaves every random-number generator untouched")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    before = _rng_state()
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out is not None else None
        code = COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CVDiscError as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.seedless:
        after = _rng_state()
        clean = before[0] == after[0] and str(before[1]) == str(after[1])
        if not clean:
            print("error: --seedless: a random-number generator was used", file=sys.stderr)
            return EXIT_NUMERIC
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Commands: simulate, verify, decompose, reduce-check, report.
Exit codes: 0 ok, 1 verification failure, 2 usage/config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .decomp import analyze
from .jumprm import read_prm_csv
from .paths import read_paths_csv, write_paths_csv
from .runner import Dataset, paths_csv_text, prm_csv_text, reduce_check, simulate, verify

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class DataMismatchError(Exception):
    pass


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    # NaN/inf are allowed: infinite z-scores mark failures explicitly
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _manifest(cfg: ExperimentConfig, files: list[str]) -> dict:
    return {"config_hash": cfg.config_hash(), "seed": cfg.seed, "replicas": cfg.replicas, "dim": cfg.dim,
            "horizon": cfg.horizon, "grid_steps": cfg.grid_steps, "shell_cutoff": cfg.shell_cutoff,
            "files": files}


def _load_data(cfg: ExperimentConfig, data_dir, force: bool) -> Dataset:
    d = Path(data_dir)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {d / 'manifest.json'}: {exc}") from exc
    if manifest.get("config_hash") != cfg.config_hash() and not force:
        raise DataMismatchError(f"data in {d} was produced by a different config "
                                f"({manifest.get('config_hash')} != {cfg.config_hash()}); use --force to override")
    with open(d / "paths.csv", newline="") as fh:
        paths = read_paths_csv(fh)
    prms = None
    if (d / "prm.csv").exists():
        with open(d / "prm.csv", newline="") as fh:
            prm_map = read_prm_csv(fh, cfg.horizon, cfg.shell_cutoff, replicas=paths.keys())
        prms = [prm_map[r] for r in sorted(paths)]
    return Dataset([paths[r] for r in sorted(paths)], prms)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.seed, args.replicas)
    out = _out_dir(args.out)
    data = simulate(cfg, args.jobs)
    (out / "paths.csv").write_text(paths_csv_text(data.paths))
    (out / "prm.csv").write_text(prm_csv_text(data.prms))
    _write_json(out / "manifest.json", _manifest(cfg, ["paths.csv", "prm.csv"]))
    print(f"wrote {cfg.replicas} replicas to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config, args.seed, args.replicas)
    if cfg.verification is None:
        raise ConfigError("verify needs a [verification] section")
    data = _load_data(cfg, args.data, args.force) if args.data else simulate(cfg, args.jobs)
    report = verify(cfg, data)
    out = Path(args.out)
    if out.suffix != ".json":
        out = _out_dir(out) / "report.json"
    else:
        _out_dir(out.parent)
    _write_json(out, report.to_dict())
    for c in report.checks:
        state = "skip" if c.skipped else ("pass" if c.passed else "FAIL")
        print(f"{c.name:13s} {state}")
    print(f"report written to {out}")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_decompose(args) -> int:
    cfg = load_config(args.config, args.seed, args.replicas)
    out = _out_dir(args.out)
    data = _load_data(cfg, args.data, args.force) if args.data else simulate(cfg, args.jobs)
    parts = [analyze(X, cfg.disk, cfg.nu, cfg.shell_cutoff) for X in data.paths]
    for name, idx in (("L", 0), ("J", 1), ("Y", 2)):
        with open(out / f"{name}.csv", "w", newline="") as fh:
            write_paths_csv(fh, [p[idx] for p in parts])
    _write_json(out / "manifest.json", _manifest(cfg, ["L.csv", "J.csv", "Y.csv"]))
    print(f"wrote L, J, Y for {len(parts)} replicas to {out}")
    return EXIT_OK


def cmd_reduce_check(args) -> int:
    cfg = load_config(args.config, args.seed, args.replicas)
    result = reduce_check(cfg)
    out = Path(args.out)
    if out.suffix != ".json":
        out = _out_dir(out) / "reducibility.json"
    else:
        _out_dir(out.parent)
    _write_json(out, result)
    for row in result["reducibility"]["levels"]:
        print(f"level {row['level']}: m = {row['m']}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        rep = json.loads(Path(args.report).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    print(f"config_hash  {rep.get('config_hash')}")
    print(f"seed         {rep.get('seed')}   replicas {rep.get('replicas')}")
    for name, c in rep.get("checks", {}).items():
        state = "skip" if c["skipped"] else ("pass" if c["passed"] else "FAIL")
        print(f"  {name:13s} {state}  {c.get('detail', '')}")
    for r in rep.get("cf_reports", []):
        print(f"  cf t={r['t']:<6g} z={r['z_score']:.3f}")
    conv = rep.get("convergence") or {}
    for pair, g, b in zip(conv.get("pairs", []), conv.get("sup_gaps", []), conv.get("tail_bounds", [])):
        print(f"  levels {pair}: mean sup gap^2 {g:.4g}  4 x tail {4 * b:.4g}")
    red = rep.get("reducibility") or {}
    if red:
        ms = [row["m"] for row in red.get("levels", [])]
        print(f"  reducibility eps={red.get('epsilon')} m={ms} stable={red.get('monotone_flag')}")
    if "passed" in rep:
        print("overall: " + ("pass" if rep["passed"] else "FAIL"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyito", description="Simulate and verify Levy processes on R^d.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--out", required=True, help="output directory (or .json file for reports)")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--replicas", type=int, help="override simulation.replicas")
        p.add_argument("--jobs", type=int, default=1, help="worker processes; never changes results")
        if data:
            p.add_argument("--data", help="directory written by 'simulate'; omit to simulate fresh")
            p.add_argument("--force", action="store_true", help="skip the config hash check on --data")

    p = sub.add_parser("simulate", help="write paths.csv, prm.csv and manifest.json")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("verify", help="run the statistical checks and write a JSON report")
    common(p, data=True)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("decompose", help="split stored paths into L, J and Y")
    common(p, data=True)
    p.set_defaults(func=cmd_decompose)
    p = sub.add_parser("reduce-check", help="shifted concentration multiples per truncation level")
    common(p)
    p.set_defaults(func=cmd_reduce_check)
    p = sub.add_parser("report", help="pretty-print a JSON report")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigError, DataMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - any other failure is a run error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end.

``phaseflip run <config> [--set k=v]... [--out dir] [--jobs n]`` executes the
configured experiments and writes one CSV per curve, a fit JSON per
experiment and ``manifest.json``. Exit status 2 means the config was
rejected (nothing written); 3 means a runtime failure (outputs so far kept,
plus ``error.json``).
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import platform
import re
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import __version__
from .config import load
from .errors import ConfigError
from .experiments import list_experiments, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _versions() -> dict:
    out = {"phaseflip": __version__, "python": platform.python_version(), "numpy": np.__version__}
    for dist in ("scikit-learn", "jsonschema"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            pass
    return out


def _config_hash(raw: dict) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _curve_file(name: str, label: str) -> str:
    label = re.sub(r"[^A-Za-z0-9_.-]+", "_", label)
    return f"{name}_{label}_curve.csv" if label else f"{name}_curve.csv"


def _error_record(exc: BaseException, **extra) -> dict:
    rec = {"error": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "path", None)
    if path:
        rec["path"] = path
    rec.update(extra)
    return rec


def cmd_run(args) -> int:
    try:
        cfg = load(args.config, args.set)
    except ConfigError as exc:
        print(json.dumps(_error_record(exc, exit_code=EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": _config_hash(cfg.raw),
        "seed": cfg.master_seed,
        "versions": _versions(),
        "started_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.raw,
        "experiments": [],
    }
    status = EXIT_OK
    for name, spec in cfg.specs:
        t0 = time.perf_counter()
        try:
            result = run_experiment(spec, jobs=args.jobs)
        except Exception as exc:  # keep what has been written so far
            record = _error_record(exc, experiment=name, exit_code=EXIT_RUNTIME)
            _write_json(out / "error.json", record)
            print(json.dumps(record), file=sys.stderr)
            status = EXIT_RUNTIME
            break
        outputs = []
        for label, curve in result.curves.items():
            fname = _curve_file(name, label)
            curve.write_csv(out / fname)
            outputs.append(fname)
        fit_name = f"{name}_fit.json"
        _write_json(out / fit_name, result.summary)
        outputs.append(fit_name)
        manifest["experiments"].append(
            {"name": name, "kind": spec.kind, "outputs": outputs, "wall_ms": round(1e3 * (time.perf_counter() - t0), 3)}
        )
    _write_json(out / "manifest.json", manifest)
    return status


def cmd_list(_args) -> int:
    print(list_experiments())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phaseflip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiments of a JSON config")
    run.add_argument("config")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config value")
    run.add_argument("--out", help="output directory (default: config output_dir)")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for shot chunks")
    run.set_defaults(func=cmd_run)
    ls = sub.add_parser("list-experiments", help="show the available experiment kinds")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print(json.dumps({"error": "UsageError", "message": "--jobs must be >= 1"}), file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command line: ``qmbounds run`` for configured experiments, ``qmbounds verify`` for invariant suites.

Exit codes: 0 all verdicts pass, 1 some verdict failed, 2 config/schema
error, 3 computation failure (partial artifacts kept), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .. import __version__
from ..rates import config_hash
from . import output
from .experiments import ConfigError, run_experiment, validate
from .schema import SCHEMAS, TOP
from .verify import SUITES, run_suites

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_COMPUTE, EXIT_IO = 0, 1, 2, 3, 4


def bundled_configs():
    return sorted(p.name[:-5] for p in resources.files("qmbounds").joinpath("configs").iterdir()
                  if p.name.endswith(".yaml"))


def resolve_config(path: str) -> Path:
    """A file path, or the name of a bundled config (with or without ``.yaml``)."""
    p = Path(path)
    if p.exists():
        return p
    name = path[:-5] if path.endswith(".yaml") else path
    bundled = resources.files("qmbounds").joinpath("configs", f"{name}.yaml")
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no config file {path!r} and no bundled config {name!r} "
                            f"(bundled: {', '.join(bundled_configs())})")


def load_config(path, seed=None) -> dict:
    """Read, schema-validate and semantically check a config; raises ConfigError."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if seed is not None:
        cfg = copy.deepcopy(cfg)
        cfg["seed"] = int(seed)
    try:
        jsonschema.validate(cfg, TOP)
        jsonschema.validate(cfg, SCHEMAS[cfg["kind"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    validate(cfg)
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = load_config(resolve_config(args.config), args.seed)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    digest = config_hash(cfg)
    out_dir = Path(args.out) if args.out else Path("results") / cfg["id"]
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    status = EXIT_OK
    try:
        outcome = run_experiment(cfg, threads=args.threads, digest=digest)
    except Exception as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        try:
            output.write_json(out_dir / "verdicts.json",
                              {"experiment_id": cfg["id"], "kind": cfg["kind"], "seed": cfg.get("seed"),
                               "error": f"{type(exc).__name__}: {exc}", "verdicts": []}, digest)
        except OSError:
            return EXIT_IO
        return EXIT_COMPUTE
    try:
        if args.format in ("csv", "both"):
            output.write_csv(out_dir / "results.csv", outcome.records, digest)
            output.write_series(out_dir, outcome.series, digest, svg=args.svg)
        if args.format in ("json", "both"):
            output.write_json(out_dir / "verdicts.json",
                              {"experiment_id": cfg["id"], "kind": cfg["kind"], "seed": cfg.get("seed"),
                               "errors": outcome.errors, "verdicts": outcome.verdicts}, digest)
            if outcome.certificates:
                output.write_json(out_dir / "certificates.json",
                                  {"experiment_id": cfg["id"], "certificates": outcome.certificates}, digest)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for v in outcome.verdicts:
        alpha = v.get("alpha")
        extra = f" alpha={alpha:.6g}" if isinstance(alpha, float) else ""
        print(f"{v.get('experiment_id')} {v.get('theorem')} {v.get('quantity', '')}: {v['verdict']}{extra}")
    if outcome.errors:
        for e in outcome.errors:
            print(f"row failure: {e}", file=sys.stderr)
        status = EXIT_COMPUTE
    elif not outcome.passed:
        status = EXIT_VERDICT
    print(f"wrote {out_dir}")
    return status


def cmd_verify(args) -> int:
    try:
        results = run_suites(args.filter)
    except KeyError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    failed = 0
    for suite, check, ok, val in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {suite}: {check} ({val:.3g})")
        failed += not ok
    if failed:
        names = sorted({f"{s}: {c}" for s, c, ok, _ in results if not ok})
        print("failing invariants: " + "; ".join(names), file=sys.stderr)
        return EXIT_VERDICT
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="qmbounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"qmbounds {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, help="YAML config path or bundled config name")
    run.add_argument("--out", help="output directory (default results/<id>)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--threads", type=int, default=1, help="worker cap for sweep rows")
    run.add_argument("--format", choices=["csv", "json", "both"], default="both")
    run.add_argument("--svg", action="store_true", help="also write an SVG line plot per series")
    run.set_defaults(func=cmd_run)
    ver = sub.add_parser("verify", help="run the built-in invariant suites")
    ver.add_argument("--filter", action="append", choices=sorted(SUITES),
                     help="run only this suite (repeatable)")
    ver.set_defaults(func=cmd_verify)
    lst = sub.add_parser("list", help="list bundled configs")
    lst.set_defaults(func=lambda a: print("\n".join(bundled_configs())) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return int(args.func(args))


if __name__ == "__main__":
    sys.exit(main())

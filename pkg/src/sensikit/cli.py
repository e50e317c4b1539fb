"""Command-line front end.

Exit codes: 0 success, 1 model evaluation failure, 2 configuration error, 3 numerical degeneracy,
130 interrupted (partial results written).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any

from . import __version__
from .core import ConfigError, DegenerateSampleError, ExperimentConfig, FactorGroup, SensikitError
from .harness import ReplicateInterrupted, run_estimate, run_replicates, shift_experiment, variance_comparison
from .report import (
    ANALYTIC_HEADER,
    ESTIMATES_HEADER,
    REPLICATES_HEADER,
    SCATTER_HEADER,
    SHIFT_HEADER,
    SUMMARY_HEADER,
    VARIANCE_SUMMARY_HEADER,
    estimate_rows,
    replicate_rows,
    scatter_rows,
    shift_rows,
    summary_rows,
    variance_summary_rows,
    write_csv,
    write_manifest,
)
from .sampling import ModelEvaluationError, build_design
from .testfuncs import make_model

log = logging.getLogger("sensikit")

EXIT_OK = 0
EXIT_MODEL_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_INTERRUPTED = 130

DEFAULTS: dict[str, Any] = {
    "model": None,
    "params": {},
    "strategy": "both",
    "n": 64,
    "sampler": "lhs",
    "seed": None,
    "groups": None,
    "clamp": False,
    "replicates": 100,
    "budget_matched": False,
    "f0_offsets": None,
    "threads": 1,
    "out_dir": "results",
    "dump_design": False,
}


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_params(tokens) -> dict[str, Any]:
    """``key=value`` tokens; a comma-separated value becomes a list of numbers."""
    params: dict[str, Any] = {}
    for token in tokens or []:
        for item in token.split(";"):
            if not item.strip():
                continue
            if "=" not in item:
                raise ConfigError(f"parameter {item!r} is not key=value")
            key, value = item.split("=", 1)
            try:
                parts = [_number(v) for v in value.split(",") if v.strip()]
            except ValueError:
                raise ConfigError(f"parameter {key!r} needs numeric value(s), got {value!r}") from None
            params[key.strip()] = parts if "," in value else parts[0]
    return params


def parse_groups(spec) -> tuple[FactorGroup, ...] | None:
    """Groups as 1-based labels: ``"1,2,1+3"`` or a list such as ``["x1", "x1+x3"]``."""
    if spec is None:
        return None
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    return tuple(FactorGroup.parse(str(item)) for item in items)


def _offsets(spec):
    if spec is None:
        return None
    if isinstance(spec, str):
        return [float(v) for v in spec.split(",") if v.strip()]
    return [float(v) for v in spec]


def _common(p: argparse.ArgumentParser, replicate: bool = False) -> None:
    p.add_argument("--config", type=Path, help="JSON file mirroring these flags; flags win")
    p.add_argument("--model", choices=("ishigami", "gfunction", "additive"))
    p.add_argument("--params", nargs="+", action="extend", metavar="KEY=VALUE",
                   help="model parameters, e.g. coeffs=1,0 or a=7 b=0.1")
    p.add_argument("--f0", type=float, help="constant offset of the Ishigami function")
    p.add_argument("--strategy", choices=("current", "ia", "both"))
    p.add_argument("--n", type=int, help="sample size N (IA side when budget matched)")
    p.add_argument("--sampler", choices=("mc", "lhs"))
    p.add_argument("--seed", type=int, help="master seed (fallback: $SENSIKIT_SEED, then 0)")
    p.add_argument("--groups", help="1-based groups, comma separated, members joined by '+': 1,2,1+3")
    p.add_argument("--clamp", action=argparse.BooleanOptionalAction, default=None,
                   help="clip estimates to [0, 1]")
    p.add_argument("--threads", type=int, help="parallel replicates")
    p.add_argument("--out-dir", type=Path)
    if replicate:
        p.add_argument("--replicates", type=int)
        p.add_argument("--budget-matched", action=argparse.BooleanOptionalAction, default=None,
                       help="run the current strategy at 2N")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sensikit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sensikit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="one estimation of first- and total-order indices")
    _common(p)
    p.add_argument("--dump-design", action=argparse.BooleanOptionalAction, default=None,
                   help="also write design_<strategy>.csv")

    p = sub.add_parser("replicate", help="replicate study, optionally over f0 offsets")
    _common(p, replicate=True)
    p.add_argument("--f0-offsets", help="comma separated offsets, deltas are taken against 0")

    p = sub.add_parser("variance-compare", help="plug-in vs empirical variances of SJ and IA totals")
    _common(p, replicate=True)

    p = sub.add_parser("analytic", help="closed-form indices of a benchmark model")
    _common(p)
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the config file and explicit flags, in that order."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        unknown = set(data) - set(DEFAULTS) - {"f0"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update({k: v for k, v in data.items() if k != "f0"})
        merged["params"] = dict(data.get("params") or {})
        if "f0" in data:
            merged["params"]["f0"] = data["f0"]
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is None or key == "params":
            continue
        merged[key] = value
    merged["params"] = {**merged["params"], **parse_params(getattr(args, "params", None))}
    if getattr(args, "f0", None) is not None:
        merged["params"]["f0"] = args.f0
    if merged["seed"] is None:
        env = os.environ.get("SENSIKIT_SEED")
        try:
            merged["seed"] = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"SENSIKIT_SEED must be an integer, got {env!r}") from None
    if merged["model"] is None:
        raise ConfigError("--model is required (flag or config file)")
    merged["groups"] = parse_groups(merged["groups"])
    merged["f0_offsets"] = _offsets(merged["f0_offsets"])
    merged["out_dir"] = str(merged["out_dir"])
    return merged


def to_config(r: dict[str, Any]) -> ExperimentConfig:
    return ExperimentConfig(
        model=r["model"],
        params=r["params"],
        strategy=r["strategy"],
        sampler=r["sampler"],
        n=int(r["n"]),
        groups=r["groups"],
        replicates=int(r["replicates"]),
        seed=int(r["seed"]),
        budget_matched=bool(r["budget_matched"]),
        clamp=bool(r["clamp"]),
        threads=int(r["threads"]),
    )


def _echo(r: dict[str, Any], cfg: ExperimentConfig) -> dict[str, Any]:
    echo = cfg.to_dict()
    echo["out_dir"] = r["out_dir"]
    echo["f0_offsets"] = r["f0_offsets"]
    echo["dump_design"] = r["dump_design"]
    return echo


def cmd_estimate(r: dict[str, Any]) -> int:
    cfg = to_config(r)
    model = make_model(cfg.model, cfg.params)
    out = Path(r["out_dir"])
    t0 = time.perf_counter()
    estimates = run_estimate(cfg, model)
    outputs = [write_csv(out / "estimates.csv", ESTIMATES_HEADER, estimate_rows(estimates))]
    if r["dump_design"]:
        groups = cfg.resolved_groups(model.d)
        for strategy in cfg.strategies:
            design = build_design(strategy, cfg.sample_size(strategy), model.d, groups, cfg.sampler, cfg.seed)
            path = out / f"design_{strategy}.csv"
            path.write_text(design.dump_csv(), encoding="utf-8")
            outputs.append(path)
    write_manifest(out / "manifest.json", "estimate", _echo(r, cfg), outputs,
                   {"estimate": time.perf_counter() - t0})
    return EXIT_OK


def _progress(r: int) -> None:
    log.info("replicate %d done", r)


def cmd_replicate(r: dict[str, Any]) -> int:
    cfg = to_config(r)
    model = make_model(cfg.model, cfg.params)
    out = Path(r["out_dir"])
    t0 = time.perf_counter()
    status = EXIT_OK
    shift = None
    try:
        if r["f0_offsets"] is not None:
            shift = shift_experiment(cfg, r["f0_offsets"])
            tables = [shift.tables[o] for o in shift.offsets]
        else:
            tables = [run_replicates(cfg, model, progress=_progress)]
    except ReplicateInterrupted as exc:
        log.warning("interrupted; writing %d partial rows", len(exc.table.rows))
        tables = [exc.table]
        status = EXIT_INTERRUPTED
    outputs = [
        write_csv(out / "replicates.csv", REPLICATES_HEADER, replicate_rows(tables)),
        write_csv(out / "summary.csv", SUMMARY_HEADER, summary_rows(tables, model)),
    ]
    if shift is not None:
        outputs.append(write_csv(out / "shift.csv", SHIFT_HEADER, shift_rows(shift)))
    write_manifest(out / "manifest.json", "replicate", _echo(r, cfg), outputs,
                   {"replicate": time.perf_counter() - t0}, {"complete": status == EXIT_OK})
    return status


def cmd_variance_compare(r: dict[str, Any]) -> int:
    cfg = to_config({**r, "strategy": "both"})
    model = make_model(cfg.model, cfg.params)
    out = Path(r["out_dir"])
    t0 = time.perf_counter()
    try:
        table = run_replicates(cfg, model, progress=_progress)
    except ReplicateInterrupted as exc:
        log.warning("interrupted; writing %d partial rows", len(exc.table.rows))
        out_path = write_csv(out / "replicates.csv", REPLICATES_HEADER, replicate_rows([exc.table]))
        write_manifest(out / "manifest.json", "variance-compare", _echo(r, cfg), [out_path],
                       {"variance-compare": time.perf_counter() - t0}, {"complete": False})
        return EXIT_INTERRUPTED
    comparison = variance_comparison(table.only("current"), table.only("ia"), model)
    outputs = [
        write_csv(out / "variance_scatter.csv", SCATTER_HEADER, scatter_rows(comparison)),
        write_csv(out / "variance_summary.csv", VARIANCE_SUMMARY_HEADER, variance_summary_rows(comparison)),
        write_csv(out / "replicates.csv", REPLICATES_HEADER, replicate_rows([table])),
    ]
    write_manifest(out / "manifest.json", "variance-compare", _echo(r, cfg), outputs,
                   {"variance-compare": time.perf_counter() - t0}, {"complete": True})
    return EXIT_OK


def cmd_analytic(r: dict[str, Any]) -> int:
    model = make_model(r["model"], r["params"])
    out = Path(r["out_dir"])
    groups = r["groups"] or tuple(FactorGroup((i,)) for i in range(model.d))
    V = model.total_variance()
    rows = []
    for g in groups:
        s, st = model.group_indices(g)
        rows.append((g.label, s, st, V))
    path = write_csv(out / "analytic.csv", ANALYTIC_HEADER, rows)
    echo = {"model": r["model"], "params": r["params"], "groups": [g.label for g in groups], "seed": None}
    write_manifest(out / "manifest.json", "analytic", echo, [path], {})
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "replicate": cmd_replicate,
    "variance-compare": cmd_variance_compare,
    "analytic": cmd_analytic,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        resolved = resolve(args)
        return COMMANDS[args.command](resolved)
    except DegenerateSampleError as exc:
        print(f"sensikit: degenerate sample: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ModelEvaluationError as exc:
        print(f"sensikit: {exc}", file=sys.stderr)
        return EXIT_MODEL_FAILURE
    except (ConfigError, SensikitError, ValueError) as exc:
        print(f"sensikit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

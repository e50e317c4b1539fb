"""CSV tables and run manifests with byte-stable formatting."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .harness import ReplicateTable, ShiftResult, VarianceComparison, empirical_stats
from .core import SobolEstimate, TOTAL

ESTIMATES_HEADER = ("group", "kind", "strategy", "estimate", "asym_variance", "n", "model_calls")
REPLICATES_HEADER = (
    "f0", "replicate", "group", "kind", "strategy", "estimate", "asym_variance", "n", "model_calls", "skipped",
)
SUMMARY_HEADER = (
    "f0", "group", "kind", "strategy", "n", "replicates", "skipped",
    "mean", "empirical_variance", "mean_asym_variance", "analytic",
)
SHIFT_HEADER = ("f0", "replicate", "group", "kind", "strategy", "estimate", "base_estimate", "delta", "rel_delta")
SCATTER_HEADER = ("group", "ST_analytic", "tau2_sj_plugin", "tau2_ia_plugin", "replicate")
VARIANCE_SUMMARY_HEADER = (
    "group", "ST_analytic", "strategy", "mean", "empirical_variance",
    "mean_plugin_variance", "median_plugin_over_empirical",
)
ANALYTIC_HEADER = ("group", "S", "ST", "V")


def fmt(value: Any) -> str:
    """Canonical cell text: floats at round-trip precision, missing values empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return ""
        return format(float(value), ".17g")
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows))
    return path


def digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def estimate_rows(estimates: Iterable[SobolEstimate]):
    for e in estimates:
        yield (e.group.label, e.kind, e.strategy, e.value, e.asym_variance, e.n, e.model_calls)


def _f0(table: ReplicateTable):
    return table.config.params.get("f0")


def replicate_rows(tables: Iterable[ReplicateTable]):
    for table in tables:
        f0 = _f0(table)
        for r in table.rows:
            yield (f0, r.replicate, r.group.label, r.kind, r.strategy, r.estimate, r.asym_variance,
                   r.n, r.model_calls, r.skipped)


def summary_rows(tables: Iterable[ReplicateTable], model=None):
    for table in tables:
        f0 = _f0(table)
        for c in empirical_stats(table):
            analytic = None
            if model is not None:
                s, st = model.group_indices(c.group)
                analytic = st if c.kind == TOTAL else s
            yield (f0, c.group.label, c.kind, c.strategy, c.n, c.count, c.skipped,
                   c.mean, c.variance, c.mean_asym_variance, analytic)


def shift_rows(result: ShiftResult):
    for d in result.deltas:
        yield (d.offset, d.replicate, d.group.label, d.kind, d.strategy, d.estimate, d.base_estimate,
               d.delta, d.relative_delta)


def scatter_rows(comparison: VarianceComparison):
    for group, analytic, pa, pb, r in comparison.scatter_rows(TOTAL):
        yield (group.label, analytic, pa, pb, r)


def variance_summary_rows(comparison: VarianceComparison):
    for c in comparison.cells:
        if c.kind != TOTAL:
            continue
        yield (c.group.label, c.analytic, c.strategy_a, None, c.empirical_a, c.mean_plugin_a,
               c.plugin_to_empirical("a"))
        yield (c.group.label, c.analytic, c.strategy_b, None, c.empirical_b, c.mean_plugin_b,
               c.plugin_to_empirical("b"))


def write_manifest(path: Path, command: str, config: dict, outputs: Sequence[Path], timings: dict,
                   extra: dict | None = None) -> Path:
    from . import __version__

    manifest = {
        "tool": "sensikit",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "timings_seconds": timings,
        "outputs": {Path(p).name: digest(p) for p in outputs},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if extra:
        manifest.update(extra)
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path

"""Replicate studies: repeated estimation, strategy comparison and offset studies."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (
    CURRENT,
    FIRST,
    TOTAL,
    ConfigError,
    DegenerateSampleError,
    ExperimentConfig,
    FactorGroup,
    SensikitError,
    SobolEstimate,
)
from .estimators import clamp_unit, estimate_block
from .sampling import CountingModel, build_design, evaluate_design
from .testfuncs import AnalyticModel, make_model

STRATEGY_LABELS = {CURRENT: {FIRST: "SS", TOTAL: "SJ"}, "ia": {FIRST: "IA", TOTAL: "IA"}}


class IncompatibleTablesError(SensikitError, ValueError):
    pass


@dataclass(frozen=True)
class ReplicateRow:
    replicate: int
    group: FactorGroup
    kind: str
    strategy: str
    estimate: float
    asym_variance: float
    n: int
    model_calls: int
    skipped: bool = False


@dataclass
class ReplicateTable:
    config: ExperimentConfig
    rows: list[ReplicateRow] = field(default_factory=list)
    complete: bool = True

    def select(self, strategy: str | None = None, kind: str | None = None, group: FactorGroup | None = None):
        """Rows filtered by estimate strategy label (SS/SJ/IA), kind and group."""
        return [
            r
            for r in self.rows
            if (strategy is None or r.strategy == strategy)
            and (kind is None or r.kind == kind)
            and (group is None or r.group == group)
        ]

    def only(self, design_strategy: str) -> ReplicateTable:
        """Sub-table for one design strategy (``current`` or ``ia``)."""
        labels = set(STRATEGY_LABELS[design_strategy].values())
        cfg = self.config.replace(strategy=design_strategy)
        return ReplicateTable(cfg, [r for r in self.rows if r.strategy in labels], self.complete)

    def values(self, strategy: str, kind: str, group: FactorGroup) -> np.ndarray:
        """Estimates ordered by replicate; skipped replicates are NaN."""
        return np.array([r.estimate for r in sorted(self.select(strategy, kind, group), key=lambda r: r.replicate)])

    @property
    def groups(self) -> list[FactorGroup]:
        seen = []
        for r in self.rows:
            if r.group not in seen:
                seen.append(r.group)
        return seen

    def design_strategies(self) -> list[str]:
        found = {r.strategy for r in self.rows}
        return [s for s in (CURRENT, "ia") if found & set(STRATEGY_LABELS[s].values())]


class ReplicateInterrupted(KeyboardInterrupt):
    """Raised on interrupt; ``table`` holds the replicates that finished."""

    def __init__(self, table: ReplicateTable):
        super().__init__("replicate run interrupted")
        self.table = table


def _one_replicate(config: ExperimentConfig, model, groups, replicate: int) -> list[ReplicateRow]:
    rows = []
    for strategy in config.strategies:
        n = config.sample_size(strategy)
        design = build_design(strategy, n, model.d, groups, config.sampler, config.seed, replicate)
        counter = CountingModel(model)
        blocks = evaluate_design(counter, design)
        calls = counter.calls
        assert calls == design.required_evaluations
        for block in blocks:
            try:
                estimates = estimate_block(block, strategy, calls)
            except DegenerateSampleError:
                for kind in (FIRST, TOTAL):
                    label = STRATEGY_LABELS[strategy][kind]
                    rows.append(ReplicateRow(replicate, block.group, kind, label, math.nan, math.nan, n, calls, True))
                continue
            for est in estimates:
                value = clamp_unit(est.value) if config.clamp else est.value
                rows.append(
                    ReplicateRow(replicate, est.group, est.kind, est.strategy, value, est.asym_variance, n, calls)
                )
    return rows


def run_replicates(
    config: ExperimentConfig,
    model=None,
    replicate_ids: Iterable[int] | None = None,
    progress: Callable[[int], None] | None = None,
) -> ReplicateTable:
    """Run ``config.replicates`` independent replicates.

    Replicate ``r`` draws from streams keyed by ``(seed, r)`` so the table does
    not depend on execution order or thread count. Degenerate replicates are
    kept as skipped rows.
    """
    if model is None:
        model = make_model(config.model, config.params)
    groups = config.resolved_groups(model.d)
    ids = list(range(config.replicates)) if replicate_ids is None else list(replicate_ids)
    results: dict[int, list[ReplicateRow]] = {}

    def finish(partial: bool) -> ReplicateTable:
        rows = [row for r in sorted(results) for row in results[r]]
        return ReplicateTable(config, rows, complete=not partial)

    try:
        if config.threads == 1:
            for r in ids:
                results[r] = _one_replicate(config, model, groups, r)
                if progress:
                    progress(r)
        else:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                futures = {r: pool.submit(_one_replicate, config, model, groups, r) for r in ids}
                try:
                    for r, fut in futures.items():
                        results[r] = fut.result()
                        if progress:
                            progress(r)
                except KeyboardInterrupt:
                    for fut in futures.values():
                        fut.cancel()
                    raise
    except KeyboardInterrupt:
        raise ReplicateInterrupted(finish(True)) from None
    return finish(False)


@dataclass(frozen=True)
class CellStats:
    group: FactorGroup
    kind: str
    strategy: str
    n: int
    count: int
    skipped: int
    mean: float | None
    variance: float | None
    mean_asym_variance: float | None

    @property
    def missing(self) -> bool:
        return self.count == 0

    @property
    def standard_error(self) -> float | None:
        if self.variance is None:
            return None
        return math.sqrt(self.variance / self.count)


def _cells(table: ReplicateTable):
    cells: dict[tuple, list[ReplicateRow]] = {}
    for r in table.rows:
        cells.setdefault((r.group, r.kind, r.strategy), []).append(r)
    return cells


def empirical_stats(table: ReplicateTable) -> list[CellStats]:
    """Mean and unbiased variance of the estimates of every (group, kind, strategy) cell."""
    out = []
    for (group, kind, strategy), rows in _cells(table).items():
        used = [r for r in rows if not r.skipped]
        est = np.array([r.estimate for r in used])
        asym = np.array([r.asym_variance for r in used])
        count = len(used)
        out.append(
            CellStats(
                group,
                kind,
                strategy,
                rows[0].n,
                count,
                len(rows) - count,
                float(est.mean()) if count else None,
                float(est.var(ddof=1)) if count >= 2 else None,
                float(asym.mean()) if count else None,
            )
        )
    return out


def stats_lookup(table: ReplicateTable) -> dict[tuple, CellStats]:
    return {(c.group, c.kind, c.strategy): c for c in empirical_stats(table)}


@dataclass(frozen=True)
class ComparisonCell:
    group: FactorGroup
    kind: str
    analytic: float | None
    strategy_a: str
    strategy_b: str
    empirical_a: float | None
    empirical_b: float | None
    mean_plugin_a: float | None
    mean_plugin_b: float | None
    plugin_a: tuple[float, ...]
    plugin_b: tuple[float, ...]

    @property
    def empirical_ratio(self) -> float | None:
        """``empirical_b / empirical_a``."""
        if self.empirical_a is None or self.empirical_b is None or self.empirical_a == 0:
            return 1.0 if self.empirical_a == self.empirical_b and self.empirical_a is not None else None
        return self.empirical_b / self.empirical_a

    @property
    def plugin_ratio(self) -> float | None:
        if self.mean_plugin_a is None or self.mean_plugin_b is None or self.mean_plugin_a == 0:
            return 1.0 if self.mean_plugin_a == self.mean_plugin_b and self.mean_plugin_a is not None else None
        return self.mean_plugin_b / self.mean_plugin_a

    def plugin_to_empirical(self, which: str = "b") -> float | None:
        """Median over replicates of plug-in variance / empirical variance."""
        plug = np.array(self.plugin_a if which == "a" else self.plugin_b)
        emp = self.empirical_a if which == "a" else self.empirical_b
        plug = plug[np.isfinite(plug)]
        if emp is None or emp == 0 or plug.size == 0:
            return None
        return float(np.median(plug) / emp)


@dataclass
class VarianceComparison:
    """Side by side variances of two tables, typically current (a) vs IA (b)."""

    config_a: ExperimentConfig
    config_b: ExperimentConfig
    cells: list[ComparisonCell]

    def cell(self, group: FactorGroup, kind: str = TOTAL) -> ComparisonCell:
        for c in self.cells:
            if c.group == group and c.kind == kind:
                return c
        raise KeyError((group, kind))

    def scatter_rows(self, kind: str = TOTAL):
        """Per-replicate plug-in variance pairs ``(group, analytic, plugin_a, plugin_b, replicate)``."""
        for c in self.cells:
            if c.kind != kind:
                continue
            for r, (pa, pb) in enumerate(zip(c.plugin_a, c.plugin_b)):
                yield c.group, c.analytic, pa, pb, r


def _table_family(table: ReplicateTable) -> str:
    strategies = table.design_strategies()
    if len(strategies) != 1:
        raise IncompatibleTablesError(
            "each table must hold a single design strategy; use ReplicateTable.only() to split"
        )
    return strategies[0]


def _check_compatible(a: ReplicateTable, b: ReplicateTable, fa: str, fb: str) -> None:
    ca, cb = a.config, b.config
    for attr in ("model", "params", "sampler", "n", "replicates", "budget_matched"):
        if getattr(ca, attr) != getattr(cb, attr):
            raise IncompatibleTablesError(f"tables differ in {attr}: {getattr(ca, attr)!r} vs {getattr(cb, attr)!r}")
    if a.groups != b.groups:
        raise IncompatibleTablesError("tables cover different groups")
    calls_a = {r.model_calls for r in a.rows}
    calls_b = {r.model_calls for r in b.rows}
    if fa == fb:
        if calls_a != calls_b:
            raise IncompatibleTablesError("tables of the same strategy with different costs")
    elif ca.budget_matched:
        # 2n(d+2) vs 2n(d+1): costs differ by exactly 2n
        if len(calls_a) != 1 or len(calls_b) != 1 or abs(calls_a.pop() - calls_b.pop()) != 2 * ca.n:
            raise IncompatibleTablesError("budget-matched tables do not have matched costs")


def variance_comparison(
    table_a: ReplicateTable, table_b: ReplicateTable, model: AnalyticModel | None = None
) -> VarianceComparison:
    """Pair empirical and plug-in variances of two single-strategy tables per (group, kind)."""
    fa, fb = _table_family(table_a), _table_family(table_b)
    _check_compatible(table_a, table_b, fa, fb)
    if model is None:
        try:
            model = make_model(table_a.config.model, table_a.config.params)
        except SensikitError:
            model = None
    sa, sb = stats_lookup(table_a), stats_lookup(table_b)
    cells = []
    for group in table_a.groups:
        analytic = None
        if isinstance(model, AnalyticModel):
            try:
                analytic = model.group_indices(group)
            except SensikitError:
                analytic = None
        for kind in (FIRST, TOTAL):
            la, lb = STRATEGY_LABELS[fa][kind], STRATEGY_LABELS[fb][kind]
            ca, cb = sa.get((group, kind, la)), sb.get((group, kind, lb))
            if ca is None or cb is None:
                continue
            rows_a = sorted(table_a.select(la, kind, group), key=lambda r: r.replicate)
            rows_b = sorted(table_b.select(lb, kind, group), key=lambda r: r.replicate)
            cells.append(
                ComparisonCell(
                    group,
                    kind,
                    None if analytic is None else analytic[0 if kind == FIRST else 1],
                    la,
                    lb,
                    ca.variance,
                    cb.variance,
                    ca.mean_asym_variance,
                    cb.mean_asym_variance,
                    tuple(r.asym_variance for r in rows_a),
                    tuple(r.asym_variance for r in rows_b),
                )
            )
    return VarianceComparison(table_a.config, table_b.config, cells)


@dataclass(frozen=True)
class ShiftDelta:
    offset: float
    replicate: int
    group: FactorGroup
    kind: str
    strategy: str
    estimate: float
    base_estimate: float

    @property
    def delta(self) -> float:
        return self.estimate - self.base_estimate

    @property
    def relative_delta(self) -> float:
        scale = abs(self.base_estimate)
        return abs(self.delta) / scale if scale > 0 else abs(self.delta)


@dataclass
class ShiftResult:
    offsets: tuple[float, ...]
    tables: dict[float, ReplicateTable]
    deltas: list[ShiftDelta]

    def max_relative_delta(self, strategy: str, kind: str, offset: float | None = None) -> float:
        vals = [
            d.relative_delta
            for d in self.deltas
            if d.strategy == strategy and d.kind == kind and (offset is None or d.offset == offset)
            and np.isfinite(d.relative_delta)
        ]
        return max(vals) if vals else 0.0

    def variance_ratio(self, group: FactorGroup, kind: str, strategy: str, offset: float) -> float | None:
        """Empirical variance at ``offset`` over the variance at offset 0."""
        base = stats_lookup(self.tables[0.0]).get((group, kind, strategy))
        other = stats_lookup(self.tables[offset]).get((group, kind, strategy))
        if base is None or other is None or not base.variance or other.variance is None:
            return None
        return other.variance / base.variance


def shift_experiment(base: ExperimentConfig, offsets: Sequence[float]) -> ShiftResult:
    """Re-run ``base`` with the constant offset ``f0`` set to each value, sharing seeds.

    Deltas are taken against offset 0, which is always run.
    """
    probe = make_model(base.model, base.params)
    if "f0" not in probe.params():
        raise ConfigError(f"model {base.model!r} has no constant-offset parameter f0")
    offsets = tuple(dict.fromkeys([0.0, *(float(o) for o in offsets)]))
    tables = {off: run_replicates(base.with_params(f0=off)) for off in offsets}
    ref = {(r.replicate, r.group, r.kind, r.strategy): r for r in tables[0.0].rows}
    deltas = []
    for off in offsets:
        if off == 0.0:
            continue
        for r in tables[off].rows:
            b = ref[(r.replicate, r.group, r.kind, r.strategy)]
            deltas.append(ShiftDelta(off, r.replicate, r.group, r.kind, r.strategy, r.estimate, b.estimate))
    return ShiftResult(offsets, tables, deltas)


def run_estimate(config: ExperimentConfig, model=None) -> list[SobolEstimate]:
    """One estimation (replicate 0) per strategy of ``config``; degenerate samples raise."""
    if model is None:
        model = make_model(config.model, config.params)
    groups = config.resolved_groups(model.d)
    out = []
    for strategy in config.strategies:
        n = config.sample_size(strategy)
        design = build_design(strategy, n, model.d, groups, config.sampler, config.seed, 0)
        counter = CountingModel(model)
        blocks = evaluate_design(counter, design)
        for block in blocks:
            for est in estimate_block(block, strategy, counter.calls):
                if config.clamp:
                    est = replace(est, value=clamp_unit(est.value))
                out.append(est)
    return out

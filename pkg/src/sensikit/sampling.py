"""Seeded sample matrices and pick-freeze designs."""
from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .core import (
    CURRENT,
    IA,
    ConfigError,
    FactorGroup,
    ModelEvaluator,
    PickFreezeBlock,
    SensikitError,
    call_budget,
)

SAMPLERS = ("mc", "lhs")

_BELOW_ONE = np.nextafter(1.0, 0.0)


class ModelEvaluationError(SensikitError, RuntimeError):
    def __init__(self, matrix: str, row: int | None, cause: BaseException | str):
        self.matrix = matrix
        self.row = row
        where = f"matrix {matrix}" if row is None else f"matrix {matrix}, row {row}"
        super().__init__(f"model evaluation failed at {where}: {cause}")


def _tag(value: str | int) -> int:
    if isinstance(value, int):
        return value
    return zlib.crc32(value.encode("utf-8"))


@dataclass(frozen=True)
class SeedStream:
    """Counter-based stream identifier.

    A stream is keyed by ``(master seed, purpose, replicate, matrix)``; two
    streams that differ in any component are statistically independent, and
    a stream yields the same numbers no matter when or where it is drawn.
    """

    master_seed: int
    purpose: str = "design"
    replicate: int = 0
    matrix: str = "A"

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            self.master_seed,
            spawn_key=(_tag(self.purpose), self.replicate, _tag(self.matrix)),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, matrix: str) -> SeedStream:
        return SeedStream(self.master_seed, self.purpose, self.replicate, matrix)


def _rng(stream: SeedStream | np.random.Generator | int) -> np.random.Generator:
    if isinstance(stream, SeedStream):
        return stream.generator()
    if isinstance(stream, np.random.Generator):
        return stream
    return SeedStream(int(stream)).generator()


def uniform_matrix(n: int, d: int, stream) -> np.ndarray:
    """``n x d`` i.i.d. uniform draws on [0, 1)."""
    if n < 1 or d < 1:
        raise ValueError("uniform_matrix needs n >= 1 and d >= 1")
    return _rng(stream).random((n, d))


def lhs_matrix(n: int, d: int, stream) -> np.ndarray:
    """Random Latin hypercube: one point per stratum ``[i/n, (i+1)/n)`` in every column.

    Columns use independent permutations and a uniform jitter inside each stratum.
    """
    if n < 1 or d < 1:
        raise ValueError("lhs_matrix needs n >= 1 and d >= 1")
    rng = _rng(stream)
    strata = rng.permuted(np.tile(np.arange(n), (d, 1)), axis=1).T
    jitter = rng.random((n, d))
    return np.minimum((strata + jitter) / n, _BELOW_ONE)


def sample_matrix(kind: str, n: int, d: int, stream) -> np.ndarray:
    if kind == "mc":
        return uniform_matrix(n, d, stream)
    if kind == "lhs":
        return lhs_matrix(n, d, stream)
    raise ConfigError(f"unknown sampler {kind!r}")


def mix_columns(A: np.ndarray, B: np.ndarray, group: FactorGroup) -> np.ndarray:
    """Columns of ``group`` from ``A``, all other columns from ``B``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    group.validate(A.shape[1])
    M = B.copy()
    cols = list(group.members)
    M[:, cols] = A[:, cols]
    return M


@dataclass(frozen=True, eq=False)
class Design:
    """Base matrices A and B of a pick-freeze design plus the groups to estimate.

    Mixed matrices are built on demand by :meth:`mixed`.
    """

    strategy: str
    A: np.ndarray
    B: np.ndarray
    groups: tuple[FactorGroup, ...]
    sampler: str
    master_seed: int
    replicate: int
    streams: tuple[SeedStream, SeedStream]

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def required_evaluations(self) -> int:
        return call_budget(self.strategy, self.n, self.d, len(self.groups))

    def mixed(self, group: FactorGroup) -> tuple[np.ndarray, np.ndarray | None]:
        """``(A_u, B_u)`` for ``group``; ``B_u`` is None under the current strategy."""
        Au = mix_columns(self.A, self.B, group)
        Bu = mix_columns(self.B, self.A, group) if self.strategy == IA else None
        return Au, Bu

    def matrices(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield ``(matrix id, unit-cube matrix)`` for every evaluation the design requires."""
        yield "A", self.A
        yield "B", self.B
        for g in self.groups:
            Au, Bu = self.mixed(g)
            yield f"A_{g.label}", Au
            if Bu is not None:
                yield f"B_{g.label}", Bu

    def provenance(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "replicate": self.replicate,
            "streams": [[s.purpose, s.replicate, s.matrix] for s in self.streams],
        }

    def dump_csv(self) -> str:
        """Audit dump with header ``matrix,row,col,value``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["matrix", "row", "col", "value"])
        for name, M in self.matrices():
            for i, row in enumerate(M):
                for j, v in enumerate(row):
                    w.writerow([name, i, j, format(float(v), ".17g")])
        return buf.getvalue()


def build_design(
    strategy: str,
    n: int,
    d: int,
    groups: Sequence[FactorGroup],
    sampler: str = "lhs",
    master_seed: int = 0,
    replicate: int = 0,
) -> Design:
    """Draw A and B from independent sub-streams of ``master_seed``.

    The stream of each base matrix also carries the strategy, so a budget
    matched study draws the two strategies independently.
    """
    if strategy not in (CURRENT, IA):
        raise ConfigError(f"unknown strategy {strategy!r}")
    if n < 2:
        raise ConfigError("a design needs n >= 2")
    groups = tuple(groups)
    for g in groups:
        g.validate(d)
    sa = SeedStream(master_seed, "design", replicate, f"{strategy}:A")
    sb = SeedStream(master_seed, "design", replicate, f"{strategy}:B")
    A = sample_matrix(sampler, n, d, sa)
    B = sample_matrix(sampler, n, d, sb)
    A.setflags(write=False)
    B.setflags(write=False)
    return Design(strategy, A, B, groups, sampler, master_seed, replicate, (sa, sb))


def _evaluate(model: ModelEvaluator, name: str, unit: np.ndarray) -> np.ndarray:
    x = model.space.scale(unit)
    try:
        y = np.asarray(model.evaluate(x), dtype=float)
    except Exception as exc:
        # locate the failing row
        for k in range(len(x)):
            try:
                model.evaluate(x[k : k + 1])
            except Exception as row_exc:
                raise ModelEvaluationError(name, k, row_exc) from row_exc
        raise ModelEvaluationError(name, None, exc) from exc
    if y.shape != (len(x),):
        raise ModelEvaluationError(name, None, f"expected {len(x)} outputs, got shape {y.shape}")
    bad = np.flatnonzero(~np.isfinite(y))
    if bad.size:
        raise ModelEvaluationError(name, int(bad[0]), f"non-finite output {y[bad[0]]}")
    return y


class CountingModel(ModelEvaluator):
    """Wrapper counting evaluated points."""

    def __init__(self, model: ModelEvaluator):
        self.model = model
        self.space = model.space
        self.name = model.name
        self.calls = 0

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        self.calls += len(x)
        return self.model.evaluate(x)


def evaluate_design(model: ModelEvaluator, design: Design) -> list[PickFreezeBlock]:
    """Run ``model`` on every matrix of ``design``; one block per group.

    ``f(A)`` and ``f(B)`` are computed once and shared by all groups.
    """
    if model.d != design.d:
        raise ConfigError(f"model has d={model.d} but design has d={design.d}")
    yA = _evaluate(model, "A", design.A)
    yB = _evaluate(model, "B", design.B)
    blocks = []
    for g in design.groups:
        Au, Bu = design.mixed(g)
        yAu = _evaluate(model, f"A_{g.label}", Au)
        yBu = None if Bu is None else _evaluate(model, f"B_{g.label}", Bu)
        blocks.append(PickFreezeBlock(g, yA, yB, yAu, yBu))
    return blocks

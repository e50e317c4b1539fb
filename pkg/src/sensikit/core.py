"""Domain types, group algebra and model-call accounting."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

CURRENT = "current"
IA = "ia"
STRATEGIES = (CURRENT, IA)

FIRST = "first"
TOTAL = "total"
KINDS = (FIRST, TOTAL)


class SensikitError(Exception):
    """Base class for all library errors."""


class InvalidGroupError(SensikitError, ValueError):
    pass


class DegenerateSampleError(SensikitError, ArithmeticError):
    """A zero denominator or zero total variance was met."""


class InsufficientSampleError(SensikitError, ValueError):
    pass


class ConfigError(SensikitError, ValueError):
    pass


@dataclass(frozen=True)
class FactorSpace:
    """Box of independent uniform input factors.

    ``lower`` and ``upper`` hold one bound per factor in model units.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) == 0 or len(lo) != len(hi):
            raise ConfigError("factor space needs d >= 1 matching lower/upper bounds")
        for j, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise ConfigError(f"factor x{j + 1}: lower bound {a} not below upper bound {b}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, d: int) -> FactorSpace:
        return cls((0.0,) * d, (1.0,) * d)

    @classmethod
    def uniform(cls, d: int, lower: float, upper: float) -> FactorSpace:
        return cls((lower,) * d, (upper,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    def scale(self, unit_points: np.ndarray) -> np.ndarray:
        """Affinely map points of the unit hypercube onto the factor ranges."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return lo + unit_points * (hi - lo)


@dataclass(frozen=True, order=True)
class FactorGroup:
    """Sorted set of 0-based factor indices."""

    members: tuple[int, ...] = ()

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        if any(i < 0 for i in members):
            raise InvalidGroupError(f"negative factor index in {members}")
        if len(set(members)) != len(members):
            raise InvalidGroupError(f"duplicate factor index in {members}")
        object.__setattr__(self, "members", tuple(sorted(members)))

    @classmethod
    def of(cls, *members: int) -> FactorGroup:
        return cls(tuple(members))

    def validate(self, d: int) -> FactorGroup:
        bad = [i for i in self.members if i >= d]
        if bad:
            raise InvalidGroupError(f"group {self.label} refers to factor(s) beyond d={d}")
        return self

    @property
    def label(self) -> str:
        """1-based report label, e.g. ``x1`` or ``x1+x3``; the empty group is ``-``."""
        if not self.members:
            return "-"
        return "+".join(f"x{i + 1}" for i in self.members)

    @classmethod
    def parse(cls, label: str) -> FactorGroup:
        """Inverse of :attr:`label`; bare 1-based integers are accepted too (``1+3``)."""
        label = label.strip()
        if label in ("-", ""):
            return cls()
        try:
            members = [int(tok.strip().lstrip("xX")) - 1 for tok in label.split("+")]
        except ValueError:
            raise InvalidGroupError(f"cannot parse group {label!r}") from None
        if any(m < 0 for m in members):
            raise InvalidGroupError(f"group labels are 1-based: {label!r}")
        return cls(tuple(members))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, item) -> bool:
        return item in self.members

    def __str__(self) -> str:
        return self.label


def complement(group: FactorGroup, d: int) -> FactorGroup:
    """Return ``{0..d-1} \\ group``."""
    group.validate(d)
    return FactorGroup(tuple(i for i in range(d) if i not in group.members))


def singletons(d: int) -> list[FactorGroup]:
    return [FactorGroup((i,)) for i in range(d)]


def call_budget(strategy: str, n: int, d: int, n_groups: int | None = None) -> int:
    """Number of model evaluations a pick-freeze design needs.

    The current design evaluates A, B and one A_u per group; the IA design
    adds one B_u per group. With one group per factor this gives
    ``n*(d+2)`` and ``2*n*(d+1)`` respectively.
    """
    if n_groups is None:
        n_groups = d
    if strategy == CURRENT:
        return n * (2 + n_groups)
    if strategy == IA:
        return n * (2 + 2 * n_groups)
    raise ConfigError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True, eq=False)
class PickFreezeBlock:
    """Aligned outputs ``f(A)``, ``f(B)``, ``f(A_u)`` and optionally ``f(B_u)`` for one group."""

    group: FactorGroup
    yA: np.ndarray
    yB: np.ndarray
    yAu: np.ndarray
    yBu: np.ndarray | None = None

    def __post_init__(self):
        arrays = {}
        for name in ("yA", "yB", "yAu", "yBu"):
            value = getattr(self, name)
            if value is None:
                continue
            arr = np.array(value, dtype=float)
            if arr.ndim != 1:
                raise ValueError(f"{name} must be one-dimensional")
            arr.setflags(write=False)
            arrays[name] = arr
        lengths = {len(a) for a in arrays.values()}
        if len(lengths) != 1:
            raise ValueError(
                "mismatched sequence lengths: "
                + ", ".join(f"{k}={len(v)}" for k, v in arrays.items())
            )
        if lengths.pop() < 2:
            raise InsufficientSampleError("a pick-freeze block needs N >= 2 rows")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.yA)

    @property
    def has_bu(self) -> bool:
        return self.yBu is not None

    def swap_mixed(self) -> PickFreezeBlock:
        """Exchange ``yAu`` and ``yBu``: the block of the complementary group."""
        if self.yBu is None:
            raise ValueError("swap needs a block carrying yBu")
        return PickFreezeBlock(self.group, self.yA, self.yB, self.yBu, self.yAu)

    def swap_ab(self) -> PickFreezeBlock:
        """Exchange the roles of A and B (and therefore of A_u and B_u)."""
        if self.yBu is None:
            raise ValueError("swap needs a block carrying yBu")
        return PickFreezeBlock(self.group, self.yB, self.yA, self.yBu, self.yAu)

    def shifted(self, c: float) -> PickFreezeBlock:
        bu = None if self.yBu is None else self.yBu + c
        return PickFreezeBlock(self.group, self.yA + c, self.yB + c, self.yAu + c, bu)


@dataclass(frozen=True)
class SobolEstimate:
    group: FactorGroup
    kind: str
    strategy: str  # "SS", "SJ" or "IA"
    value: float
    asym_variance: float | None
    n: int
    model_calls: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown index kind {self.kind!r}")
        if self.asym_variance is not None and self.asym_variance < 0:
            raise ValueError("asymptotic variance must be nonnegative")


class ModelEvaluator:
    """A deterministic scalar model over a :class:`FactorSpace`.

    Subclasses implement :meth:`evaluate` on a batch of points given in model
    units (shape ``(n, d)``) and return ``n`` outputs. Same input, same output.
    """

    name = "model"
    space: FactorSpace

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: Sequence[float] | np.ndarray) -> float | np.ndarray:
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 1:
            return float(self.evaluate(arr[None, :])[0])
        return self.evaluate(arr)

    @property
    def d(self) -> int:
        return self.space.d

    def params(self) -> dict[str, Any]:
        return {}


class FunctionModel(ModelEvaluator):
    """Wrap a plain function as a :class:`ModelEvaluator`.

    With ``vectorized=False`` the function is called once per row.
    """

    def __init__(self, func, space: FactorSpace, vectorized: bool = True, name: str = "function"):
        self.func = func
        self.space = space
        self.vectorized = vectorized
        self.name = name

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        if self.vectorized:
            return np.asarray(self.func(x), dtype=float).reshape(len(x))
        return np.array([float(self.func(row)) for row in x])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to re-run a replicate study."""

    model: str
    params: dict[str, Any] = field(default_factory=dict)
    strategy: str = "both"
    sampler: str = "lhs"
    n: int = 64
    groups: tuple[FactorGroup, ...] | None = None
    replicates: int = 1
    seed: int = 0
    budget_matched: bool = False
    clamp: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.strategy not in (*STRATEGIES, "both"):
            raise ConfigError(f"strategy must be current, ia or both, got {self.strategy!r}")
        if self.sampler not in ("mc", "lhs"):
            raise ConfigError(f"sampler must be mc or lhs, got {self.sampler!r}")
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.groups is not None:
            object.__setattr__(self, "groups", tuple(self.groups))

    @property
    def strategies(self) -> tuple[str, ...]:
        return STRATEGIES if self.strategy == "both" else (self.strategy,)

    def sample_size(self, strategy: str) -> int:
        """Actual N for ``strategy``; budget matching doubles the current design's N."""
        if self.budget_matched and strategy == CURRENT:
            return 2 * self.n
        return self.n

    def resolved_groups(self, d: int) -> tuple[FactorGroup, ...]:
        groups = tuple(singletons(d)) if self.groups is None else self.groups
        for g in groups:
            g.validate(d)
        return groups

    def with_params(self, **params) -> ExperimentConfig:
        merged = dict(self.params)
        merged.update(params)
        return _replace(self, params=merged)

    def replace(self, **changes) -> ExperimentConfig:
        return _replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "params": {k: _jsonable(v) for k, v in self.params.items()},
            "strategy": self.strategy,
            "sampler": self.sampler,
            "n": self.n,
            "groups": None if self.groups is None else [g.label for g in self.groups],
            "replicates": self.replicates,
            "seed": self.seed,
            "budget_matched": self.budget_matched,
            "clamp": self.clamp,
            "threads": self.threads,
        }


def _replace(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **changes)


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    return value


def as_groups(groups: Iterable[FactorGroup | Iterable[int]]) -> list[FactorGroup]:
    return [g if isinstance(g, FactorGroup) else FactorGroup(tuple(g)) for g in groups]

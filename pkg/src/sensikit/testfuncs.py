"""Benchmark models with closed-form Sobol' indices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .core import ConfigError, FactorGroup, FactorSpace, ModelEvaluator, SensikitError

DEFAULT_G_A = (-1.13, -1.24, -1.33, -1.42, -1.52, -1.64, -1.79, -2.00, -2.37, 1.52)


class SingularParameterError(SensikitError, ValueError):
    pass


@dataclass(frozen=True)
class AnalyticIndices:
    """Closed-form per-factor indices and total variance of a model."""

    S: tuple[float, ...]
    ST: tuple[float, ...]
    V: float

    @property
    def d(self) -> int:
        return len(self.S)


class AnalyticModel(ModelEvaluator):
    """Model whose first-order (closed) and total indices of any group are known."""

    def analytic(self) -> AnalyticIndices:
        d = self.d
        V = self.total_variance()
        S, ST = zip(*(self.group_indices(FactorGroup((i,))) for i in range(d)))
        return AnalyticIndices(tuple(S), tuple(ST), V)

    def total_variance(self) -> float:
        raise NotImplementedError

    def group_indices(self, group: FactorGroup) -> tuple[float, float]:
        """``(S_u, ST_u)`` for a group, ``S_u`` being the closed index."""
        raise NotImplementedError


class Ishigami(AnalyticModel):
    """``f0 + sin x1 + a sin^2 x2 + b x3^4 sin x1`` on ``(-pi, pi)^3``."""

    name = "ishigami"

    def __init__(self, f0: float = 0.0, a: float = 7.0, b: float = 0.1):
        self.f0 = float(f0)
        self.a = float(a)
        self.b = float(b)
        self.space = FactorSpace.uniform(3, -math.pi, math.pi)

    def params(self) -> dict[str, Any]:
        return {"f0": self.f0, "a": self.a, "b": self.b}

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        s1 = np.sin(x[:, 0])
        return self.f0 + s1 + self.a * np.sin(x[:, 1]) ** 2 + self.b * x[:, 2] ** 4 * s1

    def partial_variances(self) -> dict[frozenset, float]:
        a, b, pi = self.a, self.b, math.pi
        return {
            frozenset({0}): (1 + b * pi**4 / 5) ** 2 / 2,
            frozenset({1}): a**2 / 8,
            frozenset({2}): 0.0,
            frozenset({0, 2}): b**2 * pi**8 * (1 / 18 - 1 / 50),
        }

    def total_variance(self) -> float:
        a, b, pi = self.a, self.b, math.pi
        return 0.5 + a**2 / 8 + b * pi**4 / 5 + b**2 * pi**8 / 18

    def group_indices(self, group: FactorGroup) -> tuple[float, float]:
        group.validate(3)
        u = set(group.members)
        V = self.total_variance()
        closed = sum(v for w, v in self.partial_variances().items() if w <= u)
        total = sum(v for w, v in self.partial_variances().items() if w & u)
        return closed / V, total / V


class GFunction(AnalyticModel):
    """Sobol' g-function ``prod (|4 x_i - 2| + a_i) / (1 + a_i)`` on the unit cube."""

    name = "gfunction"

    def __init__(self, a: Sequence[float] = DEFAULT_G_A):
        a = tuple(float(v) for v in np.atleast_1d(a))
        if not a:
            raise ConfigError("g-function needs at least one coefficient")
        if any(v == -1.0 for v in a):
            raise SingularParameterError("g-function coefficient a_i = -1 is singular")
        self.a = a
        self.space = FactorSpace.unit(len(a))

    def params(self) -> dict[str, Any]:
        return {"a": list(self.a)}

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        a = np.asarray(self.a)
        return np.prod((np.abs(4.0 * x - 2.0) + a) / (a + 1.0), axis=1)

    def factor_variances(self) -> np.ndarray:
        a = np.asarray(self.a)
        return (1.0 / 3.0) / (1.0 + a) ** 2

    def total_variance(self) -> float:
        return float(np.prod(1.0 + self.factor_variances()) - 1.0)

    def group_indices(self, group: FactorGroup) -> tuple[float, float]:
        group.validate(self.d)
        vi = self.factor_variances()
        mask = np.zeros(self.d, dtype=bool)
        mask[list(group.members)] = True
        V = self.total_variance()
        closed = np.prod(1.0 + vi[mask]) - 1.0
        closed_rest = np.prod(1.0 + vi[~mask]) - 1.0
        return float(closed / V), float(1.0 - closed_rest / V)


class AdditivePolynomial(AnalyticModel):
    """Linear model ``sum c_i x_i`` on the unit cube."""

    name = "additive"

    def __init__(self, coeffs: Sequence[float]):
        coeffs = tuple(float(c) for c in np.atleast_1d(coeffs))
        if not coeffs:
            raise ConfigError("additive model needs at least one coefficient")
        self.coeffs = coeffs
        self.space = FactorSpace.unit(len(coeffs))

    def params(self) -> dict[str, Any]:
        return {"coeffs": list(self.coeffs)}

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return x @ np.asarray(self.coeffs)

    def total_variance(self) -> float:
        return float(sum(c * c for c in self.coeffs) / 12.0)

    def group_indices(self, group: FactorGroup) -> tuple[float, float]:
        group.validate(self.d)
        V = self.total_variance()
        if V == 0.0:
            raise SingularParameterError("all coefficients are zero; indices undefined")
        share = sum(self.coeffs[i] ** 2 for i in group.members) / 12.0 / V
        return share, share


def ishigami_eval(x, f0: float = 0.0, a: float = 7.0, b: float = 0.1):
    return Ishigami(f0, a, b)(x)


def ishigami_analytic(f0: float = 0.0, a: float = 7.0, b: float = 0.1) -> AnalyticIndices:
    return Ishigami(f0, a, b).analytic()


def gfunction_eval(x, a: Sequence[float] = DEFAULT_G_A):
    return GFunction(a)(x)


def gfunction_analytic(a: Sequence[float] = DEFAULT_G_A) -> AnalyticIndices:
    return GFunction(a).analytic()


def additive_poly_eval(x, coeffs: Sequence[float]):
    return AdditivePolynomial(coeffs)(x)


def additive_poly_analytic(coeffs: Sequence[float]) -> AnalyticIndices:
    return AdditivePolynomial(coeffs).analytic()


MODELS = {
    "ishigami": Ishigami,
    "gfunction": GFunction,
    "additive": AdditivePolynomial,
}


def make_model(name: str, params: dict[str, Any] | None = None) -> AnalyticModel:
    """Build a registered model from its name and parameter payload."""
    try:
        cls = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODELS)}") from None
    params = dict(params or {})
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None

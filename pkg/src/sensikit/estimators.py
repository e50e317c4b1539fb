"""First- and total-order Sobol' index estimators and their plug-in variances.

Two families are provided. The *current* one uses the outputs on A, B and
A_u: Saltelli's first-order estimator and the Sobol-Jansen total-order
estimator. The *IA* one also uses B_u and is symmetric in A and B; its
first-order estimate never exceeds its total-order estimate.

All sums use ``np.sum``, which accumulates pairwise on contiguous arrays.
"""
from __future__ import annotations

import numpy as np

from .core import (
    CURRENT,
    FIRST,
    IA,
    TOTAL,
    DegenerateSampleError,
    InsufficientSampleError,
    PickFreezeBlock,
    SobolEstimate,
    call_budget,
)

SS_FIRST = "SS_first"
SJ_TOTAL = "SJ_total"
IA_FIRST = "IA_first"
IA_TOTAL = "IA_total"
ESTIMATOR_KINDS = (SS_FIRST, SJ_TOTAL, IA_FIRST, IA_TOTAL)

# estimator kind -> (index kind, strategy label)
KIND_INFO = {
    SS_FIRST: (FIRST, "SS"),
    SJ_TOTAL: (TOTAL, "SJ"),
    IA_FIRST: (FIRST, "IA"),
    IA_TOTAL: (TOTAL, "IA"),
}


def _ratio(num: float, den: float, what: str) -> float:
    if not den > 0.0:
        raise DegenerateSampleError(f"zero denominator in {what} (constant or duplicated outputs)")
    return float(num / den)


def _need_bu(block: PickFreezeBlock) -> np.ndarray:
    if block.yBu is None:
        raise ValueError("IA estimators need a block with yBu")
    return block.yBu


def _ia_denominator_terms(block: PickFreezeBlock) -> np.ndarray:
    yBu = _need_bu(block)
    return (block.yA - block.yB) ** 2 + (block.yAu - yBu) ** 2


def s_first_saltelli(block: PickFreezeBlock) -> float:
    """Saltelli first-order estimate ``2 sum yA (yAu - yB) / sum (yA - yB)^2``."""
    num = 2.0 * np.sum(block.yA * (block.yAu - block.yB))
    den = np.sum((block.yA - block.yB) ** 2)
    return _ratio(num, den, f"SS first-order estimator for {block.group}")


def st_total_jansen(block: PickFreezeBlock) -> float:
    num = np.sum((block.yAu - block.yB) ** 2)
    den = np.sum((block.yA - block.yB) ** 2)
    return _ratio(num, den, f"SJ total-order estimator for {block.group}")


def st_total_ia(block: PickFreezeBlock) -> float:
    yBu = _need_bu(block)
    num = np.sum((block.yB - block.yAu) ** 2 + (block.yA - yBu) ** 2)
    den = np.sum(_ia_denominator_terms(block))
    return _ratio(num, den, f"IA total-order estimator for {block.group}")


def s_first_ia(block: PickFreezeBlock) -> float:
    """IA first-order estimate.

    Equal to ``1 - st_total_ia(block.swap_mixed())`` and never larger than
    ``st_total_ia(block)``; see :func:`ia_gap`.
    """
    yBu = _need_bu(block)
    num = 2.0 * np.sum((block.yAu - block.yB) * (block.yA - yBu))
    den = np.sum(_ia_denominator_terms(block))
    return _ratio(num, den, f"IA first-order estimator for {block.group}")


def ia_gap(block: PickFreezeBlock) -> float:
    """Closed form of ``st_total_ia - s_first_ia``, a ratio of sums of squares.

    It vanishes when the model is additive in the group, whatever N.
    """
    yBu = _need_bu(block)
    num = np.sum((block.yB - block.yAu + block.yA - yBu) ** 2)
    den = np.sum(_ia_denominator_terms(block))
    return _ratio(num, den, f"IA gap for {block.group}")


ESTIMATORS = {
    SS_FIRST: s_first_saltelli,
    SJ_TOTAL: st_total_jansen,
    IA_FIRST: s_first_ia,
    IA_TOTAL: st_total_ia,
}


def variance_normalizer(block: PickFreezeBlock, strategy: str) -> float:
    """Consistent estimate of V(y) built from the estimator denominators.

    ``sum (yA-yB)^2 / 2N`` for the current strategy; the IA strategy also
    folds in ``(yAu-yBu)^2`` and divides by ``4N``.
    """
    n = block.n
    if strategy == CURRENT:
        return float(np.sum((block.yA - block.yB) ** 2) / (2 * n))
    if strategy == IA:
        return float(np.sum(_ia_denominator_terms(block)) / (4 * n))
    raise ValueError(f"unknown strategy {strategy!r}")


def _row_quantity(kind: str, block: PickFreezeBlock, estimate: float) -> tuple[np.ndarray, int]:
    yA, yB, yAu = block.yA, block.yB, block.yAu
    if kind == SS_FIRST:
        return 2.0 * yA * (yAu - yB) - estimate * (yA - yB) ** 2, 4
    if kind == SJ_TOTAL:
        return (yAu - yB) ** 2 - estimate * (yA - yB) ** 2, 4
    yBu = _need_bu(block)
    den = (yA - yB) ** 2 + (yAu - yBu) ** 2
    if kind == IA_FIRST:
        return 2.0 * (yA - yBu) * (yAu - yB) - estimate * den, 16
    if kind == IA_TOTAL:
        return (yA - yBu) ** 2 + (yB - yAu) ** 2 - estimate * den, 16
    raise ValueError(f"unknown estimator kind {kind!r}")


def asymptotic_variance(kind: str, block: PickFreezeBlock, point_estimate: float, v_hat: float) -> float:
    """Delta-method variance of an estimator, with plug-in index and V(y).

    The sample variance of the per-row linearised quantity (``N - 1``
    divisor) is divided by ``4 N v_hat^2`` for the current estimators and by
    ``16 N v_hat^2`` for the IA ones.
    """
    if not v_hat > 0.0:
        raise DegenerateSampleError(f"total variance estimate {v_hat} is not positive for {block.group}")
    n = block.n
    if n < 2:
        raise InsufficientSampleError("asymptotic variance needs N >= 2")
    q, factor = _row_quantity(kind, block, point_estimate)
    return float(np.var(q, ddof=1) / (factor * n * v_hat**2))


def estimate_block(block: PickFreezeBlock, strategy: str, model_calls: int | None = None) -> list[SobolEstimate]:
    """Both indices of ``block`` under ``strategy`` with plug-in variances.

    Order: point estimate, then ``v_hat``, then the asymptotic variance.
    """
    kinds = (SS_FIRST, SJ_TOTAL) if strategy == CURRENT else (IA_FIRST, IA_TOTAL)
    if model_calls is None:
        model_calls = call_budget(strategy, block.n, 0, 1)
    out = []
    for kind in kinds:
        value = ESTIMATORS[kind](block)
        v_hat = variance_normalizer(block, strategy)
        var = asymptotic_variance(kind, block, value, v_hat)
        index_kind, label = KIND_INFO[kind]
        out.append(SobolEstimate(block.group, index_kind, label, value, var, block.n, model_calls))
    return out


def clamp_unit(value: float) -> float:
    return min(1.0, max(0.0, value))

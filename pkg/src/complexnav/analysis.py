"""Spearman rank correlation between factor intensity and per-level performance."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

SCHEME = "method-by-level-means"
MIN_POINTS = 3


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    if den == 0.0:
        return math.nan
    return float(a @ b) / den


def t_pvalue(rho: float, n: int) -> float:
    """Two-sided p-value of a correlation coefficient under the t approximation."""
    if n < 3 or math.isnan(rho):
        return math.nan
    if abs(rho) >= 1.0:
        return 0.0
    df = n - 2
    t2 = rho * rho * df / (1.0 - rho * rho)
    # P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)
    return float(min(1.0, max(0.0, betainc(df / 2.0, 0.5, df / (df + t2)))))


def spearman(xs, ys) -> tuple[float, float]:
    """Spearman's rho with a two-sided p-value.

    Ties share their mean rank. A constant input has no defined correlation and
    gives ``(nan, nan)``.
    """
    x = np.asarray(xs, dtype=float).ravel()
    y = np.asarray(ys, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if x.size < 3:
        raise ValueError("spearman needs at least 3 points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("spearman inputs must be finite")
    rho = _pearson(rankdata(x), rankdata(y))
    if math.isnan(rho):
        return math.nan, math.nan
    rho = max(-1.0, min(1.0, rho))
    return rho, t_pvalue(rho, x.size)


@dataclass
class CorrelationReport:
    factor: str
    metric: str
    rho: float | None
    p_value: float | None
    n_points: int
    table: list[dict] = field(default_factory=list)
    scheme: str = SCHEME
    insufficient: bool = False
    undefined: bool = False

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "metric": self.metric,
            "rho": self.rho,
            "p_value": self.p_value,
            "n": self.n_points,
            "scheme": self.scheme,
            "insufficient": self.insufficient,
            "undefined": self.undefined,
            "table": self.table,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CorrelationReport":
        return cls(d["factor"], d["metric"], d["rho"], d["p_value"], d["n"], list(d["table"]),
                   d.get("scheme", SCHEME), d.get("insufficient", False), d.get("undefined", False))


def _metric_block(summary: Mapping, metric: str):
    block = summary.get(metric)
    if block is None:
        return None, None
    return block.get("mean"), block.get("std")


def correlate_experiment(summaries: Iterable[Mapping], factor: str, metric: str) -> CorrelationReport:
    """Pool every (method, level) mean of ``metric`` and correlate it with the level index.

    Each entry of ``summaries`` needs ``method``, ``level_index`` and ``summary``
    (an aggregate as produced by :func:`complexnav.metrics.aggregate`). Points
    whose mean is missing, e.g. no successful trials, are left out.
    """
    entries = sorted(summaries, key=lambda e: (str(e["method"]), int(e["level_index"])))
    levels = {int(e["level_index"]) for e in entries}
    methods = {str(e["method"]) for e in entries}
    if not methods:
        raise ValueError("need at least one method")
    table, xs, ys = [], [], []
    for e in entries:
        mean, std = _metric_block(e["summary"], metric)
        table.append({"method": str(e["method"]), "level_index": int(e["level_index"]),
                      "mean": mean, "std": std})
        if mean is not None and math.isfinite(mean):
            xs.append(int(e["level_index"]))
            ys.append(float(mean))
    report = CorrelationReport(str(factor), metric, None, None, len(xs), table)
    if len(xs) < MIN_POINTS or len(levels) < 2:
        report.insufficient = True
        return report
    rho, p = spearman(xs, ys)
    if math.isnan(rho):
        report.undefined = True
        return report
    report.rho, report.p_value = rho, p
    return report

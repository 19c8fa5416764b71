"""Forecast comparison by mean realized scores, the miscalibration /
discrimination / uncertainty decomposition, and functional-induced scores."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import (
    Categorical,
    Ensemble,
    Forecast,
    Normal,
    NumericFailure,
    ScoreValue,
    ValidationError,
    class_index,
)

__all__ = [
    "ComparisonReport",
    "DecompositionReport",
    "mean_score",
    "compare",
    "corp_decompose",
    "functional_score",
]


@dataclass(frozen=True)
class ComparisonReport:
    mean_a: float
    mean_b: float
    diff: float
    n: int
    naive_se_diff: float
    degenerate: bool = False


@dataclass(frozen=True)
class DecompositionReport:
    mcb: float
    dsc: float
    unc: float
    mean_score: float
    groups: int


def _score_values(score_fn, forecasts, observations) -> list[float]:
    if len(forecasts) != len(observations):
        raise ValidationError(
            f"{len(forecasts)} forecasts vs {len(observations)} observations"
        )
    if not forecasts:
        raise ValidationError("empty input")
    out = []
    for f, y in zip(forecasts, observations):
        s = score_fn(f, y)
        out.append(float(s.value) if isinstance(s, ScoreValue) else float(s))
    return out


def mean_score(score_fn, forecasts, observations) -> float:
    """Mean realized score over aligned (forecast, observation) pairs.

    Summation uses math.fsum, which is deterministic and correctly rounded.
    +inf scores propagate to a +inf mean.
    """
    vals = _score_values(score_fn, forecasts, observations)
    if any(v == math.inf for v in vals):
        return math.inf
    return math.fsum(vals) / len(vals)


def compare(score_fn, forecasts_a, forecasts_b, observations) -> ComparisonReport:
    """Paired comparison of two forecast sequences on shared observations.

    diff = mean_a - mean_b; the naive standard error is sd(per-instance
    score differences) / sqrt(n).  It is descriptive plumbing, not a test.
    n = 1 reports se 0 with a degenerate flag.
    """
    va = _score_values(score_fn, forecasts_a, observations)
    vb = _score_values(score_fn, forecasts_b, observations)
    mean_a = math.fsum(va) / len(va) if math.inf not in va else math.inf
    mean_b = math.fsum(vb) / len(vb) if math.inf not in vb else math.inf
    diff = mean_a - mean_b
    if math.isnan(diff):
        raise NumericFailure("comparison undefined: both sides have infinite mean score")
    n = len(va)
    if n == 1:
        return ComparisonReport(mean_a, mean_b, diff, 1, 0.0, degenerate=True)
    diffs = [a - b for a, b in zip(va, vb)]
    if any(math.isinf(d) or math.isnan(d) for d in diffs):
        return ComparisonReport(mean_a, mean_b, diff, n, math.inf)
    mu = math.fsum(diffs) / n
    var = math.fsum((d - mu) ** 2 for d in diffs) / (n - 1)
    return ComparisonReport(mean_a, mean_b, diff, n, math.sqrt(var / n))


# ---------------------------------------------------------------------------
# MCB / DSC / UNC decomposition

def _brier_parts():
    def score(p: np.ndarray, k: int) -> float:
        return (float(p[1]) - (1.0 if k == 1 else 0.0)) ** 2

    def div(p: np.ndarray, q: np.ndarray) -> float:
        return (float(p[1]) - float(q[1])) ** 2

    def entropy(q: np.ndarray) -> float:
        return float(q[1]) * (1.0 - float(q[1]))

    return score, div, entropy, 2


def _quadratic_parts():
    def score(p: np.ndarray, k: int) -> float:
        return float(-2.0 * p[k] + np.dot(p, p))

    def div(p: np.ndarray, q: np.ndarray) -> float:
        d = p - q
        return float(np.dot(d, d))

    def entropy(q: np.ndarray) -> float:
        return -float(np.dot(q, q))

    return score, div, entropy, None


def corp_decompose(forecasts, observations, rule: str = "brier", bins: int | None = None) -> DecompositionReport:
    """Decompose the mean score into MCB - DSC + UNC.

    Forecasts are grouped by exact equality of their probability vectors
    (or, with `bins=k`, by k equal-width probability bins per component, in
    which case each forecast is replaced by its group's average and the
    identity holds for those binned forecasts).  Per group the conditional
    outcome distribution is the empirical class frequency; the reference
    forecast is the marginal class distribution.

    MCB  weighted mean divergence from group forecast to group conditional
    DSC  weighted mean divergence from the marginal to group conditional
    UNC  entropy of the marginal

    mean_score = MCB - DSC + UNC holds exactly for exact grouping.
    """
    if rule == "brier":
        score, div, entropy, need_classes = _brier_parts()
    elif rule == "quadratic":
        score, div, entropy, need_classes = _quadratic_parts()
    else:
        raise ValidationError(f"decomposition supports 'brier' or 'quadratic'; got {rule!r}")
    if not forecasts:
        raise ValidationError("empty input")
    if len(forecasts) != len(observations):
        raise ValidationError("forecasts and observations must align")
    if not all(isinstance(f, Categorical) for f in forecasts):
        raise ValidationError("decomposition needs categorical forecasts")
    n_classes = forecasts[0].n_classes
    if any(f.n_classes != n_classes for f in forecasts):
        raise ValidationError("all forecasts must share the class count")
    if need_classes is not None and n_classes != need_classes:
        raise ValidationError(f"rule {rule!r} needs {need_classes} classes")
    if bins is not None and bins < 1:
        raise ValidationError("bins must be a positive integer")

    ys = [class_index(y, n_classes) for y in observations]
    n = len(forecasts)

    groups: dict[tuple, list[int]] = {}
    for i, f in enumerate(forecasts):
        if bins is None:
            key = tuple(float(p) for p in f.probs)
        else:
            key = tuple(min(int(p * bins), bins - 1) for p in f.probs)
        groups.setdefault(key, []).append(i)

    marginal = np.zeros(n_classes)
    for k in ys:
        marginal[k] += 1.0
    marginal /= n

    mcb_terms, dsc_terms, score_terms = [], [], []
    for key, idx in groups.items():
        m = len(idx)
        if bins is None:
            p_g = forecasts[idx[0]].probs
        else:
            p_g = np.mean([forecasts[i].probs for i in idx], axis=0)
        q_g = np.zeros(n_classes)
        for i in idx:
            q_g[ys[i]] += 1.0
        q_g /= m
        mcb_terms.append(m * div(p_g, q_g))
        dsc_terms.append(m * div(marginal, q_g))
        score_terms.extend(score(p_g, ys[i]) for i in idx)

    return DecompositionReport(
        mcb=math.fsum(mcb_terms) / n,
        dsc=math.fsum(dsc_terms) / n,
        unc=entropy(marginal),
        mean_score=math.fsum(score_terms) / n,
        groups=len(groups),
    )


# ---------------------------------------------------------------------------
# functional-induced scores

def _forecast_mean(forecast: Forecast) -> float:
    if isinstance(forecast, Ensemble):
        if forecast.dim != 1:
            raise ValidationError("mean functional is univariate here")
        return float(np.dot(forecast.weights, forecast.members))
    if isinstance(forecast, Normal):
        return forecast.mu
    raise ValidationError("mean functional needs an ensemble or parametric forecast")


def _forecast_quantile(forecast: Forecast, tau: float) -> float:
    """Generalized inverse CDF with a midpoint convention on exact hits.

    When the CDF equals tau exactly at an atom, the quantile is the
    midpoint between that atom and the next one (so the median of {0, 1}
    is 0.5); otherwise it is the smallest atom with CDF > tau.
    """
    if isinstance(forecast, Normal):
        return forecast.mu + forecast.sigma * float(ndtri(tau))
    if isinstance(forecast, (Ensemble, Categorical)):
        if isinstance(forecast, Ensemble):
            if forecast.dim != 1:
                raise ValidationError("quantiles are univariate")
            order = np.argsort(forecast.members, kind="stable")
            pts = forecast.members[order]
            cum = np.cumsum(forecast.weights[order])
        else:
            pts = np.arange(forecast.n_classes, dtype=float)
            cum = np.cumsum(forecast.probs)
        for j, c in enumerate(cum):
            if abs(c - tau) <= 1e-12:
                if j + 1 < pts.size:
                    return 0.5 * (float(pts[j]) + float(pts[j + 1]))
                return float(pts[j])
            if c > tau:
                return float(pts[j])
        return float(pts[-1])
    raise ValidationError("quantile functional needs a forecast with a CDF")


def functional_score(forecast: Forecast, y: float, functional: str = "mean",
                     tau: float | None = None) -> ScoreValue:
    """Score a forecast through a summary functional.

    mean: squared error (T(P) - y)^2.  quantile: pinball loss
    tau (y - q)+ + (1 - tau) (q - y)+ at the tau-quantile.  Proper but not
    strictly proper: forecasts sharing the summary score identically.
    """
    y = float(y)
    if functional == "mean":
        t = _forecast_mean(forecast)
        return ScoreValue((t - y) ** 2, "closed-form")
    if functional == "quantile":
        if tau is None or not 0.0 < tau < 1.0:
            raise ValidationError("quantile functional needs tau in (0, 1)")
        q = _forecast_quantile(forecast, float(tau))
        value = tau * max(y - q, 0.0) + (1.0 - tau) * max(q - y, 0.0)
        return ScoreValue(value, "closed-form")
    raise ValidationError(f"unknown functional {functional!r}")

"""Scores for vector outcomes: energy, variogram and Dawid-Sebastiani."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .model import (
    Ensemble,
    NumericFailure,
    ScoreValue,
    ValidationError,
    cholesky_spd,
)

__all__ = [
    "energy_score",
    "variogram_score",
    "dawid_sebastiani",
    "dawid_sebastiani_from_ensemble",
]


def _members_2d(members, name="members") -> np.ndarray:
    m = np.asarray(members, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1:
        raise ValidationError(f"{name} must be an (n, d) array")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} must be finite")
    return m


def _outcome_vector(y, d: int) -> np.ndarray:
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if yv.shape != (d,):
        raise ValidationError(f"outcome dimension {yv.shape} does not match forecast ({d},)")
    if not np.all(np.isfinite(yv)):
        raise ValidationError("outcome must be finite")
    return yv


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    Ensemble(np.zeros(n), w)  # reuse the simplex validation
    return w


def _power_norm(diffs: np.ndarray, beta: float, alpha: float | None) -> np.ndarray:
    if alpha is None or alpha == 2.0:
        base = np.sqrt(np.sum(diffs * diffs, axis=-1))
    else:
        base = np.sum(np.abs(diffs) ** alpha, axis=-1) ** (1.0 / alpha)
    return base**beta


def energy_score(
    members,
    y,
    beta: float = 1.0,
    weights=None,
    variant: str = "fair",
    norm_alpha: float | None = None,
) -> ScoreValue:
    """Energy score of an ensemble: mean ||X - y||^beta minus half the
    (variant-dependent) mean pairwise ||X - X'||^beta.

    beta must lie in (0, 2).  `norm_alpha` swaps the Euclidean norm for the
    alpha-(quasi)norm with alpha in (0, 2] and beta <= alpha; for alpha < 1
    this is only a quasi-norm, which callers should surface to users.
    """
    beta = float(beta)
    if not 0.0 < beta < 2.0:
        raise ValidationError(f"beta must lie in (0, 2); got {beta}")
    if norm_alpha is not None:
        norm_alpha = float(norm_alpha)
        if not 0.0 < norm_alpha <= 2.0:
            raise ValidationError("norm_alpha must lie in (0, 2]")
        if beta > norm_alpha:
            raise ValidationError("beta must not exceed norm_alpha")
    if variant not in ("fair", "empirical"):
        raise ValidationError(f"unknown variant {variant!r}")
    m = _members_2d(members)
    n, d = m.shape
    yv = _outcome_vector(y, d)
    w = _weights(weights, n)

    term1 = float(np.dot(w, _power_norm(m - yv, beta, norm_alpha)))
    pair = _power_norm(m[:, None, :] - m[None, :, :], beta, norm_alpha)
    cross = float(w @ pair @ w)  # diagonal is zero
    if variant == "empirical":
        return ScoreValue(term1 - 0.5 * cross, "naive-exact")
    denom = 1.0 - float(np.dot(w, w))
    if n < 2 or denom <= 0.0:
        raise ValidationError("fair variant needs at least two members")
    return ScoreValue(term1 - 0.5 * cross / denom, "naive-exact")


def variogram_score(members, y, p: float = 0.5, w=None, weights=None) -> ScoreValue:
    """Variogram score of order p with nonnegative pair weights w_ij.

    sum_ij w_ij (|y_i - y_j|^p - E|X_i - X_j|^p)^2, the expectation taken
    over the (weighted) ensemble.  Defaults: w_ij = 1 off the diagonal.
    Proper but not strictly proper; always >= 0.
    """
    p = float(p)
    if not p > 0.0:
        raise ValidationError("variogram order p must be positive")
    m = _members_2d(members)
    n, d = m.shape
    if d < 2:
        raise ValidationError("variogram score needs dimension >= 2")
    yv = _outcome_vector(y, d)
    wts = _weights(weights, n)
    if w is None:
        w = np.ones((d, d)) - np.eye(d)
    w = np.asarray(w, dtype=float)
    if w.shape != (d, d):
        raise ValidationError("pair weights must be d x d")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValidationError("pair weights must be finite and nonnegative")

    vy = np.abs(yv[:, None] - yv[None, :]) ** p
    vx = np.einsum("k,kij->ij", wts, np.abs(m[:, :, None] - m[:, None, :]) ** p)
    return ScoreValue(float(np.sum(w * (vy - vx) ** 2)), "closed-form")


def _gauss_quadform(mean, cov, y) -> tuple[float, float]:
    """(log det cov, squared Mahalanobis distance) via one Cholesky."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.size
    cov = np.asarray(cov, dtype=float)
    if cov.shape == () and d == 1:
        cov = cov.reshape(1, 1)
    yv = _outcome_vector(y, d)
    lower = cholesky_spd(cov)
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    z = solve_triangular(lower, yv - mean, lower=True)
    return logdet, float(np.dot(z, z))


def dawid_sebastiani(mean, cov, y) -> ScoreValue:
    """log det(cov) + (y - mean)' cov^{-1} (y - mean)."""
    logdet, maha = _gauss_quadform(mean, cov, y)
    return ScoreValue(logdet + maha, "closed-form")


def dawid_sebastiani_from_ensemble(members, y) -> ScoreValue:
    """Moment plug-in: sample mean and unbiased sample covariance.

    Needs n > d members; a singular sample covariance (collinear members)
    is a numeric failure.
    """
    m = _members_2d(members)
    n, d = m.shape
    if n <= d:
        raise ValidationError(f"need more members ({n}) than dimensions ({d})")
    mean = m.mean(axis=0)
    centered = m - mean
    cov = centered.T @ centered / (n - 1.0)
    try:
        logdet, maha = _gauss_quadform(mean, cov, y)
    except ValidationError as exc:
        # diagonal can collapse to zero for degenerate samples
        raise NumericFailure(f"degenerate sample covariance: {exc}") from exc
    return ScoreValue(logdet + maha, "closed-form")

"""Minimum-score inference: fit parametric families by minimizing empirical
mean scores, unconditionally or with a linear covariate model.

The optimizer is a self-contained Nelder-Mead simplex search: the fitting
code stays rule-agnostic because no score here needs derivatives, and the
convergence contract (simplex diameter below a tolerance) is explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import NumericFailure, ValidationError, make_rng
from .univariate import _crps_normal_array

__all__ = ["FitResult", "nelder_mead", "fit_min_score", "fit_conditional_min_score"]

SIGMA_FLOOR = 1e-8
SIGMA_CEIL = 1e8


@dataclass(frozen=True)
class FitResult:
    params: np.ndarray
    objective: float
    iterations: int
    converged: bool


def _simplex_diameter(vertices: np.ndarray) -> float:
    diffs = vertices[:, None, :] - vertices[None, :, :]
    return float(np.sqrt(np.max(np.sum(diffs * diffs, axis=-1))))


def nelder_mead(
    objective,
    x0,
    tol: float = 1e-8,
    max_iter: int = 2000,
    *,
    restarts: int = 0,
    seed: int = 0,
    initial_step: float = 0.25,
) -> FitResult:
    """Derivative-free simplex minimization.

    Stops when the simplex diameter drops below `tol` (converged) or after
    `max_iter` iterations (not converged); the best vertex is returned
    either way.  `max_iter=0` returns the starting point unevaluated beyond
    the initial check.  Optional seeded restarts rerun the search from
    perturbations of the incumbent and keep the best result.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    f0 = float(objective(x0))
    if not math.isfinite(f0):
        raise ValidationError("objective must be finite at the starting point")
    best = _nelder_mead_once(objective, x0, f0, tol, max_iter, initial_step)
    if restarts > 0:
        rng = make_rng(seed, stream=(0x4E4D,))
        total_iters = best.iterations
        for _ in range(int(restarts)):
            jitter = 0.5 * np.maximum(1.0, np.abs(best.params)) * rng.standard_normal(x0.size)
            start = best.params + jitter
            fs = float(objective(start))
            if not math.isfinite(fs):
                continue
            cand = _nelder_mead_once(objective, start, fs, tol, max_iter, initial_step)
            total_iters += cand.iterations
            if cand.objective < best.objective:
                best = cand
        best = FitResult(best.params, best.objective, total_iters, best.converged)
    return best


def _nelder_mead_once(objective, x0, f0, tol, max_iter, initial_step) -> FitResult:
    dim = x0.size
    if max_iter == 0:
        return FitResult(x0.copy(), f0, 0, False)
    verts = [x0.copy()]
    for i in range(dim):
        v = x0.copy()
        v[i] += initial_step * max(1.0, abs(v[i]))
        verts.append(v)
    verts = np.asarray(verts)
    fvals = np.array([f0] + [float(objective(v)) for v in verts[1:]])

    alpha, gamma, rho, shrink = 1.0, 2.0, 0.5, 0.5
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        order = np.argsort(fvals, kind="stable")
        verts, fvals = verts[order], fvals[order]
        if _simplex_diameter(verts) <= tol:
            converged = True
            break
        centroid = verts[:-1].mean(axis=0)
        worst = verts[-1]
        reflected = centroid + alpha * (centroid - worst)
        fr = float(objective(reflected))
        if fvals[0] <= fr < fvals[-2]:
            verts[-1], fvals[-1] = reflected, fr
            continue
        if fr < fvals[0]:
            expanded = centroid + gamma * (centroid - worst)
            fe = float(objective(expanded))
            if fe < fr:
                verts[-1], fvals[-1] = expanded, fe
            else:
                verts[-1], fvals[-1] = reflected, fr
            continue
        contracted = centroid + rho * (worst - centroid)
        fc = float(objective(contracted))
        if fc < fvals[-1]:
            verts[-1], fvals[-1] = contracted, fc
            continue
        verts = verts[0] + shrink * (verts - verts[0])
        fvals = np.array([fvals[0]] + [float(objective(v)) for v in verts[1:]])
    order = np.argsort(fvals, kind="stable")
    best_x, best_f = verts[order[0]], float(fvals[order[0]])
    if not math.isfinite(best_f):
        raise NumericFailure("optimizer ended on a non-finite objective value")
    return FitResult(best_x, best_f, iterations, converged)


# ---------------------------------------------------------------------------
# family fitting

def _sigma_of(s: float) -> float:
    return float(np.exp(np.clip(s, math.log(SIGMA_FLOOR), math.log(SIGMA_CEIL))))


def _normal_objective(rule: str, data: np.ndarray):
    if rule == "log":
        def obj(theta):
            mu, sigma = theta[0], _sigma_of(theta[1])
            resid = data - mu
            return float(
                math.log(sigma)
                + 0.5 * math.log(2.0 * math.pi)
                + float(np.mean(resid * resid)) / (2.0 * sigma * sigma)
            )
    elif rule == "crps":
        def obj(theta):
            mu, sigma = theta[0], _sigma_of(theta[1])
            return float(np.mean(_crps_normal_array(mu, sigma, data)))
    else:
        raise ValidationError(f"unsupported rule {rule!r}; use 'log' or 'crps'")
    return obj


def fit_min_score(
    data,
    family: str = "normal",
    rule: str = "log",
    tol: float = 1e-9,
    max_iter: int = 4000,
    seed: int = 0,
) -> FitResult:
    """Fit a parametric family by minimizing the empirical mean score.

    Returns params on the natural scale: (mu, sigma) for the normal
    family.  sigma is optimized as exp(s) with a floor of 1e-8 so the
    optimizer cannot leave the parameter space.
    """
    if family != "normal":
        raise ValidationError(f"unsupported family {family!r}")
    data = np.asarray(data, dtype=float)
    if data.ndim != 1 or data.size < 2:
        raise ValidationError("need at least two observations")
    if not np.all(np.isfinite(data)):
        raise ValidationError("data must be finite")
    if float(np.max(data) - np.min(data)) == 0.0:
        raise NumericFailure("degenerate data: all observations equal")
    objective = _normal_objective(rule, data)
    sd0 = max(float(np.std(data)), SIGMA_FLOOR)
    x0 = np.array([float(np.mean(data)), math.log(sd0)])
    res = nelder_mead(objective, x0, tol=tol, max_iter=max_iter, restarts=3, seed=seed,
                      initial_step=0.1)
    params = np.array([res.params[0], _sigma_of(res.params[1])])
    return FitResult(params, res.objective, res.iterations, res.converged)


def fit_conditional_min_score(
    x,
    y,
    rule: str = "log",
    tol: float = 1e-9,
    max_iter: int = 6000,
    seed: int = 0,
) -> FitResult:
    """Fit y | x ~ N(a + b x, sigma^2) by minimizing the empirical mean score.

    Returns params (a, b, sigma).  The starting point is the least-squares
    line, so the log rule lands on its closed-form optimum quickly and the
    CRPS rule starts from a sensible incumbent.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size < 3:
        raise ValidationError("need aligned 1-d covariates and responses, n >= 3")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("data must be finite")
    if float(np.max(x) - np.min(x)) == 0.0:
        raise ValidationError("degenerate design: all covariate values equal")

    xbar, ybar = float(np.mean(x)), float(np.mean(y))
    sxx = float(np.sum((x - xbar) ** 2))
    b0 = float(np.sum((x - xbar) * (y - ybar))) / sxx
    a0 = ybar - b0 * xbar
    resid0 = y - a0 - b0 * x
    s0 = max(float(np.sqrt(np.mean(resid0 * resid0))), SIGMA_FLOOR)

    if rule == "log":
        def objective(theta):
            a, b, sigma = theta[0], theta[1], _sigma_of(theta[2])
            resid = y - a - b * x
            return float(
                math.log(sigma)
                + 0.5 * math.log(2.0 * math.pi)
                + float(np.mean(resid * resid)) / (2.0 * sigma * sigma)
            )
    elif rule == "crps":
        def objective(theta):
            a, b, sigma = theta[0], theta[1], _sigma_of(theta[2])
            return float(np.mean(_crps_normal_array(a + b * x, sigma, y)))
    else:
        raise ValidationError(f"unsupported rule {rule!r}; use 'log' or 'crps'")

    x0 = np.array([a0, b0, math.log(s0)])
    res = nelder_mead(objective, x0, tol=tol, max_iter=max_iter, restarts=3, seed=seed,
                      initial_step=0.1)
    params = np.array([res.params[0], res.params[1], _sigma_of(res.params[2])])
    return FitResult(params, res.objective, res.iterations, res.converged)

"""Local scoring rules: values depend on the forecast density only through
its derivatives at the outcome.  Covers the Hyvarinen score (analytic and
finite-difference paths) and the log-cosh score.

These rules are insensitive to the density's normalization constant, so
they accept log-densities defined up to an additive shift.  Boundary decay
of the density cannot be checked from an oracle; callers assert it.
"""

from __future__ import annotations

import math

import numpy as np

from .model import DensityOracle, NumericFailure, ScoreValue, ValidationError

__all__ = [
    "hyvarinen_score",
    "hyvarinen_score_fd",
    "logcosh_score",
    "logcosh_score_from_oracle",
    "normal_oracle",
    "two_normal_mixture_oracle",
    "MIX2_PARAMS",
]

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


def _check_finite(value, what: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise NumericFailure(f"{what} is not finite")
    return v


def hyvarinen_score(oracle: DensityOracle, y) -> ScoreValue:
    """Laplacian of log p at y plus half the squared gradient norm.

    Requires analytic gradient and Laplacian oracles.  Adding a constant to
    the log-density leaves the score unchanged.
    """
    if not isinstance(oracle, DensityOracle):
        raise ValidationError("hyvarinen score needs a density oracle")
    if oracle.grad is None or oracle.laplacian is None:
        raise ValidationError("oracle must provide analytic gradient and laplacian")
    grad = np.atleast_1d(np.asarray(oracle.grad(y), dtype=float))
    lap = _check_finite(oracle.laplacian(y), "laplacian of log density")
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("gradient of log density is not finite")
    return ScoreValue(lap + 0.5 * float(np.dot(grad, grad)), "closed-form")


def hyvarinen_score_fd(oracle: DensityOracle, y, h_step: float | None = None) -> ScoreValue:
    """Finite-difference fallback using only the log-density.

    Central differences per coordinate: gradient O(h^2), Laplacian O(h^2).
    Default step: eps^(1/3) * max(1, |y_i|) per coordinate.
    """
    if not isinstance(oracle, DensityOracle):
        raise ValidationError("hyvarinen score needs a density oracle")
    yv = np.atleast_1d(np.asarray(y, dtype=float))
    if h_step is not None and not h_step > 0.0:
        raise ValidationError("finite-difference step must be positive")

    def logp(v):
        out = float(oracle.logdensity(v if v.size > 1 else float(v[0])))
        if not math.isfinite(out):
            raise NumericFailure("log density is not finite on the difference stencil")
        return out

    center = logp(yv)
    grad2 = 0.0
    lap = 0.0
    for i in range(yv.size):
        h = h_step if h_step is not None else _FD_STEP * max(1.0, abs(float(yv[i])))
        up, down = yv.copy(), yv.copy()
        up[i] += h
        down[i] -= h
        fu, fd = logp(up), logp(down)
        g = (fu - fd) / (2.0 * h)
        grad2 += g * g
        lap += (fu - 2.0 * center + fd) / (h * h)
    return ScoreValue(lap + 0.5 * grad2, "closed-form")


def logcosh_score(z1: float, z2: float) -> ScoreValue:
    """-log cosh z1 + z1 tanh z1 + z2 (1 - tanh^2 z1).

    z1 and z2 are the first and second derivatives of the log density at
    the outcome.  log cosh is evaluated as |z| + log(1 + e^{-2|z|}) - log 2
    so large |z1| cannot overflow.
    """
    z1 = float(z1)
    z2 = float(z2)
    if not (math.isfinite(z1) and math.isfinite(z2)):
        raise ValidationError("z1 and z2 must be finite")
    a = abs(z1)
    log_cosh = a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)
    t = math.tanh(z1)
    return ScoreValue(-log_cosh + z1 * t + z2 * (1.0 - t * t), "closed-form")


def logcosh_score_from_oracle(oracle: DensityOracle, y: float) -> ScoreValue:
    """Log-cosh score from a univariate oracle with analytic derivatives.

    The density regularity this rule needs is asserted by the caller, not
    checked here.
    """
    if oracle.dim != 1:
        raise ValidationError("log-cosh score is univariate")
    if oracle.grad is None or oracle.laplacian is None:
        raise ValidationError("oracle must provide analytic gradient and laplacian")
    z1 = float(np.atleast_1d(oracle.grad(y))[0])
    z2 = float(oracle.laplacian(y))
    return logcosh_score(z1, z2)


# ---------------------------------------------------------------------------
# built-in oracle families

def normal_oracle(mu: float = 0.0, sigma: float = 1.0, shift: float = 0.0) -> DensityOracle:
    """Normal density oracle; `shift` adds a constant to the log density to
    exercise normalization invariance."""
    if not sigma > 0.0:
        raise ValidationError("sigma must be positive")
    mu, sigma, shift = float(mu), float(sigma), float(shift)
    var = sigma * sigma
    const = -0.5 * math.log(2.0 * math.pi * var)

    def logdensity(y):
        y = np.asarray(y, dtype=float)
        return const - 0.5 * (y - mu) ** 2 / var + shift

    return DensityOracle(
        logdensity=logdensity,
        grad=lambda y: -(np.asarray(y, dtype=float) - mu) / var,
        laplacian=lambda y: -1.0 / var,
        normalized=(shift == 0.0),
        dim=1,
    )


# Fixed mixture exposed through the CLI: 0.6 N(-1, 1) + 0.4 N(1.5, 0.75^2).
MIX2_PARAMS = ((0.6, -1.0, 1.0), (0.4, 1.5, 0.75))


def two_normal_mixture_oracle(components=MIX2_PARAMS, shift: float = 0.0) -> DensityOracle:
    """Two-component normal mixture with analytic derivative oracles."""
    comps = tuple((float(w), float(m), float(s)) for (w, m, s) in components)
    if len(comps) != 2 or any(s <= 0 or w <= 0 for (w, m, s) in comps):
        raise ValidationError("mixture needs two components with positive weights and scales")
    if abs(sum(w for (w, _, _) in comps) - 1.0) > 1e-12:
        raise ValidationError("mixture weights must sum to 1")

    def moments(y):
        y = np.asarray(y, dtype=float)
        p = np.zeros_like(y, dtype=float)
        dp = np.zeros_like(p)
        ddp = np.zeros_like(p)
        for w, m, s in comps:
            z = (y - m) / s
            phi = w * np.exp(-0.5 * z * z) / (s * math.sqrt(2.0 * math.pi))
            p += phi
            dp += phi * (-(y - m) / (s * s))
            ddp += phi * (((y - m) / (s * s)) ** 2 - 1.0 / (s * s))
        return p, dp, ddp

    def logdensity(y):
        p, _, _ = moments(y)
        return np.log(p) + shift

    def grad(y):
        p, dp, _ = moments(y)
        return dp / p

    def laplacian(y):
        p, dp, ddp = moments(y)
        return float(ddp / p - (dp / p) ** 2)

    return DensityOracle(
        logdensity=logdensity,
        grad=grad,
        laplacian=laplacian,
        normalized=(shift == 0.0),
        dim=1,
    )

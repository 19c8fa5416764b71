"""Kernel-score machinery: kernel registry, exact and Monte-Carlo scores,
entropy, divergence, weight transforms and generalized kernel scores.

All shipped kernels are conditionally negative definite, nonnegative and
vanish on the diagonal.  Positive definite kernels k are converted with
h(x, y) = k(x, x) + k(y, y) - 2 k(x, y), which preserves the induced score
(linear terms drop out of the double integral) while guaranteeing h >= 0
and h(x, x) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Ensemble, NumericFailure, ScoreValue, ValidationError

__all__ = [
    "Kernel",
    "GFunction",
    "kernel_registry",
    "kernel_from_spec",
    "g_registry",
    "kernel_score_exact",
    "kernel_score_mc",
    "kernel_divergence",
    "kernel_entropy",
    "generalized_kernel_score",
    "weight_transform",
]

SQRT_EPS = 1e-9  # shift for the sqrt g-function so g'(0) stays finite


def _points(x) -> np.ndarray:
    """Coerce points to an (n, d) array; scalars and vectors become columns."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise ValidationError("points must be scalars, vectors, or an (n, d) matrix")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must be finite")
    return arr


@dataclass(frozen=True)
class Kernel:
    """Symmetric nonnegative kernel with vectorized pairwise evaluation.

    `matrix(X, Y)` returns the (n, m) matrix of kernel values between two
    point sets.  Metadata records translation invariance and, when the
    kernel is homogeneous, its degree.
    """

    id: str
    matrix_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    translation_invariant: bool = False
    homogeneity_degree: float | None = None

    def matrix(self, x, y) -> np.ndarray:
        out = self.matrix_fn(_points(x), _points(y))
        if np.any(np.isnan(out)):
            raise NumericFailure(f"kernel {self.id!r} produced NaN")
        return out

    def eval(self, x, y) -> float:
        return float(self.matrix(x, y)[0, 0])


def _pair_diffs(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x[:, None, :] - y[None, :, :]


def _norm(diffs: np.ndarray, alpha: float | None) -> np.ndarray:
    if alpha is None or alpha == 2.0:
        return np.sqrt(np.sum(diffs * diffs, axis=-1))
    return np.sum(np.abs(diffs) ** alpha, axis=-1) ** (1.0 / alpha)


def _euclidean_beta(beta: float, norm_alpha: float | None) -> Kernel:
    if not 0.0 < beta < 2.0:
        raise ValidationError(f"beta must lie in (0, 2); got {beta}")
    if norm_alpha is not None:
        if not 0.0 < norm_alpha <= 2.0:
            raise ValidationError(f"norm_alpha must lie in (0, 2]; got {norm_alpha}")
        if beta > norm_alpha:
            raise ValidationError("beta must not exceed norm_alpha")

    def fn(x, y):
        return _norm(_pair_diffs(x, y), norm_alpha) ** beta

    kid = f"euclidean_beta(beta={beta:g})"
    if norm_alpha is not None and norm_alpha != 2.0:
        kid = f"euclidean_beta(beta={beta:g},alpha={norm_alpha:g})"
    return Kernel(kid, fn, translation_invariant=True, homogeneity_degree=beta)


def _gaussian(lam: float) -> Kernel:
    # Bandwidth fixed so the induced divergence weighs frequency u by
    # exp(-lam * u^2): k(x, y) = exp(-||x-y||^2 / (4 lam)).
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")

    def fn(x, y):
        d2 = np.sum(_pair_diffs(x, y) ** 2, axis=-1)
        return 2.0 - 2.0 * np.exp(-d2 / (4.0 * lam))

    return Kernel(f"gaussian(lambda={lam:g})", fn, translation_invariant=True)


def _laplacian(lam: float) -> Kernel:
    if not lam > 0.0:
        raise ValidationError("lambda must be positive")

    def fn(x, y):
        d = np.sqrt(np.sum(_pair_diffs(x, y) ** 2, axis=-1))
        return 2.0 - 2.0 * np.exp(-d / lam)

    return Kernel(f"laplacian(lambda={lam:g})", fn, translation_invariant=True)


def _variogram(p: float, w: np.ndarray | None, d: int) -> Kernel:
    if not p > 0.0:
        raise ValidationError("variogram order p must be positive")
    if d < 2:
        raise ValidationError("variogram kernel needs dimension >= 2")
    if w is None:
        w = np.ones((d, d)) - np.eye(d)
    w = np.asarray(w, dtype=float)
    if w.shape != (d, d):
        raise ValidationError("variogram weights must be d x d")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValidationError("variogram weights must be finite and nonnegative")
    wsym = 0.5 * (w + w.T)
    sqw = np.sqrt(wsym).reshape(-1)

    def features(x):
        gaps = np.abs(x[:, :, None] - x[:, None, :]) ** p
        return gaps.reshape(x.shape[0], -1) * sqw

    def fn(x, y):
        if x.shape[1] != d or y.shape[1] != d:
            raise ValidationError(f"variogram kernel expects dimension {d}")
        fx, fy = features(x), features(y)
        diff = fx[:, None, :] - fy[None, :, :]
        return np.sum(diff * diff, axis=-1)

    return Kernel(f"variogram(p={p:g},d={d})", fn)


def kernel_registry(kernel_id: str, **params) -> Kernel:
    """Build a kernel by id.

    Known ids: euclidean_beta(beta, norm_alpha=None), gaussian(lam),
    laplacian(lam), variogram(p, w=None, d), chained(base, v),
    rescaled(base, w).  Chaining and rescaling are exposed through
    `weight_transform`.
    """
    if kernel_id == "euclidean_beta":
        return _euclidean_beta(float(params.pop("beta")), params.pop("norm_alpha", None))
    if kernel_id == "gaussian":
        return _gaussian(float(params.pop("lam")))
    if kernel_id == "laplacian":
        return _laplacian(float(params.pop("lam")))
    if kernel_id == "variogram":
        return _variogram(float(params.pop("p")), params.pop("w", None), int(params.pop("d")))
    if kernel_id == "chained":
        return weight_transform(params.pop("base"), chaining=params.pop("v"))
    if kernel_id == "rescaled":
        return weight_transform(params.pop("base"), rescaling=params.pop("w"))
    raise ValidationError(f"unknown kernel id {kernel_id!r}")


def weight_transform(
    kernel: Kernel,
    chaining: Callable[[np.ndarray], np.ndarray] | None = None,
    rescaling: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Kernel:
    """Chain points through v, or rescale kernel values by w(x) w(y).

    Exactly one mode must be given.  Chaining maps every point through the
    measurable self-map v before evaluating the base kernel; rescaling
    multiplies by a nonnegative weight per argument.
    """
    if (chaining is None) == (rescaling is None):
        raise ValidationError("pass exactly one of chaining= or rescaling=")
    if chaining is not None:
        v = chaining

        def fn(x, y):
            vx = _points(np.apply_along_axis(lambda r: np.asarray(v(r), float), 1, x)
                         if x.shape[1] > 1 else np.asarray(v(x[:, 0]), float))
            vy = _points(np.apply_along_axis(lambda r: np.asarray(v(r), float), 1, y)
                         if y.shape[1] > 1 else np.asarray(v(y[:, 0]), float))
            return kernel.matrix_fn(vx, vy)

        return Kernel(f"chained({kernel.id})", fn,
                      translation_invariant=False,
                      homogeneity_degree=None)

    w = rescaling

    def weights_of(x):
        vals = np.asarray(w(x[:, 0] if x.shape[1] == 1 else x), dtype=float).reshape(-1)
        if vals.shape[0] != x.shape[0]:
            raise ValidationError("rescaling function must return one weight per point")
        if np.any(vals < 0.0) or not np.all(np.isfinite(vals)):
            raise ValidationError("rescaling weights must be finite and nonnegative")
        return vals

    def fn(x, y):
        return kernel.matrix_fn(x, y) * np.outer(weights_of(x), weights_of(y))

    return Kernel(f"rescaled({kernel.id})", fn,
                  translation_invariant=False, homogeneity_degree=None)


# ---------------------------------------------------------------------------
# g-functions for generalized kernel scores

@dataclass(frozen=True)
class GFunction:
    """Concave nondecreasing transform of the kernel entropy, with derivative."""

    id: str
    value: Callable[[float], float]
    deriv: Callable[[float], float]


def g_registry(g_id: str) -> GFunction:
    if g_id == "identity":
        return GFunction("identity", lambda u: u, lambda u: 1.0)
    if g_id == "log1p":
        return GFunction("log1p", lambda u: math.log1p(u), lambda u: 1.0 / (1.0 + u))
    if g_id == "sqrt_eps":
        return GFunction(
            "sqrt_eps",
            lambda u: math.sqrt(u + SQRT_EPS) - math.sqrt(SQRT_EPS),
            lambda u: 0.5 / math.sqrt(u + SQRT_EPS),
        )
    raise ValidationError(f"unknown g-function {g_id!r}")


# ---------------------------------------------------------------------------
# exact scores, entropy, divergence

def _ensemble_parts(forecast: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    return forecast.members, forecast.weights


def _outcome_row(y, d: int) -> np.ndarray:
    """One outcome as a (1, d) row, matching the ensemble's dimension."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape != (d,):
        raise ValidationError(f"outcome shape {arr.shape} does not match dimension {d}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("outcome must be finite")
    return arr.reshape(1, d)


def _mean_to_point(kernel: Kernel, members, weights, y) -> float:
    pts = _points(members)
    row = _outcome_row(y, pts.shape[1])
    return float(np.dot(weights, kernel.matrix(pts, row)[:, 0]))


def _self_sum(kernel: Kernel, members, weights, include_diagonal: bool) -> float:
    mat = kernel.matrix(members, members)
    if not include_diagonal:
        mat = mat - np.diag(np.diag(mat))
    return float(weights @ mat @ weights)


def kernel_score_exact(kernel: Kernel, forecast: Ensemble, y, variant: str = "fair") -> ScoreValue:
    """Exact kernel score of a finite (weighted) ensemble.

    empirical: score of the weighted empirical measure itself, pairwise
    term (1/2) sum_{i,j} w_i w_j h.  fair: unbiased for the underlying
    distribution when members are an iid sample; off-diagonal pairwise term
    divided by (1 - sum w_i^2), which is 1/(n (n-1)) for uniform weights.
    """
    if not isinstance(forecast, Ensemble):
        raise ValidationError("kernel_score_exact expects an Ensemble forecast")
    if variant not in ("fair", "empirical"):
        raise ValidationError(f"unknown variant {variant!r}")
    members, weights = _ensemble_parts(forecast)
    term1 = _mean_to_point(kernel, members, weights, y)
    if variant == "empirical":
        value = term1 - 0.5 * _self_sum(kernel, members, weights, include_diagonal=True)
    else:
        denom = 1.0 - float(np.dot(weights, weights))
        if forecast.size < 2 or denom <= 0.0:
            raise ValidationError("fair variant needs at least two distinct-weight members")
        cross = _self_sum(kernel, members, weights, include_diagonal=False)
        value = term1 - 0.5 * cross / denom
    return ScoreValue(value, "naive-exact")


def kernel_entropy(kernel: Kernel, forecast: Ensemble) -> float:
    """Entropy of a finite ensemble: half the pairwise kernel double sum."""
    members, weights = _ensemble_parts(forecast)
    return 0.5 * _self_sum(kernel, members, weights, include_diagonal=True)


def _canonical_pair(a: Ensemble, b: Ensemble) -> tuple[Ensemble, Ensemble]:
    key_a = (a.members.tobytes(), a.weights.tobytes())
    key_b = (b.members.tobytes(), b.weights.tobytes())
    return (a, b) if key_a <= key_b else (b, a)


def kernel_divergence(kernel: Kernel, p: Ensemble, q: Ensemble) -> float:
    """Squared kernel discrepancy between two ensembles; symmetric, >= 0.

    Arguments are put in a canonical order before evaluation so that
    d(P, Q) and d(Q, P) run the identical float reduction and compare equal
    bit for bit.  Tiny negative values from cancellation are clamped to 0;
    materially negative values (a non-CND kernel) are returned as-is.
    """
    a, b = _canonical_pair(p, q)
    xa, wa = _ensemble_parts(a)
    xb, wb = _ensemble_parts(b)
    cross = float(wa @ kernel.matrix(xa, xb) @ wb)
    self_a = _self_sum(kernel, xa, wa, include_diagonal=True)
    self_b = _self_sum(kernel, xb, wb, include_diagonal=True)
    value = cross - 0.5 * self_a - 0.5 * self_b
    if value < 0.0 and value >= -1e-12 * max(1.0, self_a + self_b + abs(cross)):
        return 0.0
    return value


def generalized_kernel_score(kernel: Kernel, g: GFunction, forecast: Ensemble, y) -> ScoreValue:
    """Kernel score with the entropy passed through a concave transform g.

    With H the kernel entropy and T(y) the mean kernel value to the outcome,
    the score is g'(H) T(y) + g(H) - 2 g'(H) H.  The entropy enters twice:
    once through g(H) and once through the mean of the entropy gradient,
    whose value at x is T(x) - 2H.  For g = identity this reduces exactly
    to the plain kernel score of the empirical measure.
    """
    members, weights = _ensemble_parts(forecast)
    entropy = kernel_entropy(kernel, forecast)
    term1 = _mean_to_point(kernel, members, weights, y)
    gp = g.deriv(entropy)
    value = gp * term1 + g.value(entropy) - 2.0 * gp * entropy
    return ScoreValue(value, "naive-exact")


# ---------------------------------------------------------------------------
# Monte-Carlo estimation

def kernel_score_mc(
    kernel: Kernel,
    sampler: Callable[[int, int], np.ndarray],
    y,
    m: int,
    seed: int,
) -> ScoreValue:
    """Unbiased sampling estimator of the kernel score, with jackknife SE.

    `sampler(m, seed)` must return m iid draws from the forecast.  The
    estimator averages h(X_i, y) and subtracts the off-diagonal pairwise
    mean with coefficient 1/(2 m (m-1)); its expectation is the exact score
    of the sampled distribution.  The standard error is the leave-one-out
    jackknife over the m draws (for m = 2 a half-range fallback is used,
    since the sub-estimator needs at least two points).
    """
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ValidationError("monte-carlo estimation needs m >= 2")
    samples = _points(sampler(int(m), int(seed)))
    if samples.shape[0] != m:
        raise ValidationError("sampler returned the wrong number of draws")
    a = kernel.matrix(samples, _outcome_row(y, samples.shape[1]))[:, 0]
    mat = kernel.matrix(samples, samples)
    row_off = mat.sum(axis=1) - np.diag(mat)
    cross = float(row_off.sum())
    total_a = float(a.sum())
    value = total_a / m - cross / (2.0 * m * (m - 1.0))
    if m >= 3:
        loo = (total_a - a) / (m - 1.0) - (cross - 2.0 * row_off) / (
            2.0 * (m - 1.0) * (m - 2.0)
        )
        se = math.sqrt(max(0.0, (m - 1.0) / m * float(np.sum((loo - loo.mean()) ** 2))))
    else:
        se = abs(float(a[0] - a[1])) / 2.0
    return ScoreValue(value, "monte-carlo", se=se)


# ---------------------------------------------------------------------------
# kernel spec strings (shared with the CLI)

def kernel_from_spec(spec: str) -> Kernel:
    """Parse compact kernel specs: "energy:beta=1.0", "gaussian:lambda=1.0",
    "laplacian:lambda=1.0", "tw:base=<kernel spec>,t=<threshold>"."""
    from .specs import parse_spec  # local import: specs is tiny plumbing

    name, params = parse_spec(spec)
    if name == "energy":
        return kernel_registry(
            "euclidean_beta",
            beta=float(params.pop("beta", 1.0)),
            norm_alpha=(float(params["alpha"]) if "alpha" in params else None),
        )
    if name == "gaussian":
        return kernel_registry("gaussian", lam=float(params.get("lambda", 1.0)))
    if name == "laplacian":
        return kernel_registry("laplacian", lam=float(params.get("lambda", 1.0)))
    if name == "tw":
        if "base" not in params or "t" not in params:
            raise ValidationError("tw kernel spec needs base=<kernel> and t=<threshold>")
        base = kernel_from_spec(str(params["base"]))
        t = float(params["t"])
        return weight_transform(base, chaining=lambda x: np.maximum(x, t))
    raise ValidationError(f"unknown kernel spec {spec!r}")

"""Forecast/observation data model, parsing, CDF and sampling services.

Forecast representations form a tagged union of dataclasses: Categorical,
Ensemble, Normal, MultivariateNormal and DensityOracle.  All values are
immutable once constructed and validated; downstream scoring code can rely
on the invariants enforced here (simplex sums, positive scale parameters,
SPD covariances) without re-checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import ndtr

SIMPLEX_TOL = 1e-12

SCORE_METHODS = (
    "closed-form",
    "fast-exact",
    "naive-exact",
    "numeric-quadrature",
    "monte-carlo",
)


class ValidationError(ValueError):
    """An input record, parameter or shape violates its contract."""


class NumericFailure(RuntimeError):
    """A computation cannot produce a reliable finite result."""


def make_rng(seed: int, stream: tuple[int, ...] = ()) -> np.random.Generator:
    """Seeded counter-based generator (Philox4x64-10).

    `stream` selects an independent substream for the same seed, so batch
    jobs can give every instance its own reproducible stream.  RNG state is
    always passed explicitly; nothing in this package touches global state.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def _finite_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.size == 0:
        raise ValidationError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must contain only finite values")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ClassLabel:
    """A categorical observation: an index into the forecast's classes."""

    index: int

    def __post_init__(self):
        if not isinstance(self.index, (int, np.integer)) or self.index < 0:
            raise ValidationError("class index must be a nonnegative integer")


@dataclass(frozen=True, eq=False)
class Categorical:
    """Probability vector over classes 0..n-1."""

    probs: np.ndarray

    def __post_init__(self):
        p = _finite_array(self.probs, "probs")
        if p.ndim != 1:
            raise ValidationError("probs must be a 1-d vector")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("probs must lie in [0, 1]")
        # Reject rather than renormalize: a bad sum is a data bug upstream.
        if abs(float(p.sum()) - 1.0) > SIMPLEX_TOL:
            raise ValidationError(f"probs must sum to 1 within {SIMPLEX_TOL}; got {p.sum()!r}")
        object.__setattr__(self, "probs", _freeze(p))

    @property
    def n_classes(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted collection of sample points (scalars or d-vectors)."""

    members: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        m = _finite_array(self.members, "members")
        if m.ndim not in (1, 2):
            raise ValidationError("members must be a vector or an (n, d) matrix")
        if m.shape[0] < 1:
            raise ValidationError("ensemble needs at least one member")
        w = self.weights
        if w is None:
            w = np.full(m.shape[0], 1.0 / m.shape[0])
        else:
            w = _finite_array(w, "weights")
            if w.shape != (m.shape[0],):
                raise ValidationError("weights must match the number of members")
            if np.any(w < 0.0):
                raise ValidationError("weights must be nonnegative")
            if abs(float(w.sum()) - 1.0) > SIMPLEX_TOL:
                raise ValidationError(f"weights must sum to 1 within {SIMPLEX_TOL}")
        object.__setattr__(self, "members", _freeze(m))
        object.__setattr__(self, "weights", _freeze(w))

    @property
    def size(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.members.ndim == 1 else self.members.shape[1]


@dataclass(frozen=True)
class Normal:
    """Univariate normal forecast N(mu, sigma^2)."""

    mu: float
    sigma: float

    def __post_init__(self):
        mu = float(self.mu)
        sigma = float(self.sigma)
        if not (math.isfinite(mu) and math.isfinite(sigma)):
            raise ValidationError("normal parameters must be finite")
        if sigma <= 0.0:
            raise ValidationError("sigma must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def cholesky_spd(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Symmetry is checked to 1e-12 relative to the largest diagonal entry and
    pivots below that same threshold are rejected, so nearly singular inputs
    fail loudly rather than returning garbage.
    """
    c = np.asarray(cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValidationError("covariance must be a square matrix")
    if not np.all(np.isfinite(c)):
        raise ValidationError("covariance must be finite")
    scale = float(np.max(np.abs(np.diag(c)))) if c.size else 0.0
    if scale <= 0.0:
        raise ValidationError("covariance diagonal must be positive")
    if float(np.max(np.abs(c - c.T))) > 1e-12 * scale:
        raise ValidationError("covariance must be symmetric")
    try:
        lower = np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"covariance is not positive definite: {exc}") from exc
    if float(np.min(np.diag(lower)) ** 2) <= 1e-12 * scale:
        raise NumericFailure("covariance is numerically singular")
    return lower


@dataclass(frozen=True, eq=False)
class MultivariateNormal:
    """Multivariate normal forecast with SPD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _finite_array(self.mean, "mean")
        if mean.ndim != 1:
            raise ValidationError("mean must be a vector")
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValidationError("cov must be d x d for a d-dimensional mean")
        try:
            cholesky_spd(cov)
        except NumericFailure as exc:
            # Constructing a forecast with a bad covariance is an input error.
            raise ValidationError(str(exc)) from exc
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "cov", _freeze(cov))

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class DensityOracle:
    """Forecast given by a log-density callable, defined up to a constant.

    `grad` and `laplacian` are optional analytic oracles for the gradient
    and Laplacian of log p.  `normalized=True` asserts that `logdensity`
    integrates to one, which scores that depend on normalization require.
    Oracles must be pure and reentrant.
    """

    logdensity: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    laplacian: Callable[[np.ndarray], float] | None = None
    normalized: bool = False
    dim: int = 1


Forecast = Union[Categorical, Ensemble, Normal, MultivariateNormal, DensityOracle]

Observation = Union[float, np.ndarray, ClassLabel]


@dataclass(frozen=True)
class ScoreValue:
    """Extended-real score with provenance.

    `value` may be +inf (a zero-probability outcome under a rule such as
    the logarithmic score) but never NaN or -inf.  `se` is present exactly
    when the value is a Monte-Carlo estimate.
    """

    value: float
    method: str
    se: float | None = None

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise NumericFailure("score evaluated to NaN")
        if v == -math.inf:
            raise NumericFailure("score evaluated to -inf")
        if self.method not in SCORE_METHODS:
            raise ValidationError(f"unknown score method {self.method!r}")
        if self.method == "monte-carlo":
            if self.se is None:
                raise ValidationError("monte-carlo scores must carry a standard error")
            if not (math.isfinite(float(self.se)) and float(self.se) >= 0.0):
                raise ValidationError("standard error must be a nonnegative real")
        elif self.se is not None:
            raise ValidationError("se is only meaningful for monte-carlo scores")
        object.__setattr__(self, "value", v)


# ---------------------------------------------------------------------------
# parsing / serialization (JSON Lines records)

_SCHEMAS = {
    "categorical": {"probs"},
    "ensemble": {"members", "weights"},
    "normal": {"mu", "sigma"},
    "mvnormal": {"mean", "cov"},
}


def parse_forecast(record: str | dict) -> Forecast:
    """Parse one forecast record (JSON text or an already-decoded dict)."""
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed forecast record: {exc}") from exc
    if not isinstance(record, dict):
        raise ValidationError("forecast record must be a JSON object")
    kind = record.get("type")
    if kind not in _SCHEMAS:
        raise ValidationError(f"unknown forecast type {kind!r}")
    extra = set(record) - _SCHEMAS[kind] - {"type"}
    if extra:
        raise ValidationError(f"unexpected keys {sorted(extra)} in {kind!r} record")
    if kind == "categorical":
        if "probs" not in record:
            raise ValidationError("categorical record needs 'probs'")
        return Categorical(np.asarray(record["probs"], dtype=float))
    if kind == "ensemble":
        if "members" not in record:
            raise ValidationError("ensemble record needs 'members'")
        weights = record.get("weights")
        return Ensemble(
            np.asarray(record["members"], dtype=float),
            None if weights is None else np.asarray(weights, dtype=float),
        )
    if kind == "normal":
        if "mu" not in record or "sigma" not in record:
            raise ValidationError("normal record needs 'mu' and 'sigma'")
        return Normal(record["mu"], record["sigma"])
    if "mean" not in record or "cov" not in record:
        raise ValidationError("mvnormal record needs 'mean' and 'cov'")
    return MultivariateNormal(
        np.asarray(record["mean"], dtype=float), np.asarray(record["cov"], dtype=float)
    )


def serialize_forecast(forecast: Forecast) -> dict:
    """Inverse of parse_forecast for the serializable variants."""
    if isinstance(forecast, Categorical):
        return {"type": "categorical", "probs": [float(p) for p in forecast.probs]}
    if isinstance(forecast, Ensemble):
        members = forecast.members
        out_members = [
            [float(v) for v in row] if members.ndim == 2 else float(row) for row in members
        ]
        return {
            "type": "ensemble",
            "members": out_members,
            "weights": [float(w) for w in forecast.weights],
        }
    if isinstance(forecast, Normal):
        return {"type": "normal", "mu": forecast.mu, "sigma": forecast.sigma}
    if isinstance(forecast, MultivariateNormal):
        return {
            "type": "mvnormal",
            "mean": [float(v) for v in forecast.mean],
            "cov": [[float(v) for v in row] for row in forecast.cov],
        }
    raise ValidationError("density oracles are code-level plug-ins and cannot be serialized")


def parse_observation(record: str | object) -> Observation:
    """Parse one observation record: scalar, array, or {"class": k}."""
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed observation record: {exc}") from exc
    if isinstance(record, bool):
        raise ValidationError("observation must be numeric, an array, or {'class': k}")
    if isinstance(record, (int, float)):
        value = float(record)
        if not math.isfinite(value):
            raise ValidationError("observation must be finite")
        return value
    if isinstance(record, (list, tuple, np.ndarray)):
        arr = _finite_array(record, "observation")
        if arr.ndim != 1:
            raise ValidationError("vector observations must be 1-d")
        return arr
    if isinstance(record, dict):
        if set(record) != {"class"}:
            raise ValidationError("class observation must be exactly {'class': k}")
        k = record["class"]
        if isinstance(k, bool) or not isinstance(k, int):
            raise ValidationError("class index must be an integer")
        return ClassLabel(k)
    raise ValidationError("observation must be numeric, an array, or {'class': k}")


def class_index(y: Observation, n_classes: int) -> int:
    """Resolve an observation to a valid class index in 0..n_classes-1."""
    if isinstance(y, ClassLabel):
        k = y.index
    elif isinstance(y, (int, np.integer)) and not isinstance(y, bool):
        k = int(y)
    else:
        raise ValidationError("categorical rules need a class observation")
    if not 0 <= k < n_classes:
        raise ValidationError(f"class index {k} outside 0..{n_classes - 1}")
    return k


# ---------------------------------------------------------------------------
# CDF and sampling services

def _atoms(forecast: Forecast) -> tuple[np.ndarray, np.ndarray]:
    """Sorted atoms and cumulative weights for a discrete univariate forecast."""
    if isinstance(forecast, Ensemble):
        if forecast.dim != 1:
            raise ValidationError("CDF is defined for univariate forecasts only")
        order = np.argsort(forecast.members, kind="stable")
        pts = forecast.members[order]
        cum = np.cumsum(forecast.weights[order])
    else:  # Categorical
        pts = np.arange(forecast.n_classes, dtype=float)
        cum = np.cumsum(forecast.probs)
    return pts, cum


def forecast_cdf(forecast: Forecast, x) -> float | np.ndarray:
    """Right-continuous CDF of a univariate forecast evaluated at x.

    Works for Categorical (atoms at class indices), Ensemble and Normal.
    Density oracles carry no CDF and are rejected.
    """
    xv = np.asarray(x, dtype=float)
    if isinstance(forecast, Normal):
        out = ndtr((xv - forecast.mu) / forecast.sigma)
    elif isinstance(forecast, (Ensemble, Categorical)):
        pts, cum = _atoms(forecast)
        idx = np.searchsorted(pts, xv, side="right")
        padded = np.concatenate(([0.0], cum))
        out = padded[idx]
    elif isinstance(forecast, MultivariateNormal):
        raise ValidationError("CDF service is univariate; got a multivariate forecast")
    else:
        raise ValidationError("density oracles expose no CDF")
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def forecast_sample(forecast: Forecast, m: int, seed: int) -> np.ndarray:
    """Draw m points from the forecast, deterministically in `seed`.

    Ensembles are resampled with replacement according to their weights
    (bootstrap); categorical forecasts yield class indices.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise ValidationError("sample size m must be a positive integer")
    rng = make_rng(seed)
    if isinstance(forecast, Categorical):
        return rng.choice(forecast.n_classes, size=int(m), p=forecast.probs)
    if isinstance(forecast, Ensemble):
        idx = rng.choice(forecast.size, size=int(m), p=forecast.weights)
        return forecast.members[idx]
    if isinstance(forecast, Normal):
        return forecast.mu + forecast.sigma * rng.standard_normal(int(m))
    if isinstance(forecast, MultivariateNormal):
        lower = cholesky_spd(forecast.cov)
        z = rng.standard_normal((int(m), forecast.dim))
        return forecast.mean + z @ lower.T
    raise ValidationError("density oracles are not samplable")

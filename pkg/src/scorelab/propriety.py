"""Numerical verification of scoring-rule properties on small instances.

Every scan returns a machine-readable report carrying the seed (or grid
step) it ran with; any reported violation comes with a witness that can be
replayed.  Scans that cannot fail are worthless, so deliberately broken
rules ("linear", "convex") ship alongside the proper ones as negative
controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from .kernels import kernel_divergence, kernel_from_spec, kernel_score_exact
from .model import (
    Categorical,
    Ensemble,
    Normal,
    NumericFailure,
    ValidationError,
    make_rng,
)
from .multivariate import energy_score
from .specs import parse_spec, spec_float
from .univariate import crps_ensemble, crps_numeric

__all__ = [
    "categorical_rule",
    "simplex_grid",
    "expected_score",
    "ProprietyReport",
    "ConcavityReport",
    "InvarianceReport",
    "SymmetryReport",
    "RepresentationReport",
    "SpectralReport",
    "propriety_scan",
    "concavity_scan",
    "invariance_check",
    "symmetry_metric_check",
    "crps_representation_check",
    "spectral_proportionality_check",
    "kl_divergence_categorical",
]

PROPRIETY_TOL = 1e-9
CONCAVITY_TOL = 1e-12


# ---------------------------------------------------------------------------
# categorical rules usable in grid scans: callable (probs, class) -> float

def categorical_rule(spec: str):
    """Build S(p, y) for a categorical outcome from a compact spec string.

    Proper rules (brier for binary, log, quadratic, spherical,
    pseudospherical:alpha=a) delegate to the shipped scoring functions, so
    the scans exercise the real implementations.  Negative controls:
    linear (improper) and convex (convex diagonal, breaks concavity scans).
    """
    from .univariate import brier_binary, log_score, pseudospherical_score, quadratic_score

    name, params = parse_spec(spec)
    if name == "brier":
        def rule(p, k):
            if p.size != 2:
                raise ValidationError("brier rule needs binary forecasts")
            return brier_binary(float(p[1]), k).value
        return rule
    if name == "log":
        return lambda p, k: log_score(Categorical(p), k).value
    if name == "quadratic":
        return lambda p, k: quadratic_score(Categorical(p), k).value
    if name in ("spherical", "pseudospherical"):
        alpha = spec_float(params, "alpha", 2.0 if name == "spherical" else None)
        return lambda p, k, _a=alpha: pseudospherical_score(Categorical(p), k, alpha=_a).value
    if name == "linear":
        def rule(p, k):  # improper: rewards piling mass on the argmax
            return -float(p[k])
        return rule
    if name == "convex":
        def rule(p, k):  # diagonal S(p, p) is convex; concavity scans must fail
            return float(p[k])
        return rule
    raise ValidationError(f"unknown categorical rule {spec!r}")


def simplex_grid(n_classes: int, step: float) -> np.ndarray:
    """All probability vectors with entries on a step-lattice, as rows."""
    if n_classes < 2:
        raise ValidationError("need at least two classes")
    k = round(1.0 / step)
    if k < 1 or abs(k * step - 1.0) > 1e-9:
        raise ValidationError("grid step must divide 1")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for tail in compositions(total - head, parts - 1):
                yield (head,) + tail

    return np.array([c for c in compositions(k, n_classes)], dtype=float) / k


def _score_matrix(rule, grid: np.ndarray) -> np.ndarray:
    g, n = grid.shape
    m = np.empty((g, n))
    for i in range(g):
        for k in range(n):
            m[i, k] = rule(grid[i], k)
    if np.any(np.isnan(m)) or np.any(np.isneginf(m)):
        raise NumericFailure("rule produced NaN or -inf on the grid")
    interior = np.all(grid > 0.0, axis=1)
    if np.any(np.isposinf(m[interior])):
        raise NumericFailure("rule is non-finite at interior grid points")
    return m


def expected_score(rule, p: np.ndarray, q: np.ndarray) -> float:
    """S(P, Q) = sum_y q_y S(P, y) with the 0 * inf = 0 convention."""
    total = 0.0
    for k, qk in enumerate(q):
        if qk == 0.0:
            continue
        s = rule(np.asarray(p, dtype=float), k)
        if s == math.inf:
            return math.inf
        total += float(qk) * s
    return total


def _expected_matrix(m: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """E[i, j] = S(P_i, Q_j), vectorized, honoring 0 * inf = 0."""
    finite = np.where(np.isposinf(m), 0.0, m)
    e = finite @ grid.T
    hits_inf = (np.isposinf(m).astype(float) @ (grid > 0.0).T.astype(float)) > 0.0
    e[hits_inf] = np.inf
    return e


@dataclass(frozen=True)
class ProprietyReport:
    rule: str
    n_classes: int
    grid_step: float
    pairs_checked: int
    violations: int
    strict_violations: int
    worst_margin: float
    witness: tuple | None


def propriety_scan(rule_spec: str, n_classes: int = 2, grid_step: float = 0.05,
                   tol: float = PROPRIETY_TOL) -> ProprietyReport:
    """Check S(Q, Q) <= S(P, Q) over all simplex-grid pairs.

    A pair violates propriety when S(Q, Q) exceeds S(P, Q) by more than
    `tol`.  Strictness is checked only for pairs separated by more than
    half a grid step in sup-norm, where the margin must exceed `tol`.
    """
    rule = categorical_rule(rule_spec)
    grid = simplex_grid(n_classes, grid_step)
    m = _score_matrix(rule, grid)
    e = _expected_matrix(m, grid)
    diag = np.diag(e)
    if not np.all(np.isfinite(diag)):
        raise NumericFailure("entropy is not finite on the grid")

    margins = diag[None, :] - e  # > 0 means P beats Q on Q's own outcomes
    chebyshev = np.max(np.abs(grid[:, None, :] - grid[None, :, :]), axis=-1)
    apart = chebyshev > grid_step / 2.0

    viol_mask = margins > tol
    violations = int(viol_mask.sum())
    gaps = e - diag[None, :]
    strict_mask = apart & ~(gaps > tol)
    strict_violations = int(strict_mask.sum())

    finite_margins = np.where(np.isfinite(margins), margins, -np.inf)
    worst = float(np.max(finite_margins))
    witness = None
    if violations > 0:
        i, j = np.unravel_index(int(np.argmax(finite_margins)), margins.shape)
        witness = (tuple(float(v) for v in grid[i]), tuple(float(v) for v in grid[j]))
    return ProprietyReport(
        rule=rule_spec,
        n_classes=n_classes,
        grid_step=grid_step,
        pairs_checked=int(grid.shape[0] ** 2),
        violations=violations,
        strict_violations=strict_violations,
        worst_margin=worst,
        witness=witness,
    )


@dataclass(frozen=True)
class ConcavityReport:
    rule: str
    n_classes: int
    trials: int
    seed: int
    midpoint_only: bool
    violations: int
    worst_margin: float
    witness: tuple | None


def concavity_scan(rule_spec: str, n_classes: int = 3, trials: int = 1000, seed: int = 0,
                   midpoint_only: bool = False, tol: float = CONCAVITY_TOL) -> ConcavityReport:
    """Check H(l P + (1-l) Q) >= l H(P) + (1-l) H(Q) - tol on random triples."""
    rule = categorical_rule(rule_spec)
    rng = make_rng(seed, stream=(0xC0,))
    violations = 0
    worst = -math.inf
    witness = None
    for _ in range(int(trials)):
        p = rng.dirichlet(np.ones(n_classes))
        q = rng.dirichlet(np.ones(n_classes))
        lam = 0.5 if midpoint_only else float(rng.uniform(0.05, 0.95))
        mix = lam * p + (1.0 - lam) * q
        h_mix = expected_score(rule, mix, mix)
        h_p = expected_score(rule, p, p)
        h_q = expected_score(rule, q, q)
        margin = (lam * h_p + (1.0 - lam) * h_q) - h_mix
        if margin > worst:
            worst = margin
        if margin > tol:
            violations += 1
            if witness is None or margin >= worst:
                witness = (tuple(p.tolist()), tuple(q.tolist()), lam)
    return ConcavityReport(rule_spec, n_classes, int(trials), int(seed), midpoint_only,
                           violations, worst, witness)


# ---------------------------------------------------------------------------
# invariance checks on ensemble scores

def _instance_scorer(rule_spec: str):
    """(members, y) -> score for the invariance suite; also reports the
    outcome dimension and the scale degree the rule claims, if any."""
    name, params = parse_spec(rule_spec)
    if name == "crps":
        return (lambda mem, y: crps_ensemble(mem, y, variant="fair").value), 1, 1.0
    if name == "energy":
        beta = spec_float(params, "beta", 1.0)
        return (
            lambda mem, y: energy_score(mem, y, beta=beta, variant="fair").value,
            3,
            beta,
        )
    if name in ("gaussian", "laplacian", "tw"):
        kernel = kernel_from_spec(rule_spec)
        def scorer(mem, y, _k=kernel):
            return kernel_score_exact(_k, Ensemble(np.asarray(mem, float)), y, "fair").value
        return scorer, 1, None
    raise ValidationError(f"invariance checks do not support rule {rule_spec!r}")


@dataclass(frozen=True)
class InvarianceReport:
    rule: str
    transform: str
    expected_degree: float | None
    instances: int
    seed: int
    violations: int
    max_rel_error: float


def invariance_check(rule_spec: str, transform: str, instances: int = 20, seed: int = 0,
                     c: float = 2.0, shift: float = 1.0,
                     expected_degree: float | None = None,
                     tol: float = 1e-10) -> InvarianceReport:
    """Check how a rule responds to translating, scaling or rotating inputs.

    scale asserts score(c X, c y) = c^degree score(X, y); translate and
    rotate assert exact invariance.  The declared degree defaults to the
    rule's own homogeneity claim; passing a degree for a non-homogeneous
    rule gives the expected-failure fixture.
    """
    scorer, dim, own_degree = _instance_scorer(rule_spec)
    if transform == "scale" and expected_degree is None:
        expected_degree = own_degree
    if transform == "scale" and expected_degree is None:
        raise ValidationError(f"rule {rule_spec!r} claims no scale degree; pass expected_degree")
    if transform == "rotate" and dim < 2:
        raise ValidationError("rotation applies to vector outcomes only")
    rng = make_rng(seed, stream=(0x1A,))
    violations = 0
    max_rel = 0.0
    for _ in range(int(instances)):
        n = int(rng.integers(2, 9))
        members = rng.normal(size=(n, dim)) if dim > 1 else rng.normal(size=n)
        y = rng.normal(size=dim) if dim > 1 else float(rng.normal())
        base = scorer(members, y)
        if transform == "scale":
            other = scorer(c * members, c * y)
            target = (c ** expected_degree) * base
        elif transform == "translate":
            other = scorer(members + shift, y + shift)
            target = base
        elif transform == "rotate":
            q, r = np.linalg.qr(rng.normal(size=(dim, dim)))
            q = q * np.sign(np.diag(r))
            if np.linalg.det(q) < 0:
                q[:, 0] = -q[:, 0]
            other = scorer(members @ q.T, q @ y)
            target = base
        else:
            raise ValidationError(f"unknown transform {transform!r}")
        rel = abs(other - target) / max(1.0, abs(target))
        max_rel = max(max_rel, rel)
        if rel > tol:
            violations += 1
    return InvarianceReport(rule_spec, transform, expected_degree, int(instances),
                            int(seed), violations, max_rel)


# ---------------------------------------------------------------------------
# divergence geometry

def kl_divergence_categorical(p: np.ndarray, q: np.ndarray) -> float:
    """Divergence of the log rule: sum_y q_y log(q_y / p_y)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    total = 0.0
    for pk, qk in zip(p, q):
        if qk == 0.0:
            continue
        if pk == 0.0:
            return math.inf
        total += qk * math.log(qk / pk)
    return total


@dataclass(frozen=True)
class SymmetryReport:
    kernel: str
    triples: int
    seed: int
    symmetry_violations: int
    max_symmetry_error: float
    triangle_violations: int
    worst_triangle_slack: float
    log_divergence_forward: float
    log_divergence_reverse: float


def symmetry_metric_check(kernel_spec: str = "energy:beta=1", triples: int = 1000,
                          seed: int = 0) -> SymmetryReport:
    """Symmetry of the kernel divergence plus the metric property of its
    square root, on random ensemble triples.

    The report also carries the log-rule divergence between Bernoulli(0.5)
    and Bernoulli(0.9) evaluated both ways: an asymmetric contrast showing
    that non-kernel divergences need not be symmetric.
    """
    kernel = kernel_from_spec(kernel_spec)
    rng = make_rng(seed, stream=(0x3E,))
    sym_viol = 0
    max_sym = 0.0
    tri_viol = 0
    worst_slack = -math.inf
    for _ in range(int(triples)):
        ens = []
        for _k in range(3):
            n = int(rng.integers(1, 7))
            ens.append(Ensemble(rng.normal(size=n)))
        d12 = kernel_divergence(kernel, ens[0], ens[1])
        d21 = kernel_divergence(kernel, ens[1], ens[0])
        err = abs(d12 - d21)
        max_sym = max(max_sym, err)
        if err > 1e-12:
            sym_viol += 1
        d13 = kernel_divergence(kernel, ens[0], ens[2])
        d23 = kernel_divergence(kernel, ens[1], ens[2])
        slack = math.sqrt(max(d13, 0.0)) - math.sqrt(max(d12, 0.0)) - math.sqrt(max(d23, 0.0))
        worst_slack = max(worst_slack, slack)
        if slack > 1e-12:
            tri_viol += 1
    forward = kl_divergence_categorical(np.array([0.5, 0.5]), np.array([0.1, 0.9]))
    reverse = kl_divergence_categorical(np.array([0.1, 0.9]), np.array([0.5, 0.5]))
    return SymmetryReport(kernel_spec, int(triples), int(seed), sym_viol, max_sym,
                          tri_viol, worst_slack, forward, reverse)


@dataclass(frozen=True)
class RepresentationReport:
    instances: int
    seed: int
    tol: float
    violations: int
    max_discrepancy: float


def crps_representation_check(instances: int = 100, seed: int = 0,
                              tol: float = 1e-6) -> RepresentationReport:
    """CDF-integral CRPS vs the pairwise kernel form on random ensembles."""
    rng = make_rng(seed, stream=(0xCD,))
    max_disc = 0.0
    violations = 0
    for _ in range(int(instances)):
        n = int(rng.integers(1, 11))
        members = np.round(rng.normal(size=n), 1)  # rounding provokes ties
        y = float(rng.normal())
        a = crps_numeric(Ensemble(members), y).value
        b = crps_ensemble(members, y, variant="empirical").value
        disc = abs(a - b)
        max_disc = max(max_disc, disc)
        if disc > tol:
            violations += 1
    return RepresentationReport(int(instances), int(seed), tol, violations, max_disc)


# ---------------------------------------------------------------------------
# spectral proportionality for translation-invariant kernels
#
# For a translation-invariant kernel the divergence equals a weighted L2
# distance between characteristic functions.  For normal pairs both sides
# have closed forms (divergence) or cheap quadratures (frequency side), so
# the ratio can be checked for constancy across instances.

def _mean_abs_normal(nu: float, var: float) -> float:
    """E|Z| for Z ~ N(nu, var)."""
    s = math.sqrt(var)
    return s * math.sqrt(2.0 / math.pi) * math.exp(-nu * nu / (2.0 * var)) + nu * (
        2.0 * float(ndtr(nu / s)) - 1.0
    )


def _mean_gauss_kernel_normal(nu: float, var: float, lam: float) -> float:
    """E exp(-Z^2 / (4 lam)) for Z ~ N(nu, var)."""
    a = 1.0 / (4.0 * lam)
    return math.exp(-a * nu * nu / (1.0 + 2.0 * a * var)) / math.sqrt(1.0 + 2.0 * a * var)


def crps_divergence_normals(p: Normal, q: Normal) -> float:
    """Closed-form divergence of the absolute-difference kernel for normals."""
    cross = _mean_abs_normal(p.mu - q.mu, p.sigma**2 + q.sigma**2)
    self_p = _mean_abs_normal(0.0, 2.0 * p.sigma**2)
    self_q = _mean_abs_normal(0.0, 2.0 * q.sigma**2)
    return cross - 0.5 * self_p - 0.5 * self_q


def gaussian_divergence_normals(p: Normal, q: Normal, lam: float) -> float:
    """Closed-form Gaussian-kernel divergence (squared discrepancy) for normals."""
    return (
        _mean_gauss_kernel_normal(0.0, 2.0 * p.sigma**2, lam)
        - 2.0 * _mean_gauss_kernel_normal(p.mu - q.mu, p.sigma**2 + q.sigma**2, lam)
        + _mean_gauss_kernel_normal(0.0, 2.0 * q.sigma**2, lam)
    )


def gaussian_kernel_score_normal(p: Normal, y: float, lam: float) -> float:
    """Exact Gaussian-kernel score of a normal forecast at a point."""
    return (
        1.0
        - 2.0 * _mean_gauss_kernel_normal(y - p.mu, p.sigma**2, lam)
        + _mean_gauss_kernel_normal(0.0, 2.0 * p.sigma**2, lam)
    )


def _charfn_gap_sq(u: np.ndarray, p: Normal, q: Normal) -> np.ndarray:
    a1 = np.exp(-0.5 * (p.sigma * u) ** 2)
    a2 = np.exp(-0.5 * (q.sigma * u) ** 2)
    return a1 * a1 + a2 * a2 - 2.0 * a1 * a2 * np.cos((p.mu - q.mu) * u)


@dataclass(frozen=True)
class SpectralReport:
    kernel: str
    pairs: int
    seed: int
    rel_tol: float
    ratios: tuple
    max_rel_deviation: float
    violations: int


def spectral_proportionality_check(kernel_spec: str = "energy:beta=1", pairs: int = 20,
                                   seed: int = 0, rel_tol: float = 0.02) -> SpectralReport:
    """Ratio of kernel divergence to the frequency-weighted characteristic
    function gap, across random normal pairs.

    The frequency weight is u^-2 for the absolute-difference kernel and
    exp(-lam u^2) for the Gaussian kernel.  The constant is fitted on the
    first pair; the others must match it within `rel_tol`.  The u-integral
    runs over [1e-6, U] with U deep in the Gaussian tail of the integrand.
    """
    name, params = parse_spec(kernel_spec)
    if name == "energy":
        beta = spec_float(params, "beta", 1.0)
        if beta != 1.0:
            raise ValidationError("spectral check supports energy:beta=1")
        weight = lambda u: 1.0 / (u * u)
        divergence = crps_divergence_normals
    elif name == "gaussian":
        lam = spec_float(params, "lambda", 1.0)
        weight = lambda u: np.exp(-lam * u * u)
        divergence = lambda p, q: gaussian_divergence_normals(p, q, lam)
    else:
        raise ValidationError("spectral check supports energy:beta=1 and gaussian kernels")

    rng = make_rng(seed, stream=(0x5C,))
    ratios = []
    for _ in range(int(pairs)):
        p = Normal(float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2.0)))
        q = Normal(float(rng.uniform(-2, 2)), float(rng.uniform(0.5, 2.0)))
        upper = 14.0 / min(p.sigma, q.sigma)
        integrand = lambda u, _p=p, _q=q: float(_charfn_gap_sq(np.asarray(u), _p, _q) * weight(u))
        integral, est_err = quad(integrand, 1e-6, upper, limit=400, epsabs=1e-12, epsrel=1e-10)
        if not math.isfinite(integral) or integral <= 0.0 or est_err > max(1e-9, 1e-6 * integral):
            raise NumericFailure("frequency-side quadrature failed")
        ratios.append(divergence(p, q) / integral)
    base = ratios[0]
    devs = [abs(r / base - 1.0) for r in ratios]
    max_dev = max(devs)
    violations = sum(1 for d in devs if d > rel_tol)
    return SpectralReport(kernel_spec, int(pairs), int(seed), rel_tol,
                          tuple(ratios), max_dev, violations)

"""Shared independent oracles for the test suite.

These deliberately re-derive scores from first principles (literal double
sums, brute-force grouping, quadrature) so that package fast paths are
checked against something that cannot share their bugs.
"""

import math

import numpy as np
import pytest


def naive_crps(members, y, variant="fair"):
    """Literal pairwise-form CRPS: O(n^2) double sum."""
    x = np.asarray(members, dtype=float)
    n = x.size
    term1 = np.mean(np.abs(x - y))
    pair_sum = 0.0
    for i in range(n):
        pair_sum += np.abs(x[i] - x).sum()
    if variant == "fair":
        return term1 - pair_sum / (2.0 * n * (n - 1))
    return term1 - pair_sum / (2.0 * n * n)


def naive_crps_chunked(members, y, variant="fair", chunk=1024):
    """Same quadratic computation, chunked so n = 10^4 stays affordable."""
    x = np.asarray(members, dtype=float)
    n = x.size
    term1 = float(np.mean(np.abs(x - y)))
    pair_sum = 0.0
    for start in range(0, n, chunk):
        block = x[start : start + chunk]
        pair_sum += float(np.abs(block[:, None] - x[None, :]).sum())
    if variant == "fair":
        return term1 - pair_sum / (2.0 * n * (n - 1))
    return term1 - pair_sum / (2.0 * n * n)


def naive_kernel_score(hfun, members, y, variant="fair", weights=None):
    """Sampling-form kernel score by explicit loops over pairs."""
    pts = list(members)
    n = len(pts)
    w = [1.0 / n] * n if weights is None else list(weights)
    term1 = sum(w[i] * hfun(pts[i], y) for i in range(n))
    if variant == "empirical":
        cross = sum(
            w[i] * w[j] * hfun(pts[i], pts[j]) for i in range(n) for j in range(n)
        )
        return term1 - 0.5 * cross
    cross = sum(
        w[i] * w[j] * hfun(pts[i], pts[j])
        for i in range(n)
        for j in range(n)
        if i != j
    )
    return term1 - 0.5 * cross / (1.0 - sum(wi * wi for wi in w))


def naive_energy(members, y, beta, variant="fair"):
    pts = np.asarray(members, dtype=float)
    yv = np.asarray(y, dtype=float)
    h = lambda a, b: np.linalg.norm(np.asarray(a) - np.asarray(b)) ** beta
    return naive_kernel_score(h, list(pts), yv, variant=variant)


def normal_mle(data):
    """Closed-form maximum likelihood for the normal family (biased sd)."""
    data = np.asarray(data, dtype=float)
    mu = float(np.mean(data))
    sigma = float(np.sqrt(np.mean((data - mu) ** 2)))
    return mu, sigma


def ols_line(x, y):
    """Closed-form least squares for y = a + b x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b = float(np.cov(x, y, ddof=0)[0, 1] / np.var(x))
    a = float(np.mean(y) - b * np.mean(x))
    return a, b


def brute_force_decomposition(probs, ys):
    """Binary Brier decomposition by explicit per-group bookkeeping."""
    groups = {}
    for p, y in zip(probs, ys):
        groups.setdefault(p, []).append(y)
    n = len(probs)
    marginal = sum(ys) / n
    mcb = sum(len(g) * (p - sum(g) / len(g)) ** 2 for p, g in groups.items()) / n
    dsc = sum(len(g) * (marginal - sum(g) / len(g)) ** 2 for p, g in groups.items()) / n
    unc = marginal * (1 - marginal)
    mean = sum((p - y) ** 2 for p, y in zip(probs, ys)) / n
    return mcb, dsc, unc, mean


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

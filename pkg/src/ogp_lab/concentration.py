"""Tail bounds for biased product measures and an exact Doob-martingale oracle.

The bound calculators return the raw formula value, which may exceed 1.
``doob_enumerate`` works on a full function table ``f`` of shape
``(q,) * n`` and a distribution over the q symbols, so every conditional
expectation is computed exactly by contraction rather than sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ENUM_CAP = 2_000_000


@dataclass(frozen=True)
class BiasedBoundParams:
    n: int
    p: float
    c: float
    eps: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


def biased_mcdiarmid_bound(n: int, p: float, c: float, eps: float) -> float:
    """2 exp(-eps^2 / (2 n p (2-p) c^2 + 2 c eps / 3)).

    ``p`` is the probability mass off the dominant symbol. Returns 2 when the
    denominator vanishes (p = 0 and eps = 0).
    """
    BiasedBoundParams(n, p, c, eps)
    denom = 2.0 * n * p * (2.0 - p) * c * c + 2.0 * c * eps / 3.0
    if denom == 0.0:
        return 2.0
    return 2.0 * math.exp(-eps * eps / denom)


def fan_bound(x: float, nu2: float) -> float:
    """2 exp(-x^2 / (2 (nu2 + x/3))) for differences bounded by 1."""
    if x < 0 or nu2 < 0:
        raise ValueError("x and nu2 must be nonnegative")
    denom = 2.0 * (nu2 + x / 3.0)
    if denom == 0.0:
        return 2.0
    return 2.0 * math.exp(-x * x / denom)


def standard_mcdiarmid_bound(n: int, c: float, eps: float) -> float:
    if n < 1 or not c > 0:
        raise ValueError("need n >= 1 and c > 0")
    return 2.0 * math.exp(-2.0 * eps * eps / (n * c * c))


def biased_distribution(q: int, p: float, chi0: int = 0, rest=None) -> np.ndarray:
    """Mass 1-p on ``chi0``; p spread over the other symbols (uniformly by default)."""
    if q < 2:
        raise ValueError("need at least two symbols")
    dist = np.zeros(q)
    others = [a for a in range(q) if a != chi0]
    w = np.full(len(others), 1.0 / len(others)) if rest is None else np.asarray(rest, float)
    w = w / w.sum()
    dist[others] = p * w
    dist[chi0] = 1.0 - p
    return dist


# ---------------------------------------------------------------------------
# Doob martingale by enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MartingaleTrace:
    Z: np.ndarray  # Z_0 .. Z_n
    Y: np.ndarray  # Y_1 .. Y_n
    QC: np.ndarray  # <Z>_0 .. <Z>_n
    drift: float  # max |E[Y_i | history]|

    @property
    def n(self) -> int:
        return len(self.Y)


def _check_table(f, dist, cap):
    f = np.asarray(f, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.size < 1:
        raise ValueError("dist must be a 1-d probability vector")
    if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-12:
        raise ValueError("dist must be nonnegative and sum to 1 within 1e-12")
    if f.size > cap:
        raise ValueError(f"function table has {f.size} entries, cap is {cap}")
    if any(s != dist.size for s in f.shape):
        raise ValueError("every axis of the function table must match len(dist)")
    return f, dist


def conditional_means(f, dist, cap: int = ENUM_CAP) -> list[np.ndarray]:
    """``M[i][x_1..x_i] = E[f | X_1..X_i]`` for i = 0..n."""
    f, dist = _check_table(f, dist, cap)
    n = f.ndim
    M = [None] * (n + 1)
    M[n] = f
    for i in range(n - 1, -1, -1):
        M[i] = M[i + 1] @ dist
    return M


def conditional_second_moments(f, dist, cap: int = ENUM_CAP) -> list[np.ndarray]:
    """``V[j-1][x_<j] = E[Y_j^2 | X_<j]`` for j = 1..n, over every history."""
    M = conditional_means(f, dist, cap)
    dist = np.asarray(dist, float)
    out = []
    for j in range(1, len(M)):
        centred = M[j] - M[j - 1][..., None]
        out.append((centred**2) @ dist)
    return out


def doob_enumerate(f, dist, x, cap: int = ENUM_CAP) -> MartingaleTrace:
    """Exact Doob martingale trace of f along the observed sequence x."""
    M = conditional_means(f, dist, cap)
    dist = np.asarray(dist, float)
    n = len(M) - 1
    x = tuple(int(a) for a in x)
    if len(x) != n:
        raise ValueError(f"observed sequence must have length {n}")
    Z = np.array([M[i][x[:i]] for i in range(n + 1)], dtype=float)
    Y = np.diff(Z)
    qc = np.zeros(n + 1)
    drift = 0.0
    for j in range(1, n + 1):
        g = M[j][x[: j - 1]]
        qc[j] = qc[j - 1] + float(dist @ (g - Z[j - 1]) ** 2)
        drift = max(drift, abs(float(dist @ g) - Z[j - 1]))
    return MartingaleTrace(Z, Y, qc, drift)


def difference_bound(f) -> float:
    """Smallest c with |f(x) - f(x')| <= c whenever x, x' differ in one coordinate."""
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        return 0.0
    return float(max((f.max(axis=i) - f.min(axis=i)).max() for i in range(f.ndim)))


def tabulate(func: Callable, q: int, n: int) -> np.ndarray:
    """Evaluate ``func`` on every sequence in {0..q-1}^n."""
    grids = np.indices((q,) * n).reshape(n, -1).T
    vals = np.array([func(tuple(row)) for row in grids], dtype=float)
    return vals.reshape((q,) * n)


# ---------------------------------------------------------------------------
# Monte Carlo tails
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    radius: float  # 99% normal-approximation half-width
    mean: float  # pilot estimate of E f
    trials: int


Z99 = 2.5758293035489004


def _sample_f(f_sampler, dist, n, count, rng, block):
    q = len(dist)
    out = np.empty(count)
    for start in range(0, count, block):
        rows = min(block, count - start)
        xs = rng.choice(q, size=(rows, n), p=dist)
        out[start : start + rows] = f_sampler(xs)
    return out


def empirical_tail(
    f_sampler: Callable[[np.ndarray], np.ndarray],
    dist,
    n: int,
    eps: float,
    trials: int,
    rng: np.random.Generator,
    pilot_factor: int = 10,
    block: int = 10_000,
) -> TailEstimate:
    """Fraction of trials with |f - E f| >= eps.

    ``f_sampler`` maps an integer array of shape (rows, n) of i.i.d. draws
    from ``dist`` to the f values of each row. E f is estimated from a
    separate pilot run of ``pilot_factor * trials`` rows.
    """
    if trials < 1000:
        raise ValueError("use at least 1000 trials")
    dist = np.asarray(dist, float)
    pilot = _sample_f(f_sampler, dist, n, pilot_factor * trials, rng, block)
    mean = float(np.mean(pilot))
    vals = _sample_f(f_sampler, dist, n, trials, rng, block)
    prob = float(np.mean(np.abs(vals - mean) >= eps))
    radius = Z99 * math.sqrt(prob * (1.0 - prob) / trials)
    return TailEstimate(prob, radius, mean, trials)

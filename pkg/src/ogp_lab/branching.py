"""Galton-Watson bounds on neighborhood growth in sparse hypergraphs.

Two offspring laws are supported. ``scaled`` gives each individual
(k-1) * Poisson(d) children, the exploration law of a hypergraph BFS.
``dominating`` uses Poisson(d(k-1)). A whole generation is drawn at once:
the sum of Z i.i.d. Poisson(lam) variables is Poisson(lam * Z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .instances import Hypergraph

MODES = ("dominating", "scaled")
DEFAULT_POP_CAP = 10**7


@dataclass(frozen=True)
class BranchingRun:
    d: float
    k: int
    x: int
    mode: str
    sizes: np.ndarray  # (trials, x + 1), column 0 is Z_0 = 1
    truncated: np.ndarray  # per-trial flag, population hit the cap

    @property
    def trials(self) -> int:
        return int(self.sizes.shape[0])

    def generation(self, i: int) -> np.ndarray:
        return self.sizes[:, i]


def _check(d, k, x, mode):
    if d < 0:
        raise ValueError("d must be nonnegative")
    if k < 2:
        raise ValueError("k must be at least 2")
    if x < 1:
        raise ValueError("need at least one generation")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def simulate_branching(
    d: float,
    k: int,
    x: int,
    trials: int,
    rng: np.random.Generator,
    mode: str = "dominating",
    cap: int = DEFAULT_POP_CAP,
) -> BranchingRun:
    _check(d, k, x, mode)
    if trials < 1:
        raise ValueError("trials must be positive")
    sizes = np.zeros((trials, x + 1), dtype=np.int64)
    sizes[:, 0] = 1
    truncated = np.zeros(trials, dtype=bool)
    for i in range(x):
        z = sizes[:, i].astype(float)
        if mode == "dominating":
            nxt = rng.poisson(d * (k - 1) * z)
        else:
            nxt = (k - 1) * rng.poisson(d * z)
        over = nxt > cap
        truncated |= over
        sizes[:, i + 1] = np.minimum(nxt, cap)
    return BranchingRun(float(d), int(k), int(x), mode, sizes, truncated)


def tail_threshold(d: float, k: int, x: int, u: float) -> float:
    return u * (d * (k - 1) / math.log(2.0)) ** x


@dataclass(frozen=True)
class TailCheck:
    d: float
    k: int
    x: int
    u: float
    threshold: float
    empirical: float
    radius: float  # one standard error
    bound: float
    truncated: int

    @property
    def passed(self) -> bool:
        return self.empirical <= self.bound + 4.0 * self.radius


def tail_check(
    d: float, k: int, x: int, u: float, trials: int, rng: np.random.Generator, mode: str = "dominating"
) -> TailCheck:
    """Empirical P[Z_x >= u (d(k-1)/ln 2)^x] against the Markov bound e^(1-u)."""
    if not u > 0:
        raise ValueError("u must be positive")
    run = simulate_branching(d, k, x, trials, rng, mode)
    thr = tail_threshold(d, k, x, u)
    hits = run.generation(x) >= thr
    p = float(np.mean(hits))
    radius = math.sqrt(p * (1.0 - p) / trials)
    return TailCheck(float(d), int(k), int(x), float(u), thr, p, radius, math.exp(1.0 - u),
                     int(run.truncated.sum()))


def exact_tail_x1(d: float, k: int, u: float, mode: str = "dominating") -> float:
    """P[Z_1 >= threshold] from the Poisson survival function."""
    thr = tail_threshold(d, k, 1, u)
    if mode == "dominating":
        need = math.ceil(thr)
        return float(poisson.sf(need - 1, d * (k - 1)))
    need = math.ceil(thr / (k - 1))
    return float(poisson.sf(need - 1, d))


def branching_mgf(d: float, k: int, x: int, t: float, mode: str = "dominating") -> float:
    """E[exp(t Z_x)] by iterating the offspring generating function x times."""
    _check(d, k, x, mode)
    s = math.exp(t)
    for _ in range(x):
        try:
            if mode == "dominating":
                s = math.exp(d * (k - 1) * (s - 1.0))
            else:
                s = math.exp(d * (s ** (k - 1) - 1.0))
        except OverflowError:
            return math.inf
    return s


def mgf_point(d: float, k: int, x: int) -> float:
    return (math.log(2.0) / (d * (k - 1))) ** x


@dataclass(frozen=True)
class MgfCheck:
    t: float
    empirical: float
    radius: float  # one standard error
    exact: float

    @property
    def passed(self) -> bool:
        return self.empirical <= math.e + 4.0 * self.radius


def mgf_check(
    d: float,
    k: int,
    x: int,
    trials: int,
    rng: np.random.Generator,
    mode: str = "dominating",
    t: float | None = None,
) -> MgfCheck:
    """Monte Carlo E[exp(t Z_x)] at t = (ln 2 / (d(k-1)))^x unless t is given."""
    if trials < 10_000:
        raise ValueError("use at least 10^4 trials")
    t = mgf_point(d, k, x) if t is None else float(t)
    run = simulate_branching(d, k, x, trials, rng, mode)
    vals = np.exp(t * run.generation(x).astype(float))
    emp = float(np.mean(vals))
    radius = float(np.std(vals, ddof=1)) / math.sqrt(trials)
    return MgfCheck(t, emp, radius, branching_mgf(d, k, x, t, mode))


# ---------------------------------------------------------------------------
# neighborhoods of actual graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NeighborhoodStats:
    p: int
    sizes: np.ndarray
    max: int
    mean: float
    quantiles: dict
    threshold: float | None
    exceed_fraction: float | None


def neighborhood_stats(graph: Hypergraph, p: int, A: float | None = None) -> NeighborhoodStats:
    """Exact |B(v, p)| for every vertex plus summary statistics."""
    sizes = np.diff(graph.reach_matrix(p).indptr).astype(np.int64)
    qs = {q: float(np.quantile(sizes, q)) for q in (0.5, 0.9, 0.99)}
    thr = None if A is None else float(graph.n) ** A
    frac = None if thr is None else float(np.mean(sizes > thr))
    return NeighborhoodStats(p, sizes, int(sizes.max()), float(sizes.mean()), qs, thr, frac)

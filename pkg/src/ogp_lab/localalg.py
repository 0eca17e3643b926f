"""Generic p-local algorithms and coupled runs with shared randomness.

Two classical factor-of-i.i.d. rules are provided. Each vertex gets an
i.i.d. uniform label and its spin is a symmetric function of the labels in
its radius-p ball:

* ``factor-iid-threshold``: +1 iff the mean ball label is at least the
  threshold (ties go to +1);
* ``factor-iid-parity``: +1 iff ``floor(2 * sum of ball labels)`` plus the
  number of ball edges is even.

The ``qaoa`` kind samples the measured output of the depth-p circuit by
dense statevector simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qaoa as qa
from .instances import (
    CoupledPair,
    Hypergraph,
    ball,
    dense_cap,
    distances,
    sample_coupled,
)
from .rng import map_streams

KINDS = ("factor-iid-threshold", "factor-iid-parity", "qaoa")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class LocalAlgorithmSpec:
    kind: str
    radius: int
    threshold: float = 0.5
    beta: tuple = ()
    gamma: tuple = ()
    initial: str = "plus"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "gamma", tuple(float(g) for g in self.gamma))
        if self.kind == "qaoa":
            if len(self.beta) != self.radius or len(self.gamma) != self.radius:
                raise ValueError("qaoa spec needs radius many beta and gamma angles")
            if self.initial not in ("plus", "zero"):
                raise ValueError("initial must be 'plus' or 'zero'")

    @property
    def is_factor(self) -> bool:
        return self.kind != "qaoa"

    @property
    def params(self) -> qa.QaoaParams:
        return qa.QaoaParams(self.beta, self.gamma)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "radius": self.radius,
            "threshold": self.threshold,
            "beta": list(self.beta),
            "gamma": list(self.gamma),
            "initial": self.initial,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocalAlgorithmSpec":
        unknown = set(data) - {"kind", "radius", "threshold", "beta", "gamma", "initial"}
        if unknown:
            raise ValueError(f"unknown algorithm fields: {sorted(unknown)}")
        return cls(**data)


def factor_outputs(spec: LocalAlgorithmSpec, graph: Hypergraph, labels: np.ndarray) -> np.ndarray:
    """Apply a factor rule to a label field of shape (n,) or (n, runs)."""
    labels = np.asarray(labels, dtype=float)
    reach = graph.reach_matrix(spec.radius)
    sums = reach @ labels
    if spec.kind == "factor-iid-threshold":
        size = np.diff(reach.indptr).astype(float)
        if labels.ndim == 2:
            size = size[:, None]
        # compare sums rather than means so a tie is exact
        plus = sums >= spec.threshold * size
    else:
        n_edges = np.diff(graph.ball_edge_matrix(spec.radius).indptr)
        if labels.ndim == 2:
            n_edges = n_edges[:, None]
        plus = (np.floor(2.0 * sums).astype(np.int64) + n_edges) % 2 == 0
    return np.where(plus, 1, -1).astype(np.int64)


def _check_dense(graph: Hypergraph):
    if graph.n > dense_cap():
        raise ValueError(f"qaoa runs need n <= {dense_cap()}, got {graph.n}")


def qaoa_output_state(spec: LocalAlgorithmSpec, graph: Hypergraph) -> qa.Statevector:
    _check_dense(graph)
    state, _ = qa.qaoa_state(graph, spec.params, spec.initial)
    return state


def run(spec: LocalAlgorithmSpec, graph: Hypergraph, rng: np.random.Generator) -> np.ndarray:
    """One sample of the algorithm's output spin configuration."""
    if spec.is_factor:
        return factor_outputs(spec, graph, rng.random(graph.n))
    return qa.sample_output(qaoa_output_state(spec, graph), rng)


def run_many(spec: LocalAlgorithmSpec, graph: Hypergraph, runs: int, rng: np.random.Generator) -> np.ndarray:
    """``runs`` independent outputs on one graph, shape (runs, n)."""
    if spec.is_factor:
        return factor_outputs(spec, graph, rng.random((graph.n, runs))).T
    return qa.sample_output(qaoa_output_state(spec, graph), rng, shots=runs)


# ---------------------------------------------------------------------------
# coupled runs
# ---------------------------------------------------------------------------


def compute_Lplus(pair: CoupledPair, p: int) -> np.ndarray:
    """Vertices whose p-ball edges in both graphs are all shared edges."""
    ns = pair.n_shared
    ok = np.ones(pair.n, dtype=bool)
    for g in (pair.g1, pair.g2):
        private = g.ball_edge_matrix(p)[:, ns:]
        ok &= np.diff(private.tocsr().indptr) == 0
    return np.flatnonzero(ok)


@dataclass(frozen=True)
class CoupledRunResult:
    sigma1: np.ndarray
    sigma2: np.ndarray
    lplus: np.ndarray
    L: np.ndarray
    shared_labels: np.ndarray  # spins on L

    @property
    def overlap(self) -> float:
        return float(self.sigma1 @ self.sigma2) / self.sigma1.size


def coupled_runs(
    spec: LocalAlgorithmSpec, pair: CoupledPair, t_plus: float, rng: np.random.Generator
) -> CoupledRunResult:
    """Two runs on (G1, G2) forced to agree on a t_plus-thinning of L+.

    Factor rules share the label field on the union of the p-balls of L,
    which realizes the conditioned joint law exactly. The qaoa kind draws
    sigma1 from G1's output law and then samples sigma2 from G2's law
    conditioned on matching sigma1 on L.
    """
    if not 0.0 <= t_plus <= 1.0:
        raise ValueError("t_plus must lie in [0, 1]")
    n = pair.n
    lplus = compute_Lplus(pair, spec.radius)
    keep = rng.random(lplus.size) < t_plus
    L = lplus[keep]
    g1, g2 = pair.g1, pair.g2
    if spec.is_factor:
        lab1 = rng.random(n)
        lab2 = rng.random(n)
        if L.size:
            cover = np.flatnonzero(np.asarray(g1.reach_matrix(spec.radius)[L].sum(axis=0)).ravel())
            lab2[cover] = lab1[cover]
        s1 = factor_outputs(spec, g1, lab1)
        s2 = factor_outputs(spec, g2, lab2)
    else:
        if n > dense_cap():
            raise ValueError(f"qaoa coupled runs need n <= {dense_cap()}")
        s1 = qa.sample_output(qaoa_output_state(spec, g1), rng)
        fixed = {int(v): int(s1[v]) for v in L}
        s2 = qa.sample_output(qaoa_output_state(spec, g2), rng, fixed=fixed)
    return CoupledRunResult(s1, s2, lplus, L, s1[L].copy())


@dataclass(frozen=True)
class OverlapPoint:
    t: float
    mean: float
    std: float
    ci_low: float
    ci_high: float
    trials: int
    values: np.ndarray = field(repr=False)


def summarize(t: float, vals: np.ndarray) -> OverlapPoint:
    vals = np.asarray(vals, dtype=float)
    T = vals.size
    mean = float(np.mean(vals))
    std = float(np.std(vals, ddof=1)) if T > 1 else 0.0
    half = Z95 * std / math.sqrt(T)
    return OverlapPoint(float(t), mean, std, mean - half, mean + half, T, vals)


def overlap_curve(
    spec: LocalAlgorithmSpec,
    n: int,
    d: float,
    k: int,
    t_grid,
    trials: int,
    seed=(0, 0),
    t_plus: float | None = None,
    threads: int = 1,
) -> list[OverlapPoint]:
    """Overlap statistics of coupled runs across a grid of coupling values.

    Trial i at grid index g uses stream ``g * trials + i``. The shared
    randomness level defaults to t itself.
    """
    out = []
    for g, t in enumerate(t_grid):
        tp = float(t) if t_plus is None else float(t_plus)

        def one(rng, i, t=float(t), tp=tp):
            pair = sample_coupled(n, d, k, t, rng)
            return coupled_runs(spec, pair, tp, rng).overlap

        vals = map_streams(one, trials, seed, threads=threads, offset=g * trials)
        out.append(summarize(t, np.array(vals)))
    return out


# ---------------------------------------------------------------------------
# locality audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LocalityReport:
    v: int
    tv: float  # |P[sigma_v=+1] before - after|
    tv_radius: float
    partner: int | None
    corr: float
    corr_radius: float
    exact: bool

    @property
    def passed(self) -> bool:
        if self.exact:
            return self.tv <= 1e-10 and abs(self.corr) <= 1e-10
        return self.tv <= 3 * self.tv_radius + 1e-15 and abs(self.corr) <= 3 * self.corr_radius + 1e-15


def apply_edits(graph: Hypergraph, edits) -> Hypergraph:
    """Edits are ("add", tuple) or ("remove", edge_id); removals use original ids."""
    remove = set()
    added = []
    for op, arg in edits:
        if op == "add":
            added.append([int(a) for a in arg])
        elif op == "remove":
            if not 0 <= int(arg) < graph.m:
                raise ValueError(f"edge id {arg} out of range")
            remove.add(int(arg))
        else:
            raise ValueError(f"unknown edit {op!r}")
    keep = [e for e in range(graph.m) if e not in remove]
    edges = np.concatenate([graph.edges[keep], np.array(added, dtype=np.int64).reshape(-1, graph.k)])
    return Hypergraph(graph.n, graph.k, edges)


def _ball_signature(graph: Hypergraph, v: int, p: int):
    b = ball(graph, v, p)
    tuples = sorted(tuple(graph.edges[e].tolist()) for e in b.edges)
    return b.vertices, tuples


def _plus_prob(spins: np.ndarray) -> float:
    return float(np.mean(spins == 1))


def locality_audit(
    spec: LocalAlgorithmSpec,
    graph: Hypergraph,
    v: int,
    edits,
    trials: int,
    rng: np.random.Generator,
    partner: int | None = None,
) -> LocalityReport:
    """Compare the law of sigma_v before and after edits outside B(v, p).

    With ``partner`` the correlation of sigma_v and sigma_partner is also
    reported; the pair must be more than 2p apart. Factor rules are
    audited by Monte Carlo, the qaoa kind by exact marginals.
    """
    p = spec.radius
    edited = apply_edits(graph, edits)
    if _ball_signature(graph, v, p) != _ball_signature(edited, v, p):
        raise ValueError(f"edits change the radius-{p} ball of vertex {v}")
    if partner is not None:
        dist = distances(graph, [v], 2 * p)
        if int(partner) in dist:
            raise ValueError("partner vertex must lie at distance > 2p")
    corr = 0.0
    corr_radius = 0.0
    if spec.is_factor:
        before = run_many(spec, graph, trials, rng)
        after = run_many(spec, edited, trials, rng)
        p0, p1 = _plus_prob(before[:, v]), _plus_prob(after[:, v])
        tv = abs(p0 - p1)
        tv_radius = Z95 * math.sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / trials)
        if partner is not None:
            a = before[:, v].astype(float)
            b = before[:, partner].astype(float)
            corr = float(np.mean(a * b) - np.mean(a) * np.mean(b))
            corr_radius = Z95 / math.sqrt(trials)
        return LocalityReport(v, tv, tv_radius, partner, corr, corr_radius, exact=False)
    s0 = qaoa_output_state(spec, graph)
    s1 = qaoa_output_state(spec, edited)
    tv = abs(float(qa.marginal(s0, [v])[0]) - float(qa.marginal(s1, [v])[0]))
    if partner is not None:
        zz = qa.z_product_expectation(s0, [v, partner])
        corr = zz - qa.z_product_expectation(s0, [v]) * qa.z_product_expectation(s0, [partner])
    return LocalityReport(v, tv, 0.0, partner, corr, 0.0, exact=True)

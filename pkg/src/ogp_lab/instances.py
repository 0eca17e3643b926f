"""Random sparse hypergraph instances, their Hamiltonians and neighborhoods.

Conventions used throughout the package:

* vertices are ``0 .. n-1``; an edge is an ordered k-tuple drawn from
  ``[n]^k`` so repeated vertices inside a tuple and duplicate tuples are both
  legal (a repeated vertex contributes ``sigma_v**2 = 1``);
* the Hamiltonian is ``H(sigma) = -sum_e prod_{v in e} sigma_v``;
* a boolean assignment maps to spins by ``x = 1 <-> sigma = -1``, and an
  unsigned clause is satisfied when the XOR of its bits is 1, which gives
  ``H = 2 * val - m`` exactly;
* basis state ``b`` of a bit-table (``energy_table``) has
  ``sigma_i = (-1) ** ((b >> i) & 1)``.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

DEFAULT_CAP = 24


def dense_cap() -> int:
    """Largest n for exhaustive tables and dense statevectors."""
    return int(os.environ.get("OGP_LAB_DENSE_CAP", DEFAULT_CAP))


def _frozen_array(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NeighborhoodIndex:
    """Per-vertex sorted arrays of incident edge ids."""

    incident: tuple

    def __getitem__(self, v: int) -> np.ndarray:
        return self.incident[v]

    def __len__(self) -> int:
        return len(self.incident)


@dataclass(frozen=True, eq=False)
class Hypergraph:
    n: int
    k: int
    edges: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a hypergraph needs at least one vertex")
        if self.k < 1:
            raise ValueError("arity must be positive")
        e = np.asarray(self.edges, dtype=np.int64)
        if e.size == 0:
            e = e.reshape(0, self.k)
        if e.ndim != 2 or e.shape[1] != self.k:
            raise ValueError(f"edges must have shape (m, {self.k}), got {e.shape}")
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge entry outside [0, n)")
        object.__setattr__(self, "edges", _frozen_array(e, np.int64))

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and np.array_equal(self.edges, other.edges)

    __hash__ = None

    @cached_property
    def incidence(self) -> NeighborhoodIndex:
        owners = [[] for _ in range(self.n)]
        for eid, tup in enumerate(self.edges.tolist()):
            for v in dict.fromkeys(tup):
                owners[v].append(eid)
        return NeighborhoodIndex(tuple(np.array(o, dtype=np.int64) for o in owners))

    def incidence_matrix(self) -> sp.csr_matrix:
        """Binary n x m vertex-edge incidence matrix."""
        if "inc" not in self._cache:
            m = self.m
            rows = self.edges.reshape(-1)
            cols = np.repeat(np.arange(m), self.k)
            mat = sp.csr_matrix(
                (np.ones(rows.size, dtype=np.int32), (rows, cols)), shape=(self.n, m)
            )
            mat.data[:] = 1
            mat.sort_indices()
            self._cache["inc"] = mat
        return self._cache["inc"]

    def reach_matrix(self, r: int) -> sp.csr_matrix:
        """Binary n x n matrix with entry (v, w) set iff dist(v, w) <= r."""
        if r < 0:
            raise ValueError("radius must be nonnegative")
        key = ("reach", r)
        if key not in self._cache:
            if r == 0:
                mat = sp.identity(self.n, dtype=np.int32, format="csr")
            else:
                inc = self.incidence_matrix()
                adj = _binary(inc @ inc.T)
                mat = _binary(self.reach_matrix(r - 1) @ adj + self.reach_matrix(r - 1))
            mat.sort_indices()
            self._cache[key] = mat
        return self._cache[key]

    def ball_edge_matrix(self, p: int) -> sp.csr_matrix:
        """Binary n x m matrix: edge e is in E(B(v, p))."""
        key = ("ball_edges", p)
        if key not in self._cache:
            if p <= 0:
                mat = sp.csr_matrix((self.n, self.m), dtype=np.int32)
            else:
                mat = _binary(self.reach_matrix(p - 1) @ self.incidence_matrix())
            mat.sort_indices()
            self._cache[key] = mat
        return self._cache[key]


def _binary(mat) -> sp.csr_matrix:
    mat = sp.csr_matrix(mat)
    mat.eliminate_zeros()
    mat.data = np.ones_like(mat.data, dtype=np.int32)
    return mat


@dataclass(frozen=True, eq=False)
class SignedInstance:
    graph: Hypergraph
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs, dtype=np.int8)
        if s.size == 0:
            s = s.reshape(0, self.graph.k)
        if s.shape != self.graph.edges.shape:
            raise ValueError("signs must have one row of k entries per edge")
        if not np.all(np.abs(s) == 1):
            raise ValueError("signs must be +1 or -1")
        object.__setattr__(self, "signs", _frozen_array(s, np.int8))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def edge_signs(self) -> np.ndarray:
        """Per-edge sign, the product of the per-position signs."""
        return np.prod(self.signs, axis=1, dtype=np.int64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedInstance):
            return NotImplemented
        return self.graph == other.graph and np.array_equal(self.signs, other.signs)

    __hash__ = None


Instance = Union[Hypergraph, SignedInstance]


def split_instance(obj: Instance) -> tuple[Hypergraph, np.ndarray]:
    """Return the underlying graph and the per-edge sign vector."""
    if isinstance(obj, SignedInstance):
        return obj.graph, obj.edge_signs
    if isinstance(obj, Hypergraph):
        return obj, np.ones(obj.m, dtype=np.int64)
    raise TypeError(f"expected Hypergraph or SignedInstance, got {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class CoupledPair:
    """Shared edges E plus private edges E1, E2 at coupling t.

    In ``g1`` and ``g2`` the shared edges come first, so an edge id below
    ``n_shared`` is shared in both graphs.
    """

    n: int
    k: int
    t: float
    shared: np.ndarray
    private1: np.ndarray
    private2: np.ndarray

    def __post_init__(self):
        for name in ("shared", "private1", "private2"):
            arr = np.asarray(getattr(self, name), dtype=np.int64).reshape(-1, self.k)
            object.__setattr__(self, name, _frozen_array(arr, np.int64))

    @property
    def n_shared(self) -> int:
        return int(self.shared.shape[0])

    @cached_property
    def g1(self) -> Hypergraph:
        return Hypergraph(self.n, self.k, np.concatenate([self.shared, self.private1]))

    @cached_property
    def g2(self) -> Hypergraph:
        return Hypergraph(self.n, self.k, np.concatenate([self.shared, self.private2]))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def poisson_inverse_cdf(rate: float, u: float) -> int:
    """Smallest m with P[Poisson(rate) <= m] >= u."""
    if rate == 0.0:
        return 0
    return max(int(poisson.ppf(u, rate)), 0)


def sample_edges(n: int, k: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson(rate) many i.i.d. uniform k-tuples from [n]^k.

    The count consumes exactly one uniform from ``rng`` (inverse-CDF draw)
    before the tuples are drawn.
    """
    if rate < 0:
        raise ValueError("Poisson rate must be nonnegative")
    m = poisson_inverse_cdf(rate, rng.random())
    return rng.integers(0, n, size=(m, k), dtype=np.int64)


def _check_params(n, d, k):
    if n < 1:
        raise ValueError("n must be at least 1")
    if k < 2:
        raise ValueError("k must be at least 2")
    if not d > 0:
        raise ValueError("average degree d must be positive")


def sample_hypergraph(n: int, d: float, k: int, rng: np.random.Generator) -> Hypergraph:
    """G ~ H(n, d, k): Poisson(dn/k) edges, each uniform on [n]^k."""
    _check_params(n, d, k)
    return Hypergraph(n, k, sample_edges(n, k, d * n / k, rng))


def sample_coupled(n: int, d: float, k: int, t: float, rng: np.random.Generator) -> CoupledPair:
    """Coupled interpolation at t: shared Poisson(tdn/k), private Poisson((1-t)dn/k)."""
    _check_params(n, d, k)
    if not 0.0 <= t <= 1.0:
        raise ValueError("coupling t must lie in [0, 1]")
    base = d * n / k
    shared = sample_edges(n, k, t * base, rng)
    e1 = sample_edges(n, k, (1.0 - t) * base, rng)
    e2 = sample_edges(n, k, (1.0 - t) * base, rng)
    return CoupledPair(n, k, float(t), shared, e1, e2)


def sample_signs(graph: Hypergraph, rng: np.random.Generator) -> SignedInstance:
    signs = 1 - 2 * rng.integers(0, 2, size=graph.edges.shape, dtype=np.int8)
    return SignedInstance(graph, signs)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def as_spins(sigma, n: int) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.int64)
    if s.shape != (n,):
        raise ValueError(f"spin configuration must have length {n}, got shape {s.shape}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +1 or -1")
    return s


def spins_from_bits(x) -> np.ndarray:
    return 1 - 2 * np.asarray(x, dtype=np.int64)


def energy(graph: Hypergraph, sigma) -> int:
    s = as_spins(sigma, graph.n)
    if graph.m == 0:
        return 0
    return -int(np.prod(s[graph.edges], axis=1).sum())


def signed_energy(instance: SignedInstance, sigma) -> int:
    g = instance.graph
    s = as_spins(sigma, g.n)
    if g.m == 0:
        return 0
    return -int((instance.edge_signs * np.prod(s[g.edges], axis=1)).sum())


def hamiltonian(obj: Instance, sigma) -> int:
    if isinstance(obj, SignedInstance):
        return signed_energy(obj, sigma)
    return energy(obj, sigma)


def xor_value(obj: Instance, x) -> int:
    """Number of satisfied odd-parity clauses under assignment x in {0,1}^n.

    A signed clause negates the literal at each position whose sign is -1.
    """
    g, _ = split_instance(obj)
    bits = np.asarray(x, dtype=np.int64)
    if bits.shape != (g.n,):
        raise ValueError(f"assignment must have length {g.n}")
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("assignment entries must be 0 or 1")
    if g.m == 0:
        return 0
    parity = bits[g.edges].sum(axis=1) % 2
    if isinstance(obj, SignedInstance):
        parity = (parity + (obj.signs == -1).sum(axis=1)) % 2
    return int(parity.sum())


def edge_masks(graph: Hypergraph) -> np.ndarray:
    """Bit mask of the vertices appearing an odd number of times in each edge."""
    masks = np.zeros(graph.m, dtype=np.uint64)
    for j in range(graph.k):
        masks ^= np.left_shift(np.uint64(1), graph.edges[:, j].astype(np.uint64))
    return masks


def energy_table(obj: Instance, cap: int | None = None) -> np.ndarray:
    """Energies of all 2^n configurations, indexed by basis state."""
    g, signs = split_instance(obj)
    cap = dense_cap() if cap is None else cap
    if g.n > cap:
        raise ValueError(f"n={g.n} exceeds the enumeration cap {cap}")
    idx = np.arange(1 << g.n, dtype=np.uint64)
    table = np.zeros(1 << g.n, dtype=np.int64)
    if g.m == 0:
        return table
    masks, inverse = np.unique(edge_masks(g), return_inverse=True)
    weights = np.bincount(inverse.reshape(-1), weights=signs, minlength=masks.size)
    for mask, w in zip(masks, weights.astype(np.int64)):
        if w == 0:
            continue
        parity = np.bitwise_count(idx & mask) & 1
        table -= w * (1 - 2 * parity.astype(np.int64))
    return table


def bits_of(index: int, n: int) -> np.ndarray:
    return (int(index) >> np.arange(n)) & 1


class BruteForceResult(NamedTuple):
    optimum: int
    argmax: np.ndarray
    count: int


def brute_force_max(obj: Instance, cap: int | None = None) -> BruteForceResult:
    """Exact maximum of the Hamiltonian over all 2^n configurations."""
    g, _ = split_instance(obj)
    table = energy_table(obj, cap=cap)
    best = int(table.max())
    first = int(np.argmax(table))
    return BruteForceResult(best, spins_from_bits(bits_of(first, g.n)), int((table == best).sum()))


# ---------------------------------------------------------------------------
# neighborhoods
# ---------------------------------------------------------------------------


class Ball(NamedTuple):
    vertices: frozenset
    edges: frozenset


def distances(graph: Hypergraph, sources, limit: int) -> dict[int, int]:
    """Hyperedge-step BFS distances from a source set, up to ``limit``."""
    inc = graph.incidence
    dist = {int(s): 0 for s in sources}
    frontier = deque(dist)
    while frontier:
        u = frontier.popleft()
        if dist[u] >= limit:
            continue
        for eid in inc[u]:
            for w in graph.edges[eid].tolist():
                if w not in dist:
                    dist[w] = dist[u] + 1
                    frontier.append(w)
    return dist


def ball_of_set(graph: Hypergraph, sources, p: int) -> Ball:
    """Union of B(v, p) over a source set."""
    if p < 0:
        raise ValueError("radius must be nonnegative")
    for v in sources:
        if not 0 <= v < graph.n:
            raise ValueError(f"vertex {v} out of range")
    dist = distances(graph, sources, p)
    inner = [v for v, dv in dist.items() if dv <= p - 1]
    eids = set()
    for v in inner:
        eids.update(graph.incidence[v].tolist())
    return Ball(frozenset(dist), frozenset(eids))


def ball(graph: Hypergraph, v: int, p: int) -> Ball:
    """B(v, p) and its edges (those touching a vertex at distance <= p-1)."""
    return ball_of_set(graph, [v], p)


def overlap(sigma1, sigma2) -> Fraction:
    a = np.asarray(sigma1, dtype=np.int64)
    b = np.asarray(sigma2, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("overlap needs two spin vectors of equal length")
    n = a.shape[0]
    as_spins(a, n)
    as_spins(b, n)
    return Fraction(int(a @ b), n)


def hamming_weight(sigma) -> int:
    """Number of -1 entries."""
    return int((np.asarray(sigma) == -1).sum())


def depth_budget(n: int, d: float, k: int, tau: float) -> int:
    """Largest p >= 0 with 2p+1 <= (1-tau) log n / log(d(k-1)/ln 2), else 0."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    growth = d * (k - 1) / np.log(2.0)
    if growth <= 1.0:
        raise ValueError("d(k-1) must exceed ln 2 for the depth budget to be defined")
    budget = (1.0 - tau) * np.log(n) / np.log(growth)
    return max(int(np.floor((budget - 1.0) / 2.0)), 0)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------


def instance_to_dict(obj: Instance, seed=None) -> dict:
    g, _ = split_instance(obj)
    out = {"n": g.n, "k": g.k, "edges": g.edges.tolist()}
    if isinstance(obj, SignedInstance):
        out["signs"] = obj.signs.astype(int).tolist()
    if seed is not None:
        out["seed"] = [int(seed[0]), int(seed[1])]
    return out


def instance_from_dict(data: dict) -> Instance:
    unknown = set(data) - {"n", "k", "edges", "signs", "seed"}
    if unknown:
        raise ValueError(f"unknown instance fields: {sorted(unknown)}")
    k = int(data["k"])
    edges = np.array(data["edges"], dtype=np.int64).reshape(-1, k)
    g = Hypergraph(int(data["n"]), k, edges)
    if data.get("signs") is not None:
        return SignedInstance(g, np.array(data["signs"], dtype=np.int8).reshape(-1, k))
    return g


def dumps_instance(obj: Instance, seed=None) -> str:
    return json.dumps(instance_to_dict(obj, seed))


def loads_instance(text: str) -> Instance:
    return instance_from_dict(json.loads(text))


def load_instance(path) -> Instance:
    with open(path) as fh:
        return loads_instance(fh.read())

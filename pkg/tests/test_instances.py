from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ogp_lab import instances as ins
from ogp_lab.rng import make_rng


def naive_energy(edges, sigma, signs=None):
    total = 0
    for i, e in enumerate(edges):
        prod = 1
        for j, v in enumerate(e):
            prod *= sigma[v] * (1 if signs is None else signs[i][j])
        total += prod
    return -total


@st.composite
def small_instances(draw, max_n=8, signed=None):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(2, 4))
    m = draw(st.integers(0, 10))
    edges = draw(st.lists(st.lists(st.integers(0, n - 1), min_size=k, max_size=k), min_size=m, max_size=m))
    g = ins.Hypergraph(n, k, np.array(edges, dtype=np.int64).reshape(m, k))
    want_signed = draw(st.booleans()) if signed is None else signed
    if want_signed:
        signs = draw(st.lists(st.lists(st.sampled_from([-1, 1]), min_size=k, max_size=k), min_size=m, max_size=m))
        return ins.SignedInstance(g, np.array(signs, dtype=np.int8).reshape(m, k))
    return g


def spins_st(n):
    return st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n)


# --------------------------------------------------------------- types


def test_hypergraph_validation():
    with pytest.raises(ValueError):
        ins.Hypergraph(3, 2, [[0, 3]])
    with pytest.raises(ValueError):
        ins.Hypergraph(3, 2, [[0, 1, 2]])
    g = ins.Hypergraph(3, 2, [[0, 0], [0, 0]])
    assert g.m == 2
    with pytest.raises(ValueError):
        g.edges[0, 0] = 1


def test_signed_instance_validation():
    g = ins.Hypergraph(3, 2, [[0, 1]])
    with pytest.raises(ValueError):
        ins.SignedInstance(g, [[1, 0]])
    with pytest.raises(ValueError):
        ins.SignedInstance(g, [[1, 1], [1, 1]])
    s = ins.SignedInstance(g, [[1, -1]])
    assert s.edge_signs.tolist() == [-1]


@given(small_instances(signed=False))
def test_incidence_index_matches_membership(g):
    for v in range(g.n):
        listed = set(g.incidence[v].tolist())
        truth = {e for e in range(g.m) if v in g.edges[e].tolist()}
        assert listed == truth


# --------------------------------------------------------------- sampling


def test_sampling_rejects_bad_parameters(rng):
    for n, d, k in [(0, 1, 2), (5, 1, 1), (5, 0, 2), (5, -1, 3)]:
        with pytest.raises(ValueError):
            ins.sample_hypergraph(n, d, k, rng)
    with pytest.raises(ValueError):
        ins.sample_coupled(5, 1, 2, 1.5, rng)


def test_edge_count_matches_inverse_cdf_oracle():
    # the sampler uses one uniform for m before drawing tuples
    for stream in range(20):
        g = ins.sample_hypergraph(8, 2, 3, make_rng((3, 4), stream))
        u = make_rng((3, 4), stream).random()
        rate = 16 / 3
        m, cdf, pmf = 0, math.exp(-rate), math.exp(-rate)
        while cdf < u:
            m += 1
            pmf *= rate / m
            cdf += pmf
        assert g.m == m


def test_zero_rate_gives_no_edges(rng):
    for _ in range(20):
        assert ins.sample_edges(5, 3, 0.0, rng).shape == (0, 3)


def test_sampling_is_deterministic():
    a = ins.sample_hypergraph(30, 3, 4, make_rng((1, 2), 7))
    b = ins.sample_hypergraph(30, 3, 4, make_rng((1, 2), 7))
    assert a == b


def test_edge_count_mean(rng):
    ms = np.array([ins.sample_hypergraph(12, 4, 4, rng).m for _ in range(4000)])
    assert abs(ms.mean() - 12) < 4 * math.sqrt(12 / 4000)


def test_edge_count_chi_square():
    rng = make_rng((9, 9), 0)
    rate = 3 * 20 / 4
    ms = np.array([ins.sample_hypergraph(20, 3, 4, rng).m for _ in range(10_000)])
    bins = np.arange(8, 24)
    obs = [np.sum(ms < bins[0])] + [np.sum(ms == b) for b in bins] + [np.sum(ms > bins[-1])]
    probs = [stats.poisson.cdf(bins[0] - 1, rate)] + [stats.poisson.pmf(b, rate) for b in bins]
    probs.append(1 - sum(probs))
    _, pval = stats.chisquare(obs, np.array(probs) * ms.size)
    assert pval > 0.01


def test_edges_uniform_over_vertices(rng):
    counts = np.zeros(6)
    for _ in range(500):
        g = ins.sample_hypergraph(6, 4, 3, rng)
        counts += np.bincount(g.edges.ravel(), minlength=6)
    _, pval = stats.chisquare(counts)
    assert pval > 0.001


def test_coupled_endpoints(rng):
    for _ in range(10):
        p1 = ins.sample_coupled(10, 3, 4, 1.0, rng)
        assert p1.private1.shape[0] == 0 and p1.private2.shape[0] == 0
        assert p1.g1 == p1.g2
        p0 = ins.sample_coupled(10, 3, 4, 0.0, rng)
        assert p0.n_shared == 0


def test_coupled_marginal_matches_plain_sampler():
    rng = make_rng((5, 5), 0)
    a = [ins.sample_coupled(10, 3, 4, 0.5, rng).g1.m for _ in range(10_000)]
    b = [ins.sample_hypergraph(10, 3, 4, rng).m for _ in range(10_000)]
    assert stats.ks_2samp(a, b).pvalue > 0.001
    assert abs(np.mean(a) - np.mean(b)) < 4 * math.sqrt(2 * 7.5 / 10_000)


def test_signs(rng):
    empty = ins.Hypergraph(4, 3, np.zeros((0, 3)))
    assert ins.sample_signs(empty, rng).signs.shape == (0, 3)
    g = ins.Hypergraph(4, 4, [[0, 1, 2, 3]])
    s = ins.sample_signs(g, make_rng((1, 1), 3))
    assert np.array_equal(s.signs, ins.sample_signs(g, make_rng((1, 1), 3)).signs)
    assert set(np.unique(s.signs)) <= {-1, 1}


def test_sample_signs_balanced():
    # one graph with 10^5 copies of the same edge gives 10^5 independent rows
    draws = 100_000
    g = ins.Hypergraph(4, 4, np.tile([0, 1, 2, 3], (draws, 1)))
    signs = ins.sample_signs(g, make_rng((8, 1), 0)).signs
    assert np.all(np.abs(signs.mean(axis=0)) < 3 / math.sqrt(draws))


# --------------------------------------------------------------- evaluation


def test_energy_examples():
    g = ins.Hypergraph(5, 4, [[1, 2, 3, 4]])
    assert ins.energy(g, [1] * 5) == -1
    assert ins.energy(g, [1, -1, 1, 1, 1]) == 1
    with pytest.raises(ValueError):
        ins.energy(g, [1] * 4)
    with pytest.raises(ValueError):
        ins.energy(g, [1, 0, 1, 1, 1])


def test_repeated_vertex_contributes_square():
    g = ins.Hypergraph(3, 3, [[0, 0, 1]])
    assert ins.energy(g, [-1, 1, 1]) == -1
    assert ins.energy(g, [1, -1, 1]) == 1


def test_energy_matches_naive_oracle(rng):
    for _ in range(20):
        g = ins.sample_hypergraph(int(rng.integers(2, 11)), 2.5, int(rng.integers(2, 5)), rng)
        s = ins.sample_signs(g, rng)
        for _ in range(10):
            sigma = 1 - 2 * rng.integers(0, 2, g.n)
            assert ins.energy(g, sigma) == naive_energy(g.edges.tolist(), sigma)
            assert ins.signed_energy(s, sigma) == naive_energy(g.edges.tolist(), sigma, s.signs.tolist())


def test_signed_energy_examples():
    g = ins.Hypergraph(4, 4, [[0, 1, 2, 3]])
    plus = ins.SignedInstance(g, np.ones((1, 4)))
    one_neg = ins.SignedInstance(g, [[1, 1, -1, 1]])
    for bits in itertools.product([1, -1], repeat=4):
        assert ins.signed_energy(plus, bits) == ins.energy(g, bits)
        assert ins.signed_energy(one_neg, bits) == -ins.energy(g, bits)


@given(small_instances(), st.data())
def test_energy_bounds_and_parity(obj, data):
    g, _ = ins.split_instance(obj)
    sigma = data.draw(spins_st(g.n))
    h = ins.hamiltonian(obj, sigma)
    assert abs(h) <= g.m
    assert (h - g.m) % 2 == 0


def test_xor_single_clause_all_assignments():
    g = ins.Hypergraph(4, 4, [[0, 1, 2, 3]])
    assert ins.xor_value(g, [1, 0, 0, 0]) == 1
    assert 2 * 1 - 1 == ins.energy(g, ins.spins_from_bits([1, 0, 0, 0]))
    for x in itertools.product([0, 1], repeat=4):
        assert 2 * ins.xor_value(g, x) - 1 == ins.energy(g, ins.spins_from_bits(x))


def test_xor_zero_clauses():
    g = ins.Hypergraph(3, 2, np.zeros((0, 2)))
    for x in itertools.product([0, 1], repeat=3):
        assert ins.xor_value(g, x) == 0


def test_xor_rejects_bad_assignments():
    g = ins.Hypergraph(3, 2, [[0, 1]])
    with pytest.raises(ValueError):
        ins.xor_value(g, [0, 1])
    with pytest.raises(ValueError):
        ins.xor_value(g, [0, 2, 1])


@given(small_instances())
@settings(max_examples=60)
def test_xor_identity_exhaustive(obj):
    g, _ = ins.split_instance(obj)
    for x in itertools.product([0, 1], repeat=g.n):
        assert 2 * ins.xor_value(obj, x) - g.m == ins.hamiltonian(obj, ins.spins_from_bits(x))


@given(small_instances())
@settings(max_examples=60)
def test_energy_table_matches_pointwise(obj):
    g, _ = ins.split_instance(obj)
    table = ins.energy_table(obj)
    for b in range(1 << g.n):
        assert table[b] == ins.hamiltonian(obj, ins.spins_from_bits(ins.bits_of(b, g.n)))


def test_brute_force_examples():
    single = ins.brute_force_max(ins.Hypergraph(4, 4, [[0, 1, 2, 3]]))
    assert single.optimum == 1 and single.count == 8
    assert ins.energy(ins.Hypergraph(4, 4, [[0, 1, 2, 3]]), single.argmax) == 1
    empty = ins.brute_force_max(ins.Hypergraph(3, 2, np.zeros((0, 2))))
    assert empty.optimum == 0 and empty.count == 8
    path = ins.Hypergraph(3, 2, [[0, 1], [1, 2]])
    res = ins.brute_force_max(path)
    assert res.optimum == 2 and res.count == 2
    table = ins.energy_table(path)
    best = {tuple(ins.spins_from_bits(ins.bits_of(b, 3))) for b in np.flatnonzero(table == 2)}
    assert best == {(1, -1, 1), (-1, 1, -1)}


def test_brute_force_cap():
    g = ins.Hypergraph(6, 2, [[0, 1]])
    with pytest.raises(ValueError):
        ins.brute_force_max(g, cap=5)


def test_dense_cap_env(monkeypatch):
    monkeypatch.setenv("OGP_LAB_DENSE_CAP", "4")
    with pytest.raises(ValueError):
        ins.energy_table(ins.Hypergraph(5, 2, [[0, 1]]))


# --------------------------------------------------------------- balls


def test_ball_examples():
    iso = ins.Hypergraph(3, 2, [[1, 2]])
    for p in range(4):
        assert ins.ball(iso, 0, p) == (frozenset({0}), frozenset())
    one = ins.Hypergraph(5, 4, [[0, 1, 2, 3]])
    assert ins.ball(one, 0, 1) == (frozenset({0, 1, 2, 3}), frozenset({0}))
    path = ins.Hypergraph(3, 2, [[0, 1], [1, 2]])
    assert ins.ball(path, 0, 0) == (frozenset({0}), frozenset())
    assert ins.ball(path, 0, 1) == (frozenset({0, 1}), frozenset({0}))
    assert ins.ball(path, 0, 2) == (frozenset({0, 1, 2}), frozenset({0, 1}))
    with pytest.raises(ValueError):
        ins.ball(path, 3, 1)


def _reach_oracle(g, p):
    adj = np.zeros((g.n, g.n), dtype=np.int64)
    for e in g.edges:
        for a in e:
            for b in e:
                adj[a, b] = 1
    R = np.eye(g.n, dtype=np.int64)
    for _ in range(p):
        R = np.minimum(R + R @ adj, 1)
    return R


@given(small_instances(signed=False), st.integers(0, 3))
@settings(max_examples=80)
def test_ball_matches_matrix_reachability(g, p):
    R = _reach_oracle(g, p)
    Rs = g.reach_matrix(p).toarray()
    B = g.ball_edge_matrix(p).toarray()
    for v in range(g.n):
        b = ins.ball(g, v, p)
        assert b.vertices == frozenset(np.flatnonzero(R[v]).tolist())
        assert b.vertices == frozenset(np.flatnonzero(Rs[v]).tolist())
        assert b.edges == frozenset(np.flatnonzero(B[v]).tolist())
        nxt = ins.ball(g, v, p + 1)
        assert b.vertices <= nxt.vertices and b.edges <= nxt.edges


def test_ball_matrix_larger_graph(rng):
    g = ins.sample_hypergraph(50, 2, 3, rng)
    for p in (1, 2):
        assert np.array_equal(g.reach_matrix(p).toarray(), _reach_oracle(g, p))
        assert sp.issparse(g.ball_edge_matrix(p))


# --------------------------------------------------------------- overlap and budget


def test_overlap_examples():
    s = [1, -1, 1, 1]
    assert ins.overlap(s, s) == 1
    assert ins.overlap(s, [-v for v in s]) == -1
    assert ins.overlap([1, 1, -1, -1], [1, -1, 1, -1]) == 0
    with pytest.raises(ValueError):
        ins.overlap([1, 1], [1, 1, 1])


@given(st.integers(1, 30).flatmap(lambda n: st.tuples(spins_st(n), spins_st(n))))
def test_overlap_parity(pair):
    a, b = pair
    r = ins.overlap(a, b)
    assert isinstance(r, Fraction) and -1 <= r <= 1
    num = r * len(a)
    assert num.denominator == 1 and (num.numerator - len(a)) % 2 == 0


def test_hamming_weight():
    assert ins.hamming_weight([1, -1, -1, 1]) == 2


def test_depth_budget_examples():
    assert ins.depth_budget(10**9, 3, 4, 0.1) == 3
    assert ins.depth_budget(4096, 3, 4, 0.5) == 0
    for n in (10, 10**6, 10**12):
        assert ins.depth_budget(n, 3, 4, 0.999999) == 0
    with pytest.raises(ValueError):
        ins.depth_budget(100, 0.3, 2, 0.1)


@given(st.integers(2, 10**12), st.floats(0.5, 10), st.integers(2, 6), st.floats(0.01, 0.99))
def test_depth_budget_is_largest_feasible(n, d, k, tau):
    growth = d * (k - 1) / math.log(2)
    if growth <= 1.0001:
        return
    p = ins.depth_budget(n, d, k, tau)
    budget = (1 - tau) * math.log(n) / math.log(growth)
    assert p >= 0
    if p > 0:
        assert 2 * p + 1 <= budget + 1e-9
    assert 2 * (p + 1) + 1 > budget - 1e-9


# --------------------------------------------------------------- JSON


@given(small_instances())
def test_json_round_trip(obj):
    text = ins.dumps_instance(obj, seed=(1, 2))
    back = ins.loads_instance(text)
    assert back == obj
    assert list(ins.instance_to_dict(obj))[:3] == ["n", "k", "edges"]


def test_json_rejects_unknown_fields():
    with pytest.raises(ValueError):
        ins.instance_from_dict({"n": 2, "k": 2, "edges": [], "extra": 1})

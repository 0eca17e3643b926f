from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.linalg import expm

from ogp_lab import instances as ins
from ogp_lab import qaoa as qa
from ogp_lab.rng import make_rng

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


def kron_on(ops: dict, n: int) -> np.ndarray:
    """Operator with ops[q] on qubit q; qubit 0 is the least significant bit."""
    out = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return qa.Statevector(n, v / np.linalg.norm(v))


# --------------------------------------------------------------- params and diagonal


def test_params_validation():
    assert qa.QaoaParams([0.1, 0.2], [0.3, 0.4]).depth == 2
    assert qa.QaoaParams(0.1, 0.2).depth == 1
    with pytest.raises(ValueError):
        qa.QaoaParams([0.1], [0.2, 0.3])
    with pytest.raises(ValueError):
        qa.QaoaParams([math.nan], [0.2])


def test_cost_diagonal_examples():
    assert np.all(qa.build_cost_diagonal(ins.Hypergraph(3, 2, np.zeros((0, 2)))) == 0)
    assert qa.build_cost_diagonal(ins.Hypergraph(2, 2, [[0, 1]])).tolist() == [-1, 1, 1, -1]
    with pytest.raises(ValueError):
        qa.build_cost_diagonal(ins.Hypergraph(6, 2, [[0, 1]]), cap=5)


def test_cost_diagonal_matches_energy(rng):
    for _ in range(20):
        g = ins.sample_hypergraph(int(rng.integers(2, 11)), 2, int(rng.integers(2, 5)), rng)
        obj = ins.sample_signs(g, rng) if rng.random() < 0.5 else g
        diag = qa.build_cost_diagonal(obj)
        for b in range(1 << g.n):
            assert diag[b] == ins.hamiltonian(obj, ins.spins_from_bits(ins.bits_of(b, g.n)))
        assert diag.max() == ins.brute_force_max(obj).optimum
        assert np.all(diag == np.round(diag))


def test_cost_diagonal_is_operator_diagonal():
    g = ins.Hypergraph(3, 3, [[0, 1, 2], [0, 0, 1]])
    H = -(kron_on({0: Z, 1: Z, 2: Z}, 3) + kron_on({1: Z}, 3))
    assert np.allclose(np.diag(H).real, qa.build_cost_diagonal(g))


# --------------------------------------------------------------- evolution


def test_identity_circuit():
    diag = qa.build_cost_diagonal(ins.Hypergraph(3, 2, [[0, 1], [1, 2]]))
    for init in ("plus", "zero"):
        s0 = qa.initial_state(3, init)
        s1 = qa.evolve(qa.QaoaParams([0.0, 0.0], [0.0, 0.0]), init, diag)
        assert np.array_equal(s0.amplitudes, s1.amplitudes)


def test_mixer_fixes_plus_state():
    diag = qa.build_cost_diagonal(ins.Hypergraph(3, 2, [[0, 1], [1, 2]]))
    s = qa.evolve(qa.QaoaParams([0.7], [0.0]), "plus", diag)
    phase = s.amplitudes[0] / abs(s.amplitudes[0])
    assert np.allclose(s.amplitudes / phase, qa.initial_state(3).amplitudes, atol=1e-14)


def test_two_qubit_matrix_exponential_oracle():
    g = ins.Hypergraph(2, 2, [[0, 1]])
    diag = qa.build_cost_diagonal(g)
    beta, gamma = 0.3, 0.7
    Hc = np.diag(diag).astype(complex)
    B = kron_on({0: X}, 2) + kron_on({1: X}, 2)
    psi0 = np.full(4, 0.5, dtype=complex)
    psi = expm(-1j * beta * B) @ expm(-1j * gamma * Hc) @ psi0
    want = float(np.real(np.conj(psi) @ Hc @ psi))
    got = qa.energy_expectation(qa.evolve(qa.QaoaParams([beta], [gamma]), "plus", diag), diag)
    assert got == pytest.approx(want, abs=1e-10)


def test_deep_circuit_matches_matrix_exponential(rng):
    g = ins.sample_hypergraph(5, 3, 3, rng)
    diag = qa.build_cost_diagonal(g)
    params = qa.QaoaParams(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
    B = sum(kron_on({q: X}, 5) for q in range(5))
    psi = qa.initial_state(5).amplitudes
    for b, gm in zip(params.beta, params.gamma):
        psi = expm(-1j * b * B) @ (np.exp(-1j * gm * diag) * psi)
    got = qa.evolve(params, "plus", diag).amplitudes
    assert np.allclose(got, psi, atol=1e-12)


def test_norm_preserved(rng):
    g = ins.sample_hypergraph(12, 3, 3, rng)
    diag = qa.build_cost_diagonal(g)
    state = qa.initial_state(12)
    for _ in range(8):
        state = qa.evolve(qa.QaoaParams(rng.uniform(-3, 3, 1), rng.uniform(-3, 3, 1)), state, diag)
        assert abs(state.norm2() - 1) <= 1e-12


def test_evolve_rejects_non_finite():
    with pytest.raises(ValueError):
        qa.evolve(qa.QaoaParams([0.1], [0.1]), "plus", np.array([0.0, np.inf]))


def test_energy_expectation_examples(rng):
    g = ins.sample_hypergraph(6, 3, 3, rng)
    diag = qa.build_cost_diagonal(g)
    assert qa.energy_expectation(qa.initial_state(6), diag) == pytest.approx(0.0, abs=1e-12)
    amps = np.zeros(64, dtype=complex)
    amps[37] = 1
    assert qa.energy_expectation(qa.Statevector(6, amps), diag) == diag[37]
    with pytest.raises(ValueError):
        qa.energy_expectation(qa.initial_state(5), diag)


def test_energy_expectation_sampling_oracle():
    rng = make_rng((2, 2), 0)
    g = ins.sample_hypergraph(8, 3, 3, rng)
    diag = qa.build_cost_diagonal(g)
    st = random_state(8, np.random.default_rng(3))
    shots = 10**6
    idx = rng.choice(256, size=shots, p=st.probabilities())
    est = diag[idx]
    assert abs(est.mean() - qa.energy_expectation(st, diag)) <= 4 * est.std() / math.sqrt(shots)


def test_z_product_expectation_matches_operator(rng):
    st = random_state(4, np.random.default_rng(5))
    op = kron_on({0: Z, 2: Z}, 4)
    want = float(np.real(np.conj(st.amplitudes) @ op @ st.amplitudes))
    assert qa.z_product_expectation(st, [0, 2]) == pytest.approx(want, abs=1e-12)
    assert qa.z_product_expectation(st, [0, 2, 1, 1]) == pytest.approx(want, abs=1e-12)


# --------------------------------------------------------------- lightcone


def test_lightcone_zero_gamma(rng):
    g = ins.sample_hypergraph(8, 3, 3, rng)
    for e in range(g.m):
        assert qa.lightcone_edge_expectation(g, qa.QaoaParams([0.4], [0.0]), e) == pytest.approx(0, abs=1e-14)


def test_lightcone_subgraph_relabels_in_order():
    g = ins.Hypergraph(6, 2, [[5, 3], [3, 1], [1, 0], [5, 3]])
    sub, vmap = qa.lightcone_subinstance(g, [5], 1)
    assert vmap.tolist() == [3, 5]
    assert sub.edges.tolist() == [[1, 0], [1, 0]]
    sub, vmap = qa.lightcone_subinstance(g, [5], 2)
    assert vmap.tolist() == [1, 3, 5]
    assert sub.edges.tolist() == [[2, 1], [1, 0], [2, 1]]


def test_lightcone_whole_graph_equals_dense():
    g = ins.Hypergraph(4, 2, [[0, 1], [1, 2], [2, 3]])
    params = qa.QaoaParams([0.3, 0.2], [0.5, 0.9])
    dense = qa.dense_edge_expectations(g, params)
    for e in range(g.m):
        assert qa.lightcone_edge_expectation(g, params, e) == dense[e]


def test_lightcone_matches_dense_signed(rng):
    for _ in range(10):
        g = ins.sample_hypergraph(10, 2, 3, rng)
        s = ins.sample_signs(g, rng)
        params = qa.QaoaParams(rng.uniform(-2, 2, 2), rng.uniform(-2, 2, 2))
        dense = qa.dense_edge_expectations(s, params)
        for e in range(g.m):
            assert abs(qa.lightcone_edge_expectation(s, params, e) - dense[e]) <= 1e-10


def test_lightcone_cap():
    g = ins.Hypergraph(10, 2, [[i, i + 1] for i in range(9)])
    with pytest.raises(ValueError):
        qa.lightcone_edge_expectation(g, qa.QaoaParams([0.1] * 3, [0.1] * 3), 4, cap=4)


def test_angle_grid_scan_shape():
    g = ins.Hypergraph(3, 2, [[0, 1], [1, 2]])
    surf = qa.angle_grid_scan(g, [0.0, 0.3], [0.0, 0.2, 0.4])
    assert surf.shape == (2, 3) and np.all(surf[:, 0] == 0)


# --------------------------------------------------------------- sampling


def test_basis_state_sampling(rng):
    amps = np.zeros(16, dtype=complex)
    amps[0b1010] = 1
    spins = qa.sample_output(qa.Statevector(4, amps), rng, shots=50)
    assert np.all(spins == [1, -1, 1, -1])


def test_plus_state_is_fair():
    rng = make_rng((4, 4), 0)
    shots = 100_000
    spins = qa.sample_output(qa.initial_state(5), rng, shots=shots)
    assert np.all(np.abs(spins.mean(axis=0)) <= 4 / math.sqrt(shots))


def test_conditional_bell_pair(rng):
    st = qa.Statevector(2, np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2))
    spins = qa.sample_output(st, rng, fixed={0: -1}, shots=1000)
    assert np.all(spins == -1)
    single = qa.sample_output(st, rng, fixed={1: 1})
    assert single.tolist() == [1, 1]


def test_conditional_zero_mass(rng):
    st = qa.Statevector(2, np.array([1, 0, 0, 0], dtype=complex))
    with pytest.raises(ValueError):
        qa.sample_output(st, rng, fixed={0: -1})
    with pytest.raises(ValueError):
        qa.sample_output(st, rng, fixed={0: 0})


def test_sampling_matches_born_rule():
    rng = make_rng((6, 6), 0)
    st = random_state(4, np.random.default_rng(9))
    shots = 200_000
    spins = qa.sample_output(st, rng, shots=shots)
    idx = ((spins == -1) * (1 << np.arange(4))).sum(axis=1)
    freq = np.bincount(idx, minlength=16) / shots
    p = st.probabilities()
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / shots) + 1e-12)


def test_conditional_sampling_matches_renormalized_block():
    rng = make_rng((6, 7), 0)
    st = random_state(4, np.random.default_rng(10))
    shots = 100_000
    spins = qa.sample_output(st, rng, fixed={2: -1, 0: 1}, shots=shots)
    assert np.all(spins[:, 2] == -1) and np.all(spins[:, 0] == 1)
    idx = ((spins == -1) * (1 << np.arange(4))).sum(axis=1)
    freq = np.bincount(idx, minlength=16) / shots
    b = np.arange(16)
    p = np.where(((b >> 2) & 1 == 1) & (b & 1 == 0), st.probabilities(), 0)
    p /= p.sum()
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / shots) + 1e-12)


def test_measurement_order_invariance():
    gen = np.random.default_rng(12)
    for _ in range(3):
        st = random_state(8, gen)
        ref = qa.chain_rule_distribution(st, list(range(8)))
        assert np.allclose(ref, st.probabilities(), atol=1e-12)
        for _ in range(3):
            order = gen.permutation(8).tolist()
            assert np.allclose(qa.chain_rule_distribution(st, order), ref, atol=1e-12)
        fixed = {3: -1, 5: 1}
        cond = [qa.chain_rule_distribution(st, [3, 5] + o, fixed) for o in
                ([0, 1, 2, 4, 6, 7], [7, 6, 4, 2, 1, 0], [2, 0, 7, 1, 6, 4])]
        assert np.allclose(cond[0], cond[1], atol=1e-12) and np.allclose(cond[0], cond[2], atol=1e-12)


def test_marginal():
    st = random_state(3, np.random.default_rng(1))
    P = st.probabilities()
    m = qa.marginal(st, [2, 0])
    b = np.arange(8)
    for j in range(4):
        want = P[(((b >> 2) & 1) == (j & 1)) & ((b & 1) == (j >> 1))].sum()
        assert m[j] == pytest.approx(want, abs=1e-15)


# --------------------------------------------------------------- Bell circuit


def test_bell_identity_settings(rng):
    E = qa.exact_bell_correlators(0.0, 0.0)
    assert np.allclose(E, E[0, 0]) and qa.chsh(E) <= 2
    res = qa.bell_experiment((0.0, 0.0), 20_000, rng)
    assert res.exact_S <= 2 + 1e-12


def test_bell_closed_form():
    for ta, tb in [(0.3, -1.1), (1.0, 2.0), (math.pi / 3, -math.pi / 3)]:
        want = 1 + math.cos(ta) + math.cos(tb) - math.cos(ta - tb)
        assert qa.chsh(qa.exact_bell_correlators(ta, tb)) == pytest.approx(want, abs=1e-12)


def test_bell_optimum_of_this_circuit_is_five_halves():
    angles, s = qa.optimal_bell_angles()
    assert s == pytest.approx(2.5, abs=1e-9)
    assert qa.chsh(qa.exact_bell_correlators(*angles)) == pytest.approx(2.5, abs=1e-9)


def test_bell_sampled_matches_exact(rng):
    res = qa.bell_experiment((math.pi / 3, -math.pi / 3), 100_000, rng)
    assert abs(res.S - res.exact_S) <= 4 * res.S_std
    assert res.counts.sum() == 100_000


def test_lhv_baseline_closed_form(rng):
    for angles in [(math.pi / 3, -math.pi / 3), (1.0, 2.5), (0.0, 0.0)]:
        res = qa.bell_experiment(angles, 100_000, rng, "lhv")
        assert res.exact_S <= 2 + 1e-12
        assert np.all(np.abs(res.correlators - res.exact_correlators) <= 5 * np.sqrt(1 / res.counts))


def test_bell_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        qa.bell_experiment((0, 0), 0, rng)
    with pytest.raises(ValueError):
        qa.bell_experiment((0, 0), 10, rng, "classical")


# --------------------------------------------------------------- landscape probe


def test_energy_density_spread_shrinks_with_n():
    params = qa.QaoaParams([0.35], [0.4])
    stds = []
    for n in (10, 12, 14):
        vals = []
        for i in range(60):
            r = make_rng((13, n), i)
            g = ins.sample_hypergraph(n, 3, 3, r)
            st, diag = qa.qaoa_state(g, params)
            vals.append(qa.energy_expectation(st, diag) / n)
        stds.append(np.std(vals, ddof=1))
    # qualitative only: the largest n should not be the widest
    assert stds[2] < stds[0] * 1.15

"""Fixed-angle QAOA on hypergraph cost Hamiltonians.

Qubit ``i`` is bit ``i`` of the basis-state index and measuring ``|1>``
yields spin -1. The cost operator is ``H_c = -sum_e prod_{v in e} Z_v``
(times the edge sign for signed instances), so its diagonal coincides with
``instances.energy_table``. One layer applies ``exp(-i gamma_j H_c)`` and
then ``exp(-i beta_j X)`` on every qubit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .instances import (
    Hypergraph,
    Instance,
    SignedInstance,
    ball_of_set,
    dense_cap,
    energy_table,
    split_instance,
)

GATE_CONVENTION = (
    "H_c = -sum_e prod Z_v (x edge sign); layer j = exp(-i beta_j sum X) exp(-i gamma_j H_c); "
    "bit 1 -> spin -1; qubit i = bit i of basis index"
)

NORM_TOL = 1e-10


@dataclass(frozen=True)
class QaoaParams:
    beta: tuple
    gamma: tuple

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        gamma = tuple(float(g) for g in np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        if len(beta) != len(gamma):
            raise ValueError("beta and gamma must have the same length")
        if not all(math.isfinite(a) for a in beta + gamma):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def depth(self) -> int:
        return len(self.beta)


@dataclass(frozen=True)
class Statevector:
    n: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm2(self) -> float:
        return float(np.sum(self.probabilities()))


def _num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if n < 0 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _check_cap(n: int, cap: int | None) -> None:
    cap = dense_cap() if cap is None else cap
    if n > cap:
        raise ValueError(f"{n} qubits exceed the dense cap {cap}")


def build_cost_diagonal(obj: Instance, cap: int | None = None) -> np.ndarray:
    g, _ = split_instance(obj)
    _check_cap(g.n, cap)
    return energy_table(obj, cap=g.n).astype(float)


def initial_state(n: int, kind: str = "plus") -> Statevector:
    dim = 1 << n
    if kind == "plus":
        amps = np.full(dim, 1.0 / math.sqrt(dim), dtype=complex)
    elif kind == "zero":
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
    else:
        raise ValueError(f"unknown initial state {kind!r}")
    return Statevector(n, amps)


def apply_mixer(amps: np.ndarray, n: int, beta: float) -> np.ndarray:
    """exp(-i beta X) on every qubit."""
    c, s = math.cos(beta), math.sin(beta)
    psi = amps.reshape((2,) * n) if n else amps
    for axis in range(n):
        psi = c * psi - 1j * s * np.flip(psi, axis=axis)
    return np.ascontiguousarray(psi).reshape(-1)


def evolve(params: QaoaParams, initial, diag, cap: int | None = None) -> Statevector:
    """Run the depth-p circuit on ``initial`` ("plus", "zero" or a Statevector)."""
    diag = np.asarray(diag, dtype=float)
    n = _num_qubits(diag.size)
    _check_cap(n, cap)
    state = initial_state(n, initial) if isinstance(initial, str) else initial
    if state.amplitudes.size != diag.size:
        raise ValueError("initial state and cost diagonal dimensions differ")
    amps = np.array(state.amplitudes, dtype=complex)
    for beta, gamma in zip(params.beta, params.gamma):
        with np.errstate(invalid="ignore", over="ignore"):
            amps = amps * np.exp(-1j * gamma * diag)
            amps = apply_mixer(amps, n, beta)
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitudes")
        drift = abs(float(np.sum(np.abs(amps) ** 2)) - 1.0)
        if drift > NORM_TOL:
            raise FloatingPointError(f"norm drift {drift:.3e} after a layer")
    return Statevector(n, amps)


def energy_expectation(state: Statevector, diag) -> float:
    diag = np.asarray(diag, dtype=float)
    if diag.size != state.amplitudes.size:
        raise ValueError("state and diagonal dimensions differ")
    return float(np.sum(state.probabilities() * diag))


def z_product_expectation(state: Statevector, qubits) -> float:
    """<prod_{v in qubits} Z_v>; a repeated qubit contributes Z^2 = I."""
    mask = 0
    for q in qubits:
        mask ^= 1 << int(q)
    idx = np.arange(state.amplitudes.size, dtype=np.uint64)
    parity = np.bitwise_count(idx & np.uint64(mask)) & 1
    return float(np.sum(state.probabilities() * (1.0 - 2.0 * parity)))


def qaoa_state(obj: Instance, params: QaoaParams, initial: str = "plus", cap: int | None = None):
    diag = build_cost_diagonal(obj, cap=cap)
    return evolve(params, initial, diag, cap=cap), diag


# ---------------------------------------------------------------------------
# lightcone
# ---------------------------------------------------------------------------


def lightcone_subinstance(obj: Instance, sources, p: int):
    """Sub-instance seen by a depth-p circuit measured on ``sources``.

    Keeps every edge touching a vertex within distance p-1 of the sources
    (with multiplicity and original order) and relabels the ball's vertices
    in increasing order. Returns ``(sub_instance, vertex_map)`` where
    ``vertex_map[new] = old``.
    """
    g, _ = split_instance(obj)
    b = ball_of_set(g, sources, p)
    vertex_map = np.array(sorted(b.vertices), dtype=np.int64)
    relabel = {int(old): new for new, old in enumerate(vertex_map)}
    eids = np.array(sorted(b.edges), dtype=np.int64)
    sub_edges = np.array(
        [[relabel[v] for v in g.edges[e].tolist()] for e in eids], dtype=np.int64
    ).reshape(-1, g.k)
    sub = Hypergraph(len(vertex_map), g.k, sub_edges)
    if isinstance(obj, SignedInstance):
        sub = SignedInstance(sub, obj.signs[eids].reshape(-1, g.k))
    return sub, vertex_map


def lightcone_edge_expectation(
    obj: Instance, params: QaoaParams, edge: int, initial: str = "plus", cap: int | None = None
) -> float:
    """<prod_{v in e} Z_v> from a simulation of edge e's lightcone only."""
    g, _ = split_instance(obj)
    if not 0 <= edge < g.m:
        raise ValueError(f"edge id {edge} out of range")
    verts = g.edges[edge].tolist()
    sub, vmap = lightcone_subinstance(obj, dict.fromkeys(verts), params.depth)
    sub_n = split_instance(sub)[0].n
    _check_cap(sub_n, cap)
    relabel = {int(old): new for new, old in enumerate(vmap)}
    state, _ = qaoa_state(sub, params, initial, cap=sub_n)
    return z_product_expectation(state, [relabel[v] for v in verts])


def dense_edge_expectations(obj: Instance, params: QaoaParams, initial: str = "plus", cap=None):
    g, _ = split_instance(obj)
    state, _ = qaoa_state(obj, params, initial, cap=cap)
    return np.array([z_product_expectation(state, g.edges[e].tolist()) for e in range(g.m)])


def angle_grid_scan(obj: Instance, betas, gammas, initial: str = "plus", cap=None) -> np.ndarray:
    """<H_c> on a (beta, gamma) grid at depth 1."""
    diag = build_cost_diagonal(obj, cap=cap)
    out = np.empty((len(betas), len(gammas)))
    for i, b in enumerate(betas):
        for j, gm in enumerate(gammas):
            out[i, j] = energy_expectation(evolve(QaoaParams((b,), (gm,)), initial, diag), diag)
    return out


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------


def _prefix_marginals(probs: np.ndarray, n: int, order) -> list[np.ndarray]:
    """Flattened marginals over the first j qubits of ``order``, j = 0..n."""
    P = probs.reshape((2,) * n) if n else probs
    T = np.transpose(P, [n - 1 - q for q in order]) if n else P
    M = [None] * (n + 1)
    M[n] = np.ascontiguousarray(T)
    for j in range(n - 1, -1, -1):
        M[j] = M[j + 1].sum(axis=-1)
    return [np.asarray(m).reshape(-1) for m in M]


MASS_TOL = 1e-15


def _measurement_order(n, fixed, order):
    fixed = {} if fixed is None else {int(q): int(s) for q, s in fixed.items()}
    for q, s in fixed.items():
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range")
        if s not in (-1, 1):
            raise ValueError("fixed values must be spins +1 or -1")
    if order is None:
        order = list(fixed) + [q for q in range(n) if q not in fixed]
    order = [int(q) for q in order]
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the qubits")
    if set(order[: len(fixed)]) != set(fixed):
        raise ValueError("fixed qubits must come first in the measurement order")
    return fixed, order


def sample_output(
    state: Statevector,
    rng: np.random.Generator,
    fixed: dict | None = None,
    shots: int | None = None,
    order=None,
) -> np.ndarray:
    """Born-rule spin samples by sequential single-qubit measurement.

    ``fixed`` maps qubits to required spins; those qubits are measured
    first with forced outcomes and the rest are drawn from the renormalized
    conditional block. Raises if the fixed outcome has zero mass. Returns a
    length-n spin vector, or a (shots, n) array when ``shots`` is given.
    """
    n = state.n
    fixed, order = _measurement_order(n, fixed, order)
    M = _prefix_marginals(state.probabilities(), n, order)
    count = 1 if shots is None else int(shots)
    prefix = np.zeros(count, dtype=np.int64)
    bits = np.zeros((count, n), dtype=np.int8)
    for j, q in enumerate(order):
        flat = M[j + 1]
        p0 = flat[2 * prefix]
        p1 = flat[2 * prefix + 1]
        if q in fixed:
            b = 1 if fixed[q] == -1 else 0
            if float((p1 if b else p0)[0]) < MASS_TOL:
                raise ValueError("conditioning event has zero probability")
            choice = np.full(count, b, dtype=np.int64)
        else:
            choice = (rng.random(count) * (p0 + p1) >= p0).astype(np.int64)
        prefix = 2 * prefix + choice
        bits[:, q] = choice
    spins = (1 - 2 * bits.astype(np.int64)).astype(np.int64)
    return spins[0] if shots is None else spins


def chain_rule_distribution(state: Statevector, order, fixed: dict | None = None) -> np.ndarray:
    """Joint law of all qubits rebuilt from sequential conditionals in ``order``.

    With ``fixed`` the result is the conditional law given those spins,
    indexed by basis state like ``state.probabilities()``.
    """
    n = state.n
    fixed, order = _measurement_order(n, fixed, order)
    M = _prefix_marginals(state.probabilities(), n, order)
    dim = 1 << n
    out = np.zeros(dim)
    prefixes = np.arange(dim, dtype=np.int64)  # prefix over the full order
    weight = np.ones(dim)
    for j, q in enumerate(order):
        pre = prefixes >> (n - 1 - j)
        parent = pre >> 1
        b = pre & 1
        tot = M[j + 1][2 * parent] + M[j + 1][2 * parent + 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(tot > 0, M[j + 1][pre] / tot, 0.0)
        if q in fixed:
            cond = (b == (1 if fixed[q] == -1 else 0)).astype(float) * (tot > 0)
        weight = weight * cond
    # map prefix-ordered index back to basis index
    basis = np.zeros(dim, dtype=np.int64)
    for j, q in enumerate(order):
        basis |= ((prefixes >> (n - 1 - j)) & 1) << q
    out[basis] = weight
    return out


def marginal(state: Statevector, qubits) -> np.ndarray:
    """Joint bit distribution of ``qubits``; entry index bit j <-> qubits[j]."""
    n = state.n
    qubits = [int(q) for q in qubits]
    P = state.probabilities().reshape((2,) * n)
    others = tuple(n - 1 - q for q in range(n) if q not in qubits)
    red = P.sum(axis=others) if others else P
    # remaining axes are in decreasing qubit order; reorder to qubits[::-1]
    kept = sorted(qubits, reverse=True)
    red = np.transpose(red, [kept.index(q) for q in reversed(qubits)])
    return np.ascontiguousarray(red).reshape(-1)


# ---------------------------------------------------------------------------
# Bell experiment on the four-vertex interference graph
# ---------------------------------------------------------------------------

A_C, A_E, B_E, B_C = 0, 1, 2, 3

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _apply_1q(psi: np.ndarray, n: int, U: np.ndarray, q: int) -> np.ndarray:
    ax = n - 1 - q
    out = np.tensordot(U, psi, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def _apply_controlled(psi: np.ndarray, n: int, U: np.ndarray, control: int, target: int) -> np.ndarray:
    cax = n - 1 - control
    psi = psi.copy()
    sel = [slice(None)] * n
    sel[cax] = 1
    sub = psi[tuple(sel)]
    tax = n - 1 - target
    tax_sub = tax if tax < cax else tax - 1
    sub = np.moveaxis(np.tensordot(U, sub, axes=([1], [tax_sub])), 0, tax_sub)
    psi[tuple(sel)] = sub
    return psi


def bell_state(theta_a: float, theta_b: float) -> Statevector:
    """Four-qubit circuit: H on a_c, a_e, b_c; CNOT a_e -> b_e; C-U from each control."""
    n = 4
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for q in (A_C, A_E, B_C):
        psi = _apply_1q(psi, n, _H, q)
    X = np.array([[0, 1], [1, 0]], dtype=complex)
    psi = _apply_controlled(psi, n, X, A_E, B_E)
    psi = _apply_controlled(psi, n, ry(theta_a), A_C, A_E)
    psi = _apply_controlled(psi, n, ry(theta_b), B_C, B_E)
    return Statevector(n, psi.reshape(-1))


def _correlators_from_probs(probs: np.ndarray) -> np.ndarray:
    idx = np.arange(16)
    bit = lambda q: (idx >> q) & 1
    prod = (1 - 2 * bit(A_E)) * (1 - 2 * bit(B_E))
    E = np.zeros((2, 2))
    for sa in (0, 1):
        for sb in (0, 1):
            sel = (bit(A_C) == sa) & (bit(B_C) == sb)
            E[sa, sb] = np.sum(probs[sel] * prod[sel]) / np.sum(probs[sel])
    return E


def chsh(E: np.ndarray) -> float:
    return float(E[0, 0] + E[0, 1] + E[1, 0] - E[1, 1])


def exact_bell_correlators(theta_a: float, theta_b: float) -> np.ndarray:
    return _correlators_from_probs(bell_state(theta_a, theta_b).probabilities())


def optimal_bell_angles(starts: int = 16, seed: int = 0) -> tuple[tuple[float, float], float]:
    """Numerically maximize the exact CHSH value of the circuit over both angles."""
    rng = np.random.default_rng(seed)
    best_x, best_s = None, -np.inf
    for x0 in rng.uniform(-np.pi, np.pi, size=(starts, 2)):
        res = minimize(lambda v: -chsh(exact_bell_correlators(*v)), x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        if -res.fun > best_s:
            best_x, best_s = res.x, -res.fun
    return (float(best_x[0]), float(best_x[1])), float(best_s)


@dataclass(frozen=True)
class BellResult:
    correlators: np.ndarray  # E[s_a, s_b]
    counts: np.ndarray
    S: float
    S_std: float
    exact_correlators: np.ndarray
    exact_S: float
    baseline: str


def _wrap(angle):
    return abs((angle + np.pi) % (2 * np.pi) - np.pi)


def _lhv_exact(theta_a, theta_b):
    a = (0.0, theta_a / 2)
    b = (0.0, theta_b / 2)
    E = np.array([[1.0 - 2.0 * _wrap(a[i] - b[j]) / np.pi for j in (0, 1)] for i in (0, 1)])
    return E


def _lhv_samples(theta_a, theta_b, shots, rng):
    """Radius-1 factor-of-i.i.d. rule on the interference graph.

    Each vertex draws a uniform label. A control vertex outputs its setting
    bit from its own label; an entangled-role vertex reads its control's
    label and the hidden variable (label(a_e) + label(b_e)) mod 1, both of
    which lie in its 1-ball.
    """
    X = rng.random((shots, 4))
    sa = (X[:, A_C] >= 0.5).astype(np.int64)
    sb = (X[:, B_C] >= 0.5).astype(np.int64)
    lam = 2 * np.pi * ((X[:, A_E] + X[:, B_E]) % 1.0)
    ang_a = np.where(sa == 1, theta_a / 2, 0.0)
    ang_b = np.where(sb == 1, theta_b / 2, 0.0)
    out_a = np.where(np.cos(lam - ang_a) >= 0, 1, -1)
    out_b = np.where(np.cos(lam - ang_b) >= 0, 1, -1)
    return sa, sb, out_a, out_b


def bell_experiment(angles, shots: int, rng: np.random.Generator, baseline: str = "quantum") -> BellResult:
    """CHSH statistic S = E00 + E01 + E10 - E11 from ``shots`` runs.

    ``angles`` are the Y-rotation angles of U on Alice's and Bob's side.
    ``baseline="lhv"`` runs a local-hidden-variable factor rule on the same
    graph instead of the quantum circuit.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    theta_a, theta_b = (float(a) for a in angles)
    if baseline == "quantum":
        state = bell_state(theta_a, theta_b)
        spins = sample_output(state, rng, shots=shots)
        sa = (spins[:, A_C] == -1).astype(np.int64)
        sb = (spins[:, B_C] == -1).astype(np.int64)
        out_a, out_b = spins[:, A_E], spins[:, B_E]
        exact = _correlators_from_probs(state.probabilities())
    elif baseline == "lhv":
        sa, sb, out_a, out_b = _lhv_samples(theta_a, theta_b, shots, rng)
        exact = _lhv_exact(theta_a, theta_b)
    else:
        raise ValueError(f"unknown baseline {baseline!r}")
    E = np.zeros((2, 2))
    counts = np.zeros((2, 2), dtype=np.int64)
    var = 0.0
    prod = out_a * out_b
    for i in (0, 1):
        for j in (0, 1):
            sel = (sa == i) & (sb == j)
            counts[i, j] = int(sel.sum())
            if counts[i, j]:
                E[i, j] = float(prod[sel].mean())
                var += (1.0 - E[i, j] ** 2) / counts[i, j]
    return BellResult(E, counts, chsh(E), math.sqrt(var), exact, chsh(exact), baseline)

"""Experiment configs, result records and the small-n experiment suites.

A run writes a CSV table plus a JSON sidecar. The CSV starts with comment
lines carrying the schema version, the experiment kind, the config hash and
the gate convention, so two runs of the same config produce identical
bytes. Wall-clock time goes only into the sidecar.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from . import branching as br
from . import concentration as conc
from . import qaoa as qa
from .instances import (
    SignedInstance,
    energy_table,
    hamiltonian,
    hamming_weight,
    sample_coupled,
    sample_hypergraph,
    sample_signs,
)
from .localalg import LocalAlgorithmSpec, overlap_curve, run_many
from .rng import make_rng, map_streams, normalize_seed

SCHEMA_VERSION = 1
KINDS = ("overlap-curve", "mcdiarmid", "branching", "concentration", "ogp-probe", "bell", "tail")


def _tuple(v):
    if v is None:
        return ()
    if isinstance(v, (list, tuple)):
        return tuple(v)
    return (v,)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: tuple = ()
    d: float = 3.0
    k: int = 4
    t_grid: tuple = ()
    signed: bool = False
    algo: dict | None = None
    trials: int = 1000
    seed: tuple = (0, 0)
    params: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        object.__setattr__(self, "n", tuple(int(v) for v in _tuple(self.n)))
        object.__setattr__(self, "t_grid", tuple(float(v) for v in _tuple(self.t_grid)))
        object.__setattr__(self, "seed", normalize_seed(self.seed))
        object.__setattr__(self, "params", dict(self.params))
        if self.algo is not None:
            LocalAlgorithmSpec.from_dict(self.algo)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["n"] = list(self.n)
        out["t_grid"] = list(self.t_grid)
        out["seed"] = list(self.seed)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """sha256 of the fields that influence results (not out, format, threads)."""
        d = self.to_dict()
        for key in ("out", "format", "threads"):
            d.pop(key)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @property
    def spec(self) -> LocalAlgorithmSpec:
        if self.algo is None:
            return LocalAlgorithmSpec("factor-iid-threshold", 1)
        return LocalAlgorithmSpec.from_dict(self.algo)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ResultRecord:
    kind: str
    config_hash: str
    columns: list
    rows: list
    streams: list  # per row: [first stream id, stop]
    config: dict | None = None
    wall_clock: float = 0.0
    notes: dict = field(default_factory=dict)

    def header_lines(self) -> list[str]:
        return [
            f"# ogp-lab v{SCHEMA_VERSION} kind={self.kind} config={self.config_hash}",
            f"# gates: {qa.GATE_CONVENTION}",
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": SCHEMA_VERSION,
                "kind": self.kind,
                "config_hash": self.config_hash,
                "columns": self.columns,
                "rows": [[_jsonable(v) for v in r] for r in self.rows],
            },
            sort_keys=True,
        )

    def sidecar(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "config_hash": self.config_hash,
            "config": self.config,
            "streams": self.streams,
            "stream_rule": "trial rng = Philox(SeedSequence(seed_hi << 64 | seed_lo, spawn_key=(stream,)))",
            "gates": qa.GATE_CONVENTION,
            "wall_clock_seconds": self.wall_clock,
            "notes": self.notes,
        }

    def write(self, path, fmt: str = "csv") -> tuple[Path, Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv() if fmt == "csv" else self.to_json())
        side = path.with_name(path.name + ".meta.json")
        side.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True))
        return path, side

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _jsonable(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        return [], []
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def std_ci(vals: np.ndarray, level: float = 0.95) -> tuple[float, float, float]:
    """Sample std and its chi-square confidence interval."""
    vals = np.asarray(vals, dtype=float)
    T = vals.size
    s = float(np.std(vals, ddof=1)) if T > 1 else 0.0
    if T < 2:
        return s, 0.0, math.inf
    a = (1.0 - level) / 2.0
    lo = s * math.sqrt((T - 1) / chi2.ppf(1.0 - a, T - 1))
    hi = s * math.sqrt((T - 1) / chi2.ppf(a, T - 1))
    return s, lo, hi


@dataclass(frozen=True)
class ConcentrationRow:
    n: int
    trials: int
    weight: tuple  # (std, ci_low, ci_high) of |sigma| / n
    energy: tuple  # same for H / n
    overlap: tuple  # same for R of two runs on one instance


@dataclass(frozen=True)
class ConcentrationTable:
    rows: list

    def decreasing(self, metric: str) -> bool:
        """Point estimates strictly decrease and each one falls below the previous CI."""
        vals = [getattr(r, metric) for r in self.rows]
        return all(b[0] < a[0] and b[0] < a[1] for a, b in zip(vals, vals[1:]))


def concentration_suite(
    n_list,
    d: float,
    k: int,
    spec: LocalAlgorithmSpec,
    trials: int,
    seed=(0, 0),
    threads: int = 1,
    signed: bool = False,
    offset: int = 0,
) -> ConcentrationTable:
    """Across-instance spread of |sigma|/n, H/n and R at each n.

    Each trial samples a fresh instance and two independent runs of the
    algorithm on it. For the qaoa kind the energy column uses the exact
    expectation of H_c instead of a sampled energy.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n list must be increasing")
    rows = []
    for j, n in enumerate(n_list):

        def one(rng, i, n=n):
            g = sample_hypergraph(n, d, k, rng)
            inst = sample_signs(g, rng) if signed else g
            if spec.kind == "qaoa":
                state, diag = qa.qaoa_state(inst, spec.params, spec.initial)
                runs = qa.sample_output(state, rng, shots=2)
                h = qa.energy_expectation(state, diag)
            else:
                runs = run_many(spec, g, 2, rng)
                h = hamiltonian(inst, runs[0])
            w = hamming_weight(runs[0]) / n
            r = float(runs[0] @ runs[1]) / n
            return w, h / n, r

        vals = np.array(map_streams(one, trials, seed, threads, offset=offset + j * trials))
        rows.append(ConcentrationRow(n, trials, std_ci(vals[:, 0]), std_ci(vals[:, 1]), std_ci(vals[:, 2])))
    return ConcentrationTable(rows)


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along a length-2^n vector."""
    a = np.array(a, dtype=float)
    n = a.size.bit_length() - 1
    h = a.reshape((2,) * n) if n else a
    for ax in range(n):
        x0 = np.take(h, 0, axis=ax)
        x1 = np.take(h, 1, axis=ax)
        h = np.stack([x0 + x1, x0 - x1], axis=ax)
    return h.reshape(-1)


def near_optimal_mask(table: np.ndarray, eta: float) -> np.ndarray:
    """Configurations with H >= H_min + (1 - eta)(H* - H_min)."""
    lo, hi = float(table.min()), float(table.max())
    return table >= lo + (1.0 - eta) * (hi - lo) - 1e-9


def distance_counts(mask1: np.ndarray, mask2: np.ndarray) -> np.ndarray:
    """Number of (b1, b2) in S1 x S2 at each Hamming distance 0..n."""
    N = mask1.size
    n = N.bit_length() - 1
    conv = fwht(fwht(mask1) * fwht(mask2)) / N
    conv = np.rint(conv).astype(np.int64)
    w = np.bitwise_count(np.arange(N, dtype=np.uint64)).astype(np.int64)
    return np.bincount(w, weights=conv, minlength=n + 1).astype(np.int64)


@dataclass(frozen=True)
class OgpHistogram:
    n: int
    abs_overlap: np.ndarray
    counts: np.ndarray
    signed_overlap: np.ndarray  # full R histogram support
    signed_counts: np.ndarray


def ogp_probe(
    n: int,
    d: float,
    k: int,
    eta: float,
    t: float,
    trials: int,
    seed=(0, 0),
    signed: bool = False,
    threads: int = 1,
) -> OgpHistogram:
    """Histogram of overlaps between near-optimal solutions of coupled pairs."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")

    def one(rng, i):
        pair = sample_coupled(n, d, k, t, rng)
        g1, g2 = pair.g1, pair.g2
        if signed:
            s_shared = 1 - 2 * rng.integers(0, 2, size=(pair.n_shared, k))
            s1 = 1 - 2 * rng.integers(0, 2, size=(g1.m - pair.n_shared, k))
            s2 = 1 - 2 * rng.integers(0, 2, size=(g2.m - pair.n_shared, k))
            i1 = SignedInstance(g1, np.concatenate([s_shared, s1]).reshape(-1, k))
            i2 = SignedInstance(g2, np.concatenate([s_shared, s2]).reshape(-1, k))
        else:
            i1, i2 = g1, g2
        m1 = near_optimal_mask(energy_table(i1), eta)
        m2 = near_optimal_mask(energy_table(i2), eta)
        return distance_counts(m1, m2)

    per = map_streams(one, trials, seed, threads)
    total = np.sum(np.stack(per), axis=0)
    h = np.arange(n + 1)
    R = (n - 2 * h) / n
    absR = np.abs(R)
    uniq = np.unique(absR)
    abs_counts = np.array([total[absR == a].sum() for a in uniq], dtype=np.int64)
    order = np.argsort(R)
    return OgpHistogram(n, uniq, abs_counts, R[order], total[order])


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _grid(params: dict, key: str, default):
    return _tuple(params.get(key, default))


def _overlap_rows(cfg: ExperimentConfig, threads: int):
    n = cfg.n[0] if cfg.n else 200
    t_plus = cfg.params.get("t_plus")
    pts = overlap_curve(cfg.spec, n, cfg.d, cfg.k, cfg.t_grid, cfg.trials, cfg.seed, t_plus, threads)
    cols = ["t", "mean", "std", "ci_low", "ci_high", "trials"]
    rows = [[p.t, p.mean, p.std, p.ci_low, p.ci_high, p.trials] for p in pts]
    streams = [[g * cfg.trials, (g + 1) * cfg.trials] for g in range(len(pts))]
    return cols, rows, streams


def _mcdiarmid_rows(cfg: ExperimentConfig, threads: int):
    p = cfg.params
    cols = ["n", "p", "c", "eps", "biased", "standard", "fan"]
    rows = []
    for n in _grid(p, "n", cfg.n or 100):
        for q in _grid(p, "p", 0.01):
            for c in _grid(p, "c", 1.0):
                for eps in _grid(p, "eps", 10.0):
                    n, q, c, eps = int(n), float(q), float(c), float(eps)
                    rows.append([
                        n, q, c, eps,
                        conc.biased_mcdiarmid_bound(n, q, c, eps),
                        conc.standard_mcdiarmid_bound(n, c, eps),
                        conc.fan_bound(eps / c, q * (2.0 - q) * n),
                    ])
    return cols, rows, [[0, 0] for _ in rows]


def _branching_rows(cfg: ExperimentConfig, threads: int):
    p = cfg.params
    mode = p.get("mode", "dominating")
    grid = [
        (float(d), int(k), int(x), float(u))
        for d in _grid(p, "d", cfg.d)
        for k in _grid(p, "k", cfg.k)
        for x in _grid(p, "x", 2)
        for u in _grid(p, "u", 4.0)
    ]

    def one(rng, i):
        d, k, x, u = grid[i]
        return br.tail_check(d, k, x, u, cfg.trials, rng, mode)

    checks = map_streams(one, len(grid), cfg.seed, threads)
    cols = ["d", "k", "x", "u", "threshold", "empirical", "radius", "bound", "passed", "truncated"]
    rows = [[c.d, c.k, c.x, c.u, c.threshold, c.empirical, c.radius, c.bound, c.passed, c.truncated]
            for c in checks]
    return cols, rows, [[i, i + 1] for i in range(len(grid))]


def _concentration_rows(cfg: ExperimentConfig, threads: int):
    n_list = cfg.n or (100, 200, 400)
    table = concentration_suite(n_list, cfg.d, cfg.k, cfg.spec, cfg.trials, cfg.seed, threads, cfg.signed)
    cols = ["n", "trials"]
    for m in ("weight", "energy", "overlap"):
        cols += [f"{m}_std", f"{m}_ci_low", f"{m}_ci_high"]
    rows = [[r.n, r.trials, *r.weight, *r.energy, *r.overlap] for r in table.rows]
    streams = [[j * cfg.trials, (j + 1) * cfg.trials] for j in range(len(rows))]
    return cols, rows, streams


def _ogp_rows(cfg: ExperimentConfig, threads: int):
    n = cfg.n[0] if cfg.n else 12
    p = cfg.params
    t = float(cfg.t_grid[0]) if cfg.t_grid else float(p.get("t", 0.0))
    hist = ogp_probe(n, cfg.d, cfg.k, float(p.get("eta", 0.05)), t, cfg.trials, cfg.seed, cfg.signed, threads)
    tot = int(hist.counts.sum())
    rows = [[float(a), int(c), (int(c) / tot if tot else 0.0)] for a, c in zip(hist.abs_overlap, hist.counts)]
    return ["abs_overlap", "count", "fraction"], rows, [[0, cfg.trials] for _ in rows]


def _bell_rows(cfg: ExperimentConfig, threads: int):
    p = cfg.params
    if "angles" in p:
        angles = tuple(float(a) for a in p["angles"])
    else:
        angles, _ = qa.optimal_bell_angles()
    res = qa.bell_experiment(angles, cfg.trials, make_rng(cfg.seed, 0), p.get("baseline", "quantum"))
    cols = ["s_a", "s_b", "E", "count", "exact_E"]
    rows = [[a, b, res.correlators[a, b], res.counts[a, b], res.exact_correlators[a, b]]
            for a in (0, 1) for b in (0, 1)]
    rows.append(["S", "", res.S, int(res.counts.sum()), res.exact_S])
    rows.append(["S_std", "", res.S_std, 0, 0.0])
    return cols, rows, [[0, 1] for _ in rows]


def _tail_rows(cfg: ExperimentConfig, threads: int):
    p = cfg.params
    n = cfg.n[0] if cfg.n else 200
    q = float(p.get("p", 0.02))
    dist = conc.biased_distribution(2, q)
    eps_list = _grid(p, "eps", (10.0, 15.0, 20.0))

    def one(rng, i):
        return conc.empirical_tail(lambda xs: xs.sum(axis=1), dist, n, float(eps_list[i]), cfg.trials, rng)

    ests = map_streams(one, len(eps_list), cfg.seed, threads)
    cols = ["n", "p", "eps", "empirical", "radius", "bound", "mean"]
    rows = [[n, q, float(e), t.probability, t.radius, conc.biased_mcdiarmid_bound(n, q, 1.0, float(e)), t.mean]
            for e, t in zip(eps_list, ests)]
    return cols, rows, [[i, i + 1] for i in range(len(rows))]


_DISPATCH = {
    "overlap-curve": _overlap_rows,
    "mcdiarmid": _mcdiarmid_rows,
    "branching": _branching_rows,
    "concentration": _concentration_rows,
    "ogp-probe": _ogp_rows,
    "bell": _bell_rows,
    "tail": _tail_rows,
}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, write: bool = True) -> ResultRecord:
    """Run one config; write CSV/JSON plus a sidecar when ``cfg.out`` is set."""
    threads = cfg.threads if threads is None else threads
    start = time.perf_counter()
    cols, rows, streams = _DISPATCH[cfg.kind](cfg, threads)
    rec = ResultRecord(cfg.kind, cfg.digest(), cols, rows, streams, cfg.to_dict())
    rec.wall_clock = time.perf_counter() - start
    if write and cfg.out:
        rec.write(cfg.out, cfg.format)
    return rec


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

_SERIES = {
    "overlap-curve": [("mean", ["t", "mean", "ci_low", "ci_high", "std"])],
    "concentration": [
        (m, ["n", f"{m}_std", f"{m}_ci_low", f"{m}_ci_high"]) for m in ("weight", "energy", "overlap")
    ],
    "ogp-probe": [("hist", ["abs_overlap", "count", "fraction"])],
    "branching": [("tail", ["u", "empirical", "radius", "bound"])],
    "tail": [("tail", ["eps", "empirical", "radius", "bound"])],
}


def _numeric_columns(rec: ResultRecord) -> list[str]:
    out = []
    for i, c in enumerate(rec.columns):
        if all(isinstance(r[i], (int, float, np.integer, np.floating)) for r in rec.rows):
            out.append(c)
    return out


def emit_plotdata(rec: ResultRecord, directory, stem: str | None = None, svg: bool = False) -> list[Path]:
    """Whitespace-separated data files (one per series) and an optional SVG."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or rec.kind
    series = _SERIES.get(rec.kind, [("data", _numeric_columns(rec))])
    paths = []
    for name, cols in series:
        idx = [rec.columns.index(c) for c in cols] if rec.rows or rec.columns else []
        path = directory / f"{stem}.{name}.dat"
        lines = [f"# ogp-lab v{SCHEMA_VERSION} kind={rec.kind} config={rec.config_hash}", "# " + " ".join(cols)]
        for r in rec.rows:
            lines.append(" ".join(_fmt(r[i]) for i in idx))
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
        if svg and rec.rows:
            paths.append(_svg(directory / f"{stem}.{name}.svg", cols, [[r[i] for i in idx] for r in rec.rows]))
    return paths


def _svg(path: Path, cols, rows) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    arr = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(arr[:, 0], arr[:, 1], marker="o")
    if arr.shape[1] >= 4 and cols[2].endswith("ci_low"):
        ax.fill_between(arr[:, 0], arr[:, 2], arr[:, 3], alpha=0.25)
    ax.set_xlabel(cols[0])
    ax.set_ylabel(cols[1])
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def read_plotdata(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = [ln for ln in text if ln.startswith("#")]
    cols = header[-1][1:].split() if header else []
    rows = [[float(v) for v in ln.split()] for ln in text if ln and not ln.startswith("#")]
    return cols, np.array(rows, dtype=float).reshape(-1, len(cols))

"""``ogp-lab`` command line entry point."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import branching as br
from . import harness as hs
from . import instances as ins
from . import qaoa as qa
from .rng import make_rng, normalize_seed


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(" ", "").split(",") if v]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


def _algo(args) -> dict:
    out = {"kind": args.algo, "radius": args.radius, "threshold": args.threshold}
    if args.algo == "qaoa":
        out["beta"] = _floats(args.beta)
        out["gamma"] = _floats(args.gamma)
    return out


def _emit(rec: hs.ResultRecord, args) -> None:
    if args.out:
        rec.write(args.out, args.format)
    else:
        sys.stdout.write(rec.to_csv() if args.format == "csv" else rec.to_json() + "\n")


def _record(kind: str, cols, rows, args, extra: dict) -> hs.ResultRecord:
    cfg = {"kind": kind, "seed": list(normalize_seed(args.seed)), **extra}
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
    return hs.ResultRecord(kind, digest, cols, rows, [[0, 1] for _ in rows], cfg)


def _write_text(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# instance commands
# ---------------------------------------------------------------------------


def cmd_sample(args):
    seed = normalize_seed(args.seed)
    rng = make_rng(seed, 0)
    if args.t is not None:
        pair = ins.sample_coupled(args.n, args.d, args.k, args.t, rng)
        data = {
            "g1": ins.instance_to_dict(pair.g1, seed),
            "g2": ins.instance_to_dict(pair.g2, seed),
            "n_shared": pair.n_shared,
            "t": pair.t,
        }
        _write_text(json.dumps(data) + "\n", args.out)
        return 0
    g = ins.sample_hypergraph(args.n, args.d, args.k, rng)
    obj = ins.sample_signs(g, rng) if args.signed else g
    _write_text(ins.dumps_instance(obj, seed) + "\n", args.out)
    return 0


def _sigma(args, n):
    if args.sigma:
        return np.array(_ints(args.sigma), dtype=np.int64)
    if args.bits:
        return ins.spins_from_bits(_ints(args.bits))
    raise SystemExit("give --sigma or --bits")


def cmd_energy(args):
    obj = ins.load_instance(args.instance)
    g, _ = ins.split_instance(obj)
    sigma = _sigma(args, g.n)
    x = ((1 - ins.as_spins(sigma, g.n)) // 2).tolist()
    rows = [[ins.hamiltonian(obj, sigma), ins.xor_value(obj, x), g.m]]
    _emit(_record("energy", ["H", "val", "m"], rows, args, {"instance": args.instance}), args)
    return 0


def cmd_brute_force(args):
    obj = ins.load_instance(args.instance)
    res = ins.brute_force_max(obj)
    rows = [[res.optimum, res.count, " ".join(str(int(s)) for s in res.argmax)]]
    _emit(_record("brute-force", ["optimum", "count", "argmax"], rows, args, {"instance": args.instance}), args)
    return 0


def _params(args) -> qa.QaoaParams:
    beta, gamma = _floats(args.beta), _floats(args.gamma)
    if len(beta) != args.p or len(gamma) != args.p:
        raise SystemExit("--beta and --gamma need exactly p values")
    return qa.QaoaParams(beta, gamma)


def cmd_qaoa_run(args):
    obj = ins.load_instance(args.instance)
    params = _params(args)
    state, diag = qa.qaoa_state(obj, params, args.initial)
    rng = make_rng(args.seed, 0)
    rows = [["expectation", qa.energy_expectation(state, diag), ""]]
    if args.shots:
        spins = qa.sample_output(state, rng, shots=args.shots)
        for i, s in enumerate(spins):
            rows.append([f"shot{i}", ins.hamiltonian(obj, s), " ".join(str(int(v)) for v in s)])
    extra = {"instance": args.instance, "beta": list(params.beta), "gamma": list(params.gamma)}
    _emit(_record("qaoa-run", ["row", "energy", "spins"], rows, args, extra), args)
    return 0


def cmd_lightcone_check(args):
    obj = ins.load_instance(args.instance)
    g, _ = ins.split_instance(obj)
    params = _params(args)
    dense = qa.dense_edge_expectations(obj, params, args.initial)
    rows = []
    for e in range(g.m):
        sub, vmap = qa.lightcone_subinstance(obj, dict.fromkeys(g.edges[e].tolist()), params.depth)
        lc = qa.lightcone_edge_expectation(obj, params, e, args.initial)
        rows.append([e, len(vmap), lc, float(dense[e]), abs(lc - float(dense[e]))])
    extra = {"instance": args.instance, "beta": list(params.beta), "gamma": list(params.gamma)}
    cols = ["edge_id", "ball_size", "lightcone", "dense", "abs_diff"]
    _emit(_record("lightcone-check", cols, rows, args, extra), args)
    return 0


def cmd_nbhd_stats(args):
    obj = ins.load_instance(args.instance)
    g, _ = ins.split_instance(obj)
    st = br.neighborhood_stats(g, args.p, args.A)
    rows = [[st.p, st.max, st.mean, st.quantiles[0.5], st.quantiles[0.9], st.quantiles[0.99],
             "" if st.threshold is None else st.threshold,
             "" if st.exceed_fraction is None else st.exceed_fraction]]
    cols = ["p", "max", "mean", "q50", "q90", "q99", "threshold", "exceed_fraction"]
    _emit(_record("nbhd-stats", cols, rows, args, {"instance": args.instance, "A": args.A}), args)
    return 0


# ---------------------------------------------------------------------------
# experiment commands
# ---------------------------------------------------------------------------


def _run_cfg(args, **kw):
    cfg = hs.ExperimentConfig(seed=normalize_seed(args.seed), out=args.out, format=args.format,
                              threads=args.threads, **kw)
    rec = hs.run_experiment(cfg)
    if not args.out:
        sys.stdout.write(rec.to_csv() if args.format == "csv" else rec.to_json() + "\n")
    return 0


def cmd_overlap_curve(args):
    params = {} if args.t_plus is None else {"t_plus": args.t_plus}
    return _run_cfg(args, kind="overlap-curve", n=args.n, d=args.d, k=args.k, t_grid=_floats(args.t_grid),
                    algo=_algo(args), trials=args.trials, params=params)


def cmd_mcdiarmid(args):
    params = {"n": _ints(args.n), "p": _floats(args.p), "c": _floats(args.c), "eps": _floats(args.eps)}
    return _run_cfg(args, kind="mcdiarmid", params=params)


def cmd_branching(args):
    params = {"d": _floats(args.d), "k": _ints(args.k), "x": _ints(args.x), "u": _floats(args.u),
              "mode": args.mode}
    return _run_cfg(args, kind="branching", trials=args.trials, params=params)


def cmd_concentration(args):
    return _run_cfg(args, kind="concentration", n=_ints(args.n_list), d=args.d, k=args.k, algo=_algo(args),
                    trials=args.trials, signed=args.signed)


def cmd_ogp_probe(args):
    return _run_cfg(args, kind="ogp-probe", n=args.n, d=args.d, k=args.k, t_grid=[args.t],
                    trials=args.trials, signed=args.signed, params={"eta": args.eta})


def cmd_bell(args):
    params = {"baseline": args.baseline}
    if args.angles:
        params["angles"] = _floats(args.angles)
    return _run_cfg(args, kind="bell", trials=args.shots, params=params)


# ---------------------------------------------------------------------------


def _add_algo(p):
    p.add_argument("--algo", default="factor-iid-threshold",
                   choices=["factor-iid-threshold", "factor-iid-parity", "qaoa"])
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--beta", default="", help="comma-separated mixer angles (qaoa)")
    p.add_argument("--gamma", default="", help="comma-separated phase angles (qaoa)")


def _add_qaoa(p):
    p.add_argument("--instance", required=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--beta", required=True)
    p.add_argument("--gamma", required=True)
    p.add_argument("--initial", default="plus", choices=["plus", "zero"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ogp-lab", description=__doc__)
    ap.add_argument("--seed", default="0,0", help="128-bit seed as 'hi,lo' or a single integer")
    ap.add_argument("--out", default=None, help="output path (stdout if omitted)")
    ap.add_argument("--format", default="csv", choices=["csv", "json"])
    ap.add_argument("--threads", type=int, default=1)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample an instance (or a coupled pair with --t)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--signed", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("energy", help="energy and XOR value of one assignment")
    p.add_argument("--instance", required=True)
    p.add_argument("--sigma", default=None, help="comma-separated spins")
    p.add_argument("--bits", default=None, help="comma-separated bits")
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("brute-force", help="exact optimum by enumeration")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_brute_force)

    p = sub.add_parser("qaoa-run", help="dense QAOA expectation and samples")
    _add_qaoa(p)
    p.add_argument("--shots", type=int, default=0)
    p.set_defaults(func=cmd_qaoa_run)

    p = sub.add_parser("lightcone-check", help="per-edge lightcone vs dense expectations")
    _add_qaoa(p)
    p.set_defaults(func=cmd_lightcone_check)

    p = sub.add_parser("bell", help="CHSH statistic of the interference-graph circuit")
    p.add_argument("--shots", type=int, default=100_000)
    p.add_argument("--angles", default=None, help="theta_a,theta_b (default: numerical optimum)")
    p.add_argument("--baseline", default="quantum", choices=["quantum", "lhv"])
    p.set_defaults(func=cmd_bell)

    p = sub.add_parser("overlap-curve", help="coupled-run overlap across t")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=float, default=3.0)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--t-grid", default="0,0.25,0.5,0.75,1")
    p.add_argument("--t-plus", type=float, default=None)
    p.add_argument("--trials", type=int, default=1000)
    _add_algo(p)
    p.set_defaults(func=cmd_overlap_curve)

    p = sub.add_parser("mcdiarmid", help="tail bound calculators")
    p.add_argument("--n", default="100")
    p.add_argument("--p", default="0.01")
    p.add_argument("--c", default="1")
    p.add_argument("--eps", default="10")
    p.set_defaults(func=cmd_mcdiarmid)

    p = sub.add_parser("branching", help="Galton-Watson tail checks")
    p.add_argument("--d", default="3")
    p.add_argument("--k", default="4")
    p.add_argument("--x", default="2")
    p.add_argument("--u", default="4")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--mode", default="dominating", choices=list(br.MODES))
    p.set_defaults(func=cmd_branching)

    p = sub.add_parser("nbhd-stats", help="exact ball sizes of an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--A", type=float, default=None)
    p.set_defaults(func=cmd_nbhd_stats)

    p = sub.add_parser("concentration", help="spread of weight, energy and overlap versus n")
    p.add_argument("--n-list", default="100,200,400")
    p.add_argument("--d", type=float, default=3.0)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--signed", action="store_true")
    _add_algo(p)
    p.set_defaults(func=cmd_concentration)

    p = sub.add_parser("ogp-probe", help="overlap histogram of near-optimal pairs")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--d", type=float, default=4.0)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--signed", action="store_true")
    p.set_defaults(func=cmd_ogp_probe)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"ogp-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

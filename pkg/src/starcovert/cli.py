"""Command-line entry point: analyze, verify, optimize and sweep."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import suites
from .detection import (AsymptoticParams, DetectionParams, avg_min_dep_lower_bound, avg_min_dep_quadrature,
                        dep_profile, optimal_threshold)
from .errors import DomainError, InfeasibleInitError
from .experiments import (SCHEMES, ExperimentConfig, aggregate, emit_results, load_config, parse_config_value,
                          parse_sweep, realization_seed, run_sweep, verify_dep_bound_tightness)
from .model import SystemConfig, generate_channels
from .optimizer import Layout, algorithm2_alternating, phi_epsilon
from .outage import solve_sigma_star

_SCHEME_ALIASES = {"star": "star-ris", "ris": "conventional-ris", "star-ris": "star-ris",
                   "conventional-ris": "conventional-ris"}


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value file with SystemConfig fields (units such as dBw, dBm, dB allowed)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config field")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--scheme", default="star", choices=sorted(_SCHEME_ALIASES))
    p.add_argument("--out", help="output directory for result files")
    p.add_argument("--format", default="table", choices=("table", "log"))


def _system_config(args) -> SystemConfig:
    kw = asdict(load_config(args.config)) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise DomainError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        kw[k.strip()] = parse_config_value(k.strip(), v.strip())
    return SystemConfig(**kw)


def _emit(rows, fmt, out=None):
    """Print a list of dicts as an aligned table or as JSON lines."""
    out = out or sys.stdout
    if fmt == "log":
        for r in rows:
            out.write(json.dumps(r, default=_json_default) + "\n")
        return
    if not rows:
        return
    cols = list(rows[0])
    cells = [[_cell(r.get(c)) for c in cols] for r in rows]
    width = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    out.write("  ".join(c.ljust(w) for c, w in zip(cols, width)) + "\n")
    for row in cells:
        out.write("  ".join(v.ljust(w) for v, w in zip(row, width)) + "\n")


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = _system_config(args)
    rows = [{"quantity": "l_ar", "value": cfg.l_ar}, {"quantity": "l_rb", "value": cfg.l_rb},
            {"quantity": "l_rc", "value": cfg.l_rc}, {"quantity": "l_rw", "value": cfg.l_rw},
            {"quantity": "carol_si_threshold", "value": solve_sigma_star(cfg.kappa, cfg.phi_sic, cfg.P_j_max)}]
    if args.lam is not None:
        p = DetectionParams(lam=args.lam, lam_tilde=args.lam_tilde, gamma=args.gamma, sigma_w2=cfg.sigma_w2,
                            P_j_max=cfg.P_j_max)
        tau = optimal_threshold(p)
        fa, md, pe = dep_profile(tau, p)
        rows += [{"quantity": "tau_star", "value": tau}, {"quantity": "P_FA", "value": fa},
                 {"quantity": "P_MD", "value": md}, {"quantity": "P_e_star", "value": pe}]
    if args.varpi_b is not None:
        ch = generate_channels(cfg, args.seed)
        gain = ch.l_ar * ch.l_rw
        theta = cfg.N / 2.0  # beta_r = 1/2 on every element
        lam_rw = float(ch.l_rw * np.sum(0.5 * np.abs(ch.h_rc) ** 2))
        a = AsymptoticParams(gain * theta * args.varpi_c, gain * theta * (args.varpi_b + args.varpi_c), theta, lam_rw,
                             gain)
        lb = avg_min_dep_lower_bound(a, args.varpi_b, args.varpi_c, cfg.P_j_max)
        q = avg_min_dep_quadrature(a, args.varpi_b, args.varpi_c, cfg.P_j_max)
        rows += [{"quantity": "avg_min_dep_lower_bound", "value": lb},
                 {"quantity": "avg_min_dep_quadrature", "value": q},
                 {"quantity": "eps_a", "value": 1 - lb}, {"quantity": "eps_r", "value": 1 - q},
                 {"quantity": "phi_epsilon", "value": phi_epsilon(cfg.epsilon, args.varpi_b, args.varpi_c, gain,
                                                                   cfg.P_j_max)}]
    _emit(rows, args.format)
    return 0


def cmd_verify(args) -> int:
    names = args.suite.split(",") if args.suite else list(suites.SUITES)
    rows = []
    ok = True
    for n in names:
        if n == "tightness":
            continue
        if n not in suites.SUITES:
            raise DomainError(f"unknown suite {n!r}; choose from {sorted(suites.SUITES) + ['tightness']}")
        r = suites.SUITES[n](seed=args.seed) if n not in ("ei",) else suites.SUITES[n]()
        ok &= r.passed
        rows.append({"suite": r.name, "passed": r.passed, "metric": float(r.metric), "threshold": r.threshold})
    if "tightness" in names:
        cfg = _system_config(args)
        ecfg = ExperimentConfig(base=cfg, realizations=args.realizations or 10, seed=args.seed, tightness=True)
        for s in verify_dep_bound_tightness(ecfg):
            passed = s.ordered and s.mean_gap <= 0.02
            ok &= passed
            rows.append({"suite": "bound-tightness", "passed": passed, "metric": s.mean_gap, "threshold": 0.02})
    _emit(rows, args.format)
    return 0 if ok else 1


def cmd_optimize(args) -> int:
    cfg = _system_config(args)
    scheme = _SCHEME_ALIASES[args.scheme]
    layout = Layout.conventional(cfg.N) if scheme == "conventional-ris" else None
    ch = generate_channels(cfg, args.seed)
    try:
        res = algorithm2_alternating(cfg, ch, layout=layout)
    except InfeasibleInitError as exc:
        print(f"infeasible: {exc} {exc.diagnostics}", file=sys.stderr)
        return 2
    rows = [{"iteration": 0, "R_bb": res.trace[0]}]
    for rec in res.records:
        rows.append({"iteration": rec["iteration"], "R_bb": rec["R_bb"], "v": rec["v"], "chi": rec["chi"],
                     "v1": rec["v1"], "n_sdp": rec["n_sdp"], "wb": rec["wb"], "wc": rec["wc"]})
    _emit(rows, args.format)
    summary = {"R_bb": res.R_bb, "R_cc": res.evaluation.R_cc, "varpi_b": res.bf.varpi_b, "varpi_c": res.bf.varpi_c,
               "converged": res.converged, "iterations": res.iterations, **{f"check_{k}": v for k, v in res.checks.items()}}
    _emit([summary], args.format)
    return 0


def cmd_sweep(args) -> int:
    cfg = _system_config(args)
    var, values = parse_sweep(args.sweep) if args.sweep else (None, ())
    ecfg = ExperimentConfig(base=cfg, sweep_var=var, values=values, realizations=args.realizations or 50,
                            seed=args.seed, scheme=_SCHEME_ALIASES[args.scheme], out_dir=args.out,
                            tightness=args.tightness, workers=args.workers)
    records, designs = run_sweep(ecfg, return_designs=True)
    if args.out:
        emit_results(records, args.out, designs)
    if args.format == "log":
        _emit([asdict(r) for r in records], "log")
    else:
        rows = []
        for scheme, series in aggregate(records).items():
            for v, m, se, n in series:
                rows.append({"scheme": scheme, var or "value": v, "mean_R_bb": m, "stderr": se, "n": n})
        _emit(rows, "table")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="starcovert", description="STAR-RIS covert communication toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form evaluations for given parameters")
    _common(p)
    p.add_argument("--lam", type=float)
    p.add_argument("--lam-tilde", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--varpi-b", type=float)
    p.add_argument("--varpi-c", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="oracle suites for detection, threshold, outage and bound tightness")
    _common(p)
    p.add_argument("--suite", help="comma list of " + ",".join(list(suites.SUITES) + ["tightness"]))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("optimize", help="optimize one channel realization and print the iteration trace")
    _common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="average covert rate over a sweep grid")
    _common(p)
    p.add_argument("--sweep", metavar="VAR=V1,V2,...", help="one of P_max, epsilon, N, M, R_star")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tightness", action="store_true", help="also record (eps_r, eps_a) per realization")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "analyze":
        trio = (args.lam, args.lam_tilde, args.gamma)
        if any(v is not None for v in trio) and any(v is None for v in trio):
            print("error: --lam, --lam-tilde and --gamma go together", file=sys.stderr)
            return 2
        if (args.varpi_b is None) != (args.varpi_c is None):
            print("error: --varpi-b and --varpi-c go together", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven sweeps, the conventional-RIS baseline, bound-tightness checks and result files."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .detection import asymptotic_dep_params, avg_min_dep_quadrature
from .errors import DomainError, InfeasibleInitError
from .model import Beamformers, ChannelSet, StarRisState, SystemConfig, generate_channels, parse_quantity
from .optimizer import Context, Layout, Tolerances, algorithm2_alternating, exit_checks

SWEEP_VARS = ("P_max", "epsilon", "N", "M", "R_star")
SCHEMES = ("star-ris", "conventional-ris")
_INT_FIELDS = ("M", "N", "rng_seed")


@dataclass(frozen=True)
class ExperimentConfig:
    base: SystemConfig = field(default_factory=SystemConfig)
    sweep_var: Optional[str] = None
    values: tuple = ()
    realizations: int = 50
    seed: int = 0
    scheme: str = "star-ris"
    out_dir: Optional[str] = None
    tightness: bool = False
    workers: int = 1
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.realizations < 1:
            raise DomainError("realization count must be >= 1")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")
        if self.sweep_var is not None:
            if self.sweep_var not in SWEEP_VARS:
                raise DomainError(f"sweep variable must be one of {SWEEP_VARS}")
            if len(self.values) == 0:
                raise DomainError("sweep value list is empty")
        object.__setattr__(self, "values", tuple(self.values))

    def points(self):
        """(sweep value, SystemConfig) pairs in ascending sweep order."""
        if self.sweep_var is None:
            return [(math.nan, self.base)]
        conv = int if self.sweep_var in _INT_FIELDS else float
        return [(conv(v), self.base.with_(**{self.sweep_var: conv(v)})) for v in sorted(self.values)]


@dataclass
class ResultRecord:
    scheme: str
    sweep_var: str
    sweep_value: float
    realization: int
    seed: int
    status: str  # ok | infeasible | error
    feasible: bool
    R_bb: float
    R_cc: float
    power: float
    converged: bool
    iterations: int
    wall_time: float
    power_ok: bool = False
    covert_ok: bool = False
    qos_ok: bool = False
    beta_ok: bool = False
    rank_one_ok: bool = False
    eps_r: float = math.nan
    eps_a: float = math.nan
    message: str = ""

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def realization_seed(seed: int, r: int) -> int:
    """Channel seed of realization ``r``; independent of how many realizations are run."""
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1)[0])


@dataclass(frozen=True)
class BaselineSystem:
    channels: ChannelSet
    layout: Layout


def ris_baseline_channels(cfg: SystemConfig, seed: int) -> BaselineSystem:
    """Two adjacent conventional surfaces of N/2 elements: the first only reflects, the second only transmits.

    The channels are the STAR-RIS channels of the same seed, so comparisons are paired.
    """
    layout = Layout.conventional(cfg.N)
    return BaselineSystem(generate_channels(cfg, seed), layout)


def _tightness(ch: ChannelSet, ris: StarRisState, bf: Beamformers, cfg: SystemConfig):
    """(eps_r, eps_a): exact averaged detection probability and its bound-based counterpart."""
    if bf.varpi_b <= 0:
        return 0.0, 0.0
    ev = Context(ch, cfg).evaluate(ris, bf)
    a = asymptotic_dep_params(ch, ris, bf)
    eps_r = 1.0 - avg_min_dep_quadrature(a, bf.varpi_b, bf.varpi_c, cfg.P_j_max)
    return eps_r, ev.covert_lhs


def _run_job(job):
    scheme, var, value, r, cfg, seed, tol, tightness = job
    t0 = time.perf_counter()
    base = dict(scheme=scheme, sweep_var=var or "", sweep_value=value, realization=r, seed=seed)
    try:
        if scheme == "conventional-ris":
            sysb = ris_baseline_channels(cfg, seed)
            ch, layout = sysb.channels, sysb.layout
        else:
            ch, layout = generate_channels(cfg, seed), None
        res = algorithm2_alternating(cfg, ch, tol, layout)
    except InfeasibleInitError as exc:
        rec = ResultRecord(**base, status="infeasible", feasible=False, R_bb=0.0, R_cc=math.nan, power=math.nan,
                           converged=False, iterations=0, wall_time=time.perf_counter() - t0, message=str(exc))
        return rec, None
    except (DomainError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        rec = ResultRecord(**base, status="error", feasible=False, R_bb=0.0, R_cc=math.nan, power=math.nan,
                           converged=False, iterations=0, wall_time=time.perf_counter() - t0,
                           message=f"{type(exc).__name__}: {exc}")
        return rec, None
    c = res.checks
    feasible = bool(c["power"] and c["covert"] and c["qos"] and c["beta_sum"] and c["phases"])
    eps_r = eps_a = math.nan
    if tightness:
        eps_r, eps_a = _tightness(ch, res.ris, res.bf, cfg)
    rec = ResultRecord(**base, status="ok", feasible=feasible, R_bb=float(res.R_bb), R_cc=float(res.evaluation.R_cc),
                       power=float(res.evaluation.power), converged=bool(res.converged), iterations=int(res.iterations),
                       wall_time=time.perf_counter() - t0, power_ok=bool(c["power"]), covert_ok=bool(c["covert"]),
                       qos_ok=bool(c["qos"]), beta_ok=bool(c["beta_sum"]), rank_one_ok=bool(c["rank_one"]),
                       eps_r=float(eps_r), eps_a=float(eps_a))
    design = {"config": asdict(cfg), "w_b": _cvec(res.bf.w_b), "w_c": _cvec(res.bf.w_c),
              "beta_r": res.ris.beta_r.tolist(), "phi_r": res.ris.phi_r.tolist(), "phi_t": res.ris.phi_t.tolist(),
              "trace": [float(x) for x in res.trace]}
    return rec, design


def _cvec(v):
    return [[float(z.real), float(z.imag)] for z in v]


def _jobs(cfg: ExperimentConfig):
    for value, pcfg in cfg.points():
        for r in range(cfg.realizations):
            yield (cfg.scheme, cfg.sweep_var, value, r, pcfg, realization_seed(cfg.seed, r), cfg.tol, cfg.tightness)


def run_sweep(cfg: ExperimentConfig, return_designs: bool = False):
    """Optimize every (sweep value, realization) pair; records are sorted by sweep value then realization.

    Channels depend only on the seed and the realization index, so all sweep
    values (and both schemes) see the same channel draws. Jobs are independent
    and may run in worker processes; the output does not depend on the worker count.
    """
    jobs = list(_jobs(cfg))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            out = list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        out = [_run_job(j) for j in jobs]
    out.sort(key=lambda rd: (rd[0].sweep_value if not math.isnan(rd[0].sweep_value) else -math.inf,
                             rd[0].realization))
    records = [rd[0] for rd in out]
    if return_designs:
        return records, [rd[1] for rd in out]
    return records


# ---------------------------------------------------------------------------
# bound tightness


@dataclass(frozen=True)
class TightnessSummary:
    sweep_value: float
    mean_gap: float
    max_gap: float
    ordered: bool  # eps_r <= eps_a in every realization
    n_used: int
    n_failed: int
    eps_r: tuple
    eps_a: tuple


def verify_dep_bound_tightness(cfg: ExperimentConfig, records: Optional[Sequence[ResultRecord]] = None,
                               order_tol: float = 1e-9) -> list:
    """Per sweep value: mean |eps_r - eps_a| over realizations whose optimization succeeded."""
    if records is None:
        records = run_sweep(replace(cfg, tightness=True))
    out = []
    for value in _values(records):
        rows = [r for r in records if _same(r.sweep_value, value)]
        ok = [r for r in rows if r.status == "ok" and not math.isnan(r.eps_r)]
        er = np.array([r.eps_r for r in ok])
        ea = np.array([r.eps_a for r in ok])
        gaps = np.abs(er - ea)
        out.append(TightnessSummary(value, float(np.mean(gaps)) if ok else math.nan,
                                    float(np.max(gaps)) if ok else math.nan, bool(np.all(er <= ea + order_tol)),
                                    len(ok), len(rows) - len(ok), tuple(er.tolist()), tuple(ea.tolist())))
    return out


def _same(a, b):
    return (math.isnan(a) and math.isnan(b)) or a == b


def _values(records):
    vals = []
    for r in records:
        if not any(_same(r.sweep_value, v) for v in vals):
            vals.append(r.sweep_value)
    return vals


# ---------------------------------------------------------------------------
# aggregation and files


def aggregate(records: Sequence[ResultRecord]):
    """{scheme: [(sweep value, mean R_bb, standard error, count)]}; infeasible realizations count as zero rate."""
    out = {}
    for scheme in sorted({r.scheme for r in records}):
        rows = [r for r in records if r.scheme == scheme]
        series = []
        for v in _values(rows):
            x = np.array([r.R_bb if r.status == "ok" else 0.0 for r in rows if _same(r.sweep_value, v)])
            se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
            series.append((v, float(np.mean(x)), se, int(x.size)))
        out[scheme] = series
    return out


def emit_results(records: Sequence[ResultRecord], out_dir: str, designs: Optional[Sequence] = None) -> dict:
    """Write results.csv (one row per record), results.jsonl (per-run log) and plot_<scheme>.csv."""
    if not records:
        raise DomainError("no records to write")
    paths = {"table": os.path.join(out_dir, "results.csv"), "log": os.path.join(out_dir, "results.jsonl")}
    try:
        os.makedirs(out_dir, exist_ok=True)
        names = ResultRecord.field_names()
        with open(paths["table"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for r in records:
                w.writerow([_fmt(getattr(r, n)) for n in names])
        with open(paths["log"], "w") as fh:
            for i, r in enumerate(records):
                row = asdict(r)
                if designs is not None and designs[i] is not None:
                    row["design"] = designs[i]
                fh.write(json.dumps(row, allow_nan=True) + "\n")
        for scheme, series in aggregate(records).items():
            p = os.path.join(out_dir, f"plot_{scheme}.csv")
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["value", "mean", "stderr"])
                for v, m, se, _ in series:
                    w.writerow([_fmt(v), _fmt(m), _fmt(se)])
            paths[f"plot_{scheme}"] = p
    except OSError as exc:
        raise OSError(f"could not write results under {out_dir!r}: {exc}") from exc
    return paths


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_field(name, text):
    typ = {f.name: f.type for f in fields(ResultRecord)}[name]
    if typ in ("bool", bool):
        return text == "true"
    if typ in ("int", int):
        return int(text)
    if typ in ("float", float):
        return float(text)
    return text


def read_table(path: str) -> list:
    """Parse a results.csv written by :func:`emit_results` back into records."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header != ResultRecord.field_names():
        raise DomainError(f"{path}: unexpected header")
    return [ResultRecord(**{n: _parse_field(n, t) for n, t in zip(header, row)}) for row in rows[1:]]


def read_log(path: str, verify: bool = True) -> list:
    """Parse results.jsonl; with ``verify`` the stored design of every feasible record is re-checked
    against freshly generated channels and a mismatch raises."""
    out = []
    with open(path) as fh:
        for line in fh:
            row = json.loads(line)
            design = row.pop("design", None)
            rec = ResultRecord(**row)
            if verify and rec.feasible and design is not None:
                checks = recheck_design(rec, design)
                bad = [k for k, v in checks.items() if not v and k != "rank_one"]
                if bad:
                    raise DomainError(f"{path}: record {rec.realization} at {rec.sweep_value} fails {bad}")
            out.append(rec)
    return out


def recheck_design(rec: ResultRecord, design: dict) -> dict:
    cfg = SystemConfig(**design["config"])
    ch = generate_channels(cfg, rec.seed)
    layout = Layout.conventional(cfg.N) if rec.scheme == "conventional-ris" else None
    cv = lambda a: np.array([complex(x, y) for x, y in a])
    bf = Beamformers(cv(design["w_b"]), cv(design["w_c"]))
    ris = StarRisState(beta_r=np.array(design["beta_r"]), phi_r=np.array(design["phi_r"]),
                       phi_t=np.array(design["phi_t"]))
    return exit_checks(Context(ch, cfg, layout), ris, bf)


# ---------------------------------------------------------------------------
# configuration files

_QUANTITY_FIELDS = ("P_max", "P_j_max", "sigma_b2", "sigma_c2", "sigma_w2", "phi_sic", "rho0")


def parse_config_value(name: str, text: str):
    if name not in SystemConfig.field_names():
        raise DomainError(f"unknown configuration key {name!r}")
    if name in _INT_FIELDS:
        return int(text)
    if name in _QUANTITY_FIELDS:
        return parse_quantity(text)
    return float(text)


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines (``#`` starts a comment); keys are SystemConfig field names."""
    out = {}
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, val = line.split("=", 1)
        elif ":" in line:
            key, val = line.split(":", 1)
        else:
            raise DomainError(f"line {k}: expected 'key = value'")
        key = key.strip()
        try:
            out[key] = parse_config_value(key, val.strip())
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise DomainError(f"line {k}: bad value for {key!r}: {val.strip()!r}") from exc
    return out


def load_config(path: str) -> SystemConfig:
    with open(path) as fh:
        return SystemConfig(**parse_config_text(fh.read()))


def parse_sweep(spec: str):
    """``var=v1,v2,...`` with optional units on each value (powers accept dBw/dBm/W)."""
    if "=" not in spec:
        raise DomainError("sweep must look like var=v1,v2,...")
    var, vals = spec.split("=", 1)
    var = var.strip()
    if var not in SWEEP_VARS:
        raise DomainError(f"sweep variable must be one of {SWEEP_VARS}")
    items = [v.strip() for v in vals.split(",") if v.strip()]
    if not items:
        raise DomainError("sweep value list is empty")
    return var, tuple(parse_config_value(var, v) for v in items)

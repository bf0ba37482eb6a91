import csv
import json
import math
import os
from dataclasses import asdict, replace

import numpy as np
import pytest

from starcovert.cli import main
from starcovert.errors import DomainError
from starcovert.experiments import (ExperimentConfig, ResultRecord, _tightness, aggregate, emit_results,
                                    load_config, parse_config_text, parse_sweep, read_log, read_table,
                                    realization_seed, ris_baseline_channels, run_sweep, verify_dep_bound_tightness)
from starcovert.model import Beamformers, StarRisState, SystemConfig, generate_channels
from starcovert.optimizer import Layout, algorithm2_alternating

SMALL = SystemConfig(N=8, M=3, R_star=2.0, d_ar=200.0)


def _strip(rec):
    d = asdict(rec)
    d.pop("wall_time")
    return json.dumps(d, sort_keys=True, allow_nan=True)


@pytest.fixture(scope="module")
def sweep3():
    cfg = ExperimentConfig(base=SMALL, sweep_var="P_max", values=(1.0, 2.0), realizations=2, seed=3)
    return cfg, run_sweep(cfg, return_designs=True)


def test_single_record():
    recs = run_sweep(ExperimentConfig(base=SMALL, realizations=1))
    assert len(recs) == 1
    assert math.isnan(recs[0].sweep_value)


def test_sweep_is_deterministic_and_sorted(sweep3):
    cfg, (recs, _) = sweep3
    again = run_sweep(cfg)
    assert [_strip(r) for r in recs] == [_strip(r) for r in again]
    assert [(r.sweep_value, r.realization) for r in recs] == [(1.0, 0), (1.0, 1), (2.0, 0), (2.0, 1)]


def test_worker_count_does_not_change_results(sweep3):
    cfg, (recs, _) = sweep3
    par = run_sweep(replace(cfg, workers=2))
    assert [_strip(r) for r in recs] == [_strip(r) for r in par]


def test_realization_seeds_do_not_depend_on_count():
    one = run_sweep(ExperimentConfig(base=SMALL, realizations=1, seed=9))
    two = run_sweep(ExperimentConfig(base=SMALL, realizations=2, seed=9))
    assert _strip(one[0]) == _strip(two[0])
    assert realization_seed(9, 0) != realization_seed(9, 1)
    assert realization_seed(9, 0) != realization_seed(10, 0)


def test_feasible_records_have_nonnegative_rate(sweep3):
    _, (recs, _) = sweep3
    for r in recs:
        if r.feasible:
            assert r.R_bb >= 0 and r.power_ok and r.covert_ok and r.qos_ok and r.beta_ok


def test_emit_and_read_round_trip(sweep3, tmp_path):
    _, (recs, designs) = sweep3
    recs = recs[:3]
    paths = emit_results(recs, str(tmp_path), designs[:3])
    with open(paths["table"]) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 4 and rows[0] == ResultRecord.field_names()
    back = read_table(paths["table"])
    assert [json.dumps(asdict(r), allow_nan=True) for r in back] == [json.dumps(asdict(r), allow_nan=True) for r in recs]
    logged = read_log(paths["log"], verify=True)
    assert [_strip(r) for r in logged] == [_strip(r) for r in recs]


def test_plot_data_matches_recomputation(sweep3, tmp_path):
    _, (recs, designs) = sweep3
    paths = emit_results(recs, str(tmp_path), designs)
    raw = read_table(paths["table"])
    with open(paths["plot_star-ris"]) as fh:
        plot = list(csv.DictReader(fh))
    for row in plot:
        v = float(row["value"])
        x = np.array([r.R_bb if r.status == "ok" else 0.0 for r in raw if r.sweep_value == v])
        assert float(row["mean"]) == pytest.approx(x.mean(), rel=1e-12)
        assert float(row["stderr"]) == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=1e-12)


def test_log_verification_catches_tampering(sweep3, tmp_path):
    _, (recs, designs) = sweep3
    i = next(k for k, r in enumerate(recs) if r.feasible)
    bad = json.loads(json.dumps(designs[i]))
    bad["w_b"] = [[10 * x, 10 * y] for x, y in bad["w_b"]]
    paths = emit_results([recs[i]], str(tmp_path), [bad])
    with pytest.raises(DomainError):
        read_log(paths["log"], verify=True)
    assert len(read_log(paths["log"], verify=False)) == 1


def test_emit_rejects_empty_and_reports_path(tmp_path):
    with pytest.raises(DomainError):
        emit_results([], str(tmp_path))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rec = ResultRecord("star-ris", "", math.nan, 0, 1, "ok", True, 1.0, 5.0, 1.0, True, 2, 0.1)
    with pytest.raises(OSError, match="file"):
        emit_results([rec], str(blocker / "sub"))


def test_aggregate_counts_infeasible_as_zero():
    mk = lambda st, r: ResultRecord("star-ris", "N", 8.0, 0, 0, st, st == "ok", r, 0.0, 0.0, True, 1, 0.0)
    (v, mean, se, n), = aggregate([mk("ok", 2.0), mk("infeasible", 0.0), mk("ok", 4.0)])["star-ris"]
    assert (v, n) == (8.0, 3)
    assert mean == pytest.approx(2.0)
    assert se == pytest.approx(np.std([2.0, 0.0, 4.0], ddof=1) / math.sqrt(3))


def test_baseline_layout():
    sysb = ris_baseline_channels(SystemConfig(N=30), 0)
    assert list(sysb.layout.r_idx) == list(range(15))
    assert list(sysb.layout.t_idx) == list(range(15, 30))
    assert np.array_equal(sysb.layout.beta_r(30), np.r_[np.ones(15), np.zeros(15)])
    assert np.array_equal(sysb.channels.H_ar, generate_channels(SystemConfig(N=30), 0).H_ar)
    with pytest.raises(DomainError):
        ris_baseline_channels(SystemConfig(N=7), 0)


def test_baseline_n2_equals_frozen_star():
    cfg = SystemConfig(N=2, M=3, R_star=1.0, d_ar=100.0)
    seed = 4
    sysb = ris_baseline_channels(cfg, seed)
    a = algorithm2_alternating(cfg, sysb.channels, layout=sysb.layout)
    b = algorithm2_alternating(cfg, generate_channels(cfg, seed), layout=Layout.conventional(2))
    assert a.trace == b.trace
    assert np.array_equal(a.ris.beta_r, [1.0, 0.0])


def test_tightness_without_covert_signal():
    cfg = SMALL
    ch = generate_channels(cfg, 0)
    ris = StarRisState(beta_r=np.full(8, 0.5), phi_r=np.zeros(8), phi_t=np.zeros(8))
    assert _tightness(ch, ris, Beamformers(np.zeros(3), np.ones(3)), cfg) == (0.0, 0.0)


def test_tightness_summary_small_run():
    cfg = ExperimentConfig(base=replace(SMALL, N=16), realizations=3, seed=1, tightness=True)
    (s,) = verify_dep_bound_tightness(cfg)
    assert s.n_used + s.n_failed == 3
    assert s.ordered
    assert all(0.0 <= r <= a + 1e-9 for r, a in zip(s.eps_r, s.eps_a))


def test_experiment_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig(realizations=0)
    with pytest.raises(DomainError):
        ExperimentConfig(sweep_var="P_max", values=())
    with pytest.raises(DomainError):
        ExperimentConfig(sweep_var="alpha", values=(1.0,))
    with pytest.raises(DomainError):
        ExperimentConfig(scheme="nope")
    pts = ExperimentConfig(sweep_var="N", values=(16, 8)).points()
    assert [v for v, _ in pts] == [8, 16] and pts[0][1].N == 8


def test_config_text_parsing(tmp_path):
    text = "# reference scenario\nP_max = 3 dBw\nsigma_b2: -140 dBm\nN = 16  # elements\nepsilon = 0.05\n"
    kw = parse_config_text(text)
    assert kw["P_max"] == pytest.approx(10 ** 0.3)
    assert kw["sigma_b2"] == pytest.approx(1e-17)
    assert kw["N"] == 16 and isinstance(kw["N"], int)
    p = tmp_path / "c.cfg"
    p.write_text(text)
    assert load_config(str(p)).epsilon == 0.05
    with pytest.raises(DomainError):
        parse_config_text("bogus = 1")
    with pytest.raises(DomainError):
        parse_config_text("N = many")
    with pytest.raises(DomainError):
        parse_config_text("just words")


def test_parse_sweep():
    assert parse_sweep("P_max=0 dBw, 3dBw") == ("P_max", (1.0, pytest.approx(10 ** 0.3)))
    assert parse_sweep("N=8,16") == ("N", (8, 16))
    with pytest.raises(DomainError):
        parse_sweep("alpha=1,2")
    with pytest.raises(DomainError):
        parse_sweep("N=")


# --- command line ----------------------------------------------------------


def test_cli_analyze(capsys):
    assert main(["analyze", "--lam", "0.4", "--lam-tilde", "1.1", "--gamma", "0.8", "--set", "P_j_max=1.5"]) == 0
    out = capsys.readouterr().out
    assert "tau_star" in out and "P_e_star" in out


def test_cli_analyze_log_format(capsys):
    assert main(["analyze", "--varpi-b", "0.2", "--varpi-c", "1.0", "--format", "log"]) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    vals = {r["quantity"]: r["value"] for r in rows}
    assert vals["eps_r"] <= vals["eps_a"] + 1e-9


def test_cli_argument_errors(capsys):
    assert main(["analyze", "--lam", "0.4"]) == 2
    assert main(["analyze", "--set", "bogus=1"]) == 2
    assert main(["verify", "--suite", "nope"]) == 2


def test_cli_verify(capsys):
    assert main(["verify", "--suite", "consistency,ei"]) == 0
    out = capsys.readouterr().out
    assert "min-dep-consistency" in out and "ei-vs-quadrature" in out


def test_cli_optimize(capsys):
    args = ["optimize", "--set", "N=8", "--set", "R_star=2", "--set", "d_ar=200", "--seed", "1"]
    assert main(args) == 0
    out = capsys.readouterr().out
    assert "check_covert" in out and "True" in out


def test_cli_sweep_writes_files(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("N = 8\nR_star = 2\nd_ar = 200\n")
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--sweep", "P_max=0dBw,3dBw", "--realizations", "1",
                 "--scheme", "ris", "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == ["plot_conventional-ris.csv", "results.csv", "results.jsonl"]
    assert "mean_R_bb" in capsys.readouterr().out
    assert len(read_log(str(out / "results.jsonl"))) == 2

import json
import os

import pytest

from signoise.cli import main

from helpers import MEAN_CONFIG, TRIG_KNOWN_CONFIG, TRIG_SCALED_CONFIG

MEAN_SPACE = {"alpha": [[0.0, 2.0]], "beta": []}
SCALED_SPACE = {"alpha": [[-3.0, 3.0], [-3.0, 3.0]], "beta": [[0.1, 4.0]]}


def _write(path, payload):
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return str(path)


def _simulate_cfg(n=10, seed=5, replicate=0):
    return {
        "model": TRIG_SCALED_CONFIG,
        "theta": {"alpha": [1.0, 0.5], "beta": [1.0]},
        "grid": {"kind": "uniform", "n": n, "h": 0.25},
        "seed": seed,
        "replicate": replicate,
    }


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("grid", "simulate", "estimate", "fisher", "verify"):
        assert name in out


def test_simulate_writes_csv_with_header_and_rows(tmp_path):
    cfg = _write(tmp_path / "sim.json", _simulate_cfg(n=10))
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")])
    assert rc == 0
    lines = (tmp_path / "run" / "sample.csv").read_text().splitlines()
    assert len(lines) == 11  # header + 10 data rows
    assert not lines[0][0].isdigit()
    meta = json.loads((tmp_path / "run" / "sample_meta.json").read_text())
    assert meta["seed"] == 5
    assert "config_digest" in meta


def test_simulate_same_config_and_seed_is_byte_identical(tmp_path):
    cfg = _write(tmp_path / "sim.json", _simulate_cfg())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sample.csv").read_bytes()
    b = (tmp_path / "b" / "sample.csv").read_bytes()
    assert a == b
    c_cfg = _write(tmp_path / "sim2.json", _simulate_cfg(seed=6))
    assert main(["simulate", "--config", c_cfg, "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "c" / "sample.csv").read_bytes() != a


def test_simulate_floor_violation_names_the_assumption(tmp_path, capsys):
    bad = _simulate_cfg()
    bad["model"] = {
        "signal": {"kind": "linear", "basis": [{"kind": "const"}]},
        "noise": {"kind": "known", "profile": {"kind": "trig", "offset": 0.0, "terms": []}},
    }
    bad["theta"] = {"alpha": [1.0], "beta": []}
    cfg = _write(tmp_path / "bad.json", bad)
    rc = main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "variance floor" in err


def test_estimate_closed_form_json_has_variance_matrix(tmp_path):
    sim = _write(
        tmp_path / "sim.json",
        {
            "model": TRIG_KNOWN_CONFIG,
            "theta": {"alpha": [1.0, 0.5], "beta": []},
            "grid": {"kind": "uniform", "n": 500, "h": 0.1},
            "seed": 9,
        },
    )
    assert main(["simulate", "--config", sim, "--out", str(tmp_path / "run")]) == 0
    est = _write(
        tmp_path / "est.json",
        {"model": TRIG_KNOWN_CONFIG, "space": SCALED_SPACE | {"beta": []}, "estimator": "mle-closed"},
    )
    rc = main(
        [
            "estimate",
            "--config",
            est,
            "--sample",
            str(tmp_path / "run" / "sample.csv"),
            "--out",
            str(tmp_path / "fit"),
        ]
    )
    assert rc == 0
    result = json.loads((tmp_path / "fit" / "estimate.json").read_text())
    assert result["method"] == "mle-closed"
    cov = result["covariance"]
    assert len(cov) == 2 and len(cov[0]) == 2
    assert "config_digest" in result
    assert result["sample_seed"] == 9


def test_estimate_bayes_high_dimension_guard(tmp_path, capsys):
    cfg = _write(tmp_path / "sim.json", _simulate_cfg())
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "run")]) == 0
    five = {
        "signal": {
            "kind": "linear",
            "basis": [{"kind": "const"}]
            + [{"kind": "cos", "freq": float(k)} for k in range(1, 5)],
        },
        "noise": {"kind": "known", "profile": {"kind": "const", "value": 1.0}},
    }
    est = _write(
        tmp_path / "est.json",
        {
            "model": five,
            "space": {"alpha": [[-2.0, 2.0]] * 5, "beta": []},
            "estimator": "bayes",
        },
    )
    rc = main(
        [
            "estimate",
            "--config",
            est,
            "--sample",
            str(tmp_path / "run" / "sample.csv"),
            "--out",
            str(tmp_path / "fit"),
        ]
    )
    assert rc == 2
    assert "dimension guard" in capsys.readouterr().err


def test_estimate_batch_directory(tmp_path):
    samples = tmp_path / "samples"
    for r in range(3):
        cfg = _write(tmp_path / f"sim{r}.json", _simulate_cfg(n=50, replicate=r))
        out = tmp_path / f"run{r}"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        os.makedirs(samples, exist_ok=True)
        (samples / f"rep{r}.csv").write_bytes((out / "sample.csv").read_bytes())
        (samples / f"rep{r}_meta.json").write_bytes((out / "sample_meta.json").read_bytes())
    est = _write(
        tmp_path / "est.json",
        {"model": TRIG_SCALED_CONFIG, "space": SCALED_SPACE, "estimator": "mle-closed"},
    )
    rc = main(
        ["estimate", "--config", est, "--sample", str(samples), "--out", str(tmp_path / "fits")]
    )
    assert rc == 0
    names = sorted(os.listdir(tmp_path / "fits"))
    assert names == [
        "estimates.csv",
        "rep0_estimate.json",
        "rep1_estimate.json",
        "rep2_estimate.json",
    ]
    rows = (tmp_path / "fits" / "estimates.csv").read_text().splitlines()
    assert rows[0] == "sample,method,n,alpha0,alpha1,beta0,log_lik,converged"
    assert len(rows) == 4


def test_fisher_empirical_and_limit(tmp_path):
    emp = _write(
        tmp_path / "emp.json",
        {
            "model": TRIG_SCALED_CONFIG,
            "theta": {"alpha": [1.0, 0.5], "beta": [1.0]},
            "grid": {"kind": "uniform", "n": 100, "h": 0.25},
            "source": "empirical",
        },
    )
    assert main(["fisher", "--config", emp, "--out", str(tmp_path / "a")]) == 0
    payload = json.loads((tmp_path / "a" / "fisher.json").read_text())
    assert payload["source"] == "empirical"
    assert "config_digest" in payload
    assert abs(payload["var_info"][0][0] - 0.5) < 1e-12

    lim = _write(
        tmp_path / "lim.json",
        {
            "model": TRIG_SCALED_CONFIG,
            "theta": {"alpha": [1.0, 0.5], "beta": [1.0]},
            "source": "limit",
            "period": 1.0,
        },
    )
    assert main(["fisher", "--config", lim, "--out", str(tmp_path / "b")]) == 0
    payload = json.loads((tmp_path / "b" / "fisher.json").read_text())
    assert payload["source"] == "limit:vanishing_step"


def test_verify_normality_on_exact_gaussian_family_passes(tmp_path, capsys):
    cfg = _write(
        tmp_path / "study.json",
        {
            "kind": "normality",
            "model": MEAN_CONFIG,
            "space": MEAN_SPACE,
            "theta": {"alpha": [1.0], "beta": []},
            "grid": {"kind": "uniform", "h": 0.25},
            "n_values": [100, 200],
            "replicates": 200,
            "seed": 7,
            "estimator": "mle-closed",
        },
    )
    rc = main(["verify", "--config", cfg, "--out", str(tmp_path / "rep"), "--workers", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    report = json.loads((tmp_path / "rep" / "normality_report.json").read_text())
    assert report["passed"] is True
    assert report["seed"] == 7
    assert "config_digest" in report


def test_verify_rate_single_rung_is_rejected(tmp_path, capsys):
    cfg = _write(
        tmp_path / "study.json",
        {
            "kind": "rate",
            "model": MEAN_CONFIG,
            "space": MEAN_SPACE,
            "theta": {"alpha": [1.0], "beta": []},
            "grid": {"kind": "uniform", "h": 0.25},
            "n_values": [400],
            "replicates": 100,
            "seed": 3,
        },
    )
    rc = main(["verify", "--config", cfg, "--out", str(tmp_path / "rep")])
    assert rc == 2
    assert "ladder too short" in capsys.readouterr().err


def test_verify_lan_default_reports_remainder_table(tmp_path):
    cfg = _write(
        tmp_path / "study.json",
        {
            "kind": "lan",
            "model": TRIG_SCALED_CONFIG,
            "space": SCALED_SPACE,
            "theta": {"alpha": [1.0, 0.5], "beta": [1.0]},
            "grid": {"kind": "uniform", "h": 0.25},
            "n_values": [100, 200],
            "replicates": 100,
            "seed": 11,
        },
    )
    main(["verify", "--config", cfg, "--out", str(tmp_path / "rep"), "--workers", "1"])
    report = json.loads((tmp_path / "rep" / "lan_report.json").read_text())
    table = {
        r["n"]: r["value"]
        for r in report["rows"]
        if r["metric"] == "mean_abs_remainder"
    }
    assert set(table) == {100, 200}
    assert all(v == 0.0 for v in table.values())  # default probes w = 0


def test_verify_is_identical_across_worker_counts(tmp_path):
    cfg = _write(
        tmp_path / "study.json",
        {
            "kind": "normality",
            "model": MEAN_CONFIG,
            "space": MEAN_SPACE,
            "theta": {"alpha": [1.0], "beta": []},
            "grid": {"kind": "uniform", "h": 0.25},
            "n_values": [100],
            "replicates": 128,
            "seed": 2,
            "estimator": "mle-closed",
        },
    )
    main(["verify", "--config", cfg, "--out", str(tmp_path / "w1"), "--workers", "1"])
    main(["verify", "--config", cfg, "--out", str(tmp_path / "w4"), "--workers", "4"])
    for name in ("normality_report.json", "normality_report.csv"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w4" / name).read_bytes()


def test_config_errors_name_the_offending_key(tmp_path, capsys):
    cfg = _write(tmp_path / "sim.json", _simulate_cfg() | {"bogus": 1})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    assert "bogus" in capsys.readouterr().err

    missing = _simulate_cfg()
    del missing["theta"]
    cfg2 = _write(tmp_path / "sim2.json", missing)
    assert main(["simulate", "--config", cfg2, "--out", str(tmp_path / "x")]) == 2
    assert "theta" in capsys.readouterr().err


def test_grid_outputs_carry_provenance(tmp_path):
    cfg = _write(
        tmp_path / "grid.json",
        {"grid": {"kind": "pattern", "offsets": [0.3, 1.0], "period": 1.0, "cycles": 4}},
    )
    assert main(["grid", "--config", cfg, "--out", str(tmp_path / "g")]) == 0
    lines = (tmp_path / "g" / "grid.csv").read_text().splitlines()
    assert len(lines) == 10  # header + 9 instants
    meta = json.loads((tmp_path / "g" / "grid_meta.json").read_text())
    assert meta["n"] == 8
    assert "config_digest" in meta and "grid_digest" in meta


def test_seed_flag_overrides_config(tmp_path):
    cfg = _write(tmp_path / "sim.json", _simulate_cfg(seed=5))
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--seed", "99", "--out", str(tmp_path / "b")])
    assert (
        (tmp_path / "a" / "sample.csv").read_bytes()
        != (tmp_path / "b" / "sample.csv").read_bytes()
    )
    meta = json.loads((tmp_path / "b" / "sample_meta.json").read_text())
    assert meta["seed"] == 99

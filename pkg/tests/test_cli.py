import json

import numpy as np
import pytest

from monoslope.cli import main
from monoslope.estimator import MonotoneEstimate
from monoslope.models import Dataset

CHERN = ["--reps", "400", "--T", "4", "--h", "0.01", "--a-max", "1", "--a-step", "0.5"]


@pytest.fixture
def cache(tmp_path):
    return ["--cache-dir", str(tmp_path / "cache")]


def test_simulate_then_estimate(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--family", "density", "--n", "300", "--seed", "4", "--out", str(out)]) == 0
    data = Dataset.from_csv("density", out / "density_data.csv")
    assert data.n == 300
    assert main(["estimate", "--input", str(out / "density_lambda_n.csv"), "--out", str(tmp_path / "est")]) == 0
    est = MonotoneEstimate.from_dict(json.loads((tmp_path / "est" / "estimate.json").read_text()))
    assert np.all(np.diff(est.slopes) < 0)
    lines = (tmp_path / "est" / "estimate.csv").read_text().splitlines()
    assert lines[0] == "t,slope"


def test_simulate_is_seeded(tmp_path):
    for k in (1, 2):
        main(["simulate", "--family", "regression", "--n", "50", "--seed", "9", "--out", str(tmp_path / str(k))])
    assert (tmp_path / "1" / "regression_data.csv").read_text() == (tmp_path / "2" / "regression_data.csv").read_text()


def test_constants_needs_cache(tmp_path, cache, capsys):
    code = main(["constants", "--family", "density", "--p", "1", *CHERN, *cache, "--out", str(tmp_path)])
    assert code == 1
    assert "monoslope chernoff" in capsys.readouterr().err


def test_chernoff_constants_gof_and_clt(tmp_path, cache):
    assert main(["chernoff", "--p", "1", "--seed", "0", *CHERN, *cache, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "chernoff_p1.0_cov.csv").exists()

    assert main(["constants", "--family", "poisson", "--p", "1", *CHERN, *cache, "--out", str(tmp_path)]) == 0
    consts = json.loads((tmp_path / "constants_poisson_p1.0.json").read_text())
    assert consts["m_p"] > 0 and consts["sigma_p2"] > 0

    null = tmp_path / "null.json"
    null.write_text(json.dumps({"family": "density", "lam": {"kind": "linear", "intercept": 1.5, "slope": -1.0}}))
    main(["simulate", "--family", "density", "--n", "2000", "--seed", "1", "--out", str(tmp_path)])
    code = main(["gof", "--null-spec", str(null), "--data", str(tmp_path / "density_data.csv"), "--p", "1",
                 *CHERN, *cache, "--out", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "gof.json").read_text())
    assert 0 <= res["p_value"] <= 1

    # a short CLT run cannot meet the criteria: --check must turn that into exit code 2
    args = ["clt", "--family", "density", "--p", "1", "--n-grid", "100", "--replicates", "20", *CHERN, *cache,
            "--out", str(tmp_path / "clt")]
    assert main(args) == 0
    assert main([*args, "--check"]) == 2
    assert (tmp_path / "clt" / "clt_rows.csv").exists()


def test_risk_with_config_and_check(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "density", "n_grid": [1000, 2000], "replicates": 3, "seed": 2}))
    out = tmp_path / "risk"
    main(["risk", "--config", str(cfg), "--out", str(out)])
    printed = capsys.readouterr().out
    assert "[PASS]" in printed or "[FAIL]" in printed
    summary = json.loads((out / "risk_summary.json").read_text())
    assert summary["global"][0]["n"] == [1000, 2000]
    # --check maps any failed criterion to status 2
    code = main(["risk", "--config", str(cfg), "--out", str(out), "--check"])
    fails = "[FAIL]" in capsys.readouterr().out
    assert code == (2 if fails else 0)


@pytest.mark.parametrize("cmd", ["boundary", "modulus"])
def test_other_experiments(cmd, tmp_path):
    code = main([cmd, "--family", "poisson", "--n-grid", "1000", "2000", "4000", "--replicates", "3",
                 "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / f"{cmd}_rows.csv").exists()


def test_threads_flag_gives_same_rows(tmp_path):
    base = ["risk", "--family", "censorship", "--n-grid", "1000", "2000", "--replicates", "3", "--seed", "5"]
    main([*base, "--out", str(tmp_path / "a")])
    main([*base, "--threads", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "risk_rows.csv").read_bytes() == (tmp_path / "b" / "risk_rows.csv").read_bytes()

import csv
import json
import math

import pytest

from hiermarket import MarketInstance, TypeDistribution, ValuationProfile, welfare_of
from hiermarket.cli import main
from hiermarket.experiments import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    run_appendix_regression,
    run_experiment,
)
from hiermarket.market import Allocation

SMALL = {"K": 20, "N": 3, "betas": [0.0, 0.3], "runs": 3, "seed": 5}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return path


def test_config_rejects_bad_field():
    with pytest.raises(ConfigError, match="runs"):
        ExperimentConfig.from_dict({"runs": 0})
    with pytest.raises(ConfigError, match="K"):
        ExperimentConfig.from_dict({"K": "eighty"})
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(ConfigError, match="betas"):
        ExperimentConfig.from_dict({"betas": [-0.1]})
    with pytest.raises(ConfigError, match="profile"):
        ExperimentConfig.from_dict({"so_profile": {"family": "cubic"}})


def test_config_parse_error_has_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "K": 10,\n  "runs": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        ExperimentConfig.from_json(path)


def test_custom_table_in_config():
    cfg = ExperimentConfig.from_dict({
        "so_profile": {"family": "custom-table", "grid": [0, 4], "table": [[0, 0.1], [0, 0.05]]},
        **SMALL,
    })
    assert len(run_experiment(cfg).rows) == 3 * 2 * 3


def test_outputs_are_deterministic_across_jobs(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    run_experiment(cfg, jobs=1, out_dir=tmp_path / "a")
    run_experiment(cfg, jobs=3, out_dir=tmp_path / "b")
    for name in ("results.csv", "details.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_welfare_recomputable_from_details(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    run_experiment(cfg, out_dir=tmp_path)
    with open(tmp_path / "results.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == CSV_HEADER
    details = [json.loads(line) for line in open(tmp_path / "details.jsonl")]
    assert len(details) == len(rows)
    po, so, dist = cfg.build_profiles()
    for row, d in zip(rows, details):
        inst = MarketInstance(cfg.K, d["po_types"], d["so_types"], po, so, dist, 0.0)
        k_cj = [a + sum(b) for a, b in zip(d["k_j0"], d["k_ji"])]
        w = welfare_of(inst, Allocation(k_cj, d["k_j0"], d["k_ji"])).aggregate_valuation
        assert float(row["welfare"]) == w
        assert int(row["so_channels"]) == sum(map(sum, d["k_ji"]))


def test_common_random_numbers():
    res = run_experiment(ExperimentConfig.from_dict(SMALL))
    unreg = [r for r in res.rows if r[0] == "unregulated"]
    by_run = {}
    for r in unreg:
        by_run.setdefault(r[2], set()).add(tuple(r[4:]))
    assert all(len(v) == 1 for v in by_run.values())


def test_summary_lines():
    res = run_experiment(ExperimentConfig.from_dict(SMALL))
    lines = res.summary_lines()
    assert lines[0].startswith("scenario,beta")
    assert len(lines) == 1 + 3 * 2


def test_appendix_regression():
    assert all(ok for *_, ok in run_appendix_regression())


def test_cli_run(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    assert main(["run", str(path), "--out", str(tmp_path / "o"), "--summary", "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert "welfare_improvement" in out
    rows = list(csv.reader(open(tmp_path / "o" / "results.csv")))
    assert rows[0] == CSV_HEADER and all(r[3] == "9" for r in rows[1:])


def test_cli_config_flag_and_errors(tmp_path, capsys):
    path = _write(tmp_path, SMALL)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", str(bad)]) != 0
    assert main(["run"]) != 0
    assert main(["run", str(path), "--jobs", "0"]) != 0


def test_cli_appendix(capsys):
    assert main(["appendix"]) == 0
    assert capsys.readouterr().out.count("PASS") == 4


def test_cli_suites(capsys):
    assert main(["oracle-suite", "--instances", "10"]) == 0
    assert main(["ic-suite", "--instances", "3"]) == 0

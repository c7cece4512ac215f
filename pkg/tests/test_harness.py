import json

import jsonschema
import pytest

from harmgrad.errors import ConfigError
from harmgrad.harness import cli
from harmgrad.harness.config import load_config, parse_config
from harmgrad.harness.experiments import REGISTRY, run_experiment
from harmgrad.report import REPORT_SCHEMA, ExperimentReport

FAST = {
    "quasimode-residual": {"M": 4},
    "stationary-phase": {},
    "density-check": {"n": 25, "n_xi": 4},
    "lincal-tartar": {"n": 8},
    "lincal-plant": {"n": 49, "n_pairs": 2, "n_harmonic": 4},
    "qls-forward": {"n": 25},
    "qls-dtn": {"n": 25},
}


def test_registry_covers_cli():
    names = set(cli.SUBCOMMANDS.values()) | set(cli.LINCAL.values())
    assert names == set(REGISTRY)


@pytest.mark.parametrize("name", sorted(FAST))
def test_every_experiment_registers_metrics(name):
    rep = run_experiment(name, FAST[name], seed=0)
    assert rep.metrics
    d = rep.to_dict()
    jsonschema.validate(d, REPORT_SCHEMA)
    assert d["seed"] == 0


def test_quasimode_config_reports_eikonal_slope():
    rep = run_experiment("quasimode-residual", {"M": 4}, seed=1)
    assert abs(rep.metric("eikonal_x2_slope").value - 5) < 0.3


def test_unknown_experiment_and_parameter():
    with pytest.raises(ConfigError):
        run_experiment("nope", {}, 0)
    with pytest.raises(ConfigError):
        run_experiment("density-check", {"bogus": 1}, 0)


def test_config_schema():
    cfg = parse_config({"experiment": "density-check", "seed": 3, "cases": [{"n": 25}, {"n": 33}]})
    assert cfg.expanded() == [{"n": 25}, {"n": 33}]
    with pytest.raises(ConfigError):
        parse_config({"experiment": "density-check"})          # seed is mandatory
    with pytest.raises(ConfigError):
        parse_config({"experiment": "density-check", "seed": 1, "extra": 2})
    with pytest.raises(ConfigError):
        parse_config({"experiment": "density-check", "seed": "1"})


def test_load_config_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_report_requires_a_metric():
    with pytest.raises(jsonschema.ValidationError):
        ExperimentReport("empty").to_dict()


def test_cli_determinism_and_artifacts(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "density-check", "seed": 7, "params": {"n": 25, "n_xi": 4}}))
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert cli.main(["run", str(cfg), "--out-dir", str(d)]) == 0
        outs.append((d / "density-check.json").read_bytes())
        meta = json.loads((d / "density-check.meta.json").read_text())
        assert "timestamp" in meta
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])
    assert rep["seed"] == 7 and rep["pass"]
    assert rep["artifacts"] == ["density-check.recovered.csv"]
    assert (tmp_path / "run0" / "density-check.recovered.csv").read_text().startswith("freq,b_hat,oracle")


def test_cli_cases_with_threads(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "density-check", "seed": 1,
                               "params": {"n": 25, "n_xi": 2},
                               "cases": [{"kind": "structure"}, {"kind": "levi-civita"}]}))
    assert cli.main(["run", str(cfg), "--out-dir", str(tmp_path), "--threads", "2"]) == 0
    assert (tmp_path / "density-check.case0.json").exists()
    assert (tmp_path / "density-check.case1.json").exists()


def test_cli_subcommand_set_and_seed(tmp_path):
    code = cli.main(["lincal", "tartar", "--out-dir", str(tmp_path), "--seed", "4", "--set", "n=8"])
    assert code == 0
    rep = json.loads((tmp_path / "lincal-tartar.json").read_text())
    assert rep["seed"] == 4 and rep["params"]["grid"]["resolution"] == [8, 8, 8]


def test_cli_error_exit_codes(tmp_path, capsys):
    assert cli.main(["density-check", "--set", "bogus=1", "--out-dir", str(tmp_path)]) == 2
    assert "unknown parameters" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "qls-dtn", "seed": 0}))
    assert cli.main(["density-check", "--config", str(cfg)]) == 2


def test_cli_failing_metric_exits_one(tmp_path):
    code = cli.main(["qls-dtn", "--set", "n=25", "--set", "rel_tol=1e-12", "--out-dir", str(tmp_path)])
    assert code == 1

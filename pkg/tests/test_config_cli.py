import csv
import json
from pathlib import Path

import pytest

from corrsim.cli import EXIT_CAPACITY, EXIT_CHECK, EXIT_INPUT, EXIT_OK, main
from corrsim.config import validate_config
from corrsim.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def problems(raw):
    with pytest.raises(ConfigError) as info:
        validate_config(raw)
    return dict(info.value.problems)


def test_config_defaults_and_sources():
    cfg = validate_config('{"experiment": "equality", "source": "disj"}')
    assert cfg.params["n"] == 8 and cfg.trials == 0 and cfg.seed is None and cfg.output_format == "json"
    cfg = validate_config(b'{"experiment": "measures"}')
    assert len(cfg.sources) == 6
    cfg = validate_config({"experiment": "oracle", "source": {"standard": {"bsc": 0.2}}, "n": 2, "p": 0.5})
    assert cfg.source.shape == (2, 2) and cfg.params["kmax"] == 2


def test_config_reports_every_problem():
    got = problems({"experiment": "equality", "n": -1, "colour": 1, "trials": -5})
    assert set(got) == {"source", "n", "colour", "trials"}
    got = problems({"experiment": "gapip", "n": 9, "trials": 10})
    assert "seed" in got
    got = problems({"experiment": "equality", "source": "disj", "output": {"path": "x.csv", "format": "csv"}})
    assert "output.format" in got
    got = problems({"experiment": "equality", "source": {"u_size": 1, "v_size": 2, "probs": [[0.2, 0.2]]}})
    assert "normalization" in got["source"]
    assert "experiment" in problems({"experiment": "dance"})
    got = problems('{"experiment": "equality",\n "source": }')
    assert any(k.startswith("line 2 column") for k in got)


def test_cli_source_and_measure(capsys):
    code, out = run(capsys, "source", "disj")
    assert code == EXIT_OK and out["marginal_u"] == pytest.approx([2 / 3, 1 / 3]) and not out["product"]
    code, out = run(capsys, "source", "perf", "--sample", 5, "--seed", 1)
    assert code == EXIT_OK and out["sample"]["u"] == out["sample"]["v"]
    assert run(capsys, "source", "perf", "--sample", 5)[0] == EXIT_INPUT
    assert run(capsys, "source", "bogus")[0] == EXIT_INPUT
    code, out = run(capsys, "measure", "cor", "--source", "bsc(0.1)")
    assert out["value"] == pytest.approx(0.8)
    code, out = run(capsys, "measure", "entropy", "--source", "perf")
    assert out["value"] == pytest.approx(1)
    code, out = run(capsys, "measure", "hc", "--source", "perf", "--q", 3, "--p", 1.5, "--grid", 20)
    assert code == EXIT_OK and out["value"] is False and out["witness"] is not None
    assert run(capsys, "measure", "hc", "--source", "sigma(3,0)")[0] == EXIT_CAPACITY


def test_cli_agreement_roundtrip(capsys, tmp_path):
    saved = tmp_path / "agr.json"
    code, out = run(capsys, "agr", "--source", "disj", "--p", 1 / 36, "--save", saved)
    assert code == EXIT_OK and out["cost"]["value"] == pytest.approx(2 / 9)
    assert {c["kind"] for c in out["certificates"]} == {"correlation", "hypercontractive"}
    code, again = run(capsys, "agr", "--source", "disj", "--load", saved)
    assert again["cost"]["value"] == out["cost"]["value"]
    code, out = run(capsys, "agr", "--source", "bsc(0.2)", "--p", 0.1, "--ell", 2, "--mode", "mc",
                    "--trials", 2000, "--seed", 3)
    assert code == EXIT_OK and out["cost"]["mode"] == "monte_carlo"
    assert run(capsys, "agr", "--source", "disj")[0] == EXIT_INPUT
    assert run(capsys, "agr", "--source", "disj", "--p", 0.1, "--mode", "mc")[0] == EXIT_INPUT


def test_cli_collision(capsys, tmp_path):
    saved = tmp_path / "col.json"
    code, out = run(capsys, "col", "--source", "perf", "--n", 16, "--save", saved, "--extract")
    assert code == EXIT_OK and out["min_per_i"] >= 1 / 32
    assert out["extracted_agreement"]["cost"]["value"] <= 2 * out["max_out"] / 16 + 1e-12
    code, again = run(capsys, "col", "--source", "perf", "--load", saved)
    assert again["max_out"] == out["max_out"]
    code, out = run(capsys, "col", "--source", "priv", "--n", 16, "--construction", "birthday", "--amplify", 2)
    assert code == EXIT_OK and out["max_out"] == 8
    code, out = run(capsys, "col", "--source", "disj", "--n", 8, "--construction", "symmetrize", "--mode", "mc",
                    "--trials", 2000, "--seed", 1)
    assert code == EXIT_OK and "uniformity_pvalue" in out


def test_cli_smp(capsys):
    code, out = run(capsys, "smp", "eq", "--source", "disj", "--n", 8, "--x", 3, "--y", 3, "--trials", 200,
                    "--seed", 1)
    assert code == EXIT_OK and out["t"] == 356 and out["error"]["value"] <= 1 / 3
    code, out = run(capsys, "smp", "gapip", "--n", 27, "--m", 8, "--trials", 200, "--seed", 2)
    assert code == EXIT_OK and out["R"] == 11
    assert run(capsys, "smp", "gapip", "--n", 27, "--trials", 100)[0] == EXIT_INPUT
    code, out = run(capsys, "smp", "simulate", "--source", "disj", "--n", 8, "--x", 1, "--y", 2,
                    "--trials", 200, "--seed", 4)
    assert code == EXIT_OK and out["info"]["R"] == 9
    assert run(capsys, "smp", "simulate", "--base", "nope")[0] == EXIT_INPUT


def test_cli_bounds(capsys, tmp_path):
    assert run(capsys, "bounds", "hyp", "--p", 1.5, "--q", 3, "--z", 1)[1]["value"] == pytest.approx(2)
    assert run(capsys, "bounds", "cor", "--z", 0.5, "--cor", 0.25)[1]["value"] == pytest.approx(0.5)
    assert run(capsys, "bounds", "cor", "--z", 0.5)[0] == EXIT_INPUT
    assert run(capsys, "bounds", "sigma", "--m", 6, "--b", 1)[1]["ok"] is True
    assert run(capsys, "bounds", "sigma", "--m", 14)[0] == EXIT_CAPACITY
    code, out = run(capsys, "bounds", "shift", "--source", "disj", "--sigma", "sigma(8,0)", "--z", 0.25)
    assert code == EXIT_OK and out["ok"]
    assert run(capsys, "bounds", "certificates", "--source", "disj", "--z", 0.1)[0] == EXIT_OK
    code, out = run(capsys, "bounds", "oracle", "--source", "disj", "--n", 2, "--p", 0.5, "--ell", 2,
                    "--kmax", 2)
    assert code == EXIT_OK and out["best_size"] == 2 and out["note"].startswith("upper bound")
    csv_path = tmp_path / "scaling.csv"
    code, out = run(capsys, "bounds", "scaling", "--source", "disj", "--n", "8,16,32,64,128,256,512",
                    "--seed", 7, "--out", csv_path)
    assert code == EXIT_OK and 0.2 <= out["fitted_exponent"] <= 0.45
    with open(csv_path) as fh:
        assert next(csv.reader(fh)) == ["n", "p", "achieved_max_out", "hyp_floor", "cor_floor"]
    assert run(capsys, "bounds", "scaling", "--source", "disj", "--n", "8,16")[0] == EXIT_INPUT


@pytest.mark.parametrize("name", ["equality_disj", "measures", "scaling_disj", "simulate_disj"])
def test_shipped_configs_validate(name):
    validate_config((CONFIGS / f"{name}.json").read_bytes())


def test_cli_experiments(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out = run(capsys, "experiment", CONFIGS / "measures.json")
    assert code == EXIT_OK and all(out["checks"].values())
    with open(tmp_path / "measures.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 7 and float(rows[0]["cor"]) == pytest.approx(1)
    code, out = run(capsys, "experiment", CONFIGS / "scaling_disj.json")
    assert code == EXIT_OK and (tmp_path / "scaling_disj.csv").exists()
    cfg = tmp_path / "eq.json"
    cfg.write_text(json.dumps({"experiment": "equality", "source": "bsc(0.2)", "trials": 300, "seed": 1}))
    code, out = run(capsys, "experiment", cfg, "--out", "eq_report.json")
    assert code == EXIT_OK and out["passed"]
    report = json.loads((tmp_path / "eq_report.json").read_text())
    assert report["config"]["seed"] == 1 and "rng" in report and "version" in report
    for body in ({"experiment": "oracle", "source": "priv", "n": 3, "p": 0.34, "kmax": 3},
                 {"experiment": "agreement", "source": "disj", "p": 0.01},
                 {"experiment": "gapip", "n": 27, "m": 8, "trials": 200, "seed": 3}):
        cfg.write_text(json.dumps(body))
        code, out = run(capsys, "experiment", cfg)
        assert code == EXIT_OK, out


def test_cli_experiment_errors(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"experiment": "equality", "sourc": "disj"}')
    code, out = run(capsys, "experiment", cfg)
    assert code == EXIT_INPUT and {p["field"] for p in out["problems"]} == {"sourc", "source"}
    assert run(capsys, "experiment", tmp_path / "missing.json")[0] == EXIT_INPUT
    cfg.write_text(json.dumps({"experiment": "oracle", "source": "sigma(2,0)", "n": 3, "p": 0.3, "ell": 2}))
    assert run(capsys, "experiment", cfg)[0] == EXIT_CAPACITY
    # an impossible cap makes the oracle infeasible
    cfg.write_text(json.dumps({"experiment": "oracle", "source": "priv", "n": 2, "p": 0.5, "kmax": 1}))
    assert run(capsys, "experiment", cfg)[0] not in (EXIT_OK, EXIT_CHECK)

"""Tests de la línea de comandos."""

import csv
import io
import json

import pytest

from riskx.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, theta_grid


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("RISKX_WORKERS", "1")
    monkeypatch.setenv("RISKX_SEED", "0")


def _run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def _csv_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# expand


def test_expand_binomial_table(capsys):
    code, out = _run(capsys, "expand", "--model", "multinomial",
                     "--probs", "0.5", "0.4", "--alpha", "-1", "--n", "10")
    assert code == EXIT_OK
    rows = _csv_rows(out)
    assert [round(float(r["value"]), 4) for r in rows] == [0.0525, 0.0526]
    assert rows[0]["provenance"] == "multinomial-closed"
    assert rows[0]["c1"] == "0.5"


def test_expand_normal_table(capsys):
    code, out = _run(capsys, "expand", "--model", "normal", "--dim", "10", "--n", "300")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert round(float(row["value"]), 4) == 0.0927
    assert row["theta"].startswith("p=10;")


def test_expand_chi2_has_no_second_order_term(capsys):
    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3",
                     "--alpha", "-3", "--n", "10")
    assert code == EXIT_OK
    assert float(_csv_rows(out)[0]["value"]) == pytest.approx(0.05)


def test_expand_grid_rows(capsys):
    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.2,0.3",
                     "--alpha", "-1", "0", "1", "--n", "10", "50")
    assert code == EXIT_OK
    rows = _csv_rows(out)
    assert len(rows) == 6
    assert rows[0]["theta"] == "0.2;0.3"


def test_expand_mixture_uses_corollary(capsys):
    code, out = _run(capsys, "expand", "--model", "mixture", "--sigma2", "0.5",
                     "--theta", "0.3", "--mc-samples", "5000")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert row["provenance"] == "mixture-corollary"
    assert float(row["c1"]) == 0.5


def test_jsonl_output(capsys):
    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.5",
                     "--format", "jsonl")
    assert code == EXIT_OK
    record = json.loads(out.splitlines()[0])
    assert record["n"] == 10
    assert record["value"] == pytest.approx(0.0525)
    assert record["model"] == "multinomial"


def test_output_file(tmp_path, capsys):
    target = tmp_path / "results" / "expand.csv"
    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.5",
                     "--output", str(target))
    assert code == EXIT_OK
    assert out == ""
    assert _csv_rows(target.read_text(encoding="utf-8"))[0]["model"] == "multinomial"


def test_precision_flag(capsys):
    code, out = _run(capsys, "expand", "--model", "normal", "--dim", "10", "--n", "300",
                     "--precision", "2")
    assert code == EXIT_OK
    assert _csv_rows(out)[0]["value"] == "0.093"


def test_precision_out_of_range():
    with pytest.raises(SystemExit) as info:
        main(["expand", "--model", "multinomial", "--probs", "0.5", "--precision", "16"])
    assert info.value.code == EXIT_USAGE


# Configuración


def test_config_defaults_and_flag_precedence(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"alpha": -3, "n": [10]}), encoding="utf-8")
    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3",
                     "--config", str(config))
    assert code == EXIT_OK
    assert float(_csv_rows(out)[0]["value"]) == pytest.approx(0.05)

    code, out = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3",
                     "--config", str(config), "--alpha", "-1")
    assert code == EXIT_OK
    assert float(_csv_rows(out)[0]["value"]) == pytest.approx(0.05 + 0.313492 / 100, abs=1e-6)


def test_config_unknown_key(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"alpha": -1, "colour": "red"}), encoding="utf-8")
    code, _ = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3",
                   "--config", str(config))
    assert code == EXIT_USAGE


def test_config_missing_file(tmp_path, capsys):
    code, _ = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3",
                   "--config", str(tmp_path / "absent.json"))
    assert code == EXIT_USAGE


def test_invalid_seed_environment(monkeypatch, capsys):
    monkeypatch.setenv("RISKX_SEED", "-4")
    code, _ = _run(capsys, "expand", "--model", "multinomial", "--probs", "0.3")
    assert code == EXIT_USAGE


# Errores de entrada y numéricos


@pytest.mark.parametrize("argv", [
    ["expand", "--model", "multinomial", "--probs", "0.7,0.7"],
    ["expand", "--model", "multinomial", "--probs", "abc"],
    ["expand", "--model", "multinomial"],
    ["expand", "--model", "normal"],
    ["expand", "--model", "mixture", "--theta", "1.5"],
    ["simulate", "--model", "multinomial", "--probs", "0.3", "--reps", "10"],
    ["simulate", "--model", "multinomial", "--probs", "0.3", "--check-invariance", "1"],
])
def test_invalid_input_exit_code(argv, capsys):
    code, out = _run(capsys, *argv)
    assert code == EXIT_USAGE
    assert out == ""


def test_unknown_pattern():
    with pytest.raises(SystemExit) as info:
        main(["loops", "--pattern", "normal-xyz"])
    assert info.value.code == EXIT_USAGE


def test_all_infinite_simulation_is_numeric_failure(capsys):
    code, _ = _run(capsys, "simulate", "--model", "multinomial", "--probs", "0.01",
                   "--alpha", "1", "--n", "1", "--reps", "100")
    assert code == EXIT_NUMERIC


# geometry / simulate / loops


def test_geometry_both_sources(capsys):
    code, out = _run(capsys, "geometry", "--model", "multinomial", "--probs", "0.3",
                     "--mc-samples", "20000")
    assert code == EXIT_OK
    analytic, mc = _csv_rows(out)
    assert analytic["source"] == "analytic" and mc["source"] == "monte-carlo"
    assert float(analytic["tt"]) == pytest.approx(0.761905, abs=1e-6)
    assert analytic["se_tt"] == "-" and analytic["mc_count"] == "-"
    assert float(mc["se_tt"]) > 0 and mc["mc_count"] == "20000"
    assert analytic["positivity"] == "true"
    assert analytic["binomial_value"] == "-"


def test_geometry_reports_drawn_sample_count(capsys):
    # 20050 extracciones se redondean a 100 bloques de 201
    code, out = _run(capsys, "geometry", "--model", "multinomial", "--probs", "0.3",
                     "--mode", "mc", "--mc-samples", "20050")
    assert code == EXIT_OK
    assert _csv_rows(out)[0]["mc_count"] == "20100"


def test_geometry_normal_analytic(capsys):
    code, out = _run(capsys, "geometry", "--model", "normal", "--dim", "2", "--mode", "analytic")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert (row["tt"], row["tdtd"], row["f_m"]) == ("28", "36", "-18")


def test_simulate_reports_infinite_replicates(capsys):
    code, out = _run(capsys, "simulate", "--model", "multinomial", "--probs", "0.3",
                     "--alpha", "1", "--n", "5", "--reps", "200")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert int(row["infinite_count"]) > 0
    assert int(row["reps_used"]) == 200 - int(row["infinite_count"])
    assert row["expansion_value"] != "-"


def test_simulate_invariance_check(capsys):
    code, out = _run(capsys, "simulate", "--model", "normal", "--dim", "2",
                     "--check-invariance", "4,0,1", "--n", "20", "--reps", "500")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert row["passed"] == "true"
    assert row["sigma_b"] == "4;0;1"


def test_loops_normal_tt(capsys):
    code, out = _run(capsys, "loops", "--pattern", "normal-tt")
    assert code == EXIT_OK
    row = _csv_rows(out)[0]
    assert row["summary"] == "512,1536,2048 → p^3+3p^2+4p"
    assert row["combinations"] == "4096"
    assert row["pattern"] == "normal-tt"


def test_theta_grid_is_inclusive():
    assert theta_grid(0.1, 0.3, 0.1) == [0.1, 0.2, 0.3]

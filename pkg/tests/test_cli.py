import json

import pytest
from click.testing import CliRunner

from composedc.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def test_layout_command(runner, tmp_path):
    out = tmp_path / "layout.json"
    result = runner.invoke(main, ["layout", "--dc-kind", "rack-scale",
                                  "-o", str(out)])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data["n_racks"] == 4


def test_generate_command(runner):
    result = runner.invoke(main, ["generate", "--count", "4", "--seed", "3"])
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert len(data["workloads"]) == 4


def test_heep_command(runner):
    result = runner.invoke(main, ["heep", "--dc-kind", "rack-scale",
                                  "--count", "5", "--seed", "1"])
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["report"]["tdpc"] > 0


def test_solve_command(runner):
    result = runner.invoke(main, ["solve", "--dc-kind", "traditional",
                                  "--fabric", "electrical", "--count", "3",
                                  "--seed", "1", "--max-nodes", "50000"])
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["proven_optimal"] is True


def test_export_lp_command(runner, tmp_path):
    out = tmp_path / "model.lp"
    result = runner.invoke(main, ["export-lp", "--dc-kind", "rack-scale",
                                  "--count", "2", "--seed", "2",
                                  "-o", str(out)])
    assert result.exit_code == 0, result.output
    assert out.read_text().startswith("\\")


def test_sweep_and_compare_commands(runner, tmp_path):
    scenario_a = tmp_path / "a.yaml"
    scenario_a.write_text(
        "name: elec\ndc_kind: traditional\nfabric_kind: electrical\n"
        "wclass: cpu-intensive\ncounts: [3]\nseeds: [0, 1]\nmethods: [heep]\n"
    )
    csv_a = tmp_path / "a.csv"
    json_a = tmp_path / "a.json"
    result = runner.invoke(main, ["sweep", str(scenario_a), "-o", str(csv_a),
                                  "--json-output", str(json_a)])
    assert result.exit_code == 0, result.output
    assert csv_a.read_text().count("\n") == 3  # header + 2 rows

    scenario_b = tmp_path / "b.yaml"
    scenario_b.write_text(
        "name: opt\ndc_kind: traditional\nfabric_kind: optical\n"
        "wclass: cpu-intensive\ncounts: [3]\nseeds: [0, 1]\nmethods: [heep]\n"
    )
    json_b = tmp_path / "b.json"
    result = runner.invoke(main, ["sweep", str(scenario_b), "-o",
                                  str(tmp_path / "b.csv"),
                                  "--json-output", str(json_b)])
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, ["compare", str(json_a), str(json_b)])
    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["comparisons"][0]["mean_pct_reduction"] > 0


def test_sweep_exit_code_on_cell_error(runner, tmp_path):
    # An unsatisfiable scenario cell: pod-scale with one rack per pod.
    scenario = tmp_path / "bad.yaml"
    scenario.write_text(
        "name: bad\ndc_kind: pod-scale\nracks_per_pod: 1\ncounts: [2]\n"
        "seeds: [0]\nmethods: [heep]\n"
    )
    result = runner.invoke(main, ["sweep", str(scenario)])
    assert result.exit_code != 0

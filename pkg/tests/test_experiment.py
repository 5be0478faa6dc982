"""Tests for the experiment harness and command-line driver."""

import json
import subprocess
import sys

import pytest

from qjadmm import (
    AdmmConfig,
    ExperimentConfig,
    GraphSpec,
    InstanceSpec,
    compare_traces,
    format_compare_table,
    run_experiment,
)
from qjadmm.cli import main as cli_main
from qjadmm.experiment import METADATA_FILENAME


def tiny_config(out_dir, algorithm="all", deltas=("1e-2", "1e-3"), iters=8):
    return ExperimentConfig(
        instance=InstanceSpec(n_nodes=5, local_dim=3, data_rows=5, seed=4),
        graph=GraphSpec(density=0.4, seed=2),
        admm=AdmmConfig(
            rho=0.5, gamma=1.0, level="1e-2", max_outer_iterations=iters, master_seed=6
        ),
        algorithm=algorithm,
        delta_sweep=deltas,
        output_dir=None if out_dir is None else str(out_dir),
    )


def test_config_json_round_trip(tmp_path):
    config = tiny_config(tmp_path / "out")
    again = ExperimentConfig.from_json(config.to_json())
    assert again == config


def test_config_round_trip_normalizes_level_spellings(tmp_path):
    a = tiny_config(tmp_path, deltas=("1e-3",))
    b = tiny_config(tmp_path, deltas=("1/1000",))
    assert a == b


def test_config_rejects_unknown_algorithm(tmp_path):
    with pytest.raises(ValueError):
        tiny_config(tmp_path, algorithm="magic")


def test_run_experiment_writes_expected_file_set(tmp_path):
    out = tmp_path / "out"
    manifest = run_experiment(tiny_config(out))
    names = sorted(p.name for p in manifest["traces"])
    assert names == [
        "centralized_exact.csv",
        "centralized_quantized_delta_1e-2.csv",
        "centralized_quantized_delta_1e-3.csv",
        "qdpj_delta_1e-2.csv",
        "qdpj_delta_1e-3.csv",
    ]
    assert manifest["metadata"].name == METADATA_FILENAME
    # nothing written outside the output directory
    for path in manifest["traces"] + [manifest["metadata"]]:
        assert path.parent == out


def test_run_experiment_metadata_self_describing(tmp_path):
    out = tmp_path / "out"
    config = tiny_config(out)
    manifest = run_experiment(config)
    meta = json.loads(manifest["metadata"].read_text())
    assert meta["config"] == config.to_dict()
    assert meta["graph"]["diameter"] >= 1
    assert meta["oracle_residual"] < 1e-8
    assert meta["entry_distribution"] == "standard_normal"
    run_names = set(meta["runs"])
    assert run_names == {p.name for p in manifest["traces"]}
    for entry in meta["runs"].values():
        assert "pieces_sent_total" in entry and "elapsed_seconds" in entry
        m = config.instance.local_dim
        assert entry["bits_estimate_total"] == entry["pieces_sent_total"] * (m * 64 + 64)


def test_reruns_are_byte_identical(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    config_a = tiny_config(out_a)
    config_b = tiny_config(out_b)
    m_a = run_experiment(config_a)
    m_b = run_experiment(config_b)
    for pa, pb in zip(sorted(m_a["traces"]), sorted(m_b["traces"])):
        assert pa.read_bytes() == pb.read_bytes()


def test_environment_variable_supplies_output_dir(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv("QJADMM_OUT", str(target))
    config = tiny_config(None, algorithm="centralized_exact", deltas=("1e-2",), iters=3)
    manifest = run_experiment(config)
    assert manifest["traces"][0].parent == target


def test_compare_traces_summary(tmp_path):
    # enough iterations that both levels reach their quantization floors
    out = tmp_path / "out"
    manifest = run_experiment(tiny_config(out, algorithm="qdpj", iters=250))
    rows = compare_traces(sorted(manifest["traces"]))
    assert len(rows) == 2
    coarse = next(r for r in rows if "1e-2" in r["trace"])
    fine = next(r for r in rows if "1e-3" in r["trace"])
    assert fine["floor"] <= coarse["floor"]
    for row in rows:
        assert row["pieces_sent_total"] is not None
        assert row["mean_consensus_rounds"] > 0
    table = format_compare_table(rows)
    assert "final_l1_error" in table.splitlines()[0]
    assert len(table.splitlines()) == 3


def test_compare_single_trace(tmp_path):
    out = tmp_path / "out"
    manifest = run_experiment(
        tiny_config(out, algorithm="centralized_exact", deltas=("1e-2",), iters=5)
    )
    rows = compare_traces(manifest["traces"])
    assert len(rows) == 1


def test_compare_rejects_empty_file(tmp_path):
    bad = tmp_path / "empty.csv"
    bad.write_text("")
    with pytest.raises(ValueError):
        compare_traces([bad])


def test_compare_rejects_mismatched_axes(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    m_a = run_experiment(tiny_config(out_a, algorithm="centralized_exact", iters=5))
    m_b = run_experiment(tiny_config(out_b, algorithm="centralized_exact", iters=9))
    with pytest.raises(ValueError):
        compare_traces([m_a["traces"][0], m_b["traces"][0]])


# --- command-line interface ---------------------------------------------------


def write_config(tmp_path, **kwargs):
    config = tiny_config(tmp_path / "out", **kwargs)
    path = tmp_path / "config.json"
    path.write_text(config.to_json())
    return path, config


def test_cli_check_params(tmp_path, capsys):
    path, _ = write_config(tmp_path)
    code = cli_main(["check-params", "--config", str(path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "parameter gate passed" in out
    assert "node 1" in out


def test_cli_run_check_params_only(tmp_path, capsys):
    path, _ = write_config(tmp_path)
    code = cli_main(["run", "--config", str(path), "--check-params-only"])
    assert code == 0
    assert "margin" in capsys.readouterr().out


def test_cli_run_single_algorithm(tmp_path, capsys):
    path, config = write_config(tmp_path, algorithm="centralized_exact")
    code = cli_main(["run", "--config", str(path)])
    assert code == 0
    assert (tmp_path / "out" / "centralized_exact.csv").exists()


def test_cli_run_refuses_algorithm_all(tmp_path, capsys):
    path, _ = write_config(tmp_path)
    code = cli_main(["run", "--config", str(path)])
    assert code == 2


def test_cli_run_delta_and_out_overrides(tmp_path):
    path, _ = write_config(tmp_path, algorithm="qdpj")
    target = tmp_path / "elsewhere"
    code = cli_main(
        ["run", "--config", str(path), "--out", str(target), "--delta", "1e-1", "--seed", "9"]
    )
    assert code == 0
    assert (target / "qdpj_delta_1e-1.csv").exists()
    meta = json.loads((target / METADATA_FILENAME).read_text())
    assert meta["config"]["admm"]["master_seed"] == 9


def test_cli_timings_flag_appends_wallclock(tmp_path):
    path, _ = write_config(tmp_path, algorithm="centralized_exact")
    assert cli_main(["run", "--config", str(path), "--timings"]) == 0
    header = (tmp_path / "out" / "centralized_exact.csv").read_text().splitlines()[0]
    assert header.endswith(",wallclock_ms")


def test_cli_sweep_and_compare(tmp_path, capsys):
    path, _ = write_config(tmp_path, algorithm="qdpj", deltas=("1e-2", "1e-3"))
    assert cli_main(["sweep", "--config", str(path)]) == 0
    traces = sorted(str(p) for p in (tmp_path / "out").glob("qdpj_*.csv"))
    assert len(traces) == 2
    capsys.readouterr()
    assert cli_main(["compare", *traces]) == 0
    out = capsys.readouterr().out
    assert "qdpj_delta_1e-2.csv" in out


def test_cli_invalid_config_exits_2(tmp_path, capsys):
    path = tmp_path / "config.json"
    data = json.loads(write_config(tmp_path)[1].to_json())
    data["admm"]["gamma"] = 2.5  # outside the open interval
    path.write_text(json.dumps(data))
    with pytest.raises(SystemExit) as info:
        cli_main(["run", "--config", str(path)])
    assert info.value.code == 2


def test_cli_missing_config_exits_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli_main(["run", "--config", str(tmp_path / "nope.json")])
    assert info.value.code == 2


def test_cli_consensus_stall_exits_3(tmp_path, capsys):
    config = ExperimentConfig(
        instance=InstanceSpec(n_nodes=5, local_dim=3, data_rows=5, seed=4),
        graph=GraphSpec(density=0.4, seed=2),
        admm=AdmmConfig(
            rho=0.5, gamma=1.0, level="1e-2", max_outer_iterations=4, master_seed=6,
            consensus_round_cap=1,
        ),
        algorithm="qdpj",
        delta_sweep=("1e-2",),
        output_dir=str(tmp_path / "out"),
    )
    path = tmp_path / "config.json"
    path.write_text(config.to_json())
    code = cli_main(["run", "--config", str(path)])
    assert code == 3
    assert "outer iteration" in capsys.readouterr().err


def test_cli_gen_instance(tmp_path, capsys):
    target = tmp_path / "instance.txt"
    code = cli_main(["gen-instance", "--preset", "desk", "--seed", "3", "--out", str(target)])
    assert code == 0
    assert target.exists()
    from qjadmm import load_instance

    problems, b = load_instance(target)
    assert len(problems) == 10


def test_cli_entry_point_runs_as_module(tmp_path):
    path, _ = write_config(tmp_path)
    proc = subprocess.run(
        [sys.executable, "-m", "qjadmm.cli", "check-params", "--config", str(path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "parameter gate passed" in proc.stdout

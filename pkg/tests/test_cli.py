import csv
import json
import math

import pytest

from chanmix.cli import main, parse_config, run_experiment
from chanmix.pec import depolarized_pauli_basis, quasiprob_decompose
from chanmix.channels import unitary_channel, PAULI_X


def test_parse_config_fills_defaults():
    cfg = parse_config(
        {
            "experiment": "lindblad",
            "omega0": 1.0,
            "omega": 0.5,
            "gamma": 0.1,
            "dt": 0.05,
            "steps": 10,
        }
    )
    assert cfg.options["seed"] == 0
    assert cfg.options["method"] == "ccc"
    assert cfg.options["trajectories"] == 100


def test_parse_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config keys.*typo_field"):
        parse_config(
            {
                "experiment": "pec",
                "layers": ["X"],
                "typo_field": 1,
            }
        )


def test_parse_config_names_range_violation():
    with pytest.raises(ValueError, match="noise_p"):
        parse_config({"experiment": "pec", "layers": ["X"], "noise_p": 1.5})
    with pytest.raises(ValueError, match="dt"):
        parse_config(
            {
                "experiment": "lindblad",
                "omega0": 1.0,
                "omega": 0.5,
                "gamma": 0.1,
                "dt": -0.1,
                "steps": 10,
            }
        )


def test_parse_config_roundtrip(tmp_path):
    data = {
        "experiment": "pec",
        "layers": ["X", "X"],
        "noise_p": 0.1,
        "k": [0, 1, 2],
        "samples": 50,
        "seed": 3,
        "tol": 1e-8,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    cfg = parse_config(path)
    again = parse_config(cfg.to_json())
    assert cfg == again


def test_run_pec_k_sweep_bookkeeping():
    cfg = parse_config(
        {
            "experiment": "pec",
            "layers": ["X", "X"],
            "noise_p": 0.1,
            "k": [0, 1, 2],
            "samples": 50,
            "seed": 1,
        }
    )
    record, rows = run_experiment(cfg)
    gamma = quasiprob_decompose(
        unitary_channel(PAULI_X, "X"), depolarized_pauli_basis(0.1)
    ).gamma
    outputs = record.outputs
    assert outputs["ideal_value"] == pytest.approx(1.0, abs=1e-9)
    for entry in outputs["sweep"]:
        k = entry["k"]
        assert entry["residual_negativity"] == math.prod([gamma] * (2 - k))
    assert outputs["sweep"][2]["stderr"] == 0.0
    assert rows == []


def test_run_resources_rabi_step():
    cfg = parse_config({"experiment": "resources", "source": {"builtin": "rabi_step"}})
    record, rows = run_experiment(cfg)
    out = record.outputs
    assert out["ccc_step"]["qubits"] == 4
    assert out["forking_step"]["qubits"] >= 7
    assert out["forking_step_one_hot"]["qubits"] == 8
    assert out["two_qubit_ratio_forking_over_ccc"] >= 5.0
    assert {r["circuit"] for r in rows} == {
        "ccc_step",
        "forking_step",
        "forking_step_one_hot",
    }


def test_cli_decompose_stdout(capsys):
    rc = main(["decompose", "--target", "X", "--basis-p", "0.1"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["outputs"]["gamma"] > 1.0
    assert len(payload["outputs"]["coeffs"]) == 4


def test_cli_ccc_roundtrip(tmp_path, capsys):
    chans = [
        {"label": "I", "dim": 2, "kraus": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]},
        {
            "label": "X",
            "dim": 2,
            "kraus": [[[[0, 0], [1, 0]], [[1, 0], [0, 0]]]],
        },
    ]
    cfile = tmp_path / "chans.json"
    cfile.write_text(json.dumps(chans))
    out = tmp_path / "out.json"
    rc = main(
        ["ccc", "--channels-file", str(cfile), "--probs", "0.5", "0.5",
         "--output", str(out)]
    )
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["outputs"]["mixture_deviation"] <= 1e-10
    assert payload["outputs"]["qubits"] == 2  # one coeff + one system qubit


def test_cli_lindblad_csv_columns(tmp_path):
    out = tmp_path / "run.json"
    series = tmp_path / "series.csv"
    rc = main(
        ["lindblad", "--omega0", "1", "--omega", "0.5", "--gamma", "0.1",
         "--dt", "0.1", "--steps", "5", "--method", "exact",
         "--output", str(out), "--csv", str(series)]
    )
    assert rc == 0
    with open(series) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert set(rows[0]) == {
        "t", "expect_z", "expect_x", "excited_population",
        "trace_distance_to_exact",
    }
    assert float(rows[-1]["trace_distance_to_exact"]) <= 1e-10


def test_cli_determinism_modulo_timestamps(tmp_path):
    args = ["lindblad", "--omega0", "1", "--omega", "0.5", "--gamma", "0.1",
            "--dt", "0.1", "--steps", "4", "--method", "sampled",
            "--trajectories", "20", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    pa, pb = json.loads(a.read_text()), json.loads(b.read_text())
    for volatile in ("wall_clock_s", "timestamp"):
        pa.pop(volatile), pb.pop(volatile)
    assert json.dumps(pa, sort_keys=True) == json.dumps(pb, sort_keys=True)


def test_cli_failure_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "never.json"
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiment": "pec", "layers": ["X"], "noise_p": 1.5}))
    rc = main(["pec", "--config", str(cfg), "--output", str(out)])
    assert rc == 1
    assert not out.exists()
    err = json.loads(capsys.readouterr().err)
    assert "noise_p" in err["message"]


def test_cli_rejects_unknown_experiment():
    with pytest.raises(ValueError, match="unknown experiment"):
        parse_config({"experiment": "mystery"})

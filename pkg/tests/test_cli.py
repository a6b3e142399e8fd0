"""Config parsing, canonical serialization, CLI commands and exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from sts.cli import main
from sts.config import (
    ConfigError,
    abc_field,
    build_flow,
    build_noise,
    build_potential,
    canonical_json,
    parse_config,
)
from sts.trig import TrigField

MINIMAL = {
    "dimension": 1,
    "truncation": 8,
    "theta": 0.5,
    "flow": {"preset": "langevin-cos"},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_parse_minimal_defaults():
    cfg = parse_config(json.dumps(MINIMAL))
    assert cfg.alpha == 0.5
    assert cfg.noise == "identity"
    assert cfg.t_grid == [0.1, 1.0, 10.0]
    assert cfg.tolerances["tol_zero"] == 1e-8
    assert cfg.seed == 0


def test_parse_rejects_bad_documents():
    bad = [
        "not json",
        json.dumps({**MINIMAL, "bogus": 1}),
        json.dumps({**MINIMAL, "dimension": 4}),
        json.dumps({**MINIMAL, "truncation": 0}),
        json.dumps({**MINIMAL, "theta": -1.0}),
        json.dumps({**MINIMAL, "alpha": 1.5}),
        json.dumps({**MINIMAL, "flow": {"preset": "unknown"}}),
        # preset pinned to another dimension
        json.dumps({**MINIMAL, "dimension": 2, "flow": {"preset": "abc"}}),
        json.dumps({**MINIMAL, "flow": {"preset": "custom"}}),
        json.dumps(
            {**MINIMAL, "sweep": {"theta": [0.1], "parameter": "a",
                                  "values": list(range(2000))}}
        ),
    ]
    for text in bad:
        with pytest.raises(ConfigError):
            parse_config(text)


def test_config_round_trip_byte_identical():
    doc = {**MINIMAL, "seed": 7, "t_grid": [0.5, 5.0],
           "tolerances": {"tol_pair": 1e-7}}
    once = parse_config(json.dumps(doc)).to_json()
    twice = parse_config(once).to_json()
    assert once == twice


def test_canonical_json_handles_numpy_scalars():
    text = canonical_json(
        {"a": np.bool_(True), "b": np.int64(3), "c": np.float64(0.5)}
    )
    assert json.loads(text) == {"a": True, "b": 3, "c": 0.5}


def test_build_flow_presets():
    cfg = parse_config(json.dumps({
        "dimension": 2, "truncation": 2, "theta": 0.1,
        "flow": {"preset": "drift", "params": {"c": [1.0, -2.0]}},
    }))
    F = build_flow(cfg)
    assert F[0].mean() == 1.0 and F[1].mean() == -2.0

    cfg = parse_config(json.dumps({
        "dimension": 1, "truncation": 2, "theta": 0.1,
        "flow": {"preset": "langevin-double", "params": {"a": 0.4}},
    }))
    # drift must be minus the gradient of the emitted potential
    F, U = build_flow(cfg), build_potential(cfg)
    assert (F[0] + U.diff(0)).max_abs() < 1e-15

    cfg = parse_config(json.dumps({
        "dimension": 3, "truncation": 1, "theta": 0.1,
        "flow": {"preset": "abc", "params": {"A": 1.0, "B": 0.5, "C": 0.0}},
    }))
    got = build_flow(cfg)
    ref = abc_field(1.0, 0.5, 0.0)
    assert all((got[i] - ref[i]).max_abs() == 0.0 for i in range(3))


def test_custom_flow_is_real_and_conjugate_completed():
    cfg = parse_config(json.dumps({
        "dimension": 1, "truncation": 4, "theta": 0.2,
        "flow": {"preset": "custom", "modes": [
            {"axis": 1, "wavevector": [1], "re": 0.5, "im": -0.25},
        ]},
    }))
    F = build_flow(cfg)
    expect = TrigField(1, {(1,): 0.5 - 0.25j, (-1,): 0.5 + 0.25j})
    assert (F[0] - expect).max_abs() == 0.0


def test_build_noise_custom_frame():
    cfg = parse_config(json.dumps({
        **MINIMAL,
        "noise": [[{"axis": 1, "wavevector": [0], "re": 1.0, "im": 0.0},
                   {"axis": 1, "wavevector": [1], "re": 0.15, "im": 0.0}]],
    }))
    frame = build_noise(cfg)
    assert len(frame) == 1
    expect = TrigField.constant(1, 1.0) + TrigField.cos(1, 0, 0.3)
    assert (frame[0][0] - expect).max_abs() < 1e-15


def test_cli_spectrum_writes_reports(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["payload"]["classification"] == "unbroken"
    assert report["checks"] == {"converged": True}
    assert (out / "eigenvalues.csv").exists()
    assert (out / "traces.csv").exists()
    assert (out / "report.timing.txt").exists()


def test_cli_reports_are_deterministic(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["spectrum", "--config", cfg, "--out", str(a)]) == 0
    assert main(["spectrum", "--config", cfg, "--out", str(b)]) == 0
    for name in ("report.json", "eigenvalues.csv", "traces.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_csv_is_rfc4180(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    raw = (out / "eigenvalues.csv").read_bytes()
    lines = raw.split(b"\r\n")
    assert lines[0] == b"degree,index,re,im,converged"
    assert raw.count(b"\r\n") == len([l for l in lines if l]) or raw.endswith(b"\r\n")


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert main(["spectrum", "--config", str(bad), "--out", str(tmp_path)]) == 2
    missing = str(tmp_path / "nope.json")
    assert main(["spectrum", "--config", missing, "--out", str(tmp_path)]) == 2


def test_cli_indeterminate_exit_code(tmp_path):
    doc = {**MINIMAL, "theta": 0.0, "flow": {"preset": "drift"}}
    cfg = write_config(tmp_path, doc)
    code = main(["classify", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--no-check-convergence"])
    assert code == 3


def test_cli_witten_check(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["witten", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["payload"]["witten_max_abs"] <= 1e-6


def test_cli_pair_check(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["pair", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["payload"]["pairing_detail"]["violations"] == 0


def test_cli_evolve(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out), "--t", "0.5"]) == 0
    rows = (out / "density.csv").read_text().strip().split("\n")
    assert rows[0].strip() == "x,density"
    assert len(rows) == 65


def test_cli_mc_compare_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    code = main([
        "mc-compare", "--config", cfg, "--out", str(out),
        "--t", "0.5", "--samples", "2000", "--l1-bound", "1e-6",
    ])
    assert code == 4
    report = json.loads((out / "report.json").read_text())
    assert report["checks"]["l1_within_bound"] is False


def test_cli_langevin_check(tmp_path):
    doc = {**MINIMAL, "truncation": 16}
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["langevin-check", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["checks"]["spectrum_real"]
    assert report["checks"]["matches_hermitian_oracle"]
    assert report["payload"]["langevin"]["oracle_mismatch"] <= 1e-8


def test_cli_langevin_check_rejects_other_flows(tmp_path):
    doc = {**MINIMAL, "flow": {"preset": "diffusion"}}
    cfg = write_config(tmp_path, doc)
    assert main(["langevin-check", "--config", cfg,
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_sweep(tmp_path):
    doc = {
        "dimension": 1, "truncation": 6, "theta": 0.5,
        "flow": {"preset": "random", "params": {"bandwidth": 1}},
        "sweep": {"theta": [0.3, 0.6], "parameter": "seed",
                  "values": [1, 2]},
    }
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    raw = (out / "sweep.csv").read_bytes()
    lines = raw.decode().strip().split("\r\n")
    assert lines[0] == "theta,seed,classification,re_eg,im_eg,converged"
    assert len(lines) == 5
    report = json.loads((out / "report.json").read_text())
    assert report["payload"]["cells"] == 4


def test_cli_overrides(tmp_path):
    cfg = write_config(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["spectrum", "--config", cfg, "--out", str(out),
                 "--truncation", "6", "--theta", "0.7",
                 "--t-grid", "0.2,2.0"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["truncation"] == 6
    assert report["config"]["theta"] == 0.7
    assert report["payload"]["witten"]["t"] == [0.2, 2.0]


def test_console_script_entry_point(tmp_path):
    cfg = write_config(tmp_path, {**MINIMAL, "truncation": 6})
    out = tmp_path / "out"
    proc = subprocess.run(
        ["sts", "classify", "--config", cfg, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "classify: ok" in proc.stdout

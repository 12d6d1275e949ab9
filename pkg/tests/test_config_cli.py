from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from fsqkd import __version__
from fsqkd.cli import main
from fsqkd.config import (
    ConfigError,
    build,
    load_document,
    preset_names,
    resolve_config_path,
    validate_config,
)


def test_empty_document_gives_950m_defaults():
    cfg = build("session", validate_config({}, "session"))
    assert (cfg.mean_photon_number, cfg.pulse_rate_hz) == (0.1, 20e3)
    assert (cfg.channel.coupling_efficiency, cfg.channel.background_rate_hz) == (0.14, 1100.0)
    assert (cfg.detector.efficiency, cfg.detector.dark_rate_hz, cfg.detector.gate_window_s) == (0.65, 80.0, 5e-9)


def test_errors_are_aggregated_and_name_the_field():
    doc = {"pulse_count": -5, "channel": {"coupling_efficiency": 1.4}, "colour": "red"}
    with pytest.raises(ConfigError) as exc:
        validate_config(doc, "session")
    errors = exc.value.errors
    assert len(errors) == 3
    assert any("channel.coupling_efficiency" in e and "[0.0, 1.0]" in e for e in errors)
    assert any(e.startswith("pulse_count") for e in errors)
    assert any("colour: unknown field" in e for e in errors)


@pytest.mark.parametrize("doc", [{"seed": "7"}, {"force_single_photon": 1}, {"pulse_rate_hz": None},
                                 {"detector": []}, {"seed": 2**64}])
def test_type_errors(doc):
    with pytest.raises(ConfigError):
        validate_config(doc, "session")


def test_attack_rules():
    with pytest.raises(ConfigError):
        validate_config({"attack": {"type": "opaque", "resend": "bright"}}, "attack")
    with pytest.raises(ConfigError):
        validate_config({"attack": {"type": "beamsplitter", "resend": "single"}}, "attack")
    with pytest.raises(ConfigError):
        validate_config({}, "attack")
    cfg = validate_config({"attack": {"type": "beamsplitter"}}, "attack")
    assert cfg["attack"]["reflectivity"] == 0.5


def test_every_preset_validates():
    kinds = {"free_space_950m": "session", "attack": "attack", "night": "linkbudget", "day": "linkbudget"}
    names = preset_names()
    assert len(names) >= 7
    for name in names:
        kind = next(k for prefix, k in kinds.items() if name.startswith(prefix))
        validate_config(load_document(resolve_config_path(name)), kind)


def test_missing_config():
    with pytest.raises(FileNotFoundError):
        resolve_config_path("no_such_preset.json")


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_session_report(capsys):
    code, out, _ = run(["session", "--seed", "4"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["version"] == __version__ and report["config"]["seed"] == 4
    assert report["result"]["counts"]["pulses"] == 1_000_000
    assert report["result"]["predicted"]["bit_rate_hz"] == pytest.approx(45.45, abs=0.01)


def test_seed_override_wins(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"pulse_count": 20_000, "seed": 1}))
    _, a, _ = run(["session", "--config", str(path)], capsys)
    _, b, _ = run(["session", "--config", str(path), "--seed", "2"], capsys)
    assert json.loads(a)["config"]["seed"] == 1 and json.loads(b)["config"]["seed"] == 2
    assert json.loads(a)["result"] != json.loads(b)["result"]


def test_parallel_runs_match_serial(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"pulse_count": 50_000}))
    _, serial, _ = run(["session", "--config", str(path), "--runs", "3"], capsys)
    _, parallel, _ = run(["session", "--config", str(path), "--runs", "3", "--jobs", "3"], capsys)
    assert serial == parallel
    assert len({r["seed"] for r in json.loads(serial)["runs"]}) == 3


def test_cli_csv_trace(capsys, tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"pulse_count": 3000, "mean_photon_number": 5.0}))
    code, out, _ = run(["session", "--config", str(path), "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 3000
    assert {r["outcome"] for r in rows} <= {"no_click", "conclusive", "dual_fire"}
    assert all(r["bob_bit"] in "01" and r["bob_bit"] for r in rows if r["outcome"] == "conclusive")


def test_cli_bad_config_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"channel": {"coupling_efficiency": 1.4}}')
    code, out, err = run(["session", "--config", str(bad)], capsys)
    assert code == 1 and out == "" and "channel.coupling_efficiency" in err
    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "seed": 1,\n  oops\n}')
    code, _, err = run(["session", "--config", str(broken)], capsys)
    assert code == 1 and "line 3" in err
    code, _, _ = run(["session", "--config", str(tmp_path / "missing.json")], capsys)
    assert code == 1
    code, _, _ = run(["frobnicate"], capsys)
    assert code == 1


def test_cli_attack_report(capsys):
    code, out, _ = run(["attack", "--config", "attack_beamsplitter.json"], capsys)
    report = json.loads(out)
    assert code == 0
    section = report["attack"]
    assert section["R"] == 0.5 and section["eta_E"] == 0.25
    assert section["predicted_knowledge_fraction"] == pytest.approx(0.01242, abs=1e-5)
    assert {"baseline", "result"} <= set(report)


def test_cli_reconcile_raw_key_fixture(capsys, tmp_path, data_dir):
    key_out = tmp_path / "key.bits"
    code, out, _ = run(["reconcile", "--alice", str(data_dir / "raw_key_alice.bits"),
                        "--bob", str(data_dir / "raw_key_bob.bits"), "--key-out", str(key_out)], capsys)
    result = json.loads(out)["result"]
    assert code == 0
    assert result["converged"] is True and result["corrections"] == 2
    assert key_out.read_text().replace("\n", "") == result["corrected_key"]


def test_cli_reconcile_non_convergence_exit_2(capsys, tmp_path):
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, 2048)
    b = a ^ (rng.random(2048) < 0.25)
    (tmp_path / "a").write_text("".join(map(str, a)))
    (tmp_path / "b").write_text("".join(map(str, b.astype(int))))
    out = tmp_path / "r.json"
    code, _, _ = run(["reconcile", "--alice", str(tmp_path / "a"), "--bob", str(tmp_path / "b"),
                      "--out", str(out)], capsys)
    assert code == 2
    assert json.loads(out.read_text())["result"]["converged"] is False


def test_cli_linkbudget_night(capsys):
    code, out, _ = run(["linkbudget", "--config", "night_uplink.json"], capsys)
    reports = json.loads(out)["reports"]
    assert code == 0
    assert reports[0]["key_rate_hz_lo"] == pytest.approx(36, rel=0.1)


def test_cli_otp_round_trip(capsys, tmp_path):
    (tmp_path / "key").write_text("1100101011110000")
    (tmp_path / "msg").write_text("10101010")
    _, out, _ = run(["otp", "--key", str(tmp_path / "key"), "--message", str(tmp_path / "msg"),
                     "--offset", "4"], capsys)
    enc = json.loads(out)
    assert enc["offset"] == 4 and enc["next_offset"] == 12
    (tmp_path / "ct").write_text(enc["ciphertext"])
    _, out, _ = run(["otp", "--decrypt", "--key", str(tmp_path / "key"), "--message", str(tmp_path / "ct"),
                     "--offset", "4"], capsys)
    assert json.loads(out)["plaintext"] == "10101010"
    (tmp_path / "long").write_text("1" * 17)
    code, _, err = run(["otp", "--key", str(tmp_path / "key"), "--message", str(tmp_path / "long")], capsys)
    assert code == 1 and "key" in err


def test_atomic_write_leaves_no_temp_files(capsys, tmp_path):
    out = tmp_path / "sub" / "lb.json"
    assert main(["linkbudget", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["command"] == "linkbudget"
    assert [p.name for p in out.parent.iterdir()] == ["lb.json"]

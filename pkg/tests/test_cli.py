import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from radreact.cli import list_presets, main
from radreact.config import parse_config
from radreact.errors import ConfigError
from radreact.scenarios import PRESETS, preset_text

EXPECTED_EXIT = {"runaway": 2, "generic_field_massless": 2}
GALLERY = ("hyperbolic", "circular", "weak_coupling", "flyby", "null_field_massless", "divergence_scan", "conformal_audit")


def summary(path):
    return json.loads((path / "summary.json").read_text())


def test_gallery_lists_at_least_seven_described_presets():
    text = list_presets()
    lines = text.splitlines()
    assert len(lines) >= 7
    for name in GALLERY:
        assert any(line.startswith(name + " ") for line in lines)
    assert all(len(line.split("]", 1)[1].strip()) > 20 for line in lines)


def test_list_presets_subcommand(capsys):
    assert main(["list-presets"]) == 0
    assert "flyby" in capsys.readouterr().out


@pytest.mark.parametrize("name", list(PRESETS))
def test_preset_round_trips_through_run(name, tmp_path, capsys):
    code = main(["run", "--preset", name, "--out", str(tmp_path)])
    assert code == EXPECTED_EXIT.get(name, 0)
    data = summary(tmp_path)
    assert data["preset"] == name and data["kind"] == PRESETS[name]["kind"]
    if code == 0:
        assert data["all_audits_pass"], data["audits"]
    else:
        assert data["verdict"]["type"] in ("runaway", "inadmissible")
    # the preset text is itself a valid scenario file
    parse_config(preset_text(name))


def test_free_particle_radiates_nothing(tmp_path, capsys):
    assert main(["run", "--preset", "free", "--out", str(tmp_path)]) == 0
    radiated = summary(tmp_path)["radiated"]
    assert np.max(np.abs(radiated["p_rad"])) == 0.0


def test_runaway_summary_carries_verdict(tmp_path, capsys):
    assert main(["run", "--preset", "runaway", "--out", str(tmp_path)]) == 2
    verdict = summary(tmp_path)["verdict"]
    assert verdict["type"] == "runaway"
    assert verdict["growth_rate"] == pytest.approx(verdict["expected_growth_rate"], rel=0.02)
    assert "verdict" in capsys.readouterr().out


def test_config_file_run_is_deterministic(tmp_path, capsys):
    cfg = tmp_path / "orbit.yaml"
    cfg.write_text(yaml.safe_dump({
        "kind": "ld4_single",
        "particles": [{"charge": 0.2, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1.25, 0.75, 0, 0]}],
        "external_field": {"type": "uniform", "B": [0, 0, 1.0]},
        "duration": 5.0,
        "mode": "reduced",
    }))
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["run", str(cfg), "--out", str(out), "--seed", "4"]) == 0
    assert (outs[0] / "trajectory.csv").read_bytes() == (outs[1] / "trajectory.csv").read_bytes()
    assert summary(outs[0])["seed"] == 4


def test_output_dir_key_and_out_flag(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "free.yaml"
    cfg.write_text(yaml.safe_dump({
        "kind": "ld4_single",
        "particles": [{"charge": 0.1, "mass": 1.0}],
        "initial_states": [{"z": [0, 0, 0, 0], "u": [1, 0, 0, 0]}],
        "duration": 1.0,
        "output": {"dir": str(tmp_path / "from_config")},
    }))
    monkeypatch.chdir(tmp_path)
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "summary.json").exists()
    assert main(["run", str(cfg), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "summary.json").exists()


def test_tolerance_override_reaches_summary(tmp_path, capsys):
    assert main(["run", "--preset", "free", "--out", str(tmp_path), "--tolerance", "1e-8"]) == 0
    assert summary(tmp_path)["tolerance"] == 1e-8


@pytest.mark.parametrize(
    "body, fragment",
    [
        (
            "kind: ld4_single\nparticles:\n  - charge: 1\n    mass: 1\ninitial_states:\n  - z: [0, 0, 0, 0]\n    u: [1, 0, 0, 0]\n"
            "duration: 1.0\nbogus: 3\n",
            ":9: bogus: unknown key 'bogus'",
        ),
        ("kind: warp_drive\n", ":1: kind: unknown scenario kind 'warp_drive'"),
        ("kind: ld4_single\nparticles:\n  - charge: one\n    mass: 1\n", ":3: particles.0.charge: expected float"),
        ("kind: [unclosed\n", "invalid YAML"),
    ],
)
def test_config_errors_name_the_line(tmp_path, capsys, body, fragment):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(body)
    assert main(["run", str(cfg), "--out", str(tmp_path / "out")]) == 1
    err = capsys.readouterr().err
    assert fragment in err, err


def test_duplicate_keys_are_rejected():
    with pytest.raises(ConfigError, match="duplicate key"):
        parse_config("kind: ld4_single\nkind: ld4_single\n")


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 1
    assert "cannot read configuration" in capsys.readouterr().err


def test_run_needs_exactly_one_source(capsys):
    with pytest.raises(SystemExit):
        main(["run"])


def test_unknown_preset(capsys, tmp_path):
    assert main(["run", "--preset", "nonsense", "--out", str(tmp_path)]) == 1


def test_console_script_is_installed():
    out = subprocess.run([sys.executable, "-m", "radreact.cli", "list-presets"], capture_output=True, text=True, check=True)
    assert "conformal_audit" in out.stdout

import json
import subprocess
import sys

import pytest

from pointdos import cli
from pointdos.io import read_csv

BASE = {"dimension": 1, "law": {"kind": "uniform", "alpha": -2.0, "beta": -1.0},
        "energy": {"I_min": -1.5, "I_max": -0.8, "grid_points": 3},
        "truncation": {"n_max": 5, "r_hop": 2}, "mc": {"L": 5, "samples": 300, "seed": 0}}


@pytest.fixture
def config(tmp_path):
    def make(**updates):
        data = json.loads(json.dumps(BASE))
        for key, value in updates.items():
            if isinstance(value, dict) and key in data:
                data[key].update(value)
            else:
                data[key] = value
        path = tmp_path / "run.json"
        path.write_text(json.dumps(data))
        return path
    return make


@pytest.mark.parametrize("sub,files", [
    ("kernels", ["kernels.csv", "kernels.json"]),
    ("gap-check", ["gap_certificate.json"]),
    ("sweep", ["sweep.csv"]),
    ("expand", ["expansion.csv"]),
    ("dos", ["dos.csv"]),
    ("mc-validate", ["mc_validate.csv"]),
    ("conductivity", ["conductivity.csv", "conductivity.json"]),
])
def test_subcommands_succeed(sub, files, config, tmp_path):
    out = tmp_path / "out"
    assert cli.main([sub, "--config", str(config()), "--out", str(out)]) == 0
    for name in files:
        assert (out / name).exists()


def test_outputs_embed_provenance(config, tmp_path):
    out = tmp_path / "out"
    cli.main(["dos", "--config", str(config()), "--out", str(out)])
    meta, rows = read_csv(out / "dos.csv")
    assert meta["config"]["dimension"] == 1
    # min over q in [-2, -1] and E in [-1.5, -0.8] of |1/q - 1/(2 kappa)|
    assert meta["certificates"]["gap"]["delta_star"] == pytest.approx(0.5 + 0.5 / 1.5 ** 0.5)
    assert "tool_version" in meta
    assert list(rows[0]) == ["E", "Re", "Im", "n", "tail_bound", "extrap_err"]


def test_band_emits_regime_map(config, tmp_path):
    out = tmp_path / "out"
    cfg = config(dimension=1, flags={"d1_sign_flip": True}, band={"q0": -6.0, "theta_samples": 3},
                 law={"alpha": -6.25, "beta": -5.75})
    assert cli.main(["band", "--config", str(cfg), "--out", str(out)]) == 0
    meta, rows = read_csv(out / "regime_map.csv")
    assert any(r["in_band"] == "true" for r in rows)
    payload = json.loads((out / "regime_map.json").read_text())
    assert payload["result"]["overlap_points"] == 0


def test_config_errors_exit_4(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dimension": 4, "law": {}, "energy": {}}))
    assert cli.main(["sweep", "--config", str(bad)]) == 4
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["exit_code"] == 4
    bad.write_text("{not json")
    assert cli.main(["sweep", "--config", str(bad)]) == 4
    assert cli.main(["sweep", "--config", str(tmp_path / "missing.json")]) == 4


def test_regime_violation_exit_2(config, tmp_path, capsys):
    cfg = config(dimension=3, energy={"I_min": -1.0, "I_max": -0.5})
    assert cli.main(["expand", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "RegimeViolation"


def test_numerical_failure_exit_3(config, tmp_path):
    cfg = config(truncation={"n_max": 24, "r_hop": 3, "budget": 1e3})
    assert cli.main(["expand", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cache_hit_is_byte_identical(config, tmp_path):
    out = tmp_path / "out"
    cfg = str(config())
    cli.main(["mc-validate", "--config", cfg, "--out", str(out), "--seed", "4"])
    first = (out / "mc_validate.csv").read_bytes()
    (out / "mc_validate.csv").unlink()
    assert len(list((out / ".cache").iterdir())) == 1
    cli.main(["mc-validate", "--config", cfg, "--out", str(out), "--seed", "4"])
    assert (out / "mc_validate.csv").read_bytes() == first


def test_seed_flag_changes_monte_carlo(config, tmp_path):
    cfg = str(config())
    cli.main(["mc-validate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "1"])
    cli.main(["mc-validate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "2"])
    a = read_csv(tmp_path / "a" / "mc_validate.csv")[1]
    b = read_csv(tmp_path / "b" / "mc_validate.csv")[1]
    assert a[0]["mc_re"] != b[0]["mc_re"]


def test_threads_do_not_change_output(config, tmp_path):
    cfg = str(config())
    cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "a"), "--no-cache"])
    cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "b"), "--threads", "3",
              "--no-cache"])
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_point_mass_mc_validate_passes(config, tmp_path):
    cfg = config(law={"kind": "point_mass", "alpha": -1.5, "beta": -1.5})
    out = tmp_path / "out"
    assert cli.main(["mc-validate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "mc_validate.csv")[1]
    # identical samples: only rounding in the mean survives
    assert all(float(r["stderr"]) <= 1e-14 for r in rows)


def test_module_entry_point(config, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "pointdos", "gap-check", "--config",
                           str(config()), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr

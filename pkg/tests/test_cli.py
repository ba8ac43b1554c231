import json
import math

import numpy as np
import pytest

from cvdisc import cli
from cvdisc.config import RunConfig, load_config, resolve_scenario, resolve_s_grid
from cvdisc.errors import ConfigError

STRONG_NOISE_SWEEP = """
[scenario]
omega_hz = 2e13
temperature_k = 300
r_e2 = 0.01

[constellation]
family = four-point

[sweep]
s_values = 0.01 1.3 30
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def test_rate_sweep_strong_noise_shape(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["rate-sweep", "--config", write(tmp_path, STRONG_NOISE_SWEEP), "--out", str(out)]) == 0
    header, rows = read_csv(out / "rates.csv")
    assert header == list(cli.RATE_COLUMNS)
    r = [float(row[header.index("R_nats")]) for row in rows]
    assert r[1] > 0 and r[-1] < 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "rate-sweep" and manifest["outputs"] == ["rates.csv"]


def test_rate_sweep_empty_grid(tmp_path):
    cfg = write(tmp_path, "[scenario]\nn = 0.3\nr_e = 0.5\nmu = 0.6\n[sweep]\ns_values =\n")
    assert cli.main(["rate-sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "rates.csv").read_text() == ",".join(cli.RATE_COLUMNS) + "\n"


def test_rate_sweep_byte_identical_and_manifest_replay(tmp_path):
    cfg = write(tmp_path, "[scenario]\nn = 0.3\nr_e = 0.5\nmu = 0.6\n[sweep]\ns_values = 0.2 1.0\n")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["rate-sweep", "--config", cfg, "--out", str(a), "--seedless"]) == 0
    assert cli.main(["rate-sweep", "--config", cfg, "--out", str(b)]) == 0
    assert cli.main(["rate-sweep", "--config", str(a / "manifest.json"), "--out", str(c)]) == 0
    first = (a / "rates.csv").read_bytes()
    assert first == (b / "rates.csv").read_bytes() == (c / "rates.csv").read_bytes()
    assert b"\r" not in first


def test_csv_number_format():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert cli.fmt(3) == "3"
    assert cli.fmt(None) == ""


def test_boundary_command(tmp_path):
    cfg = write(tmp_path, "[boundary]\nomega_values_hz = 2e13 1e15\nmethod = weak\nr_lo = 0.001\nr_hi = 0.002\n")
    assert cli.main(["boundary", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "boundary.csv")
    assert header == list(cli.BOUNDARY_COLUMNS)
    statuses = {row[0]: row for row in rows}
    high = statuses["1000000000000000"]
    assert high[header.index("status")] == "secure_throughout"
    assert high[header.index("r_e_star")] == ""


def test_boundary_both_methods_strong_noise(tmp_path):
    cfg = write(tmp_path, "[boundary]\nomega_values_hz = 2e13\nmethod = both\ntolerance = 1e-3\n")
    assert cli.main(["boundary", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "boundary.csv")
    stars = {row[header.index("method")]: float(row[header.index("r_e_star")]) for row in rows}
    assert abs(stars["weak"] - stars["numeric"]) <= 0.05


def _wigner(tmp_path, scenario, s):
    cfg = write(tmp_path, f"[scenario]\n{scenario}\n[wigner]\ns = {s}\nx_points = 61\np_points = 61\n")
    assert cli.main(["wigner", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "wigner.csv")
    assert header == list(cli.WIGNER_COLUMNS)
    data = np.array(rows, dtype=float)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    return data, manifest["diagnostics"]


def test_wigner_weak_signal_single_peak(tmp_path):
    _, diag = _wigner(tmp_path, "n = 0.3\nr_e = 0.5\nmu = 0.6", 0.3)
    assert diag["local_maxima_above_half"] == 1
    assert diag["coverage_ok"]


def test_wigner_strong_signal_four_peaks(tmp_path):
    _, diag = _wigner(tmp_path, "n = 0.3\nr_e = 0.5\nmu = 0.6", 4.0)
    assert diag["local_maxima_above_half"] == 4


def test_wigner_vacuum_peak(tmp_path):
    data, _ = _wigner(tmp_path, "n = 0\nr_e = 0\nmu = 0", 1.0)
    origin = data[(data[:, 0] == 0) & (data[:, 1] == 0)]
    assert origin[0, 2] == pytest.approx(1 / math.pi, abs=1e-6)


def test_validate_default_passes(capsys):
    assert cli.main(["validate", "--seedless"]) == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and "[PASS]" in out


def test_validate_noiseless_skips(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nn = 0.3\nr_e = 0\nmu = 0.6\n")
    assert cli.main(["validate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "skipped (noiseless)" in out


def test_non_unitary_channel_names_field(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nt = 0.8\nr = 0.7\nn0 = 1\nr_e = 0.5\nmu = 0.6\n")
    assert cli.main(["validate", "--config", cfg]) == cli.EXIT_CONFIG
    assert "scenario.t" in capsys.readouterr().err


def test_unknown_key_names_field(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\nn = 0.3\nr_e = 0.5\nmu = 0.6\nbogus = 1\n")
    assert cli.main(["rate-sweep", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "scenario.bogus" in capsys.readouterr().err


def test_bad_threads(capsys):
    assert cli.main(["validate", "--threads", "0"]) == cli.EXIT_CONFIG


def test_config_source_channel_composition(tmp_path):
    cfg = load_config(write(tmp_path, "[scenario]\nt = 0.8\nr = 0.6\nn0 = 1\nn_a = 2\nr_e = 0.5\nmu = 0.6\n"))
    sc = resolve_scenario(cfg)
    assert sc.n == pytest.approx(1.36) and sc.t_channel == 0.8


def test_config_temperature_derivation():
    sc = resolve_scenario(RunConfig({"scenario": {"omega_hz": "2e13", "temperature_k": "300", "r_e2": "0.01"}}))
    assert sc.r_E == pytest.approx(0.1)
    assert sc.n == pytest.approx(1.506, abs=1e-3)
    assert math.sinh(sc.mu) ** 2 == pytest.approx(sc.n)


def test_config_grid_validation():
    with pytest.raises(ConfigError) as err:
        resolve_s_grid(RunConfig({"sweep": {"s_values": "1 0.5"}}))
    assert err.value.field == "sweep.s_values"
    g = resolve_s_grid(RunConfig({"sweep": {"s_min": "0.1", "s_max": "1", "s_points": "3", "spacing": "linear"}}))
    np.testing.assert_allclose(g, [0.1, 0.55, 1.0])

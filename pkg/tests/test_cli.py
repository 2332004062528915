import json
import math

import numpy as np
import pytest

from conftest import CONFIGS
from toadfront import ConfigError, TradeoffSpec
from toadfront.cli import main
from toadfront.config import from_dict, load
from toadfront.io import read_csv, read_snapshot, write_csv, write_snapshot
from toadfront.pde import Field2D, GridSpec

TINY = """
name = "tiny"
[tradeoff]
kind = "power"
C = 0.3
p = 1
theta_min = 1.0
[grid]
x_min = -10.0
x_max = 60.0
theta_max = 16.0
nx = 141
ntheta = 61
[sim]
dt = 0.1
t_final = 12.0
snapshot_every = 10
field_times = [4, 8, 12]
[spectral]
b = 15.0
N = 1024
[fronts]
window = [4.0, 12.0]
[action]
M = 60
t = 4.0
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY)
    return p


def test_fraction_strings():
    cfg = load(CONFIGS / "p13.toml")
    assert cfg.tradeoff == TradeoffSpec.power_law(0.1, 1 / 3, 0.1)


def test_unknown_section_rejected(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(TINY + "\n[bogus]\nx = 1\n")
    with pytest.raises(ConfigError):
        load(p)


def test_bad_number_rejected():
    raw = {"tradeoff": {"kind": "power", "C": "abc", "p": 1}}
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_hash_stable_and_sensitive(tiny):
    a, b = load(tiny), load(tiny)
    assert a.hash == b.hash
    assert a.with_sim(dt=0.05).hash != a.hash
    assert a.with_sim(linearized=True).sim.linearized


def test_csv_round_trip(tmp_path):
    cols = {"t": np.array([0.0, 0.1, 1 / 3]), "v": np.array([1e-300, -2.5, math.pi])}
    write_csv(tmp_path / "a.csv", cols, {"config_hash": "abc"})
    meta, back = read_csv(tmp_path / "a.csv")
    assert meta["config_hash"] == "abc" and "numpy=" in meta["versions"]
    for k in cols:
        assert np.array_equal(back[k], cols[k])


def test_snapshot_round_trip(tmp_path):
    g = GridSpec(-1.0, 1.0, 1.0, 3.0, 5, 7)
    v = np.random.default_rng(0).random((5, 7))
    write_snapshot(tmp_path / "s.tfs", Field2D(g, v, 2.5), "h")
    f, head = read_snapshot(tmp_path / "s.tfs")
    assert np.array_equal(f.values, v) and f.time == 2.5 and head["config_hash"] == "h"
    assert f.grid == g


def test_spectrum_zero_truncated(tmp_path, capsys):
    assert main(["spectrum", "--config", str(CONFIGS / "zero_linearized.toml"),
                 "--out", str(tmp_path)]) == 0
    meta, _ = read_csv(tmp_path / "spectrum.csv")
    assert float(meta["gamma_inf"]) == pytest.approx(0.97533, abs=1e-5)
    assert (tmp_path / "q_profile.csv").exists()


def test_spectrum_linear_and_sublinear(tmp_path):
    assert main(["spectrum", "--config", str(CONFIGS / "p43.toml"), "--out",
                 str(tmp_path / "a")]) == 0
    meta, cols = read_csv(tmp_path / "a" / "spectrum.csv")
    assert math.isfinite(float(meta["c_star"])) and meta["regime"] == "linear"
    # the scan brackets the refined minimum from above
    assert np.all(cols["c_lambda"] >= float(meta["c_star"]) - 1e-9)
    assert cols["c_lambda"].min() == pytest.approx(float(meta["c_star"]), rel=0.01)
    assert main(["spectrum", "--config", str(CONFIGS / "p13.toml"), "--out",
                 str(tmp_path / "b")]) == 0
    meta, _ = read_csv(tmp_path / "b" / "spectrum.csv")
    assert meta["regime"] == "accelerating" and meta["truncation_dependent"] == "True"


def test_spectrum_deterministic(tmp_path, tiny):
    for d in ("a", "b"):
        assert main(["spectrum", "--config", str(tiny), "--out", str(tmp_path / d)]) == 0
    for f in ("spectrum.csv", "q_profile.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_config_exit_code(tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "nope.toml")]) == 2


def test_invalid_config_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text(TINY.replace("dt = 0.1", "dt = 5.0"))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_simulate_then_fronts(tmp_path, tiny):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(tiny), "--out", str(out), "--plots"]) == 0
    assert len(list((out / "snapshots").glob("*.tfs"))) == 3
    for f in ("fronts.csv", "monitor.csv", "rho_t0004.000.csv"):
        assert (out / f).exists()
    assert list(out.glob("*.svg"))
    code = main(["fronts", "--config", str(tiny), "--out", str(out)])
    assert code in (0, 1)
    meta, cols = read_csv(out / "fronts_fit.csv")
    assert cols["quantity"][0] == "speed" and cols["value"][0] > 0
    # the trace rebuilt from snapshots agrees with the recorded one at snapshot times
    (out / "fronts.csv").rename(out / "fronts.bak")
    from toadfront.cli import load_trace
    tr = load_trace(out)
    _, rec = read_csv(out / "fronts.bak")
    for t, x in zip(tr.times, tr.x_front):
        k = int(np.argmin(np.abs(rec["t"] - t)))
        assert x == pytest.approx(rec["x_front"][k], abs=1e-9)


def test_fronts_without_data(tmp_path, tiny):
    assert main(["fronts", "--config", str(tiny), "--out", str(tmp_path)]) == 2


def test_simulate_boundary_exit_code(tmp_path):
    p = tmp_path / "short.toml"
    p.write_text(TINY.replace("x_max = 60.0", "x_max = 10.0").replace("nx = 141", "nx = 41"))
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 3


def test_action_command(tmp_path, tiny):
    assert main(["action", "--config", str(tiny), "--out", str(tmp_path), "--x", "5"]) == 0
    s = json.loads((tmp_path / "action_summary.json").read_text())
    assert s["x"] == 5.0 and s["zeta"] > 0 and s["first_integral_spread"] < 1e-6
    _, cols = read_csv(tmp_path / "action_path.csv")
    assert cols["z1"][0] == 0.0 and cols["z1"][-1] == 5.0


def test_action_zero_kind(tmp_path):
    assert main(["action", "--config", str(CONFIGS / "zero_linearized.toml"), "--out",
                 str(tmp_path), "--t", "1", "--x", "4", "--theta", "2", "--M", "200"]) == 0
    s = json.loads((tmp_path / "action_summary.json").read_text())
    assert s["identity_ratio"] == pytest.approx(1.0, rel=1e-3)


def test_report_and_sweep(tmp_path, tiny):
    out = tmp_path / "rep"
    code = main(["report", "--config", str(tiny), "--out", str(out)])
    assert code in (0, 1, 3)
    _, cols = read_csv(out / "report.csv")
    keys = [int(k) for k in cols["criterion"]]
    assert keys == sorted(keys) and {1, 2, 9}.issubset(keys)
    assert "gamma" in (out / "report.txt").read_text()
    other = tmp_path / "b.toml"
    other.write_text(TINY.replace('name = "tiny"', 'name = "b"'))
    sw = tmp_path / "sw"
    code2 = main(["sweep", "--config", str(tiny), str(other), "--out", str(sw), "--jobs", "2"])
    _, s = read_csv(sw / "sweep.csv")
    assert sorted(s["name"]) == ["b", "tiny"]
    assert code2 == max(int(c) for c in s["exit_code"])

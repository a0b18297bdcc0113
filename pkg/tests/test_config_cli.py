import csv
import json

import numpy as np
import pytest

from mimo_isac import cli
from mimo_isac.config import apply_override, build_scenario, build_thresholds, build_weights, load_config
from mimo_isac.errors import ConfigError
from mimo_isac.scenario import dbm_to_watts, watts_to_dbm

SMALL = [
    "geometry.n_tx=4", "geometry.n_rx=4",
    "users.count=1", "users.los_angles_deg=[-30]",
    "targets.angles_deg=[20]",
    "signal.total_power_dbm=30", "signal.block_length=64",
    "thresholds.mi_floor_bits=0.5", "thresholds.sinr_floor_db=0",
    "solver.eps=0.1",
    "experiment.grid_step_deg=1.0",
]


def run(tmp_path, *args, extra=()):
    argv = list(args) + ["--out", str(tmp_path)]
    for s in list(SMALL) + list(extra):
        argv += ["--set", s]
    return cli.main(argv)


def read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return comments, rows[0], rows[1:]


def test_defaults_recorded():
    echo = load_config().echo()
    assert echo["signal"]["total_power_dbm"] == 40.0
    assert echo["solver"]["eps"] == 0.01
    assert echo["geometry"] == {"n_tx": 32, "n_rx": 32, "spacing_ratio": 0.5}
    assert echo["signal"]["block_length"] == 1024


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides=["signal.bogus=1"])
    with pytest.raises(ConfigError):
        apply_override({}, "no_equals_sign")


def test_override_and_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"geometry": {"n_tx": 8}, "seed": 3}))
    cfg = load_config(p, ["geometry.n_tx=6", "users.rician_factor=inf"])
    assert cfg.geometry.n_tx == 6 and cfg.seed == 3 and cfg.users.rician_factor == float("inf")


@pytest.mark.parametrize("dbm, watts", [(30.0, 1.0), (40.0, 10.0), (0.0, 1e-3), (20.0, 0.1)])
def test_dbm_round_trip(dbm, watts):
    assert dbm_to_watts(dbm) == watts
    assert watts_to_dbm(watts) == pytest.approx(dbm, abs=1e-12)


def test_build_from_config():
    cfg = load_config(overrides=SMALL + ["thresholds.sinr_floor_db=10"])
    scn = build_scenario(cfg)
    assert scn.geometry.n_tx == 4 and scn.n_users == 1 and scn.signal.n_radar_streams == 1
    assert scn.signal.total_power == 1.0
    assert build_thresholds(cfg, 1).sinr_floors == (10.0,)
    assert build_weights(cfg, 1, 1).alpha == 0.5


def test_selftest_exit_zero(tmp_path):
    assert cli.main(["selftest", "--out", str(tmp_path)]) == 0
    comments, header, rows = read_csv(tmp_path / "selftest.csv")
    assert len(rows) == 5 and all(r[1] == "True" for r in rows)


def test_infeasible_thresholds_exit_two(tmp_path, capsys):
    assert run(tmp_path, "solve", extra=["thresholds.sinr_floor_db=120"]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_config_error_exit_four(tmp_path):
    assert run(tmp_path, "solve", extra=["nonsense.key=1"]) == 4
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json")]) == 4


def test_pareto_sweep_nine_rows(tmp_path):
    assert run(tmp_path, "pareto-sweep") == 0
    comments, header, rows = read_csv(tmp_path / "pareto-sweep.csv")
    assert header[:4] == ["alpha", "i_up_bits", "exact_mi_bits", "avg_rate"]
    assert len(rows) == 9


def test_echo_everywhere_and_rerun_bit_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(first, "solve", "--figures") == 0
    rec = json.loads((first / "solve.json").read_text())
    comments, _, rows_a = read_csv(first / "beamformers.csv")
    echo = json.loads(comments[1][len("# config: "):])
    assert echo == rec["config"]
    from PIL import Image  # matplotlib dependency

    assert json.loads(Image.open(first / "solve.png").info["Description"]) == echo

    cfg_path = tmp_path / "echo.json"
    echo["out"] = str(second)
    echo["figures"] = False
    cfg_path.write_text(json.dumps(echo))
    assert cli.main(["solve", "--config", str(cfg_path)]) == 0
    _, _, rows_b = read_csv(second / "beamformers.csv")
    assert rows_a == rows_b
    rec_b = json.loads((second / "solve.json").read_text())
    assert rec_b["results"] == rec["results"]


def test_csv_lf_and_header(tmp_path):
    assert run(tmp_path, "beampattern") == 0
    raw = (tmp_path / "beampattern.csv").read_bytes()
    assert b"\r\n" not in raw
    _, header, rows = read_csv(tmp_path / "beampattern.csv")
    assert header == ["angle_deg", "general"]
    assert len(rows) == 179
    assert np.all(np.isfinite(np.array(rows, dtype=float)))

import csv
import math
import os

import pytest

from rislocate.cli import PAIRED_HEADER, TRAJECTORY_HEADER, TRIALS_HEADER, fmt, main, render_csv
from rislocate.config import ConfigError, parse_config
from rislocate.geometry import Position3

SMALL = """
[experiment]
trials = 3
snr_db = [6.0, 18.0]
n_ris_grid = [8, 16]
seed = 7

[scene]
n_ris = 16
n_bs = 4

[comparison_scene]
n_ris = 8

[trajectory]
points = [[60.0, 20.0], [55.0, 30.0]]
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(SMALL)
    return p


# -- config parsing ------------------------------------------------------------


def test_defaults_are_reference_scene():
    cfg = parse_config("")
    sc = cfg.experiment.scene
    g = sc.geometry
    assert g.bs == Position3(0, 0, 10)
    assert g.ris == (Position3(30, 20, 20), Position3(20, 40, 20), Position3(40, 40, 20))
    assert g.ms_true == Position3(60, 20, 0)
    assert g.mu == 2.0 and g.carrier_freq == 2e9
    assert g.bs_spacing == pytest.approx(g.wavelength / 4, rel=1e-15)
    assert g.ris_spacing == pytest.approx(g.wavelength / 4, rel=1e-15)
    assert sc.n_bs == 20 and sc.n_ris == (100, 100, 100)
    pi = math.pi
    assert sc.angles.phi_br == pytest.approx((pi / 6, pi / 3, pi / 4))
    assert sc.angles.theta_br == pytest.approx((pi / 6, pi / 3, pi / 4))
    assert sc.angles.theta_rm == pytest.approx((pi / 6, pi / 3, pi / 4))
    assert cfg.experiment.trials == 500 and cfg.experiment.snr_grid == (0, 6, 12, 18, 24)
    assert len(cfg.trajectory) == 20


def test_empty_section_keeps_defaults():
    assert parse_config("[scene]\n[experiment]\n") == parse_config("")


def test_angle_expressions():
    cfg = parse_config('[scene.angles]\nphi_br = ["pi/2", "3*pi/4", 0.5]\ntheta_bm = "pi"\n')
    a = cfg.experiment.scene.angles
    assert a.phi_br == pytest.approx((math.pi / 2, 3 * math.pi / 4, 0.5))
    assert a.theta_bm == pytest.approx(math.pi)


def _problems(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.problems


def test_negative_mu_names_key():
    (msg,) = _problems("[scene]\nmu = -1\n")
    assert msg.startswith("scene.mu:")


def test_duplicate_ris_rejected():
    msgs = _problems("[scene]\nris = [[1, 2, 3], [1, 2, 3], [4, 5, 6]]\n")
    assert any(m.startswith("scene.ris") for m in msgs)


def test_collinear_ris_rejected():
    msgs = _problems("[comparison_scene]\nris = [[300, 0, 20], [300, 300, 20], [300, -300, 20]]\n")
    assert any(m.startswith("comparison_scene.ris") and "collinear" in m for m in msgs)


def test_unknown_keys_and_multiple_problems_reported():
    msgs = _problems('bogus = 1\n[scene]\nnb = 3\nn_bs = "x"\n[experiment]\ntrials = 0\n')
    assert "bogus: unknown key" in msgs
    assert "scene.nb: unknown key" in msgs
    assert any(m.startswith("scene.n_bs:") for m in msgs)
    assert any(m.startswith("experiment.trials:") for m in msgs)


def test_bad_angle_and_spacing():
    msgs = _problems('[scene]\nbs_spacing_m = 0.01\nbs_spacing_wavelengths = 0.5\n'
                     '[scene.angles]\ntheta_bm = "tau"\n')
    assert any(m.startswith("scene.bs_spacing_m") for m in msgs)
    assert any(m.startswith("scene.angles.theta_bm") for m in msgs)
    assert _problems('[scene.angles]\ntheta_bm = 4.0\n')


def test_syntax_error():
    assert _problems("[scene\n")[0].startswith("<syntax>")


def test_spacing_in_meters():
    g = parse_config("[scene]\nris_spacing_m = 0.05\n").experiment.scene.geometry
    assert g.ris_spacing == 0.05


# -- CSV helpers ---------------------------------------------------------------


def test_fmt_round_trips_floats():
    for v in (0.1, 1 / 3, math.pi * 1e-9, 12345.678901234567, -0.0):
        assert float(fmt(v)) == v
    assert fmt(3) == "3" and fmt(True) == "true"


def test_render_csv_round_trip():
    text = render_csv(["a", "b"], [[0.1, 2], [1 / 3, 5]])
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == ["a", "b"]
    assert float(rows[2][0]) == 1 / 3


# -- main ----------------------------------------------------------------------


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_noiseless_writes_trajectory(cfg_file, tmp_path):
    out = tmp_path / "r"
    assert main(["noiseless", "--config", str(cfg_file), "--out", str(out)]) == 0
    rows = _read(out / "trajectory.csv")
    assert rows[0] == TRAJECTORY_HEADER
    assert len(rows) == 3
    assert float(rows[1][0]) == 60.0 and float(rows[1][4]) <= 1e-2


def test_snr_sweep_is_byte_identical(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["snr-sweep", "--config", str(cfg_file), "--seed", "7", "--out", str(out)]) == 0
    for name in ("summary.csv", "trials.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert _read(a / "summary.csv")[0] == ["snr_db", "mean_m", "median_m", "p90_m", "trials"]
    trials = _read(a / "trials.csv")
    assert trials[0] == TRIALS_HEADER
    assert len(trials) == 1 + 2 * 3


def test_flags_override_config(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert main(["elements-sweep", "--config", str(cfg_file), "--trials", "2",
                 "--workers", "2", "--out", str(out)]) == 0
    rows = _read(out / "summary.csv")
    assert rows[0][0] == "n_ris"
    assert [r[-1] for r in rows[1:]] == ["2", "2"]


def test_compare_baseline_paired_header(cfg_file, tmp_path):
    out = tmp_path / "c"
    assert main(["compare-baseline", "--config", str(cfg_file), "--out", str(out)]) == 0
    rows = _read(out / "summary.csv")
    assert rows[0] == PAIRED_HEADER
    assert [float(r[0]) for r in rows[1:]] == [6.0, 18.0]
    variants = {r[1] for r in _read(out / "trials.csv")[1:]}
    assert variants == {"proposed", "baseline"}


def test_bad_flag_and_subcommand(capsys):
    assert main(["noiseless", "--bogus"]) != 0
    assert main(["fly"]) != 0
    assert "usage" in capsys.readouterr().err


def test_invalid_config_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scene]\nmu = -1\n")
    out = tmp_path / "never"
    assert main(["noiseless", "--config", str(bad), "--out", str(out)]) == 1
    assert "scene.mu" in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_file(tmp_path):
    assert main(["noiseless", "--config", str(tmp_path / "nope.toml")]) == 1


def test_no_temp_files_left(cfg_file, tmp_path):
    out = tmp_path / "t"
    assert main(["noiseless", "--config", str(cfg_file), "--out", str(out)]) == 0
    assert os.listdir(out) == ["trajectory.csv"]

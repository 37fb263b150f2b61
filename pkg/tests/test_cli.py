import os
import shutil
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pinnlab.cli import ENV_OUTPUT, main
from pinnlab.config import RunConfig, load_config, preset_names
from pinnlab.network import init_params, save_params_csv
from pinnlab.pde import GridField

SMALL_WAVE = """
[problem]
kind = wave1d
[network]
layers = 2,5,1
[loss]
n_ic = 40
n_bc = 40
n_physics = 200
[run]
budget = 4
snapshot_interval = 2
eval_nx = 20
eval_nt = 40
"""


@pytest.fixture(autouse=True)
def no_env_override(monkeypatch):
    monkeypatch.delenv(ENV_OUTPUT, raising=False)


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL_WAVE)
    return str(p)


def test_presets_parse_and_validate():
    names = preset_names()
    for row in ("842", "16842", "128", "6464", "20202020", "32161632", "6432168"):
        assert f"wave1d_{row}" in names
    for extra in ("burgers", "heat_fd", "membrane"):
        assert extra in names
    for n in names:
        load_config(n).validate()


def test_train_preset_smoke(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "wave1d_842", "--budget", "3", "-o", str(out)]) == 0
    for f in ("history.csv", "params.csv", "report.csv", "config.ini", "snap_0.csv", "snap_3.csv"):
        assert (out / f).exists(), f
    assert len((out / "history.csv").read_text().splitlines()) == 1 + 3
    head = (out / "report.csv").read_text().splitlines()[0].split(",")
    assert head[:3] == ["energy", "mse", "rel_l2"]
    assert "rel_l2" in capsys.readouterr().out


def test_bad_lambda_exits_2_naming_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(SMALL_WAVE.replace("n_ic = 40", "n_ic = 40\nlambda_weight = 1.5"))
    assert main(["train", str(cfg), "-o", str(tmp_path / "o")]) == 2
    assert "lambda_weight" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(SMALL_WAVE.replace("[run]", "[run]\nbudgit = 3"))
    assert main(["train", str(cfg)]) == 2
    assert "run.budgit" in capsys.readouterr().err


def test_unwritable_output_dir_exits_2(tmp_path, small_cfg):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["train", small_cfg, "-o", str(blocker / "sub")]) == 2


def test_env_var_overrides_output_dir(tmp_path, small_cfg, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT, str(tmp_path / "env"))
    assert main(["train", small_cfg]) == 0
    assert (tmp_path / "env" / "history.csv").exists()


def test_evaluate_completed_run(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["train", small_cfg, "-o", str(out)]) == 0
    ev = tmp_path / "ev"
    assert main(["evaluate", str(out / "params.csv"), small_cfg, "-o", str(ev)]) == 0
    rows = (ev / "report.csv").read_text().splitlines()
    vals = [float(v) for v in rows[1].split(",")[:3]]
    assert all(np.isfinite(vals)) and all(v > 0 for v in vals)
    assert rows == (out / "report.csv").read_text().splitlines()


def test_evaluate_truncated_params_exits_2(tmp_path, small_cfg):
    p = tmp_path / "params.csv"
    save_params_csv(init_params([2, 5, 1]), p)
    p.write_text("\n".join(p.read_text().splitlines()[:-2]) + "\n")
    assert main(["evaluate", str(p), small_cfg, "-o", str(tmp_path / "o")]) == 2


def test_evaluate_without_reference_exits_2(tmp_path, capsys):
    cfg = tmp_path / "heat.ini"
    cfg.write_text("[problem]\nkind = heat2d\n[network]\nlayers = 3,4,1\n")
    p = tmp_path / "params.csv"
    save_params_csv(init_params([3, 4, 1]), p)
    assert main(["evaluate", str(p), str(cfg), "-o", str(tmp_path / "o")]) == 2
    assert "no reference available" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_fd_heat_unstable_dt_exits_2(tmp_path, capsys):
    assert main(["fd", "heat2d", "--dt", "1.0", "-o", str(tmp_path)]) == 2
    assert "dt ≤ h²/(4α)" in capsys.readouterr().err


def test_fd_heat_preset_writes_three_snapshots(tmp_path):
    assert main(["fd", "heat2d", "--config", "heat_fd", "-o", str(tmp_path)]) == 0
    for t in (0, 10, 20):
        g = GridField.from_csv(tmp_path / f"heat2d_t{t}.csv")
        assert g.shape == (51, 51)
        assert g.values.min() >= 0 and g.values.max() <= 200


def test_fd_burgers_is_odd(tmp_path):
    assert main(["fd", "burgers", "--nx", "256", "--n-records", "5", "-o", str(tmp_path)]) == 0
    g = GridField.from_csv(tmp_path / "burgers_fd.csv")
    assert np.abs(g.values + g.values[::-1]).max() <= 1e-10


def test_plot_writes_svg(tmp_path):
    g = GridField((np.linspace(0, 1, 4), np.linspace(0, 2, 3)), np.arange(12.0).reshape(4, 3), ("x", "t"))
    g.to_csv(tmp_path / "f.csv")
    assert main(["plot", str(tmp_path / "f.csv")]) == 0
    root = ET.parse(tmp_path / "f.svg").getroot()
    assert root.tag.endswith("svg")
    assert b"<image" in (tmp_path / "f.svg").read_bytes()


def test_plot_empty_csv_exits_2(tmp_path):
    (tmp_path / "e.csv").write_text("")
    assert main(["plot", str(tmp_path / "e.csv")]) == 2


def test_constant_field_renders_mid_gray(tmp_path):
    from pinnlab.cli import field_image

    g = GridField((np.linspace(0, 1, 3), np.linspace(0, 1, 5)), np.full((3, 5), 4.2))
    img = field_image(g)
    assert np.allclose(img, 0.5)


def test_config_round_trip(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["train", small_cfg, "-o", str(out), "--budget", "2"]) == 0
    echoed = RunConfig.from_file(out / "config.ini")
    src = load_config(small_cfg)
    src.values["run"]["budget"] = 2
    assert echoed == src
    assert RunConfig.from_string(echoed.to_ini()) == echoed


def test_rerun_is_byte_identical(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["train", small_cfg, "-o", str(out)]) == 0
    first = tmp_path / "first"
    shutil.copytree(out, first)
    assert main(["train", small_cfg, "-o", str(out)]) == 0
    assert sorted(os.listdir(out)) == sorted(os.listdir(first))
    for name in os.listdir(out):
        assert (out / name).read_bytes() == (first / name).read_bytes(), name

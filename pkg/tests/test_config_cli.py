from __future__ import annotations

import csv
from importlib import resources

import numpy as np
import pytest

from omitq import cli
from omitq.cli import SPECTRUM_HEADER, main
from omitq.config import ConfigError, load_config, parse_config
from omitq.liouville import SolverError

SMALL = """\
experiment = custom_spectrum
kappa = 0.025
gamma_m = 1e-3
g0 = 0.1
eps_c = 1e-2
delta_c = -1.0
n_photon = 3
n_phonon = 6
grid_start = -0.004
grid_stop = 0.004
grid_points = 9
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parsing ---------------------------------------------------------------------------

def test_shipped_configs_parse():
    names = {"fig2.cfg": "main_dip", "fig3.cfg": "transistor", "fig4.cfg": "crossover_sideband2",
             "fig4a.cfg": "crossover_sideband1",
             "fig4c.cfg": "temperature_sweep"}
    base = resources.files("omitq") / "configs"
    for name, experiment in names.items():
        cfg = load_config(base / name)
        assert cfg.experiment == experiment
    fig2 = load_config(base / "fig2.cfg").params
    assert (fig2.kappa, fig2.gamma_m, fig2.eps_c, fig2.delta_c, fig2.n_th) == (1 / 40, 1e-3, 1e-2, -1.0, 0.0)
    assert fig2.g0 == pytest.approx(4 * fig2.kappa)
    fig4 = load_config(base / "fig4.cfg")
    assert fig4.params.g0 * fig4.params.eps_c == pytest.approx(1.25e-3)
    assert fig4.ratios == (1.0, 0.5, 0.25, 0.1)
    assert load_config(base / "fig4c.cfg").ratio == 0.5


def test_unknown_key_names_key_and_line():
    text = SMALL.replace("kappa = 0.025", "kapa = 0.025")
    with pytest.raises(ConfigError) as err:
        parse_config(text, "run.cfg")
    assert err.value.line == 2
    assert "kapa" in str(err.value) and "run.cfg:2" in str(err.value)


@pytest.mark.parametrize("edit, line", [
    (SMALL + "g0 = 0.2\n", 12),                                  # repeated key
    (SMALL.replace("gamma_m = 1e-3", "gamma_m = fast"), 3),      # not a number
    (SMALL.replace("gamma_m = 1e-3", "gamma_m = -1e-3"), 3),     # physical invariant
    (SMALL.replace("grid_points = 9", "grid_points = 0"), 11),
    (SMALL + "figures = maybe\n", 12),
    (SMALL + "method = fourier\n", 12),
    (SMALL + "this line has no equals sign\n", 12),
    (SMALL + "g0 =\n", 12),
])
def test_bad_values_report_line(edit, line):
    with pytest.raises(ConfigError) as err:
        parse_config(edit)
    assert err.value.line == line


def test_missing_experiment():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config(SMALL.replace("experiment = custom_spectrum\n", ""))


def test_config_text_round_trip():
    cfg = parse_config(SMALL + "ratios = 1, 0.5\nfigures = true\n")
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert cfg.space.shape == (3, 6)


# -- command line ------------------------------------------------------------------------

def test_list_maps_experiments_to_figures(capsys):
    assert main(["list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    table = {line.split()[0]: line for line in lines[1:]}
    assert "Fig. 2(b)" in table["main_dip"]
    assert "Fig. 4(b)" in table["crossover_sideband2"]
    assert "Fig. 3" in table["transistor"]


def test_run_writes_spectrum_and_metadata(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rows = _rows(out / "spectrum.csv")
    assert tuple(rows[0]) == SPECTRUM_HEADER
    data = np.array(rows[1:], dtype=float)
    assert data.shape == (9, 6)
    assert np.all(np.isfinite(data))
    assert np.all(np.diff(data[:, 0]) > 0)
    assert (out / "spectrum.csv").read_bytes().count(b"\r") == 0
    meta = (out / "metadata.cfg").read_text()
    assert "# space = 3x6" in meta and "# wall_time_s" in meta and "# omitq " in meta
    assert "spectrum.csv" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert main(["run", "--config", str(tmp_path / "a" / "metadata.cfg"), "--out", str(tmp_path / "c")]) == 0
    first = (tmp_path / "a" / "spectrum.csv").read_bytes()
    assert (tmp_path / "b" / "spectrum.csv").read_bytes() == first
    assert (tmp_path / "c" / "spectrum.csv").read_bytes() == first


def test_exit_codes(tmp_path, monkeypatch, capsys):
    bad = _write(tmp_path, SMALL.replace("kappa", "kapa"), "bad.cfg")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "kapa" in capsys.readouterr().err

    beat = _write(tmp_path, SMALL.replace("grid_stop = 0.004", "grid_stop = -1.0")
                  .replace("grid_start = -0.004", "grid_start = -1.0").replace("grid_points = 9", "grid_points = 1"),
                  "beat.cfg")
    assert main(["run", "--config", str(beat), "--out", str(tmp_path / "x")]) == 2

    tight = _write(tmp_path, SMALL + "ceiling = 10\n", "tight.cfg")
    assert main(["run", "--config", str(tight), "--out", str(tmp_path / "x")]) == 4
    assert "resource limit" in capsys.readouterr().err

    def failing(cfg, out_dir):
        raise SolverError("GMRES stalled")

    monkeypatch.setattr(cli, "run_experiment", failing)
    assert main(["run", "--config", str(_write(tmp_path, SMALL)), "--out", str(tmp_path / "x")]) == 3
    err = capsys.readouterr().err
    assert "GMRES stalled" in err and "kappa=0.025" in err


def test_seedless_flag(tmp_path):
    cfg = _write(tmp_path, SMALL)
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(cfg), "--seedless=1"])
    assert exc.value.code == 2
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seedless"]) == 0


def test_method_override_is_recorded(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("grid_points = 9", "grid_points = 2") + "eps_p = 1e-4\ngamma_m_dummy = 1\n")
    # the unknown key must stop the run before any work is done
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    cfg = _write(tmp_path, SMALL.replace("gamma_m = 1e-3", "gamma_m = 0.02").replace("grid_points = 9", "grid_points = 2")
                 + "eps_p = 1e-4\n")
    out = tmp_path / "td"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--method", "time-domain"]) == 0
    assert "method = time-domain" in (out / "metadata.cfg").read_text()


def test_figures_are_opt_in(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "plain")]) == 0
    assert not list((tmp_path / "plain").glob("*.png"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "fig"), "--figures"]) == 0
    png = tmp_path / "fig" / "spectrum.png"
    assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_transistor_outputs(tmp_path):
    text = """\
experiment = transistor
kappa = 0.2
gamma_m = 0.02
g0 = 0.1
eps_c = 0.05
delta_c = -1.0
delta_p = 0.0
n_photon = 3
n_phonon = 6
t_switch = 20
t_hold = 400
"""
    out = tmp_path / "tr"
    assert main(["run", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    summary = _rows(out / "summary.csv")
    assert summary[0] == ["quantity", "value", "status"]
    assert [r[0] for r in summary[1:]] == ["switch_on_tau", "switch_off_tau", "p10_frequency"]
    assert all(r[2] == "ok" for r in summary[1:])
    pops = _rows(out / "populations.csv")
    assert pops[0] == ["t", "p00", "p01", "p10", "p11", "p20"]
    t = np.array([r[0] for r in _rows(out / "transmission.csv")[1:]], dtype=float)
    assert np.all(np.diff(t) > 0)

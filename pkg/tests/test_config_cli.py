"""Config parsing, scenario orchestration, persistence and the CLI surface."""

import json
import math

import numpy as np
import pytest

from metawave.cli import main
from metawave.config import ScenarioConfig, config_from_dict, parse_config
from metawave.errors import ParameterError
from metawave.report import RunReport, run_scenario, run_sweep
from metawave.slab import SlabParams, closed_form_coeffs


def test_empty_config_gives_reference_defaults():
    cfg = config_from_dict({})
    assert cfg.geometry == "sigma1"
    assert cfg.k0 == pytest.approx(12.0)
    assert cfg.eta == pytest.approx(0.125)
    assert cfg.eps1 == pytest.approx(1.0 / (1.0 - 0.01j))
    assert cfg.qm == (0.25, 0.75)
    assert set(cfg.modes) == {"coeffs", "e-parallel", "h-parallel", "hmm"}


def test_config_validation_errors():
    with pytest.raises(ParameterError, match="reciprocal power of two"):
        config_from_dict({"eta": 0.13})
    with pytest.raises(ParameterError, match="mutually exclusive"):
        config_from_dict({"k0": 12, "omega": 12})
    with pytest.raises(ParameterError, match="unknown config keys: colour, shape"):
        config_from_dict({"colour": 1, "shape": 2})
    with pytest.raises(ParameterError, match="unknown modes"):
        config_from_dict({"modes": ["fdtd"]})
    with pytest.raises(ParameterError):
        config_from_dict({"eps1": [1.0, -0.5]})
    with pytest.raises(ParameterError):
        config_from_dict({"eps1": [0.5, 0.1], "eps1_inv": [1.0, -0.01]})
    with pytest.raises(ParameterError):
        config_from_dict({"strip": [0.1, 0.5]})
    with pytest.raises(ParameterError):
        config_from_dict({"lateral": "absorbing"})
    with pytest.raises(ParameterError):
        config_from_dict({"sweep": {"start": 2.0, "stop": 1.0, "num": 5}})


def test_eps1_inverse_form():
    cfg = config_from_dict({"eps1_inv": [1.0, -0.01]})
    assert cfg.eps1 == pytest.approx(1.0 / (1.0 - 0.01j))


def test_parse_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"k0": 6.0, "geometry": "sigma3",
                                "modes": ["coeffs"]}))
    cfg = parse_config(path)
    assert cfg.omega == pytest.approx(6.0)
    assert cfg.geometry == "sigma3"
    with pytest.raises(ParameterError):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParameterError):
        parse_config(bad)


def test_fingerprint_stable_and_config_sensitive():
    a = config_from_dict({}).fingerprint()
    b = config_from_dict({}).fingerprint()
    c = config_from_dict({"k0": 11.0}).fingerprint()
    assert a == b and a != c and len(a) == 16


def _read(path):
    return path.read_bytes()


def test_run_scenario_coeffs_and_determinism(tmp_path):
    cfg = config_from_dict({"modes": ["coeffs"], "cell_n": 32})
    r1 = run_scenario(cfg, tmp_path / "a")
    r2 = run_scenario(cfg, tmp_path / "b")
    for name in ("coeffs.csv", "report.json"):
        assert _read(tmp_path / "a" / name) == _read(tmp_path / "b" / name)
    # four geometry rows matching the closed forms
    lines = (tmp_path / "a" / "coeffs.csv").read_text().splitlines()
    assert lines[0].startswith("# metawave config=")
    header = lines[1].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[2:]]
    assert [row["geometry"] for row in rows] == ["sigma1", "sigma2", "sigma3",
                                                 "sigma4"]
    gamma = r1.results["cell"]["gamma"]
    params = SlabParams(omega=12.0, L=0.5, alpha=0.75, gamma=gamma)
    ref = closed_form_coeffs("sigma1", params)
    row = rows[0]
    assert float(row["re_T"]) == pytest.approx(ref.T.real, abs=1e-12)
    assert float(row["abs_R"]) == pytest.approx(abs(ref.R), abs=1e-12)
    s4 = rows[3]
    assert float(s4["re_R"]) == -1.0 and float(s4["abs_T"]) == 0.0


def test_run_scenario_fine_and_hmm(tmp_path):
    cfg = config_from_dict({"modes": ["e-parallel", "h-parallel", "hmm"],
                            "cell_n": 32, "cells_per_eta": 8,
                            "lateral": "periodic"})
    report = run_scenario(cfg, tmp_path)
    fine = report.results["fine"]
    assert fine["h-parallel"]["t_num"] > 5 * fine["e-parallel"]["t_num"]
    assert (tmp_path / "fine_e-parallel.vtk").exists()
    assert (tmp_path / "hmm_reconstructed.vtk").exists()
    hmm = json.loads((tmp_path / "hmm.json").read_text())
    assert hmm["macro_nodes"] == report.results["hmm"]["macro_nodes"]
    assert report.results["hmm"]["rel_err_ql"] < 0.2
    # timings live outside the deterministic report
    assert "timings" not in json.loads((tmp_path / "report.json").read_text())
    assert (tmp_path / "timings.txt").exists()


def test_report_round_trip(tmp_path):
    cfg = config_from_dict({"modes": ["coeffs"], "cell_n": 32})
    report = run_scenario(cfg, tmp_path)
    loaded = RunReport.load(tmp_path / "report.json")
    assert loaded.fingerprint == report.fingerprint
    assert loaded.to_json() == report.to_json()


def test_vtk_format(tmp_path):
    cfg = config_from_dict({"modes": ["h-parallel"], "cells_per_eta": 8})
    run_scenario(cfg, tmp_path)
    text = (tmp_path / "fine_h-parallel.vtk").read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 3.0"
    assert "config=" in text[1]
    assert text[2] == "ASCII" and text[3] == "DATASET UNSTRUCTURED_GRID"
    n_points = int(text[4].split()[1])
    assert n_points == 65 * 65
    assert any(ln.startswith("SCALARS re_u double") for ln in text)
    assert any(ln.startswith("SCALARS im_u double") for ln in text)
    assert any(ln.startswith("SCALARS material int") for ln in text)


def test_run_sweep_dip_and_determinism(tmp_path):
    # transmission of the sigma1 structure dips just above the mu_eff
    # resonance at k0 ~ 8.9 (lossless inclusions)
    grid = list(np.linspace(6.0, 12.0, 50))
    cfg = config_from_dict({"modes": ["h-parallel"], "eps1": 1.0,
                            "cells_per_eta": 8, "cell_n": 32,
                            "lateral": "periodic", "sweep": grid})
    r1 = run_sweep(cfg, tmp_path / "a")
    r2 = run_sweep(cfg, tmp_path / "b")
    assert _read(tmp_path / "a" / "sweep.csv") == _read(tmp_path / "b" / "sweep.csv")
    lines = (tmp_path / "a" / "sweep.csv").read_text().splitlines()
    header = lines[1].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[2:]]
    assert len(rows) == 50
    t = np.array([float(r["t_num_h_parallel"]) for r in rows])
    k = np.array([float(r["k0"]) for r in rows])
    dip = k[int(np.argmin(t))]
    assert 8.5 <= dip <= 10.5
    assert t.min() < 0.5 * np.median(t[k < 8.5])
    # mu column tracks the resonance too
    mu_re = np.array([float(r["re_mu"]) for r in rows])
    assert mu_re.min() < 0.0


def test_sweep_requires_grid():
    cfg = config_from_dict({"modes": ["coeffs"]})
    with pytest.raises(ParameterError):
        run_sweep(cfg, "unused")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"eta": 0.13}))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    out = tmp_path / "ok"
    cfg = tmp_path / "ok.json"
    cfg.write_text(json.dumps({"modes": ["coeffs"], "cell_n": 32}))
    assert main(["coeffs", "--config", str(cfg), "--out", str(out),
                 "--draws", "25", "--seed", "7"]) == 0
    captured = capsys.readouterr()
    assert "max |closed-form - oracle|" in captured.out
    dev = float(captured.out.strip().split()[-1])
    assert dev < 1e-10
    assert (out / "coeffs.csv").exists()


def test_cli_cell_report(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"geometry": "sigma3", "cell_n": 32}))
    out = tmp_path / "out"
    assert main(["cell", "--config", str(cfg), "--out", str(out)]) == 0
    data = json.loads((out / "cell.json").read_text())
    assert data["gamma"] is None  # band inclusion is not sigma1-type
    assert abs(data["a_eff"][0][0] - 0.5) < 1e-3
    assert data["alpha"] == pytest.approx(0.5)

    cfg.write_text(json.dumps({"geometry": "sigma1", "cell_n": 32}))
    assert main(["cell", "--config", str(cfg), "--out", str(out)]) == 0
    data = json.loads((out / "cell.json").read_text())
    assert data["gamma"] >= 1.0
    assert data["mu_pc"][2] == pytest.approx(0.75, abs=1e-6)
    assert data["mu_hc"][1] > 0.0  # lossy inclusion: Im(mu_eff) > 0


def test_cli_mu_sweep_and_solve_fine(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"cell_n": 32, "cells_per_eta": 8,
                               "sweep": {"start": 1.0, "stop": 5.0, "num": 5},
                               "modes": ["h-parallel"]}))
    out = tmp_path / "out"
    assert main(["mu-sweep", "--config", str(cfg), "--out", str(out)]) == 0
    lines = (out / "mu_sweep.csv").read_text().splitlines()
    assert lines[1] == "schema_version,omega,k0,re_mu,im_mu,failed"
    assert len(lines) == 2 + 5
    assert main(["solve-fine", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "fine.csv").exists()

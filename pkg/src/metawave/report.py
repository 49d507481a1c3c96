"""Scenario orchestration, result persistence and CSV/JSON report output.

All persisted CSV/JSON artifacts are deterministic: identical configs
produce byte-identical files.  Wall-clock timings therefore go to a
separate ``timings.txt`` that is excluded from that guarantee.  Every
artifact carries the config fingerprint (CSV/VTK header comment, JSON
field) and a ``schema_version`` marker.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cell as cellmod
from . import hmm as hmmmod
from .config import ScenarioConfig
from .errors import MetawaveError, ParameterError
from .geometry import GEOMETRY_IDS, make_microstructure
from .helmholtz import assemble_and_solve, build_domain_mesh, \
    measure_transmission, region_norm
from .slab import CoefficientSet, SlabParams, closed_form_coeffs
from .vtkio import write_field_vtk

SCHEMA_VERSION = 1

COEFFS_COLUMNS = ("schema_version", "geometry", "alpha", "gamma_re", "gamma_im",
                  "k0", "L", "re_R", "im_R", "abs_R", "re_T", "im_T", "abs_T",
                  "re_RM", "im_RM", "abs_RM", "re_TM", "im_TM", "abs_TM")
MU_SWEEP_COLUMNS = ("schema_version", "omega", "k0", "re_mu", "im_mu", "failed")
FINE_COLUMNS = ("schema_version", "mode", "geometry", "eta", "k0", "t_num",
                "norm_qm", "norm_inclusions")
SWEEP_COLUMNS = ("schema_version", "omega", "k0", "re_mu", "im_mu", "mu_failed",
                 "re_R", "im_R", "re_T", "im_T", "re_RM", "im_RM",
                 "re_TM", "im_TM", "t_num_e_parallel", "t_num_h_parallel")


def _cell_token(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows, fingerprint: str) -> None:
    lines = [f"# metawave config={fingerprint}", ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ParameterError("row length does not match the CSV schema")
        lines.append(",".join(_cell_token(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if np.isnan(v) else v
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.complexfloating):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


@dataclass
class RunReport:
    """Per-scenario results plus provenance; JSON round-trip is lossless."""

    config: dict
    fingerprint: str
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "config_fingerprint": self.fingerprint,
            "config": _jsonable(self.config),
            "results": _jsonable(self.results),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def save(self, directory: Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(self.to_json())
        lines = [f"# timings (s); excluded from determinism guarantee"]
        for name in sorted(self.timings):
            lines.append(f"{name}: {self.timings[name]:.3f}")
        (directory / "timings.txt").write_text("\n".join(lines) + "\n")

    @staticmethod
    def load(path) -> "RunReport":
        payload = json.loads(Path(path).read_text())
        return RunReport(config=payload["config"],
                         fingerprint=payload["config_fingerprint"],
                         results=payload["results"],
                         schema_version=payload["schema_version"])


class _Timer:
    def __init__(self, report: RunReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.report.timings[self.name] = time.perf_counter() - self.start
        return False


def _coeffs_rows(cfg: ScenarioConfig, gamma: float | None) -> tuple[list, dict]:
    """Closed-form coefficient table for all four geometries at config k0/L."""
    rows = []
    blob = {}
    L = cfg.qm[1] - cfg.qm[0]
    for geometry in GEOMETRY_IDS:
        m = make_microstructure(geometry, cfg.variant, cfg.r)
        uses_gamma = geometry in ("sigma1", "sigma2")
        g = gamma if uses_gamma else None
        params = SlabParams(omega=cfg.omega, L=L, eps0=cfg.eps0, mu0=cfg.mu0,
                            alpha=m.alpha, gamma=g)
        coeffs = closed_form_coeffs(geometry, params)
        rows.append((SCHEMA_VERSION, geometry, m.alpha,
                     g if uses_gamma else None, 0.0 if uses_gamma else None,
                     cfg.k0, L,
                     coeffs.R.real, coeffs.R.imag, abs(coeffs.R),
                     coeffs.T.real, coeffs.T.imag, abs(coeffs.T),
                     coeffs.R_M.real, coeffs.R_M.imag, abs(coeffs.R_M),
                     coeffs.T_M.real, coeffs.T_M.imag, abs(coeffs.T_M)))
        blob[geometry] = {
            "alpha": m.alpha, "gamma": g,
            "R": coeffs.R, "T": coeffs.T, "R_M": coeffs.R_M, "T_M": coeffs.T_M,
        }
    return rows, blob


def cell_report(cfg: ScenarioConfig) -> dict:
    """Unit-cell quantities for the configured geometry.

    gamma, mu_pc and mu_hc need a compact (sigma1-type) inclusion and are
    null otherwise; the Neumann tensor is defined for every geometry.
    """
    m = cfg.microstructure()
    mesh = cellmod.build_cell_mesh(m, cfg.cell_n)
    out: dict = {"n": cfg.cell_n, "alpha": m.alpha,
                 "geometry": cfg.geometry,
                 "a_eff": cellmod.solve_neumann_cell(mesh)}
    if m.compact_inclusion:
        out["gamma"] = cellmod.solve_pc_permittivity(mesh)
        out["mu_pc"] = cellmod.solve_pc_permeability(mesh, m.alpha)
        out["mu_hc"] = cellmod.solve_inclusion_resonance(
            mesh, cfg.omega, cfg.eps0, cfg.mu0, cfg.eps1)
    else:
        out["gamma"] = None
        out["mu_pc"] = None
        out["mu_hc"] = None
    return out


def _fine_summary(cfg: ScenarioConfig, sol) -> dict:
    qm = (cfg.qm[0], cfg.qm[1], 0.0, 1.0)
    return {
        "t_num": measure_transmission(sol, cfg.strip),
        "norm_qm": region_norm(sol, qm),
        "norm_inclusions": region_norm(sol, qm, inclusions_only=True),
        "residual": sol.residual,
    }


def run_scenario(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Execute the configured modes in dependency order and persist artifacts.

    Writes coeffs.csv / fine.csv / VTK fields / hmm report pieces under
    ``out_dir`` plus the overall deterministic report.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    report = RunReport(config=cfg.as_dict(), fingerprint=fp)

    gamma = None
    needs_cell = "coeffs" in cfg.modes or "hmm" in cfg.modes
    if needs_cell:
        with _Timer(report, "cell"):
            gamma_mesh = cellmod.build_cell_mesh(
                make_microstructure("sigma1", "square", cfg.r), cfg.cell_n)
            gamma = cellmod.solve_pc_permittivity(gamma_mesh)
            report.results["cell"] = cell_report(cfg)

    if "coeffs" in cfg.modes:
        with _Timer(report, "coeffs"):
            rows, blob = _coeffs_rows(cfg, gamma)
            write_csv(out / "coeffs.csv", COEFFS_COLUMNS, rows, fp)
            report.results["coeffs"] = blob

    fine_modes = [m for m in ("e-parallel", "h-parallel") if m in cfg.modes]
    if fine_modes:
        domain = cfg.macro_domain()
        m = cfg.microstructure()
        with _Timer(report, "fine-mesh"):
            mesh = build_domain_mesh(domain, m, cfg.cells_per_eta,
                                     eps1=cfg.eps1, lateral=cfg.lateral)
        fine_rows = []
        report.results["fine"] = {}
        for mode in fine_modes:
            with _Timer(report, f"fine-{mode}"):
                sol = assemble_and_solve(mesh, mode, cfg.omega, cfg.eps1,
                                         eps0=cfg.eps0, mu0=cfg.mu0)
                summary = _fine_summary(cfg, sol)
                report.results["fine"][mode] = summary
                fine_rows.append((SCHEMA_VERSION, mode, cfg.geometry, cfg.eta,
                                  cfg.k0, summary["t_num"], summary["norm_qm"],
                                  summary["norm_inclusions"]))
                write_field_vtk(out / f"fine_{mode}.vtk", sol, fp)
        write_csv(out / "fine.csv", FINE_COLUMNS, fine_rows, fp)

    if "hmm" in cfg.modes:
        with _Timer(report, "hmm"):
            result = hmmmod.run_hmm(cfg.macro_domain(), cfg.microstructure(),
                                    cfg.omega, cfg.eps1, cell_n=cfg.cell_n,
                                    n_macro=cfg.macro_n,
                                    cells_per_eta=cfg.cells_per_eta,
                                    eps0=cfg.eps0, mu0=cfg.mu0,
                                    lateral=cfg.lateral)
            write_field_vtk(out / "hmm_macro.vtk", result.macro, fp)
            write_field_vtk(out / "hmm_reconstructed.vtk",
                            result.reconstructed, fp)
            report.results["hmm"] = {
                "a_eff": result.model.a_eff,
                "mu_eff": result.model.mu_eff,
                "t_num_macro": result.t_num_macro,
                "t_num_fine": result.t_num_fine,
                "rel_err_ql": result.rel_err_ql,
                "rel_err_qm": result.rel_err_qm,
                "rel_err_qm_macro_only": result.rel_err_qm_macro_only,
                "macro_nodes": result.macro_nodes,
            }
            hmm_json = {"schema_version": SCHEMA_VERSION,
                        "config_fingerprint": fp,
                        **_jsonable(report.results["hmm"])}
            (out / "hmm.json").write_text(
                json.dumps(hmm_json, sort_keys=True, indent=2) + "\n")

    report.save(out)
    return report


def _sweep_sample(cfg: ScenarioConfig, omega: float, gamma, cell_mesh,
                  spectrum) -> dict:
    """One frequency sample of the sweep; failures are recorded, not raised."""
    out: dict = {"omega": omega, "k0": omega * (cfg.eps0 * cfg.mu0) ** 0.5}
    m = cfg.microstructure()
    if cell_mesh is not None:
        try:
            res = cellmod.inclusion_resonance(cell_mesh, omega, cfg.eps0,
                                              cfg.mu0, cfg.eps1,
                                              _spectrum=spectrum)
            out["mu"] = res.mu_eff
            out["mu_failed"] = False
        except MetawaveError:
            out["mu"] = None
            out["mu_failed"] = True
    if "coeffs" in cfg.modes:
        L = cfg.qm[1] - cfg.qm[0]
        uses_gamma = cfg.geometry in ("sigma1", "sigma2")
        params = SlabParams(omega=omega, L=L, eps0=cfg.eps0, mu0=cfg.mu0,
                            alpha=m.alpha, gamma=gamma if uses_gamma else None)
        out["coeffs"] = closed_form_coeffs(cfg.geometry, params)
    for mode in ("e-parallel", "h-parallel"):
        if mode in cfg.modes:
            mesh = build_domain_mesh(cfg.macro_domain(), m, cfg.cells_per_eta,
                                     eps1=cfg.eps1, lateral=cfg.lateral)
            sol = assemble_and_solve(mesh, mode, omega, cfg.eps1,
                                     eps0=cfg.eps0, mu0=cfg.mu0)
            out[f"t_num_{mode}"] = measure_transmission(sol, cfg.strip)
    return out


def run_sweep(cfg: ScenarioConfig, out_dir) -> RunReport:
    """Frequency sweep over the configured grid; rows stay in grid order."""
    if cfg.sweep is None:
        raise ParameterError("config has no sweep grid")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    report = RunReport(config=cfg.as_dict(), fingerprint=fp)

    m = cfg.microstructure()
    gamma = None
    if "coeffs" in cfg.modes and cfg.geometry in ("sigma1", "sigma2"):
        gamma_mesh = cellmod.build_cell_mesh(
            make_microstructure("sigma1", "square", cfg.r), cfg.cell_n)
        gamma = cellmod.solve_pc_permittivity(gamma_mesh)
    cell_mesh = None
    spectrum = None
    if m.compact_inclusion:
        cell_mesh = cellmod.build_cell_mesh(m, cfg.cell_n)
        if complex(cfg.eps1).imag == 0.0:
            spectrum = cellmod.dirichlet_spectrum(cell_mesh)

    with _Timer(report, "sweep"):
        omegas = list(cfg.sweep)
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                samples = list(pool.map(
                    lambda om: _sweep_sample(cfg, om, gamma, cell_mesh, spectrum),
                    omegas))
        else:
            samples = [_sweep_sample(cfg, om, gamma, cell_mesh, spectrum)
                       for om in omegas]

    rows = []
    for s in samples:
        mu = s.get("mu")
        coeffs: CoefficientSet | None = s.get("coeffs")
        if coeffs is None:
            coeff_cells = (None,) * 8
        else:
            coeff_cells = (coeffs.R.real, coeffs.R.imag,
                           coeffs.T.real, coeffs.T.imag,
                           coeffs.R_M.real, coeffs.R_M.imag,
                           coeffs.T_M.real, coeffs.T_M.imag)
        rows.append((
            SCHEMA_VERSION, s["omega"], s["k0"],
            None if mu is None else mu.real,
            None if mu is None else mu.imag,
            s.get("mu_failed"),
            *coeff_cells,
            s.get("t_num_e-parallel"),
            s.get("t_num_h-parallel"),
        ))
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows, fp)
    report.results["sweep"] = {
        "n_samples": len(samples),
        "n_failed": sum(bool(s.get("mu_failed")) for s in samples),
    }
    report.save(out)
    return report


def write_mu_sweep_csv(path, curve, fingerprint: str,
                       eps0: float = 1.0, mu0: float = 1.0) -> None:
    rows = []
    for omega, mu, failed in zip(curve.omega, curve.mu_eff, curve.failed):
        k0 = omega * (eps0 * mu0) ** 0.5
        rows.append((SCHEMA_VERSION, omega, k0,
                     None if failed else mu.real,
                     None if failed else mu.imag,
                     bool(failed)))
    write_csv(path, MU_SWEEP_COLUMNS, rows, fingerprint)

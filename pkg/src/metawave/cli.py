"""Command-line interface.

Subcommands: coeffs, cell, mu-sweep, solve-fine, solve-hmm, run, sweep.
Exit codes: 0 success, 1 configuration/parameter error, 2 solver failure,
3 validation failure (residual or pipeline-consistency checks).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import cell as cellmod
from . import hmm as hmmmod
from .config import ScenarioConfig, config_from_dict, parse_config
from .errors import (AccuracyError, ConsistencyError, GeometryError,
                     MetawaveError, ParameterError, ResourceLimitError,
                     SolverError)
from .geometry import make_microstructure
from .helmholtz import assemble_and_solve, build_domain_mesh
from .report import (COEFFS_COLUMNS, FINE_COLUMNS, SCHEMA_VERSION, RunReport,
                     _coeffs_rows, _fine_summary, _jsonable, cell_report,
                     run_scenario, run_sweep, write_csv, write_mu_sweep_csv)
from .slab import SlabParams, closed_form_coeffs, oracle_coeffs
from .vtkio import write_field_vtk

COEFF_GEOMETRIES = ("sigma1", "sigma2", "sigma3")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON scenario config (defaults reproduce the "
                             "reference experiment)")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for sweeps")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized property suites")


def _load_config(args) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        raw = cfg.as_dict()
        raw.pop("omega")
        raw["k0"] = cfg.k0
        if raw.get("sweep") is None:
            raw.pop("sweep", None)
        raw.update(overrides)
        cfg = config_from_dict(raw)
    return cfg


def _cmd_coeffs(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    gamma_mesh = cellmod.build_cell_mesh(
        make_microstructure("sigma1", "square", cfg.r), cfg.cell_n)
    gamma = cellmod.solve_pc_permittivity(gamma_mesh)
    rows, _ = _coeffs_rows(cfg, gamma)
    path = args.out / "coeffs.csv"
    write_csv(path, COEFFS_COLUMNS, rows, cfg.fingerprint())
    print(f"wrote {path}")
    if args.draws:
        dev = _oracle_draws(args.draws, cfg.seed)
        print(f"max |closed-form - oracle| over {args.draws} draws: {dev:.3e}")
    return 0


def _oracle_draws(n_draws: int, seed: int) -> float:
    """Randomized closed-form vs interface-oracle comparison; returns max dev."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_draws):
        alpha = rng.uniform(0.1, 0.9)
        gamma = rng.uniform(1.0, 5.0)
        k0 = rng.uniform(1.0, 20.0)
        L = rng.uniform(0.1, 1.0)
        params = SlabParams(omega=k0, L=L, alpha=alpha, gamma=gamma)
        for geometry in COEFF_GEOMETRIES:
            a = closed_form_coeffs(geometry, params)
            b = oracle_coeffs(geometry, params)
            worst = max(worst, max(abs(x - y) for x, y in
                                   zip(a.as_tuple(), b.as_tuple())))
    return worst


def _cmd_cell(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    data = {"schema_version": SCHEMA_VERSION,
            "config_fingerprint": cfg.fingerprint(),
            **_jsonable(cell_report(cfg))}
    path = args.out / "cell.json"
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    print(f"wrote {path}")
    return 0


def _cmd_mu_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        raise ParameterError("mu-sweep needs a sweep grid in the config")
    args.out.mkdir(parents=True, exist_ok=True)
    mesh = cellmod.build_cell_mesh(cfg.microstructure(), cfg.cell_n)
    curve = cellmod.sweep_mu_eff(mesh, np.asarray(cfg.sweep), cfg.eps1,
                                 cfg.eps0, cfg.mu0)
    path = args.out / "mu_sweep.csv"
    write_mu_sweep_csv(path, curve, cfg.fingerprint(), cfg.eps0, cfg.mu0)
    print(f"wrote {path} ({len(curve)} samples, "
          f"{int(curve.failed.sum())} failed)")
    return 0


def _cmd_solve_fine(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    mesh = build_domain_mesh(cfg.macro_domain(), cfg.microstructure(),
                             cfg.cells_per_eta, eps1=cfg.eps1,
                             lateral=cfg.lateral)
    modes = [m for m in cfg.modes if m in ("e-parallel", "h-parallel")]
    if not modes:
        raise ParameterError("solve-fine needs e-parallel or h-parallel in modes")
    rows = []
    for mode in modes:
        sol = assemble_and_solve(mesh, mode, cfg.omega, cfg.eps1,
                                 eps0=cfg.eps0, mu0=cfg.mu0)
        summary = _fine_summary(cfg, sol)
        write_field_vtk(args.out / f"fine_{mode}.vtk", sol, fp)
        rows.append((SCHEMA_VERSION, mode, cfg.geometry, cfg.eta, cfg.k0,
                     summary["t_num"], summary["norm_qm"],
                     summary["norm_inclusions"]))
        print(f"{mode}: T_num = {summary['t_num']:.4f}, "
              f"residual = {summary['residual']:.2e}")
    write_csv(args.out / "fine.csv", FINE_COLUMNS, rows, fp)
    return 0


def _cmd_solve_hmm(args) -> int:
    cfg = _load_config(args)
    args.out.mkdir(parents=True, exist_ok=True)
    fp = cfg.fingerprint()
    result = hmmmod.run_hmm(cfg.macro_domain(), cfg.microstructure(),
                            cfg.omega, cfg.eps1, cell_n=cfg.cell_n,
                            n_macro=cfg.macro_n,
                            cells_per_eta=cfg.cells_per_eta,
                            eps0=cfg.eps0, mu0=cfg.mu0, lateral=cfg.lateral)
    write_field_vtk(args.out / "hmm_macro.vtk", result.macro, fp)
    write_field_vtk(args.out / "hmm_reconstructed.vtk",
                    result.reconstructed, fp)
    data = {
        "schema_version": SCHEMA_VERSION,
        "config_fingerprint": fp,
        "a_eff": result.model.a_eff,
        "mu_eff": result.model.mu_eff,
        "t_num_macro": result.t_num_macro,
        "t_num_fine": result.t_num_fine,
        "rel_err_ql": result.rel_err_ql,
        "rel_err_qm": result.rel_err_qm,
        "rel_err_qm_macro_only": result.rel_err_qm_macro_only,
        "macro_nodes": result.macro_nodes,
    }
    path = args.out / "hmm.json"
    path.write_text(json.dumps(_jsonable(data), sort_keys=True, indent=2) + "\n")
    print(f"wrote {path} (rel_err_QL = {result.rel_err_ql:.3f})")
    return 0


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_scenario(cfg, args.out)
    print(f"wrote {Path(args.out) / 'report.json'} "
          f"(config {report.fingerprint})")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    report = run_sweep(cfg, args.out)
    n = report.results["sweep"]["n_samples"]
    print(f"wrote {Path(args.out) / 'sweep.csv'} ({n} samples)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metawave",
        description="Transmission laboratory for high-contrast "
                    "electromagnetic meta-materials (2D scalar models).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="closed-form slab coefficient table")
    p.add_argument("--draws", type=int, default=0,
                   help="additionally run N random closed-form-vs-oracle draws")
    p.set_defaults(func=_cmd_coeffs)
    _add_common(p)

    for name, func, desc in (
            ("cell", _cmd_cell, "unit-cell effective parameters"),
            ("mu-sweep", _cmd_mu_sweep, "mu_eff(omega) frequency sweep"),
            ("solve-fine", _cmd_solve_fine, "fine-scale Helmholtz solves"),
            ("solve-hmm", _cmd_solve_hmm, "two-level homogenized pipeline"),
            ("run", _cmd_run, "full scenario in dependency order"),
            ("sweep", _cmd_sweep, "frequency sweep of the scenario")):
        p = sub.add_parser(name, help=desc)
        p.set_defaults(func=func)
        _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, GeometryError, ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, ConsistencyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 3
    except MetawaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

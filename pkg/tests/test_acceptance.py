"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they are produced.  Criterion 8's sigma4 clause is a documented, expected
failure: the converged fine-scale transmission of the best x3-invariant
sigma4 analog is ~0.18 at the reference parameters (see README, section
"Known limitation"), not < 0.1; the assertion is kept as stated rather
than loosened.
"""

import time

import numpy as np
import pytest

from metawave.cell import (build_cell_mesh, pc_permeability_matrix,
                           solve_inclusion_resonance, solve_neumann_cell,
                           solve_pc_permittivity, sweep_mu_eff)
from metawave.config import config_from_dict
from metawave.geometry import MacroDomain, make_microstructure
from metawave.helmholtz import (assemble_and_solve, build_domain_mesh,
                                l2_error_vs, measure_transmission,
                                region_norm)
from metawave.hmm import (HomogenizedModel, build_macro_mesh,
                          homogenized_solve, run_hmm)
from metawave.report import run_scenario, run_sweep
from metawave.slab import (SlabParams, closed_form_coeffs,
                           interface_matching_oracle, oracle_coeffs)

EPS1 = 1.0 / (1.0 - 0.01j)
K0 = 12.0
SIGMA1 = make_microstructure("sigma1", "square", 0.25)


def _report(num: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def _draws(n=100, seed=2024):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield SlabParams(omega=rng.uniform(1.0, 20.0),
                         L=rng.uniform(0.1, 1.0),
                         alpha=rng.uniform(0.1, 0.9),
                         gamma=rng.uniform(1.0, 5.0))


def test_acceptance_1_oracle_equivalence():
    t0 = time.perf_counter()
    worst = 0.0
    for params in _draws():
        for geometry in ("sigma1", "sigma2", "sigma3"):
            a = closed_form_coeffs(geometry, params)
            b = oracle_coeffs(geometry, params)
            worst = max(worst, max(abs(x - y) for x, y in
                                   zip(a.as_tuple(), b.as_tuple())))
    elapsed = time.perf_counter() - t0
    _report(1, worst < 1e-10 and elapsed < 1.0,
            f"closed form vs interface oracle, 100 draws x 3 geometries: "
            f"max dev {worst:.2e} (tol 1e-10), {elapsed:.2f}s")


def test_acceptance_2_energy_conservation():
    t0 = time.perf_counter()
    worst = 0.0
    for params in _draws():
        for geometry in ("sigma1", "sigma2", "sigma3"):
            c = closed_form_coeffs(geometry, params)
            worst = max(worst, abs(abs(c.R) ** 2 + abs(c.T) ** 2 - 1.0))
    mirror = closed_form_coeffs("sigma4", SlabParams(omega=3.0, L=0.4))
    exact = mirror.R == -1.0 and mirror.T == 0.0
    elapsed = time.perf_counter() - t0
    _report(2, worst < 1e-10 and exact and elapsed < 1.0,
            f"lossless | |R|^2+|T|^2 - 1 | max {worst:.2e} (tol 1e-10); "
            f"sigma4 exactly (R, T) = (-1, 0): {exact}; {elapsed:.2f}s")


def test_acceptance_3_pc_cell_problems():
    mesh64 = build_cell_mesh(SIGMA1, 64)
    mu = pc_permeability_matrix(mesh64)
    diag_ok = np.allclose(np.diag(mu), [1.0, 1.0, 0.75], rtol=0.02)
    off = mu - np.diag(np.diag(mu))
    off_ok = np.max(np.abs(off)) < 1e-8
    g64 = solve_pc_permittivity(mesh64)
    g128 = solve_pc_permittivity(build_cell_mesh(SIGMA1, 128))
    gamma_ok = g64 >= 1.0 and abs(g64 - g128) / g128 < 1e-2
    _report(3, diag_ok and off_ok and gamma_ok,
            f"mu_pc diag {np.diag(mu).round(6)} vs (1, 1, 0.75) within 2%; "
            f"off-diag max {np.max(np.abs(off)):.1e} < 1e-8; gamma_64 = "
            f"{g64:.6f} >= 1 with |g64 - g128|/g128 = "
            f"{abs(g64 - g128) / g128:.2e} < 1e-2")


def test_acceptance_4_neumann_tensor_sigma3():
    mesh = build_cell_mesh(make_microstructure("sigma3", r=0.25), 64)
    a = solve_neumann_cell(mesh)
    ok = abs(a[0, 0] - 0.5) < 1e-3 and abs(a[1, 1]) < 1e-3
    _report(4, ok,
            f"sigma3 strip Neumann tensor diag = ({a[0, 0]:.6f}, "
            f"{a[1, 1]:.2e}) vs (0.5 +- 1e-3, < 1e-3); the 0.5 entry sits "
            "in Maxwell position 2 under the documented index rotation")


def test_acceptance_5_artificial_magnetism():
    t0 = time.perf_counter()
    mesh = build_cell_mesh(SIGMA1, 64)
    mu0 = solve_inclusion_resonance(mesh, 0.0, eps1=1.0)
    static_ok = abs(mu0 - 1.0) < 1e-10
    grid = np.linspace(0.1, 20.0, 200)
    curve = sweep_mu_eff(mesh, grid, eps1=1.0)
    re = curve.mu_eff.real
    flips = np.nonzero(re[:-1] * re[1:] < 0)[0]
    step = grid[1] - grid[0]
    k_star = np.sqrt(8.0) * np.pi
    bracket_ok = (len(flips) > 0
                  and grid[flips[0]] - step <= k_star <= grid[flips[0] + 1] + step)
    elapsed = time.perf_counter() - t0
    lo = grid[flips[0]] if len(flips) else float("nan")
    _report(5, static_ok and bracket_ok and elapsed < 60.0,
            f"mu_eff(0) - 1 = {abs(mu0 - 1.0):.1e} (tol 1e-10); first sign "
            f"change of Re mu_eff in [{lo:.2f}, {lo + step:.2f}] brackets "
            f"sqrt(8 pi^2) = {k_star:.3f} within one grid step; {elapsed:.1f}s")


def test_acceptance_6_fine_solver_convergence():
    t0 = time.perf_counter()
    dom = MacroDomain(eta=0.125)
    errs = []
    for cpe in (8, 16):   # h = 1/64, 1/128
        mesh = build_domain_mesh(dom, None, cpe)
        sol = assemble_and_solve(mesh, "e-parallel", K0, 1.0)
        errs.append(l2_error_vs(sol, lambda p: np.exp(-1j * K0 * p[:, 0])))
    elapsed = time.perf_counter() - t0
    ok = errs[0] < 0.05 and errs[0] / errs[1] >= 3.0
    _report(6, ok and elapsed < 60.0,
            f"plane-wave L2 error {errs[0]:.4f} at h=1/64 (< 5%), ratio "
            f"{errs[0] / errs[1]:.2f} (>= 3) at h=1/128; {elapsed:.1f}s")


def test_acceptance_7_eparallel_decay():
    t0 = time.perf_counter()
    etas = (0.25, 0.125, 0.0625)
    incl, qm = [], []
    for eta in etas:
        dom = MacroDomain(eta=eta)
        mesh = build_domain_mesh(dom, SIGMA1, 16, eps1=EPS1)
        sol = assemble_and_solve(mesh, "e-parallel", K0, EPS1)
        incl.append(region_norm(sol, (0.25, 0.75, 0, 1),
                                inclusions_only=True) ** 2)
        qm.append(region_norm(sol, (0.25, 0.75, 0, 1)) ** 2)
    slope = np.polyfit(np.log(etas), np.log(incl), 1)[0]
    monotone = qm[0] > qm[1] > qm[2]
    elapsed = time.perf_counter() - t0
    _report(7, slope >= 1.5 and monotone and elapsed < 600.0,
            f"int_incl |u|^2 = {[f'{v:.2e}' for v in incl]} over eta = "
            f"{etas}: fitted slope {slope:.2f} (>= 1.5); Q_M norms "
            f"monotone: {monotone}; {elapsed:.1f}s")


def _transmission(geometry, rotated, mode, cpe=32):
    dom = MacroDomain(eta=0.125)
    m = make_microstructure(geometry, "square", 0.25, rotated=rotated)
    mesh = build_domain_mesh(dom, m, cpe, eps1=EPS1, lateral="periodic")
    return measure_transmission(assemble_and_solve(mesh, mode, K0, EPS1))


def test_acceptance_8_transmission_table():
    t0 = time.perf_counter()
    t1e = _transmission("sigma1", False, "e-parallel")
    t1h = _transmission("sigma1", False, "h-parallel")
    t3 = _transmission("sigma3", False, "h-parallel")
    t3b = _transmission("sigma3", True, "h-parallel")
    elapsed = time.perf_counter() - t0
    ratio_ok = t1h > 5.0 * t1e
    s3_ok = t3 > 0.3 and t3b < 0.1
    _report(8, ratio_ok and s3_ok and elapsed < 600.0,
            f"sigma1 T_h/T_e = {t1h:.3f}/{t1e:.3f} = {t1h / t1e:.0f} (> 5); "
            f"sigma3 transmitting {t3:.3f} (> 0.3), blocked orientation "
            f"{t3b:.3f} (< 0.1); {elapsed:.0f}s")


def test_acceptance_8_sigma4_blocked():
    """Expected failure, kept as stated: see README "Known limitation".

    The percolating high-contrast matrix of the x3-invariant sigma4
    analog carries the scalar wave as a connected high-index network;
    its converged transmission at the reference parameters is ~0.18,
    and no 2D scalar formulation of this analog reaches < 0.1 (the 3D
    blocking mechanism has no scalar counterpart).
    """
    t4 = _transmission("sigma4", False, "h-parallel")
    _report(8, t4 < 0.1,
            f"sigma4 analog T_num = {t4:.3f} (< 0.1 required); documented "
            "2D-scalar limitation, assertion kept as stated")


def test_acceptance_9_hmm_pipeline():
    t0 = time.perf_counter()
    # macro cost independent of eta
    sizes = {build_macro_mesh(MacroDomain(eta=e), 32).n_nodes
             for e in (0.25, 0.125, 0.0625)}
    size_ok = len(sizes) == 1

    # laterally uniform homogenized slab against the 1D interface oracle
    dom = MacroDomain(eta=0.125)
    oracle_ok = True
    oracle_detail = []
    for a11, mu in ((0.7, 0.85 + 0.05j), (0.579, 0.66 + 0.005j)):
        model = HomogenizedModel(a_eff=np.diag([a11, a11]), mu_eff=mu,
                                 omega=K0, domain=dom)
        sol = homogenized_solve(dom, model, K0, n_macro=64, lateral="periodic")
        t_num = measure_transmission(sol)
        oracle = interface_matching_oracle(np.sqrt(a11 * complex(mu)),
                                           K0 * np.sqrt(complex(mu) / a11),
                                           K0, dom.L)
        dev = abs(t_num - abs(oracle.T)) / abs(oracle.T)
        oracle_detail.append(f"{dev:.3f}")
        oracle_ok = oracle_ok and dev < 0.05

    # corrector-reconstructed field against the fine reference
    result = run_hmm(dom, SIGMA1, K0, EPS1, cell_n=64, n_macro=32,
                     cells_per_eta=8, lateral="periodic")
    rec_ok = result.rel_err_ql < 0.2
    elapsed = time.perf_counter() - t0
    _report(9, size_ok and oracle_ok and rec_ok and elapsed < 900.0,
            f"macro nodes eta-independent: {size_ok}; 1D-oracle T_num devs "
            f"{oracle_detail} (< 0.05); reconstructed-vs-fine rel L2 over "
            f"Q_L = {result.rel_err_ql:.3f} (< 0.2) at eta = 1/8; "
            f"{elapsed:.0f}s")


def test_acceptance_10_determinism(tmp_path):
    cfg = config_from_dict({"modes": ["coeffs"], "cell_n": 32})
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    same_run = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("coeffs.csv", "report.json"))
    sweep_cfg = config_from_dict({"modes": ["coeffs"], "cell_n": 32,
                                  "sweep": {"start": 2.0, "stop": 4.0,
                                            "num": 3}})
    run_sweep(sweep_cfg, tmp_path / "c")
    run_sweep(sweep_cfg, tmp_path / "d")
    same_sweep = all(
        (tmp_path / "c" / f).read_bytes() == (tmp_path / "d" / f).read_bytes()
        for f in ("sweep.csv", "report.json"))
    _report(10, same_run and same_sweep,
            f"repeated run byte-identical: {same_run}; repeated sweep "
            f"byte-identical: {same_sweep}")

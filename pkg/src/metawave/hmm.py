"""Two-level homogenized pipeline: cell solves, coarse macro solve,
zeroth-order corrector reconstruction and comparison with fine references.

The macro problem replaces the oscillatory slab by the effective
coefficients (A_eff, mu_eff) from the unit-cell solvers while keeping the
identity coefficients outside Q_M; its mesh is eta-independent.  Because
the media studied here are perfectly periodic, one cell solve is reused
everywhere instead of per-quadrature-point local problems.  The
reconstruction multiplies the macro field inside each inclusion by
(1 + w) with the inclusion corrector w, which restores the resonant
amplitudes that the smooth macro field cannot carry; the gradient-type
corrector of the full vector theory has no counterpart in this scalar
setting and is omitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .cell import CellMesh, ResonanceSolution, build_cell_mesh, \
    inclusion_resonance, solve_neumann_cell
from .errors import ConsistencyError, GeometryError, ParameterError
from .geometry import MacroDomain, Microstructure
from .helmholtz import (DomainMesh, FieldSolution, IncidentWave,
                        _boundary_operators, _lateral_setup,
                        assemble_and_solve, build_domain_mesh,
                        measure_transmission, region_mask, _tri_l2_sq)


@dataclass(frozen=True, eq=False)
class HomogenizedModel:
    """Effective slab coefficients: A_eff and mu_eff inside Q_M, identity outside."""

    a_eff: np.ndarray
    mu_eff: complex
    omega: float
    domain: MacroDomain

    def __post_init__(self):
        a = np.asarray(self.a_eff, dtype=float)
        if a.shape != (2, 2):
            raise ParameterError("a_eff must be a 2x2 matrix")
        if np.linalg.norm(a - a.T) > 1e-8:
            raise ParameterError("a_eff must be symmetric")
        if np.min(np.linalg.eigvalsh(a)) < -1e-10:
            raise ParameterError("a_eff must be positive semidefinite")
        if not np.isfinite(complex(self.mu_eff)):
            raise ParameterError("mu_eff must be finite")


def build_macro_mesh(domain: MacroDomain, n_macro: int = 32,
                     lateral: str = "impedance") -> DomainMesh:
    """Coarse structured mesh; its size is independent of eta.

    n_macro must be a multiple of 4 so the default slab interfaces fall on
    grid lines.
    """
    if n_macro < 4 or n_macro % 4 != 0:
        raise ParameterError(f"n_macro must be a multiple of 4, got {n_macro}")
    nodes, tris = fem.structured_mesh(n_macro)
    bary = nodes[tris].mean(axis=1)
    lo, hi = domain.qm
    in_qm = (bary[:, 0] >= lo) & (bary[:, 0] < hi)
    areas, grads = fem.p1_geometry(nodes, tris)
    dof_map, n_dofs, edges, normals = _lateral_setup(n_macro, lateral)
    return DomainMesh(n=n_macro, h=1.0 / n_macro, cells_per_eta=0,
                      lateral=lateral, domain=domain, microstructure=None,
                      nodes=nodes, tris=tris,
                      inclusion=np.zeros(len(tris), dtype=bool),
                      in_qm=in_qm, areas=areas, grads=grads, dof_map=dof_map,
                      n_dofs=n_dofs, bnd_edges=edges, bnd_normals=normals)


def effective_model(domain: MacroDomain, m: Microstructure, omega: float,
                    eps1: complex, cell_n: int = 64, eps0: float = 1.0,
                    mu0: float = 1.0) -> tuple[HomogenizedModel,
                                               ResonanceSolution, CellMesh]:
    """Cell solves feeding the macro model: Neumann tensor and mu_eff(omega)."""
    if not m.compact_inclusion:
        raise GeometryError(
            "effective model construction needs a compact inclusion "
            "(sigma1-type); build HomogenizedModel directly otherwise")
    mesh = build_cell_mesh(m, cell_n)
    a_eff = solve_neumann_cell(mesh)
    corrector = inclusion_resonance(mesh, omega, eps0, mu0, eps1)
    model = HomogenizedModel(a_eff=a_eff, mu_eff=corrector.mu_eff,
                             omega=omega, domain=domain)
    return model, corrector, mesh


def homogenized_solve(domain: MacroDomain, model: HomogenizedModel,
                      omega: float, wave: IncidentWave | None = None,
                      n_macro: int = 32, eps0: float = 1.0,
                      mu0: float = 1.0, lateral: str = "impedance",
                      a_floor: float = 0.0) -> FieldSolution:
    """Coarse solve with the homogenized coefficients inside the slab.

    Degenerate (blocked-direction) A_eff entries are used as is; the mass
    and boundary terms keep the discrete system invertible.  ``a_floor``
    is only added on retry if factorization fails.
    """
    if abs(model.omega - omega) > 1e-12 * max(1.0, abs(omega)):
        raise ConsistencyError(
            f"model was built at omega = {model.omega}, solve asked {omega}")
    mesh = build_macro_mesh(domain, n_macro, lateral)
    k0 = omega * (eps0 * mu0) ** 0.5
    if wave is None:
        wave = IncidentWave(k0=k0)

    n_tris = len(mesh.tris)
    a = np.tile(np.eye(2, dtype=complex), (n_tris, 1, 1))
    a[mesh.in_qm] = np.asarray(model.a_eff, dtype=complex) \
        + a_floor * np.eye(2)
    c = np.ones(n_tris, dtype=complex)
    c[mesh.in_qm] = complex(model.mu_eff)

    K = fem.assemble(mesh.tri_dofs,
                     fem.local_stiffness(mesh.areas, mesh.grads, a),
                     mesh.n_dofs)
    M = fem.assemble(mesh.tri_dofs, fem.local_mass(mesh.areas, c), mesh.n_dofs)
    B, b = _boundary_operators(mesh, wave, k0)
    A = (K - (k0 * k0) * M - 1j * k0 * B).tocsr()
    u = fem.solve_direct(A, b, rtol=1e-8, context="homogenized macro solve")
    res = fem.residual_norm(A, u, b)
    return FieldSolution(mesh=mesh, u=u[mesh.dof_map], mode="homogenized",
                         omega=omega, eta=domain.eta,
                         eps1=complex(model.mu_eff), residual=res)


def _corrector_factor(fine_mesh: DomainMesh, corrector: ResonanceSolution,
                      cell_mesh: CellMesh, domain: MacroDomain) -> np.ndarray:
    """Nodal corrector amplitude w({x/eta}) on lattice cells inside the slab."""
    pts = fine_mesh.nodes
    eta = domain.eta
    j1 = np.floor(pts[:, 0] / eta)
    j2 = np.floor(pts[:, 1] / eta)
    lo, hi = domain.qm
    (bx0, bx1), (by0, by1) = domain.bounds
    tol = 1e-12
    in_cells = ((j1 * eta >= lo - tol) & ((j1 + 1) * eta <= hi + tol)
                & (j2 * eta >= by0 - tol) & ((j2 + 1) * eta <= by1 + tol))
    y = np.column_stack([pts[:, 0] / eta - j1, pts[:, 1] / eta - j2])
    w_grid = corrector.w[cell_mesh.dof_map]
    w_vals = fem.interpolate_structured(cell_mesh.n, w_grid, y)
    return np.where(in_cells, w_vals, 0.0)


def reconstruct_zeroth_order(macro_sol: FieldSolution,
                             corrector: ResonanceSolution,
                             cell_mesh: CellMesh, domain: MacroDomain,
                             fine_mesh: DomainMesh) -> FieldSolution:
    """Zeroth-order reconstruction u0(x) = u_hat(x) (1 + w({x/eta})).

    The corrector w vanishes outside the inclusions and on their
    boundaries, so u0 coincides with the macro field there and only the
    resonant inclusion amplitudes are added.
    """
    if abs(corrector.omega - macro_sol.omega) > 1e-12 * max(1.0, macro_sol.omega):
        raise ConsistencyError(
            f"corrector omega {corrector.omega} does not match macro solve "
            f"omega {macro_sol.omega}")
    u_hat = fem.interpolate_structured(macro_sol.mesh.n, macro_sol.u,
                                       fine_mesh.nodes)
    w_vals = _corrector_factor(fine_mesh, corrector, cell_mesh, domain)
    u0 = u_hat * (1.0 + w_vals)
    return FieldSolution(mesh=fine_mesh, u=u0, mode="hmm-reconstructed",
                         omega=macro_sol.omega, eta=domain.eta,
                         eps1=corrector.eps1, residual=macro_sol.residual)


def compare_fields(a: FieldSolution, b: FieldSolution, region) -> float:
    """Relative L2 difference over a rectangle, b taken as the reference.

    The coarser field is interpolated onto the finer mesh first.
    """
    if a.mesh.n >= b.mesh.n:
        fine, coarse = a, b
        ua = fine.u
        ub = fem.interpolate_structured(coarse.mesh.n, coarse.u,
                                        fine.mesh.nodes)
    else:
        fine, coarse = b, a
        ua = fem.interpolate_structured(coarse.mesh.n, coarse.u,
                                        fine.mesh.nodes)
        ub = fine.u
    mask = region_mask(fine.mesh, region)
    if not np.any(mask):
        raise ParameterError(f"region {region} contains no triangles")
    num = _tri_l2_sq(fine.mesh, ua - ub, mask)
    den = _tri_l2_sq(fine.mesh, ub, mask)
    if den == 0.0:
        raise ParameterError("reference field vanishes on the region")
    return (num / den) ** 0.5


@dataclass(frozen=True, eq=False)
class HmmResult:
    """Everything the two-level pipeline produces for one scenario."""

    model: HomogenizedModel
    macro: FieldSolution
    reconstructed: FieldSolution
    fine: FieldSolution
    t_num_macro: float
    t_num_fine: float
    rel_err_ql: float
    rel_err_qm: float
    rel_err_qm_macro_only: float
    macro_nodes: int


def run_hmm(domain: MacroDomain, m: Microstructure, omega: float,
            eps1: complex, cell_n: int = 64, n_macro: int = 32,
            cells_per_eta: int = 8, eps0: float = 1.0,
            mu0: float = 1.0, lateral: str = "impedance") -> HmmResult:
    """Full pipeline: cell solves, macro solve, reconstruction, fine reference."""
    model, corrector, cell_mesh = effective_model(domain, m, omega, eps1,
                                                  cell_n, eps0, mu0)
    macro = homogenized_solve(domain, model, omega, n_macro=n_macro,
                              eps0=eps0, mu0=mu0, lateral=lateral)
    fine_mesh = build_domain_mesh(domain, m, cells_per_eta, eps1=eps1,
                                  lateral=lateral)
    fine = assemble_and_solve(fine_mesh, "h-parallel", omega, eps1,
                              eps0=eps0, mu0=mu0)
    u0 = reconstruct_zeroth_order(macro, corrector, cell_mesh, domain,
                                  fine_mesh)
    lo, hi = domain.qm
    ql = (0.0, lo, 0.0, 1.0)
    qm = (lo, hi, 0.0, 1.0)
    return HmmResult(
        model=model, macro=macro, reconstructed=u0, fine=fine,
        t_num_macro=measure_transmission(macro),
        t_num_fine=measure_transmission(fine),
        rel_err_ql=compare_fields(u0, fine, ql),
        rel_err_qm=compare_fields(u0, fine, qm),
        rel_err_qm_macro_only=compare_fields(macro, fine, qm),
        macro_nodes=macro.mesh.n_nodes,
    )

"""Periodic unit-cell solvers for effective material parameters.

Four cell quantities are computed on the triangulated torus:

* ``solve_pc_permittivity``: the in-plane effective permittivity entry
  gamma of a perfectly conducting compact inclusion, via the floating
  conductor potential problem (E = grad(phi) + e1 in air, E = 0 in metal,
  constant potential and zero total flux on the conductor).
* ``solve_pc_permeability``: the diagonal (1, 1, air fraction) of the
  perfect-conductor permeability, via the stream-function reduction of
  the divergence-free cell problems.
* ``solve_neumann_cell``: the perforated Neumann tensor of the air region,
  the effective diffusion of the H-parallel scalar model.
* ``solve_inclusion_resonance``: the frequency-dependent effective
  permeability mu_eff(omega) = 1 + int_Sigma w from the inclusion Dirichlet
  problem -(1/eps1) Lap(w) = k0^2 (1 + w); its poles at interior
  resonances produce artificial magnetism with negative real parts.

The high-contrast cell problems (Neumann tensor and resonance problem)
are the standard two-scale limits of the H-parallel model; the perfect
conductor problems follow the effective-permittivity and permeability
definitions with inclusion fields set to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from . import fem
from .errors import (GeometryError, ParameterError, ResonanceSingularityError)
from .geometry import Microstructure

_RES_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class CellMesh:
    """Geometry-fitted triangulation of the unit periodicity cell.

    Periodicity is realised by dof identification: node (ix, iy) of the
    (n+1)^2 grid owns torus dof (ix%n) + (iy%n)*n, so opposite boundary
    nodes merge and the four corners form one class.
    """

    n: int
    microstructure: Microstructure | None
    nodes: np.ndarray        # ((n+1)^2, 2)
    tris: np.ndarray         # (2 n^2, 3) grid node indices
    inclusion: np.ndarray    # (2 n^2,) bool, True on metal triangles
    dof_map: np.ndarray      # ((n+1)^2,) torus dof per grid node
    tri_dofs: np.ndarray     # (2 n^2, 3) torus dofs
    areas: np.ndarray
    grads: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.n * self.n

    @property
    def dof_coords(self) -> np.ndarray:
        """Coordinates of the torus dofs (the ix < n, iy < n grid nodes)."""
        k = np.arange(self.n) / self.n
        xx, yy = np.meshgrid(k, k, indexing="xy")
        return np.column_stack([xx.ravel(), yy.ravel()])

    @property
    def inclusion_area(self) -> float:
        return float(self.areas[self.inclusion].sum())

    def inclusion_dofs(self) -> np.ndarray:
        return np.unique(self.tri_dofs[self.inclusion])

    def air_dofs(self) -> np.ndarray:
        return np.unique(self.tri_dofs[~self.inclusion])

    def interior_inclusion_dofs(self) -> np.ndarray:
        """Inclusion dofs excluding the metal/air interface."""
        return np.setdiff1d(self.inclusion_dofs(), self.air_dofs(),
                            assume_unique=True)

    def inclusion_is_compact(self) -> bool:
        """True when no inclusion triangle touches the cell boundary."""
        if not np.any(self.inclusion):
            return False
        ids = np.unique(self.tris[self.inclusion])
        ix = ids % (self.n + 1)
        iy = ids // (self.n + 1)
        return not np.any((ix == 0) | (ix == self.n) | (iy == 0) | (iy == self.n))


def _check_alignment(value: float, n: int, what: str):
    if abs(value * n - round(value * n)) > 1e-9:
        raise ParameterError(
            f"{what} at {value} does not align with the n = {n} grid")


def build_cell_mesh(m: Microstructure | None, n: int) -> CellMesh:
    """Structured, geometry-fitted cell triangulation at resolution n.

    n must be a multiple of 4 so the default inclusion boundaries at
    0.25 and 0.75 fall on grid lines; other radii are accepted as long as
    0.5 +- r aligns.  ``m = None`` gives an empty (all air) cell.
    """
    if n < 4 or n % 4 != 0:
        raise ParameterError(f"cell resolution must be a multiple of 4, got {n}")
    if m is not None:
        if m.variant != "square":
            raise ParameterError(
                "only square-base variants are mesh-fitted; round variants "
                "are for analytic air fractions")
        _check_alignment(0.5 - m.r, n, "inclusion boundary")
        _check_alignment(0.5 + m.r, n, "inclusion boundary")
    nodes, tris = fem.structured_mesh(n)
    bary = nodes[tris].mean(axis=1)
    if m is None:
        inclusion = np.zeros(len(tris), dtype=bool)
    else:
        inclusion = np.asarray(m.contains(bary[:, 0], bary[:, 1]))
    dof_map = fem.periodic_dof_map(n)
    tri_dofs = dof_map[tris]
    areas, grads = fem.p1_geometry(nodes, tris)
    return CellMesh(n=n, microstructure=m, nodes=nodes, tris=tris,
                    inclusion=inclusion, dof_map=dof_map, tri_dofs=tri_dofs,
                    areas=areas, grads=grads)


def _require_compact(mesh: CellMesh, op: str):
    if mesh.microstructure is None or not np.any(mesh.inclusion):
        return
    if not mesh.inclusion_is_compact():
        raise GeometryError(
            f"{op} needs a compactly contained inclusion "
            "(sigma1-type cross-section)")


def _air_stiffness(mesh: CellMesh) -> sp.csr_matrix:
    air = ~mesh.inclusion
    local = fem.local_stiffness(mesh.areas[air], mesh.grads[air], 1.0)
    return fem.assemble(mesh.tri_dofs[air], local, mesh.n_dofs)


def floating_conductor(mesh: CellMesh, d: np.ndarray) -> tuple[np.ndarray, float]:
    """Periodic potential phi with Lap(phi) = 0 in air, phi = -d.y + c on metal.

    The unknown conductor constant c is closed by the zero-total-flux
    condition (sum of the metal-node residual rows).  Returns the full
    nodal potential on torus dofs and the constant c.
    """
    d = np.asarray(d, dtype=float)
    K = _air_stiffness(mesh)
    n_dofs = mesh.n_dofs
    coords = mesh.dof_coords

    metal = mesh.inclusion_dofs()
    free = np.setdiff1d(np.arange(n_dofs), metal, assume_unique=False)
    if metal.size == 0:
        return np.zeros(n_dofs), 0.0

    y_metal = coords[metal] @ d
    K_ff = K[free][:, free]
    K_fm = K[free][:, metal]
    K_mf = K[metal][:, free]
    K_mm = K[metal][:, metal]

    ones_m = np.ones(metal.size)
    col_c = np.asarray(K_fm @ ones_m).ravel()
    row_c = np.asarray(K_mf.T @ ones_m).ravel()
    c_c = float(ones_m @ (K_mm @ ones_m))
    rhs_f = np.asarray(K_fm @ y_metal).ravel()
    rhs_c = float(ones_m @ (K_mm @ y_metal))

    # Bordered symmetric system in (phi_free, c); ground the first free dof.
    A = sp.bmat([[K_ff, col_c.reshape(-1, 1)],
                 [row_c.reshape(1, -1), np.array([[c_c]])]], format="csr")
    b = np.concatenate([rhs_f, [rhs_c]])
    keep = np.arange(1, A.shape[0])
    sol = fem.solve_direct(A[keep][:, keep], b[keep], rtol=_RES_TOL,
                           context="floating-conductor cell problem")
    phi = np.zeros(n_dofs)
    phi[free[1:]] = sol[:-1]
    c = float(sol[-1])
    phi[metal] = -y_metal + c
    return phi, c


def _tri_gradients(mesh: CellMesh, values: np.ndarray) -> np.ndarray:
    """Per-triangle gradient of a nodal field (T, 2)."""
    return np.einsum("tid,ti->td", mesh.grads, values[mesh.tri_dofs])


def solve_pc_permittivity(mesh: CellMesh) -> float:
    """Effective permittivity entry gamma = int_air |grad(phi) + e1|^2.

    Equals 1 exactly for an empty cell and is >= 1 for any inclusion
    because the cell field integrates to e1.
    """
    _require_compact(mesh, "perfect-conductor permittivity")
    if not np.any(mesh.inclusion):
        return 1.0
    phi, _ = floating_conductor(mesh, np.array([1.0, 0.0]))
    air = ~mesh.inclusion
    e_field = _tri_gradients(mesh, phi)[air] + np.array([1.0, 0.0])
    return float(np.sum(mesh.areas[air] * np.sum(e_field**2, axis=1)))


def pc_permeability_matrix(mesh: CellMesh) -> np.ndarray:
    """Full 3x3 perfect-conductor permeability tensor.

    The in-plane block comes from the stream functions psi with
    h^1 = grad(psi) + e2 and h^2 = grad(psi) - e1 vanishing on the metal;
    the 33 entry is the quadrature air fraction.
    """
    _require_compact(mesh, "perfect-conductor permeability")
    air = ~mesh.inclusion
    w = mesh.areas[air]
    mu = np.zeros((3, 3))
    if not np.any(mesh.inclusion):
        mu[0, 0] = mu[1, 1] = mu[2, 2] = 1.0
        return mu
    psi1, _ = floating_conductor(mesh, np.array([0.0, 1.0]))
    psi2, _ = floating_conductor(mesh, np.array([-1.0, 0.0]))
    g1 = _tri_gradients(mesh, psi1)[air]
    g2 = _tri_gradients(mesh, psi2)[air]
    mu[0, 0] = np.sum(w * (g1[:, 1] + 1.0))
    mu[1, 0] = -np.sum(w * g1[:, 0])
    mu[0, 1] = np.sum(w * g2[:, 1])
    mu[1, 1] = np.sum(w * (1.0 - g2[:, 0]))
    mu[2, 2] = np.sum(w)
    return mu


def solve_pc_permeability(mesh: CellMesh, alpha: float | None = None) -> np.ndarray:
    """Diagonal of the perfect-conductor permeability, (1, 1, alpha)."""
    mu = pc_permeability_matrix(mesh)
    out = np.diag(mu).copy()
    if alpha is not None:
        out[2] = alpha
    return out


def _air_components(mesh: CellMesh) -> tuple[np.ndarray, np.ndarray]:
    """Connected components of the air region on the torus.

    Returns (air dof ids, component label per air dof), using triangle
    edge connectivity rather than the stiffness pattern (right-angle P1
    entries can vanish exactly).
    """
    air_tris = mesh.tri_dofs[~mesh.inclusion]
    edges = np.concatenate([air_tris[:, [0, 1]], air_tris[:, [1, 2]],
                            air_tris[:, [2, 0]]])
    n = mesh.n_dofs
    adj = sp.coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])),
                        shape=(n, n)).tocsr()
    n_comp, labels = csgraph.connected_components(adj + adj.T, directed=False)
    air = mesh.air_dofs()
    return air, labels[air]


def solve_neumann_cell(mesh: CellMesh) -> np.ndarray:
    """Perforated Neumann cell tensor of the air region.

    For each direction l, a periodic corrector chi^l satisfies
    div(grad(chi^l) + e_l) = 0 in air with zero normal flux on the metal
    boundary; A[k, l] = int_air (grad(chi^l) + e_l).(grad(chi^k) + e_k).
    Directions blocked by the metal legitimately return ~0 entries.
    """
    air_mask = ~mesh.inclusion
    if not np.any(air_mask):
        raise GeometryError("cell has no air region")
    K = _air_stiffness(mesh)
    air, labels = _air_components(mesh)

    # Ground the lowest dof of every connected air component.
    pins = np.array(sorted(air[labels == c].min() for c in np.unique(labels)))
    keep = np.setdiff1d(air, pins, assume_unique=False)
    K_kk = K[keep][:, keep].tocsc()

    w = mesh.areas[air_mask]
    grads_air = mesh.grads[air_mask]
    dofs_air = mesh.tri_dofs[air_mask]
    fields = []
    for direction in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
        load = fem.assemble_vector(
            dofs_air, w[:, None] * (grads_air @ direction), mesh.n_dofs)
        chi = np.zeros(mesh.n_dofs)
        if keep.size:
            chi[keep] = fem.solve_direct(K_kk, -load[keep], rtol=_RES_TOL,
                                         context="perforated Neumann cell problem")
        fields.append(np.einsum("tid,ti->td", grads_air, chi[dofs_air]) + direction)
    a_eff = np.empty((2, 2))
    for k in range(2):
        for l in range(2):
            a_eff[k, l] = np.sum(w * np.sum(fields[k] * fields[l], axis=1))
    return a_eff


@dataclass(frozen=True, eq=False)
class ResonanceSolution:
    """Inclusion resonance solve at one frequency: mu_eff and corrector w."""

    omega: float
    eps1: complex
    mu_eff: complex
    w: np.ndarray      # nodal field on torus dofs, zero outside the inclusion

    def __complex__(self) -> complex:
        return complex(self.mu_eff)


def _inclusion_operators(mesh: CellMesh):
    inc = mesh.inclusion
    interior = mesh.interior_inclusion_dofs()
    if interior.size == 0:
        raise GeometryError("inclusion has no interior nodes at this resolution")
    K = fem.assemble(mesh.tri_dofs[inc],
                     fem.local_stiffness(mesh.areas[inc], mesh.grads[inc], 1.0),
                     mesh.n_dofs)
    M = fem.assemble(mesh.tri_dofs[inc], fem.local_mass(mesh.areas[inc]),
                     mesh.n_dofs)
    m_vec = np.asarray(M.sum(axis=1)).ravel()   # int_Sigma lambda_i
    K_ii = K[interior][:, interior].tocsc()
    M_ii = M[interior][:, interior].tocsc()
    return interior, K_ii, M_ii, m_vec[interior]


def dirichlet_spectrum(mesh: CellMesh, k: int = 16) -> np.ndarray:
    """Smallest discrete Dirichlet eigenvalues of the inclusion."""
    _require_compact(mesh, "inclusion resonance problem")
    interior, K_ii, M_ii, _ = _inclusion_operators(mesh)
    k = min(k, interior.size - 1)
    vals = spla.eigsh(K_ii, k=k, M=M_ii, sigma=0.0, which="LM",
                      v0=np.ones(interior.size),
                      return_eigenvectors=False)
    return np.sort(vals)


def inclusion_resonance(mesh: CellMesh, omega: float, eps0: float = 1.0,
                        mu0: float = 1.0, eps1: complex = 1.0,
                        _spectrum: np.ndarray | None = None) -> ResonanceSolution:
    """Solve the inclusion Dirichlet problem and return mu_eff with its field.

    Solves -(1/eps1) Lap(w) = k0^2 (1 + w) on the inclusion with w = 0 on
    its boundary and returns mu_eff = 1 + int_Sigma w.  For lossless eps1
    the solve degenerates at discrete Dirichlet eigenvalues; frequencies
    within 1e-8 (relative) of one raise :class:`ResonanceSingularityError`.
    """
    if omega < 0:
        raise ParameterError("omega must be nonnegative")
    _require_compact(mesh, "inclusion resonance problem")
    eps1 = complex(eps1)
    if eps1.real <= 0:
        raise ParameterError(f"eps1 must have positive real part, got {eps1}")
    interior, K_ii, M_ii, m_in = _inclusion_operators(mesh)
    k0sq = omega * omega * eps0 * mu0
    shift = k0sq * eps1
    if eps1.imag == 0.0 and omega > 0:
        lam = _spectrum if _spectrum is not None else dirichlet_spectrum(mesh)
        if np.any(np.abs(lam - shift.real) <= 1e-8 * np.maximum(1.0, lam)):
            raise ResonanceSingularityError(
                f"k0^2 eps1 = {shift.real:.9g} hits a discrete Dirichlet "
                "eigenvalue of the inclusion")
    A = (K_ii - shift * M_ii).tocsc()
    b = np.full(interior.size, shift) * m_in
    w_in = fem.solve_direct(A, b.astype(complex), rtol=_RES_TOL,
                            context="inclusion resonance problem")
    w = np.zeros(mesh.n_dofs, dtype=complex)
    w[interior] = w_in
    mu = 1.0 + complex(m_in @ w_in)
    return ResonanceSolution(omega=omega, eps1=eps1, mu_eff=mu, w=w)


def solve_inclusion_resonance(mesh: CellMesh, omega: float, eps0: float = 1.0,
                              mu0: float = 1.0, eps1: complex = 1.0) -> complex:
    """Frequency-dependent effective permeability mu_eff(omega)."""
    return inclusion_resonance(mesh, omega, eps0, mu0, eps1).mu_eff


@dataclass(frozen=True, eq=False)
class ResonanceCurve:
    """Ordered frequency sweep of mu_eff; failed samples are NaN-marked."""

    omega: np.ndarray
    mu_eff: np.ndarray
    failed: np.ndarray

    def __len__(self) -> int:
        return len(self.omega)


def sweep_mu_eff(mesh: CellMesh, omega_grid, eps1: complex = 1.0,
                 eps0: float = 1.0, mu0: float = 1.0) -> ResonanceCurve:
    """Evaluate mu_eff over a monotone frequency grid.

    Per-sample resonance singularities are recorded in ``failed`` without
    aborting the sweep; output order follows the grid.
    """
    grid = np.asarray(omega_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("omega grid must be a nonempty 1-d sequence")
    if np.any(np.diff(grid) <= 0) and grid.size > 1:
        raise ParameterError("omega grid must be strictly increasing")
    spectrum = None
    if complex(eps1).imag == 0.0:
        spectrum = dirichlet_spectrum(mesh)
    mu = np.empty(grid.size, dtype=complex)
    failed = np.zeros(grid.size, dtype=bool)
    for i, om in enumerate(grid):
        try:
            mu[i] = inclusion_resonance(mesh, float(om), eps0, mu0, eps1,
                                        _spectrum=spectrum).mu_eff
        except ResonanceSingularityError:
            mu[i] = complex(np.nan, np.nan)
            failed[i] = True
    return ResonanceCurve(omega=grid.copy(), mu_eff=mu, failed=failed)

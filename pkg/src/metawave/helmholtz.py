"""Fine-scale 2D Helmholtz solver resolving the eta-periodic microstructure.

Two scalar reductions of the time-harmonic Maxwell system are solved on
the unit square, driven by an incident plane wave:

  e-parallel   -Lap(u) = k0^2 eps_eta u        (u is the out-of-plane E)
  h-parallel   -div(eps_eta^{-1} grad(u)) = k0^2 u   (u is the out-of-plane H)

Weak form: a(x) grad(u).grad(v) - k0^2 c(x) u v over the square, minus
i k0 times the boundary mass, equals the boundary data functional, with
(a, c) = (1, eps_eta) in e-parallel mode and (eps_eta^{-1}, 1) in
h-parallel mode.  The data g = du_inc/dn - i k0 u_inc makes the incident
wave the exact solution of the homogeneous-medium problem.

Lateral boundary treatment is selectable.  ``lateral="impedance"``
places the absorbing condition on the whole boundary (the classical
truncated-domain setup); because the data re-injects the incident wave
along the side walls, the measured transmission then has an O(0.2)
floor behind even a perfectly opaque slab.  ``lateral="periodic"``
identifies the top and bottom edges instead, which is exact for the
x2-periodic structures studied here and lets blocked configurations
show genuinely small transmission.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import ParameterError, ResourceLimitError
from .geometry import MacroDomain, Microstructure, PermittivityField, inclusion_indicator

MODES = ("e-parallel", "h-parallel")
LATERALS = ("impedance", "periodic")
_NODE_CAP = 2_000_000
_GAUSS = 0.5 / np.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class IncidentWave:
    """Unit-amplitude plane wave exp(i k0 d.x); default travels right to left."""

    k0: float
    direction: tuple[float, float] = (-1.0, 0.0)

    def __post_init__(self):
        if self.k0 <= 0:
            raise ParameterError("k0 must be positive")
        d = np.hypot(*self.direction)
        if abs(d - 1.0) > 1e-12:
            raise ParameterError(f"direction must be a unit vector, |d| = {d}")

    def eval(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(self.direction)
        return np.exp(1j * self.k0 * (points @ d))


@dataclass(frozen=True, eq=False)
class DomainMesh:
    """Microstructure-fitted triangulation of the computational square.

    ``dof_map`` sends grid nodes to solver dofs; it is the identity for
    impedance laterals and merges the x2-periodic node pairs otherwise.
    Boundary edges list only the sides carrying the impedance condition.
    """

    n: int
    h: float
    cells_per_eta: int
    lateral: str
    domain: MacroDomain
    microstructure: Microstructure | None
    nodes: np.ndarray
    tris: np.ndarray
    inclusion: np.ndarray     # (T,) bool: high-contrast triangles
    in_qm: np.ndarray         # (T,) bool: barycenter inside the slab
    areas: np.ndarray
    grads: np.ndarray
    dof_map: np.ndarray       # ((n+1)^2,) solver dof per grid node
    n_dofs: int
    bnd_edges: np.ndarray     # (E, 2) grid node pairs
    bnd_normals: np.ndarray   # (E, 2) outward normals

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def tri_dofs(self) -> np.ndarray:
        return self.dof_map[self.tris]

    def barycenters(self) -> np.ndarray:
        return self.nodes[self.tris].mean(axis=1)


@dataclass(frozen=True, eq=False)
class FieldSolution:
    """Complex nodal field over a :class:`DomainMesh` plus run metadata."""

    mesh: DomainMesh
    u: np.ndarray
    mode: str
    omega: float
    eta: float
    eps1: complex
    residual: float


def _edge_range(n: int, side: str) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n)
    stride = n + 1
    if side == "bottom":
        return np.column_stack([i, i + 1]), np.tile([0.0, -1.0], (n, 1))
    if side == "right":
        return (np.column_stack([n + i * stride, n + (i + 1) * stride]),
                np.tile([1.0, 0.0], (n, 1)))
    if side == "top":
        return (np.column_stack([(n - i) + n * stride, (n - i - 1) + n * stride]),
                np.tile([0.0, 1.0], (n, 1)))
    return (np.column_stack([(n - i) * stride, (n - i - 1) * stride]),
            np.tile([-1.0, 0.0], (n, 1)))


def _lateral_setup(n: int, lateral: str) -> tuple[np.ndarray, int,
                                                  np.ndarray, np.ndarray]:
    """dof map plus impedance edge list for the chosen lateral treatment."""
    ids = np.arange((n + 1) ** 2)
    if lateral == "impedance":
        sides = ("bottom", "right", "top", "left")
        dof_map = ids
        n_dofs = (n + 1) ** 2
    elif lateral == "periodic":
        sides = ("right", "left")
        ix = ids % (n + 1)
        iy = ids // (n + 1)
        # fold the top row onto the bottom, then compact the dof numbering
        folded = np.where(iy == n, ix, ids)
        uniq, dof_map = np.unique(folded, return_inverse=True)
        n_dofs = len(uniq)
    else:
        raise ParameterError(
            f"unknown lateral treatment {lateral!r}; expected one of {LATERALS}")
    edges = []
    normals = []
    for side in sides:
        e, m = _edge_range(n, side)
        edges.append(e)
        normals.append(m)
    return dof_map, n_dofs, np.concatenate(edges), np.concatenate(normals)


def build_domain_mesh(domain: MacroDomain, m: Microstructure | None,
                      cells_per_eta: int, eps1: complex = 1.0,
                      lateral: str = "impedance",
                      node_cap: int = _NODE_CAP) -> DomainMesh:
    """Mesh the unit square with h = eta / cells_per_eta.

    Material tags are evaluated at barycenters and agree with the tiled
    permittivity indicator by construction; ``m = None`` gives the
    homogeneous medium.
    """
    if domain.bounds != ((0.0, 1.0), (0.0, 1.0)):
        raise ParameterError("fine solver expects the unit-square domain")
    if cells_per_eta < 4 or cells_per_eta % 4 != 0:
        raise ParameterError(
            f"cells_per_eta must be a multiple of 4 and >= 4, got {cells_per_eta}")
    if m is not None:
        if m.variant != "square":
            raise ParameterError("only square-base variants are mesh-fitted")
        for b in (0.5 - m.r, 0.5 + m.r):
            if abs(b * cells_per_eta - round(b * cells_per_eta)) > 1e-9:
                raise ParameterError(
                    f"inclusion boundary at {b} does not align with "
                    f"cells_per_eta = {cells_per_eta}")
    n = round(cells_per_eta / domain.eta)
    if (n + 1) ** 2 > node_cap:
        raise ResourceLimitError(
            f"mesh would have {(n + 1) ** 2} nodes, cap is {node_cap}")
    return _build_mesh(domain, m, n, cells_per_eta, eps1, lateral)


def _build_mesh(domain: MacroDomain, m: Microstructure | None, n: int,
                cells_per_eta: int, eps1: complex, lateral: str) -> DomainMesh:
    nodes, tris = fem.structured_mesh(n)
    bary = nodes[tris].mean(axis=1)
    lo, hi = domain.qm
    in_qm = (bary[:, 0] >= lo) & (bary[:, 0] < hi)
    if m is None:
        inclusion = np.zeros(len(tris), dtype=bool)
    else:
        field = PermittivityField(eps1=eps1, eta=domain.eta, microstructure=m)
        inclusion = np.asarray(inclusion_indicator(field, domain,
                                                   bary[:, 0], bary[:, 1]))
    areas, grads = fem.p1_geometry(nodes, tris)
    dof_map, n_dofs, edges, normals = _lateral_setup(n, lateral)
    return DomainMesh(n=n, h=1.0 / n, cells_per_eta=cells_per_eta,
                      lateral=lateral, domain=domain, microstructure=m,
                      nodes=nodes, tris=tris, inclusion=inclusion,
                      in_qm=in_qm, areas=areas, grads=grads, dof_map=dof_map,
                      n_dofs=n_dofs, bnd_edges=edges, bnd_normals=normals)


def _mode_coefficients(mesh: DomainMesh, mode: str, eps1: complex,
                       eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle (a, c) coefficient arrays for the requested mode."""
    n_tris = len(mesh.tris)
    a = np.ones(n_tris, dtype=complex)
    c = np.ones(n_tris, dtype=complex)
    eps_inside = complex(eps1) / eta**2
    if mode == "e-parallel":
        c[mesh.inclusion] = eps_inside
    elif mode == "h-parallel":
        a[mesh.inclusion] = 1.0 / eps_inside
    else:
        raise ParameterError(f"unknown mode {mode!r}; expected one of {MODES}")
    return a, c


def _boundary_operators(mesh: DomainMesh, wave: IncidentWave,
                        k0: float) -> tuple[sp.csr_matrix, np.ndarray]:
    """Boundary mass matrix and load vector for the impedance condition.

    The data g = du_inc/dn - i k0 u_inc is integrated with two-point
    Gauss quadrature per edge; the boundary coefficient is 1 since the
    boundary lies in air.
    """
    edges = mesh.dof_map[mesh.bnd_edges]
    p0 = mesh.nodes[mesh.bnd_edges[:, 0]]
    p1 = mesh.nodes[mesh.bnd_edges[:, 1]]
    lengths = np.linalg.norm(p1 - p0, axis=1)

    mloc = np.empty((len(edges), 2, 2))
    mloc[:, 0, 0] = mloc[:, 1, 1] = lengths / 3.0
    mloc[:, 0, 1] = mloc[:, 1, 0] = lengths / 6.0
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    B = sp.coo_matrix((mloc.ravel(), (rows, cols)),
                      shape=(mesh.n_dofs, mesh.n_dofs)).tocsr()

    d = np.asarray(wave.direction)
    dn = mesh.bnd_normals @ d
    b = np.zeros(mesh.n_dofs, dtype=complex)
    for t in (0.5 - _GAUSS, 0.5 + _GAUSS):
        xq = p0 + t * (p1 - p0)
        g = 1j * k0 * (dn - 1.0) * wave.eval(xq)
        wq = 0.5 * lengths
        np.add.at(b, edges[:, 0], wq * g * (1.0 - t))
        np.add.at(b, edges[:, 1], wq * g * t)
    return B, b


def assemble_system(mesh: DomainMesh, mode: str, omega: float,
                    eps1: complex, wave: IncidentWave, eps0: float = 1.0,
                    mu0: float = 1.0) -> tuple[sp.csr_matrix, np.ndarray]:
    """Assembled complex-symmetric system and right-hand side (solver dofs)."""
    if omega <= 0:
        raise ParameterError("omega must be positive")
    if mesh.lateral == "periodic" and tuple(wave.direction) != (-1.0, 0.0):
        raise ParameterError(
            "periodic laterals require normal incidence (direction (-1, 0))")
    k0 = omega * (eps0 * mu0) ** 0.5
    if k0 * mesh.h > 0.4:
        import warnings
        warnings.warn(
            f"k0*h = {k0 * mesh.h:.3f} exceeds 0.4; expect pollution error",
            stacklevel=2)
    a, c = _mode_coefficients(mesh, mode, eps1, mesh.domain.eta)
    K = fem.assemble(mesh.tri_dofs,
                     fem.local_stiffness(mesh.areas, mesh.grads, a),
                     mesh.n_dofs)
    M = fem.assemble(mesh.tri_dofs, fem.local_mass(mesh.areas, c), mesh.n_dofs)
    B, b = _boundary_operators(mesh, wave, k0)
    A = (K - (k0 * k0) * M - 1j * k0 * B).tocsr()
    return A, b


def assemble_and_solve(mesh: DomainMesh, mode: str, omega: float,
                       eps1: complex, wave: IncidentWave | None = None,
                       eps0: float = 1.0, mu0: float = 1.0) -> FieldSolution:
    """Direct sparse solve of the fine-scale problem; residual-checked."""
    k0 = omega * (eps0 * mu0) ** 0.5
    if wave is None:
        wave = IncidentWave(k0=k0)
    A, b = assemble_system(mesh, mode, omega, eps1, wave, eps0, mu0)
    u = fem.solve_direct(A, b, rtol=1e-8, context=f"{mode} fine solve")
    res = fem.residual_norm(A, u, b)
    return FieldSolution(mesh=mesh, u=u[mesh.dof_map], mode=mode, omega=omega,
                         eta=mesh.domain.eta, eps1=complex(eps1), residual=res)


def _tri_l2_sq(mesh: DomainMesh, u: np.ndarray, select: np.ndarray) -> float:
    """Exact integral of |u_h|^2 over the selected triangles."""
    v = u[mesh.tris[select]]
    areas = mesh.areas[select]
    s = np.abs(v) ** 2
    pair = (v * np.conj(np.roll(v, 1, axis=1))).real
    return float(np.sum(areas / 6.0 * (s.sum(axis=1) + pair.sum(axis=1))))


def region_mask(mesh: DomainMesh, region) -> np.ndarray:
    """Barycenter mask of an axis-aligned rectangle (x0, x1, y0, y1)."""
    x0, x1, y0, y1 = region
    bary = mesh.barycenters()
    return ((bary[:, 0] >= x0) & (bary[:, 0] < x1)
            & (bary[:, 1] >= y0) & (bary[:, 1] < y1))


def region_norm(sol: FieldSolution, region,
                inclusions_only: bool = False) -> float:
    """L2 norm of the field over a rectangle, optionally metal-only."""
    mask = region_mask(sol.mesh, region)
    if inclusions_only:
        mask = mask & sol.mesh.inclusion
    if not np.any(mask):
        return 0.0
    return _tri_l2_sq(sol.mesh, sol.u, mask) ** 0.5


def measure_transmission(sol: FieldSolution,
                         strip: tuple[float, float] = (0.05, 0.20)) -> float:
    """Root-mean-square field amplitude over a probe strip left of the slab.

    The default strip [0.05, 0.20] keeps clear of both the absorbing
    boundary and the slab interface.
    """
    lo, hi = strip
    qm_lo = sol.mesh.domain.qm[0]
    if not 0.0 <= lo < hi <= qm_lo:
        raise ParameterError(
            f"strip {strip} must lie left of the slab (x1 < {qm_lo})")
    mask = region_mask(sol.mesh, (lo, hi, 0.0, 1.0))
    area = float(sol.mesh.areas[mask].sum())
    return (_tri_l2_sq(sol.mesh, sol.u, mask) / area) ** 0.5


def l2_error_vs(sol: FieldSolution, exact, region=None) -> float:
    """Relative L2 distance between the field and a callable reference."""
    mesh = sol.mesh
    ref = exact(mesh.nodes)
    mask = np.ones(len(mesh.tris), dtype=bool) if region is None \
        else region_mask(mesh, region)
    num = _tri_l2_sq(mesh, sol.u - ref, mask)
    den = _tri_l2_sq(mesh, ref, mask)
    if den == 0.0:
        raise ParameterError("reference field vanishes on the region")
    return (num / den) ** 0.5

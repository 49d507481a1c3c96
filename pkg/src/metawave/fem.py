"""Shared P1 finite-element machinery on structured triangulations.

All meshes in the package are uniform triangulations of an axis-aligned
unit square: n x n cells, each split along the (0,0)-(1,1) diagonal into
two triangles.  Node (ix, iy) has index ix + iy*(n+1).  Coefficients are
piecewise constant per triangle, so the exact element integrals below
make all quadrature exact.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AccuracyError, FactorizationError

# Reference P1 mass matrix (unit area factor applied by caller).
_MASS0 = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def structured_mesh(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and triangles of the n x n triangulated unit square."""
    k = np.arange(n + 1)
    xx, yy = np.meshgrid(k / n, k / n, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])
    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (ix + iy * (n + 1)).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = lower
    tris[1::2] = upper
    return nodes, tris


def p1_geometry(nodes: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle areas and P1 shape-function gradients (T, 3, 2)."""
    p = nodes[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = 0.5 * det
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    g0 = -(g1 + g2)
    return areas, np.stack([g0, g1, g2], axis=1)


def local_stiffness(areas: np.ndarray, grads: np.ndarray, coeff) -> np.ndarray:
    """Element stiffness blocks for a scalar or 2x2-matrix coefficient."""
    coeff = np.asarray(coeff)
    if coeff.ndim <= 1:
        k = np.einsum("tid,tjd->tij", grads, grads)
        return areas[:, None, None] * coeff.reshape(-1, 1, 1) * k
    flux = np.einsum("tde,tje->tjd", coeff, grads)
    k = np.einsum("tid,tjd->tij", grads, flux)
    return areas[:, None, None] * k


def local_mass(areas: np.ndarray, coeff=1.0) -> np.ndarray:
    coeff = np.asarray(coeff).reshape(-1, 1, 1)
    return areas[:, None, None] * coeff * _MASS0


def assemble(tri_dofs: np.ndarray, local: np.ndarray, n_dofs: int) -> sp.csr_matrix:
    """Scatter element blocks (T, 3, 3) into a CSR matrix."""
    rows = np.repeat(tri_dofs, 3, axis=1).ravel()
    cols = np.tile(tri_dofs, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n_dofs, n_dofs))
    return mat.tocsr()


def assemble_vector(tri_dofs: np.ndarray, local: np.ndarray, n_dofs: int) -> np.ndarray:
    """Scatter element load contributions (T, 3) into a dense vector."""
    vec = np.zeros(n_dofs, dtype=local.dtype)
    np.add.at(vec, tri_dofs.ravel(), local.ravel())
    return vec


def periodic_dof_map(n: int) -> np.ndarray:
    """Map node (ix, iy) of the (n+1)^2 grid to its torus dof ix%n + (iy%n)*n."""
    k = np.arange(n + 1)
    ix, iy = np.meshgrid(k, k, indexing="xy")
    return ((ix % n) + (iy % n) * n).ravel()


def solve_direct(A: sp.spmatrix, b: np.ndarray, rtol: float = 1e-10,
                 context: str = "linear system") -> np.ndarray:
    """Sparse LU solve with a relative residual check."""
    try:
        lu = spla.splu(A.tocsc())
        x = lu.solve(b)
    except RuntimeError as exc:
        raise FactorizationError(f"{context}: factorization failed ({exc})") from exc
    if not np.all(np.isfinite(x)):
        raise FactorizationError(f"{context}: factorization produced non-finite values")
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return x
    residual = np.linalg.norm(A @ x - b) / scale
    if residual > rtol:
        raise AccuracyError(
            f"{context}: relative residual {residual:.3e} exceeds {rtol:.1e}")
    return x


def residual_norm(A: sp.spmatrix, x: np.ndarray, b: np.ndarray) -> float:
    scale = np.linalg.norm(b)
    if scale == 0.0:
        return float(np.linalg.norm(A @ x - b))
    return float(np.linalg.norm(A @ x - b) / scale)


def interpolate_structured(n: int, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate a P1 nodal field of the n x n structured mesh at points.

    Points must lie in [0, 1]^2; evaluation is exact on each triangle and
    continuous across edges.
    """
    pts = np.asarray(points, dtype=float)
    x = np.clip(pts[:, 0], 0.0, 1.0) * n
    y = np.clip(pts[:, 1], 0.0, 1.0) * n
    ix = np.minimum(x.astype(np.int64), n - 1)
    iy = np.minimum(y.astype(np.int64), n - 1)
    s = x - ix
    t = y - iy
    base = ix + iy * (n + 1)
    v00 = values[base]
    v10 = values[base + 1]
    v01 = values[base + n + 1]
    v11 = values[base + n + 2]
    lower = s >= t
    out = np.where(lower,
                   v00 * (1.0 - s) + v10 * (s - t) + v11 * t,
                   v00 * (1.0 - t) + v11 * s + v01 * (t - s))
    return out

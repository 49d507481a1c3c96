"""Microstructure geometry, waveguide partition and high-contrast permittivity.

The periodicity cell is the unit square with the inclusion centred at
(0.5, 0.5); all two-dimensional geometry lives in the (x1, x2) plane.
Four microstructures are supported:

  sigma1  metal cylinder along e3; in-plane cross-section is a compact
          disk (round variant) or square of side 2r (square variant).
  sigma2  metal cylinder along e1; the in-plane analog is the centre-slice
          band |y2 - 0.5| < r (it coincides with the sigma3 cross-section
          and is distinct only in the analytic slab module).
  sigma3  metal plate perpendicular to e2: the band |y2 - 0.5| < r.
  sigma4  metal block with a compact air hole (complement of an air
          cylinder, rotated so the hole is in-plane and the structure is
          x3-invariant).

Set membership uses half-open boxes [lo, hi) so indicator evaluation is
deterministic on grid lines.  Only square-base variants are mesh-fitted;
round variants exist for the analytic air fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

GEOMETRY_IDS = ("sigma1", "sigma2", "sigma3", "sigma4")
VARIANTS = ("square", "round")

# Index sets (N_Sigma, L_Sigma, N_air) per geometry: which coordinate axes
# admit no loop in metal / a loop in metal / no loop in air.
INDEX_SETS: dict[str, tuple[frozenset[int], frozenset[int], frozenset[int]]] = {
    "sigma1": (frozenset({1, 2}), frozenset({3}), frozenset()),
    "sigma2": (frozenset({2, 3}), frozenset({1}), frozenset()),
    "sigma3": (frozenset({2}), frozenset({1, 3}), frozenset({2})),
    "sigma4": (frozenset(), frozenset({1, 2, 3}), frozenset({2, 3})),
}


@dataclass(frozen=True)
class Microstructure:
    """One periodicity-cell geometry plus its derived constants.

    ``r`` is the cylinder radius / plate half-width in unit-cell units,
    ``rotated`` swaps the two in-plane axes of the cross-section (used for
    the blocked orientation of band-type structures).
    """

    geometry: str
    variant: str = "square"
    r: float = 0.25
    rotated: bool = False

    def __post_init__(self):
        if self.geometry not in GEOMETRY_IDS:
            raise ParameterError(f"unknown geometry {self.geometry!r}")
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}")
        if not 0.0 < self.r < 0.5:
            raise ParameterError(f"r must lie in (0, 1/2), got {self.r}")

    @property
    def alpha(self) -> float:
        """Air volume fraction of the three-dimensional cell."""
        if self.geometry in ("sigma1", "sigma2"):
            hole = 4.0 * self.r**2 if self.variant == "square" else math.pi * self.r**2
            return 1.0 - hole
        if self.geometry == "sigma3":
            return 1.0 - 2.0 * self.r
        # sigma4: air is the cylinder itself
        return 4.0 * self.r**2 if self.variant == "square" else math.pi * self.r**2

    @property
    def index_sets(self) -> tuple[frozenset[int], frozenset[int], frozenset[int]]:
        return INDEX_SETS[self.geometry]

    @property
    def compact_inclusion(self) -> bool:
        """True when the in-plane metal cross-section is compactly contained."""
        return self.geometry == "sigma1"

    @property
    def inclusion_fraction_2d(self) -> float:
        """Metal area fraction of the in-plane cross-section."""
        if self.geometry == "sigma1":
            return 4.0 * self.r**2 if self.variant == "square" else math.pi * self.r**2
        if self.geometry in ("sigma2", "sigma3"):
            return 2.0 * self.r
        return 1.0 - (4.0 * self.r**2 if self.variant == "square" else math.pi * self.r**2)

    def contains(self, y1, y2):
        """Indicator of the metal cross-section at unit-cell coordinates.

        Accepts scalars or arrays; boxes are half-open so points on the
        lower boundary belong to the inclusion and points on the upper one
        do not.
        """
        y1 = np.asarray(y1)
        y2 = np.asarray(y2)
        if self.rotated:
            y1, y2 = y2, y1
        lo, hi = 0.5 - self.r, 0.5 + self.r
        if self.geometry == "sigma1":
            if self.variant == "round":
                return (y1 - 0.5) ** 2 + (y2 - 0.5) ** 2 < self.r**2
            return (y1 >= lo) & (y1 < hi) & (y2 >= lo) & (y2 < hi)
        if self.geometry in ("sigma2", "sigma3"):
            return (y2 >= lo) & (y2 < hi)
        # sigma4: complement of the compact air hole
        if self.variant == "round":
            return ~((y1 - 0.5) ** 2 + (y2 - 0.5) ** 2 < self.r**2)
        return ~((y1 >= lo) & (y1 < hi) & (y2 >= lo) & (y2 < hi))


def make_microstructure(geometry: str, variant: str = "square", r: float = 0.25,
                        rotated: bool = False) -> Microstructure:
    """Build a validated :class:`Microstructure`.

    ``variant`` accepts "plate" as an alias of "square" for the band
    geometries, where the distinction is vacuous.
    """
    if variant == "plate":
        variant = "square"
    return Microstructure(geometry=geometry, variant=variant, r=r, rotated=rotated)


def _is_reciprocal_power_of_two(eta: float) -> bool:
    if eta <= 0:
        return False
    m = round(1.0 / eta)
    return m >= 1 and abs(1.0 / eta - m) < 1e-12 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class MacroDomain:
    """Computational rectangle with the meta-material slab Q_M inside it.

    The slab occupies ``qm`` in x1 and the full extent in x2; the
    structure is eta-periodic, with only lattice cells fully contained in
    the slab carrying an inclusion.
    """

    qm: tuple[float, float] = (0.25, 0.75)
    eta: float = 0.125
    bounds: tuple[tuple[float, float], tuple[float, float]] = field(
        default=((0.0, 1.0), (0.0, 1.0)))

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.bounds
        lo, hi = self.qm
        if not (x0 < lo < hi < x1):
            raise ParameterError("Q_M must lie strictly inside the domain in x1")
        if not _is_reciprocal_power_of_two(self.eta):
            raise ParameterError(
                "eta must be a reciprocal power of two dividing |Q_M|, "
                f"got {self.eta}")
        n_cells = (hi - lo) / self.eta
        if abs(n_cells - round(n_cells)) > 1e-9:
            raise ParameterError(
                "eta must be a reciprocal power of two dividing |Q_M|, "
                f"got {self.eta} for |Q_M| = {hi - lo}")

    @property
    def L(self) -> float:
        """Slab width |Q_M|."""
        return self.qm[1] - self.qm[0]

    def lattice_cells(self) -> tuple[range, range]:
        """Index ranges (j1, j2) of lattice cells eta*[j, j+1)^2 inside the slab."""
        (x0, x1), (y0, y1) = self.bounds
        lo, hi = self.qm
        tol = 1e-9
        j1 = range(math.ceil(lo / self.eta - tol), math.floor(hi / self.eta + tol))
        j2 = range(math.ceil(y0 / self.eta - tol), math.floor(y1 / self.eta + tol))
        return j1, j2


@dataclass(frozen=True)
class PermittivityField:
    """High-contrast relative permittivity: eps1/eta^2 in metal, 1 in air.

    The physically meaningful regime has Re(eps1) > 0 and Im(eps1) > 0
    (slightly dissipative metal); lossless eps1 with Im = 0 is admitted so
    resonance sweeps can study the undamped limit.
    """

    eps1: complex
    eta: float
    microstructure: Microstructure

    def __post_init__(self):
        e = complex(self.eps1)
        if not (e.real > 0.0 and e.imag >= 0.0):
            raise ParameterError(
                f"eps1 must have Re > 0 and Im >= 0, got {e}")

    @property
    def value_inside(self) -> complex:
        return complex(self.eps1) / self.eta**2


def inclusion_indicator(field: PermittivityField, domain: MacroDomain, x1, x2):
    """Vectorised indicator of the tiled metal structure at points (x1, x2).

    A point is metallic iff its lattice cell lies fully inside the slab
    and the wrapped unit-cell coordinate falls in the cross-section.
    """
    if abs(field.eta - domain.eta) > 1e-15:
        raise ParameterError("field and domain disagree on eta")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    eta = domain.eta
    j1 = np.floor(x1 / eta)
    j2 = np.floor(x2 / eta)
    lo, hi = domain.qm
    (bx0, bx1), (by0, by1) = domain.bounds
    tol = 1e-12
    cell_inside = ((j1 * eta >= lo - tol) & ((j1 + 1) * eta <= hi + tol)
                   & (j2 * eta >= by0 - tol) & ((j2 + 1) * eta <= by1 + tol))
    y1 = x1 / eta - j1
    y2 = x2 / eta - j2
    return cell_inside & field.microstructure.contains(y1, y2)


def permittivity_at(field: PermittivityField, domain: MacroDomain, x) -> complex:
    """Pointwise permittivity value; total on the computational rectangle."""
    x1, x2 = float(x[0]), float(x[1])
    if bool(inclusion_indicator(field, domain, x1, x2)):
        return field.value_inside
    return 1.0 + 0.0j

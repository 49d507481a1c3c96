"""Closed-form reflection/transmission coefficients for effective slab models.

A normally incident plane wave travels from right to left along x1 and
meets a homogeneous-effective slab occupying Q_M = (-L, 0).  With the
time convention e^{-i omega t}, the electric field ansatz is

    Q_R:  E2 = e^{-i k0 x1} + R e^{i k0 x1}
    Q_M:  E2 = T_M e^{-i k_M x1} + R_M e^{i k_M x1}
    Q_L:  E2 = T e^{-i k0 (x1 + L)}

Each perfect-conductor geometry fixes an interior wavenumber k_M and a
flux weight a_M such that E2 and H3 are continuous at both interfaces;
the closed forms below evaluate the resulting coefficients directly,
while :func:`interface_matching_oracle` solves the raw 4x4 interface
system and serves as an independent cross-check.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError, ParameterError
from .geometry import GEOMETRY_IDS

_DENOM_FLOOR = 1e-14


@dataclass(frozen=True)
class SlabParams:
    """Physical constants and effective parameters for one slab model.

    ``alpha`` is the air volume fraction, ``gamma`` the in-plane effective
    permittivity entry of the cylinder geometries.  Normalised units
    (eps0 = mu0 = 1) make omega coincide with the vacuum wavenumber k0.
    L = 0 is admitted and gives the transparent limit.
    """

    omega: float
    L: float
    eps0: float = 1.0
    mu0: float = 1.0
    alpha: float | None = None
    gamma: complex | None = None

    def __post_init__(self):
        if self.omega <= 0 or self.eps0 <= 0 or self.mu0 <= 0:
            raise ParameterError("omega, eps0 and mu0 must be positive")
        if self.L < 0:
            raise ParameterError("slab width L must be nonnegative")
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")

    @property
    def k0(self) -> float:
        return self.omega * (self.eps0 * self.mu0) ** 0.5


@dataclass(frozen=True)
class CoefficientSet:
    """Complex reflection/transmission quadruple for one slab configuration."""

    R: complex
    T: complex
    R_M: complex
    T_M: complex

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return (self.R, self.T, self.R_M, self.T_M)


def _require(params: SlabParams, geometry: str, *names: str):
    for name in names:
        if getattr(params, name) is None:
            raise ParameterError(f"{geometry} coefficients need params.{name}")


def slab_interior(geometry: str, params: SlabParams) -> tuple[complex, complex]:
    """Interior wavenumber k_M and flux weight a_M for one geometry.

    These are the unique constants for which the interface conditions
    "E2 continuous" and "a_M-weighted interior H3 matches exterior H3"
    reproduce the closed-form coefficients.
    """
    if geometry == "sigma1":
        _require(params, geometry, "alpha", "gamma")
        a = params.alpha
        g = complex(params.gamma)
        return params.k0 * np.sqrt(a * g), np.sqrt(g / a)
    if geometry == "sigma2":
        _require(params, geometry, "gamma")
        g = complex(params.gamma)
        return params.k0 * np.sqrt(g), np.sqrt(g)
    if geometry == "sigma3":
        _require(params, geometry, "alpha")
        return complex(params.k0), 1.0 / params.alpha
    raise ParameterError(f"no interior wave for geometry {geometry!r}")


def closed_form_coeffs(geometry: str, params: SlabParams) -> CoefficientSet:
    """Evaluate the closed-form coefficient formulas for one geometry.

    sigma4 is the perfect mirror (R, T) = (-1, 0) with vanishing interior
    fields.  The complex square roots take the principal branch, which is
    the natural choice for gamma with nonnegative real part.
    """
    if geometry not in GEOMETRY_IDS:
        raise ParameterError(f"unknown geometry {geometry!r}")
    if geometry == "sigma4":
        return CoefficientSet(R=-1.0 + 0.0j, T=0.0j, R_M=0.0j, T_M=0.0j)

    k0 = params.k0
    if geometry == "sigma1":
        _require(params, geometry, "alpha", "gamma")
        a = complex(params.alpha)
        g = complex(params.gamma)
        p = cmath.exp(1j * k0 * cmath.sqrt(a * g) * params.L)
        den = (a + g) * (1 - p * p) + 2 * cmath.sqrt(a * g) * (1 + p * p)
        _check_denominator(den)
        sa, sg = cmath.sqrt(a), cmath.sqrt(g)
        return CoefficientSet(
            R=(a - g) * (1 - p * p) / den,
            T=4 * cmath.sqrt(a * g) * p / den,
            R_M=-2 * sa * p * p * (sa - sg) / den,
            T_M=2 * sa * (sa + sg) / den,
        )
    if geometry == "sigma2":
        _require(params, geometry, "gamma")
        g = complex(params.gamma)
        sg = cmath.sqrt(g)
        p = cmath.exp(1j * k0 * sg * params.L)
        den = (1 + g) * (1 - p * p) + 2 * sg * (1 + p * p)
        _check_denominator(den)
        return CoefficientSet(
            R=(1 - g) * (1 - p * p) / den,
            T=4 * p * sg / den,
            R_M=-2 * p * p * (1 - sg) / den,
            T_M=2 * (1 + sg) / den,
        )
    # sigma3
    _require(params, geometry, "alpha")
    a = params.alpha
    p = cmath.exp(1j * k0 * params.L)
    den = (1 + a * a) * (1 - p * p) + 2 * a * (1 + p * p)
    _check_denominator(den)
    return CoefficientSet(
        R=(a * a - 1) * (1 - p * p) / den,
        T=4 * p * a / den,
        R_M=-2 * a * p * p * (a - 1) / den,
        T_M=2 * a * (a + 1) / den,
    )


def _check_denominator(den: complex):
    if abs(den) < _DENOM_FLOOR:
        raise DegenerateConfigurationError(
            f"interface denominator magnitude {abs(den):.3e} below {_DENOM_FLOOR}")


def interface_matching_oracle(a_m: complex, k_m: complex, k0: float,
                              L: float) -> CoefficientSet:
    """Solve the 4x4 interface system for (R, T, T_M, R_M) directly.

    The four equations are the tangential continuity of E2 and the
    a_M-weighted flux continuity at x1 = 0 and x1 = -L:

        1 + R           = T_M + R_M
        1 - R           = a_M (T_M - R_M)
        T               = p T_M + R_M / p
        T               = a_M (p T_M - R_M / p),      p = e^{i k_M L}.

    Independent of the closed forms: the system is assembled literally and
    solved by direct elimination.
    """
    if k0 <= 0:
        raise ParameterError("k0 must be positive")
    if L < 0:
        raise ParameterError("slab width L must be nonnegative")
    if k_m == 0:
        raise ParameterError("interior wavenumber k_M must be nonzero")
    p = cmath.exp(1j * complex(k_m) * L)
    a = complex(a_m)
    # Unknown ordering: (R, T, T_M, R_M).
    mat = np.array([
        [1.0, 0.0, -1.0, -1.0],
        [1.0, 0.0, a, -a],
        [0.0, 1.0, -p, -1.0 / p],
        [0.0, 1.0, -a * p, a / p],
    ], dtype=complex)
    rhs = np.array([-1.0, 1.0, 0.0, 0.0], dtype=complex)
    det = np.linalg.det(mat)
    if not np.isfinite(det) or abs(det) < _DENOM_FLOOR:
        raise DegenerateConfigurationError(
            f"interface system singular (|det| = {abs(det):.3e})")
    sol = np.linalg.solve(mat, rhs)
    return CoefficientSet(R=sol[0], T=sol[1], T_M=sol[2], R_M=sol[3])


def oracle_coeffs(geometry: str, params: SlabParams) -> CoefficientSet:
    """Interface-matching coefficients under the geometry specialisation."""
    if geometry == "sigma4":
        return CoefficientSet(R=-1.0 + 0.0j, T=0.0j, R_M=0.0j, T_M=0.0j)
    k_m, a_m = slab_interior(geometry, params)
    return interface_matching_oracle(a_m, k_m, params.k0, params.L)


def field_ansatz_eval(geometry: str, params: SlabParams, coeffs: CoefficientSet,
                      x1: float) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise plane-wave evaluation of (E, H) at position x1.

    Returns complex 3-vectors with E polarised along e2 and H along e3.
    The slab occupies (-L, 0); x1 >= 0 is the incidence side.
    """
    k0 = params.k0
    h_scale = k0 / (params.omega * params.mu0)
    E = np.zeros(3, dtype=complex)
    H = np.zeros(3, dtype=complex)
    if x1 >= 0.0:
        down = cmath.exp(-1j * k0 * x1)
        up = cmath.exp(1j * k0 * x1)
        E[1] = down + coeffs.R * up
        H[2] = -h_scale * (down - coeffs.R * up)
        return E, H
    if x1 < -params.L:
        phase = cmath.exp(-1j * k0 * (x1 + params.L))
        E[1] = coeffs.T * phase
        H[2] = -h_scale * coeffs.T * phase
        return E, H
    if geometry == "sigma4":
        return E, H
    k_m, a_m = slab_interior(geometry, params)
    down = cmath.exp(-1j * k_m * x1)
    up = cmath.exp(1j * k_m * x1)
    E[1] = coeffs.T_M * down + coeffs.R_M * up
    # Interior H3 = -(k_M / (omega mu0 w)) (T_M e^{-i k_M x1} - R_M e^{i k_M x1})
    # with w = k_M / (k0 a_M), i.e. weight a_M relative to the exterior scale.
    H[2] = -h_scale * a_m * (coeffs.T_M * down - coeffs.R_M * up)
    return E, H

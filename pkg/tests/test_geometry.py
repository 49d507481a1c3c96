"""Microstructure definitions, tiling and permittivity field."""

import numpy as np
import pytest

from metawave.errors import ParameterError
from metawave.geometry import (MacroDomain, PermittivityField,
                               inclusion_indicator, make_microstructure,
                               permittivity_at)

EPS1 = 1.0 / (1.0 - 0.01j)


def test_alpha_closed_forms():
    assert make_microstructure("sigma1", "square", 0.25).alpha == pytest.approx(0.75)
    assert make_microstructure("sigma1", "round", 0.25).alpha == pytest.approx(1 - np.pi * 0.0625)
    assert make_microstructure("sigma3", "plate", 0.25).alpha == pytest.approx(0.5)
    assert make_microstructure("sigma4", "square", 0.25).alpha == pytest.approx(0.25)
    assert make_microstructure("sigma2", "square", 0.1).alpha == pytest.approx(1 - 0.04)


def test_index_sets_match_loop_table():
    m1 = make_microstructure("sigma1")
    assert m1.index_sets == (frozenset({1, 2}), frozenset({3}), frozenset())
    m2 = make_microstructure("sigma2")
    assert m2.index_sets == (frozenset({2, 3}), frozenset({1}), frozenset())
    m3 = make_microstructure("sigma3", "plate", 0.25)
    assert m3.index_sets == (frozenset({2}), frozenset({1, 3}), frozenset({2}))
    m4 = make_microstructure("sigma4", "square", 0.25)
    assert m4.index_sets == (frozenset(), frozenset({1, 2, 3}), frozenset({2, 3}))


def test_r_out_of_range_rejected():
    for bad in (0.0, 0.5, -0.1, 0.7):
        with pytest.raises(ParameterError):
            make_microstructure("sigma1", "square", bad)
    with pytest.raises(ParameterError):
        make_microstructure("sigma5")


def test_cross_section_membership_half_open():
    m = make_microstructure("sigma1", "square", 0.25)
    # lower boundary in, upper boundary out
    assert m.contains(0.25, 0.5)
    assert not m.contains(0.75, 0.5)
    assert m.contains(0.5, 0.25) and not m.contains(0.5, 0.75)
    m3 = make_microstructure("sigma3", r=0.25)
    assert m3.contains(0.9, 0.5) and not m3.contains(0.9, 0.1)
    # rotation swaps the axes
    m3r = make_microstructure("sigma3", r=0.25, rotated=True)
    assert m3r.contains(0.5, 0.9) and not m3r.contains(0.1, 0.9)
    # sigma4 is the complement of the compact hole
    m4 = make_microstructure("sigma4", r=0.25)
    assert not m4.contains(0.5, 0.5)
    assert m4.contains(0.1, 0.1)


def test_macro_domain_validation():
    MacroDomain(eta=0.125)
    with pytest.raises(ParameterError):
        MacroDomain(eta=0.13)
    with pytest.raises(ParameterError):
        MacroDomain(eta=0.3)
    with pytest.raises(ParameterError):
        MacroDomain(qm=(0.0, 0.75), eta=0.125)
    dom = MacroDomain(eta=0.125)
    assert dom.L == pytest.approx(0.5)
    j1, j2 = dom.lattice_cells()
    assert list(j1) == [2, 3, 4, 5]
    assert len(list(j2)) == 8


def test_permittivity_field_validation():
    m = make_microstructure("sigma1")
    PermittivityField(eps1=1.0, eta=0.125, microstructure=m)  # lossless admitted
    with pytest.raises(ParameterError):
        PermittivityField(eps1=-1.0 + 0.1j, eta=0.125, microstructure=m)
    with pytest.raises(ParameterError):
        PermittivityField(eps1=1.0 - 0.1j, eta=0.125, microstructure=m)


def test_permittivity_values():
    dom = MacroDomain(eta=0.125)
    m = make_microstructure("sigma1", "square", 0.25)
    field = PermittivityField(eps1=EPS1, eta=0.125, microstructure=m)
    # outside the slab
    assert permittivity_at(field, dom, (0.1, 0.5)) == 1.0
    # at an inclusion center: eps1 / eta^2 = 64 eps1
    center = (0.25 + 0.125 * 2.5, 0.125 * 4.5)
    assert permittivity_at(field, dom, center) == pytest.approx(64 * EPS1)
    # in the air channel of the sigma3 cross-section
    m3 = make_microstructure("sigma3", r=0.25)
    f3 = PermittivityField(eps1=EPS1, eta=0.125, microstructure=m3)
    x_air = (0.25 + 0.125 * 2.5, 0.125 * 4 + 0.01)
    assert permittivity_at(f3, dom, x_air) == 1.0


def test_tiling_periodicity():
    dom = MacroDomain(eta=0.125)
    m = make_microstructure("sigma1", "square", 0.25)
    field = PermittivityField(eps1=EPS1, eta=0.125, microstructure=m)
    rng = np.random.default_rng(3)
    # both x and the shifted point stay strictly inside the tiled region
    x1 = rng.uniform(0.25, 0.75 - 0.125, 500)
    x2 = rng.uniform(0.0, 1.0 - 0.125, 500)
    a = inclusion_indicator(field, dom, x1, x2)
    b = inclusion_indicator(field, dom, x1 + 0.125, x2)
    c = inclusion_indicator(field, dom, x1, x2 + 0.125)
    assert np.array_equal(a, b)
    assert np.array_equal(a, c)


@pytest.mark.parametrize("geometry,rotated", [("sigma1", False), ("sigma3", False),
                                              ("sigma3", True), ("sigma4", False)])
def test_measured_air_fraction(geometry, rotated):
    # Monte-Carlo estimate of the air fraction inside Q_M converges to alpha
    dom = MacroDomain(eta=0.125)
    m = make_microstructure(geometry, "square", 0.25, rotated=rotated)
    field = PermittivityField(eps1=EPS1, eta=0.125, microstructure=m)
    rng = np.random.default_rng(11)
    n = 1_000_000
    x1 = rng.uniform(0.25, 0.75, n)
    x2 = rng.uniform(0.0, 1.0, n)
    metal = inclusion_indicator(field, dom, x1, x2)
    air_fraction = 1.0 - metal.mean()
    assert air_fraction == pytest.approx(m.alpha, abs=0.01)


def test_indicator_deterministic_on_grid_lines():
    dom = MacroDomain(eta=0.125)
    m = make_microstructure("sigma1", "square", 0.25)
    field = PermittivityField(eps1=EPS1, eta=0.125, microstructure=m)
    # cell-relative 0.25/0.75 lines inside a slab cell
    x_lo = 0.25 + 0.125 * (2 + 0.25)
    x_hi = 0.25 + 0.125 * (2 + 0.75)
    y_mid = 0.125 * 4.5
    assert bool(inclusion_indicator(field, dom, x_lo, y_mid))
    assert not bool(inclusion_indicator(field, dom, x_hi, y_mid))

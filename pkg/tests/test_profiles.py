import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcnls.grid import Field, make_grid, mass
from mcnls.groundstate import petviashvili_solve
from mcnls.profiles import (
    ExtractionConfig,
    decoupling_check,
    default_templates,
    extract_profiles,
    extract_profiles_radial,
    focus_time,
    linear_S,
    orbit_distance,
    orthogonality_report,
    pair_decoupling,
    radial_asymmetry,
    radial_projection,
    s_nodes,
)
from mcnls.symmetry import EnlargedElement, GroupElement, apply, apply_enlarged

from conftest import gaussian


def E(theta=0.0, xi=0.0, x=0.0, lam=1.0, t0=0.0, dim=1):
    return EnlargedElement(GroupElement(theta, (xi,) * dim, (x,) * dim, lam), t0)


@pytest.fixture(scope="module")
def g32():
    return make_grid(1, 1024, 32)


@pytest.fixture(scope="module")
def Q32(g32):
    return petviashvili_solve(g32)


def test_templates_unit_mass(g1):
    t = default_templates(g1, True)
    assert set(t) == {"gaussian", "Q"}
    assert all(mass(v) == pytest.approx(1.0) for v in t.values())
    assert set(default_templates(make_grid(1, 64, 4), True)) == {"gaussian"}


@given(st.floats(-3, 3), st.floats(-math.pi, math.pi))
@settings(max_examples=15)
def test_orbit_distance_modulo_phase_and_translation(y, theta):
    g = make_grid(1, 256, 16)
    f = gaussian(g, w=0.7)
    moved = apply(GroupElement(theta, (0.0,), (y,), 1.0), f)
    # sqrt(M + M - 2|<f, h>|) cannot resolve below ~sqrt(eps)
    assert orbit_distance(moved, f) < 1e-6


def test_orbit_distance_sees_dilation(g1):
    f = gaussian(g1)
    assert orbit_distance(apply(GroupElement(lam=1.5), f), f) > 0.1


def test_single_bubble_recovered(g32, Q32):
    g = E(0.4, 1.5, -3.0, 0.8, 0.25)
    u = apply_enlarged(g, Q32.field)
    dec = extract_profiles(u, 3)
    assert len(dec.profiles) == 1
    p = dec.profiles[0]
    assert p.template == "Q"
    assert p.captured_mass >= 0.99 * Q32.mass
    assert orbit_distance(p.phi, Q32.field) < 0.05 * math.sqrt(Q32.mass)
    fit = p.fit
    assert fit.lam == pytest.approx(0.8, rel=1e-4) and fit.t0 == pytest.approx(0.25, abs=1e-3)
    assert fit.xi0[0] == pytest.approx(1.5, abs=1e-3) and fit.x0[0] == pytest.approx(-3.0, abs=1e-3)
    rep = dec.to_json({"Q": Q32.field})
    assert rep["profiles"][0]["orbit_distance_to_template"] < 1e-3


def test_two_separated_bubbles(g32, Q32):
    a, b = E(0.3, 12.0, -8.0, 1.0), E(2.0, -12.0, 8.0, 0.7, 0.5)
    u = apply_enlarged(a, Q32.field) + apply_enlarged(b, Q32.field)
    dec = extract_profiles(u, 4)
    assert len(dec.profiles) == 2
    assert dec.decoupling_defect < 0.02 * mass(u)
    chk = decoupling_check(dec, u)
    assert chk["mass_gap"] < 0.02 and not chk["flagged"]
    orth = orthogonality_report(dec)
    assert orth.min_offdiag > 2 and not orth.suspect
    assert orth.pairwise.shape == (2, 2)


def test_zero_field_gives_no_profiles(g1):
    dec = extract_profiles(Field(g1, np.zeros(g1.n)), 3)
    assert dec.profiles == [] and dec.decoupling_defect == 0


def test_mass_floor_stops_extraction(g32, Q32):
    u = apply_enlarged(E(x=-6.0), Q32.field) + apply_enlarged(E(x=6.0), Q32.field) * 0.05
    dec = extract_profiles(u, 4, mass_floor=0.1)
    assert len(dec.profiles) == 1


def test_extraction_config_respected(g32, Q32):
    u = apply_enlarged(E(x=2.0), Q32.field)
    dec = extract_profiles(u, 2, config=ExtractionConfig(use_q=False))
    assert dec.profiles[0].template == "gaussian"


def test_radial_projection_1d_is_even_part(g1):
    f = gaussian(g1, x0=1.0)
    r = radial_projection(f)
    assert radial_asymmetry(r) < 1e-12
    refl = np.roll(f.values[::-1], 1)
    assert np.allclose(r.values, (f.values + refl) / 2, atol=1e-12)


def test_radial_projection_2d_idempotent():
    g = make_grid(2, 64, 8)
    X, Y = g.x
    f = Field(g, np.exp(-((X - 1) ** 2) - Y**2))
    r = radial_projection(f)
    assert radial_asymmetry(r) < 1e-6
    assert np.max(np.abs(radial_projection(r).values - r.values)) < 1e-6 * np.max(np.abs(r.values))
    q = Field(g, np.exp(-g.r2))
    assert np.max(np.abs(radial_projection(q).values - q.values)) < 1e-6
    assert radial_asymmetry(f) > 0.1


def test_radial_extraction(g32, Q32):
    u = apply_enlarged(E(0.5, lam=0.6, t0=0.2), Q32.field)
    dec = extract_profiles_radial(u, 2)
    fit = dec.profiles[0].fit
    assert fit.xi0 == (0.0,) and fit.x0 == (0.0,)
    assert fit.lam == pytest.approx(0.6, rel=1e-3)
    with pytest.raises(ValueError):
        extract_profiles_radial(apply_enlarged(E(x=1.0), Q32.field), 2)


def test_extraction_2d_planted_bubble():
    g = make_grid(2, 64, 12)
    Q = petviashvili_solve(g)
    u = apply_enlarged(EnlargedElement(GroupElement(0.3, (1.0, -0.5), (1.0, 2.0), 0.9), 0.0), Q.field)
    dec = extract_profiles(u, 2)
    assert len(dec.profiles) == 1
    assert dec.profiles[0].captured_mass > 0.99 * Q.mass
    assert np.allclose(dec.profiles[0].fit.x0, (1.0, 2.0), atol=1e-3)


def test_linear_S_invariant_under_symmetry(g32, Q32):
    base = linear_S(Q32.field)
    moved = linear_S(apply_enlarged(E(0.3, 0.5, 2.0), Q32.field))
    assert moved == pytest.approx(base, rel=1e-6)


def test_focus_time_and_nodes():
    assert focus_time(E(lam=2.0, t0=0.5)) == pytest.approx(-2.0)
    ts = s_nodes([-2.0, 3.0], 0.5, 4.0)
    assert np.all(np.diff(ts) > 0)
    assert ts.min() <= -2.0 - 4.0 * 0.25 and ts.max() >= 3.0 + 4.0 * 0.25


def test_pair_decoupling_trend(g32, Q32):
    near = pair_decoupling(Q32.field, E(), E(x=1.0))
    far = pair_decoupling(Q32.field, E(), E(x=20.0))
    assert far["separation"] > near["separation"]
    assert abs(far["inner"]) < 0.05 * abs(near["inner"])
    assert far["S_gap"] < 0.05 * near["S_gap"]

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcnls.grid import (
    Field,
    boundary_mass,
    dilate,
    fourier,
    inner,
    inverse_fourier,
    lp_norm,
    make_grid,
    mass,
    read_field,
    time_integral,
    translate,
    write_field,
)

from conftest import gaussian


def test_grid_axes(g1):
    assert g1.x_axis[0] == -16 and g1.x_axis[1] - g1.x_axis[0] == pytest.approx(g1.h)
    assert g1.dxi == pytest.approx(math.pi / 16)


@pytest.mark.parametrize("args", [(3, 64, 1.0), (1, 63, 1.0), (1, 64, -2.0)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_field_shape_checked(g1):
    with pytest.raises(ValueError):
        Field(g1, np.zeros(7))
    with pytest.raises(ValueError):
        Field(g1, np.full(g1.shape, np.nan))


def test_gaussian_mass(g1):
    # ∫ e^{-x^2} dx = sqrt(pi)
    assert mass(Field(g1, np.exp(-g1.x_axis**2 / 2))) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_fourier_of_gaussian(g1):
    # f = e^{-x^2/2}  ->  fhat(xi) = sqrt(2 pi) e^{-xi^2/2}
    s = fourier(Field(g1, np.exp(-g1.x_axis**2 / 2)))
    xi = np.fft.fftfreq(g1.n, 1 / g1.n) * g1.dxi
    assert np.allclose(s.coeffs, math.sqrt(2 * math.pi) * np.exp(-xi**2 / 2), atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_fourier_roundtrip_and_plancherel(seed):
    g = make_grid(1, 64, 4)
    rng = np.random.default_rng(seed)
    f = Field(g, rng.normal(size=64) + 1j * rng.normal(size=64))
    s = fourier(f)
    assert np.allclose(inverse_fourier(s).values, f.values, atol=1e-12)
    spec_mass = np.sum(np.abs(s.coeffs) ** 2) * g.dxi / (2 * math.pi)
    assert spec_mass == pytest.approx(mass(f), rel=1e-12)


def test_lp_norm_relations(g1):
    f = gaussian(g1)
    assert lp_norm(f, 2) ** 2 == pytest.approx(mass(f))
    assert lp_norm(f, np.inf) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lp_norm(f, 0.5)


def test_inner_is_sesquilinear(g1):
    f, h = gaussian(g1, xi=1.0), gaussian(g1, x0=0.5)
    assert inner(f, f).real == pytest.approx(mass(f))
    assert inner(f * 2j, h) == pytest.approx(2j * inner(f, h))
    assert inner(f, h * 2j) == pytest.approx(-2j * inner(f, h))
    assert inner(f, h) == pytest.approx(np.conj(inner(h, f)))


@given(st.floats(-3, 3))
def test_translate_roundtrip_and_mass(s):
    g = make_grid(1, 128, 8)
    v = np.exp(-g.x_axis**2)
    w = translate(v, g, s)
    assert np.sum(np.abs(w) ** 2) == pytest.approx(np.sum(v**2), rel=1e-10)
    assert np.allclose(translate(w, g, -s), v, atol=1e-10)


def test_translate_by_cells_is_roll(g1):
    v = np.exp(-g1.x_axis**2)
    assert np.allclose(translate(v, g1, 5 * g1.h), np.roll(v, 5), atol=1e-12)


@given(st.floats(0.25, 4.0))
def test_dilate_matches_closed_form(lam):
    g = make_grid(1, 512, 16)
    got = dilate(np.exp(-g.x_axis**2), g, lam)
    assert np.max(np.abs(got - np.exp(-(g.x_axis / lam) ** 2))) < 1e-9


def test_dilate_staged_and_negative(g1):
    v = np.exp(-((g1.x_axis - 0.3) ** 2))
    assert np.allclose(dilate(v, g1, 20.0), np.exp(-((g1.x_axis / 20 - 0.3) ** 2)) * (np.abs(g1.x_axis) <= 16), atol=1e-8)
    assert np.allclose(dilate(v, g1, -1.0), np.exp(-((-g1.x_axis - 0.3) ** 2)), atol=1e-10)
    with pytest.raises(ValueError):
        dilate(v, g1, 0.0)


def test_boundary_mass(g1):
    assert boundary_mass(gaussian(g1)) < 1e-20
    assert boundary_mass(gaussian(g1, x0=12.0)) > 0.4 * math.sqrt(math.pi)


def test_time_integral_trapezoid():
    t = np.linspace(0, 1, 101)
    assert time_integral(t, t**2) == pytest.approx(1 / 3, abs=1e-4)


@pytest.mark.parametrize("dim,n", [(1, 64), (2, 16)])
def test_snapshot_roundtrip(tmp_path, dim, n):
    g = make_grid(dim, n, 3.5)
    rng = np.random.default_rng(1)
    f = Field(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
    write_field(tmp_path / "f.mcnl", f)
    back = read_field(tmp_path / "f.mcnl")
    assert back.grid == g and np.array_equal(back.values, f.values)


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "bad.mcnl"
    p.write_bytes(b"not a snapshot")
    with pytest.raises(ValueError):
        read_field(p)

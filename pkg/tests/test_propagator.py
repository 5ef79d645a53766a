import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcnls.acceptance import c02_soliton, periodized_gaussian_free
from mcnls.grid import Field, make_grid, mass
from mcnls.propagator import (
    SolverConfig,
    blowup_monitor,
    duhamel_residual,
    evolve,
    free_propagate,
    free_trajectory,
    load_trajectory,
    pde_defect,
    pseudoconformal,
    save_trajectory,
    scattering_size,
    scattering_size_after,
    scattering_size_before,
    stability_sweep,
)

from conftest import gaussian


def raw_gaussian_free(x, t):
    # e^{it Δ} e^{-x^2} on the line
    z = 1 + 4j * t
    return z**-0.5 * np.exp(-(x**2) / z)


@pytest.mark.parametrize("t", [0.1, 0.5])
def test_free_gaussian_raw_oracle(g1, t):
    # at these times the line solution is negligible at the box edge, so no images are needed
    u = free_propagate(Field(g1, np.exp(-g1.x_axis**2)), t)
    assert np.sqrt(mass(u - Field(g1, raw_gaussian_free(g1.x_axis, t)))) < 1e-8


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 3.0])
def test_free_gaussian_periodized_oracle(g1, t):
    u = free_propagate(Field(g1, np.exp(-g1.x_axis**2)), t)
    assert np.sqrt(mass(u - Field(g1, periodized_gaussian_free(g1, t)))) < 1e-8


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_free_group_property(s, t):
    g = make_grid(1, 128, 8)
    f = Field(g, np.exp(-g.x_axis**2) * (1 + 0.3j * g.x_axis))
    a = free_propagate(free_propagate(f, s), t)
    b = free_propagate(f, s + t)
    assert np.max(np.abs(a.values - b.values)) < 1e-10
    assert mass(a) == pytest.approx(mass(f), rel=1e-12)


def test_soliton_phase_rotation(g1, Q1):
    tr = evolve(Q1.field, (0, 0.5), SolverConfig(mu=-1, dt=1e-4, store_every=0.05))
    err = max(np.sqrt(mass(Field(g1, u - np.exp(1j * t) * Q1.field.values))) for t, u in zip(tr.times, tr.values))
    assert err < 1e-6 and tr.mass_drift < 1e-10 and not tr.diverged


def test_mutation_sign_flip_breaks_soliton():
    # defocusing dynamics cannot hold the ground state still
    assert c02_soliton(mu=1).passed is False
    assert c02_soliton(mu=0).passed is False


def test_backward_matches_forward(g1):
    u0 = gaussian(g1, xi=0.5) * 0.8
    cfg = SolverConfig(mu=-1, dt=1e-3, store_every=0.1)
    fwd = evolve(u0, (0, 1), cfg)
    back = evolve(fwd.field(-1), (1, 0), cfg)
    assert back.times[0] == pytest.approx(0.0) and back.times[-1] == pytest.approx(1.0)
    assert np.max(np.abs(back.values[0] - u0.values)) < 1e-4


def test_evolve_rejects_bad_input(g1):
    with pytest.raises(ValueError):
        evolve(gaussian(g1), (0, 0), SolverConfig())
    with pytest.raises(ValueError):
        evolve(gaussian(g1), (0, 1), SolverConfig(dim=2))
    with pytest.raises(ValueError):
        SolverConfig(mu=2)


def test_nyquist_guard_flags_divergence():
    g = make_grid(1, 256, 8)
    # 3x supercritical focusing mass collapses fast
    u0 = gaussian(g, w=0.5) * 3.0
    tr = evolve(u0, (0, 2), SolverConfig(mu=-1, dt=1e-3, dt_policy="adaptive", store_every=0.01))
    assert tr.diverged and tr.times[-1] < 2


def test_scattering_size_splits(g1):
    tr = free_trajectory(gaussian(g1, w=0.5), np.linspace(-1, 1, 201))
    S = scattering_size(tr)  # S is the integral itself, additive over time splits
    assert scattering_size_before(tr, 0.0) + scattering_size_after(tr, 0.0) == pytest.approx(S, rel=1e-12)
    assert S == pytest.approx(tr.spacetime_norm(6) ** 6)


def test_free_scattering_size_closed_form():
    # ∫|e^{itΔ} e^{-x^2}|^6 dx = sqrt(pi/6) / (1 + 16 t^2)
    g = make_grid(1, 1024, 64)
    t = np.linspace(-5, 5, 4001)
    tr = free_trajectory(Field(g, np.exp(-g.x_axis**2)), t)
    exact = math.sqrt(math.pi / 6) * math.atan(20.0) / 2
    assert scattering_size(tr) == pytest.approx(exact, rel=1e-5)


def test_duhamel_residual_second_order(g1, Q1):
    res = []
    for dt in (4e-3, 2e-3):
        tr = evolve(Q1.field, (0, 0.5), SolverConfig(mu=-1, dt=dt, store_every=dt))
        res.append(duhamel_residual(tr, 0.0, 0.5).duhamel_l2)
    assert 3.5 < res[0] / res[1] < 4.5


def test_pde_defect_small_for_soliton(g1, Q1):
    tr = evolve(Q1.field, (0, 0.2), SolverConfig(mu=-1, dt=1e-4, store_every=1e-3))
    assert np.max(np.sqrt(np.sum(np.abs(pde_defect(tr)) ** 2, axis=1) * g1.h)) < 1e-4


def test_pseudoconformal_twice_is_reflection():
    g = make_grid(1, 1024, 32)
    u0 = gaussian(g, x0=0.7, xi=0.5)  # deliberately not even
    tr = free_trajectory(u0, np.linspace(0.5, 2.0, 16))
    back = pseudoconformal(pseudoconformal(tr))
    assert np.allclose(back.times, tr.times)
    refl = np.roll(tr.values[:, ::-1], 1, axis=1)  # x_j -> -x_j on the periodic grid
    err = np.sqrt(np.max(np.sum(np.abs(back.values - refl) ** 2, axis=1)) * g.h)
    assert err < 1e-4
    assert np.max(np.abs(back.masses() - tr.masses())) < 1e-6


def test_pseudoconformal_rejects_zero(g1):
    tr = free_trajectory(gaussian(g1), np.linspace(-1, 1, 5))
    with pytest.raises(ValueError):
        pseudoconformal(tr)


def test_trajectory_roundtrip(tmp_path, g1):
    tr = evolve(gaussian(g1), (0, 0.1), SolverConfig(mu=1, dt=1e-3, store_every=0.05))
    save_trajectory(tmp_path / "t.npz", tr)
    back = load_trajectory(tmp_path / "t.npz")
    assert np.array_equal(back.values, tr.values) and back.config == tr.config and back.grid == tr.grid


def test_stability_sweep_monotone(g1):
    u = evolve(gaussian(g1) * 0.5, (0, 1), SolverConfig(mu=1, dt=1e-3, store_every=0.05))
    rep = stability_sweep(u, gaussian(g1, x0=1.0), [1e-4, 1e-3, 1e-2])
    assert rep["passed"] and rep["monotone"]


def test_blowup_monitor_soliton(g1, Q1):
    tr = evolve(Q1.field, (0, 0.2), SolverConfig(mu=-1, dt=1e-3, store_every=0.1))
    m = blowup_monitor(tr)
    assert np.all(m.N == m.N[0])
    assert np.allclose(m.max_amplitude, 3**0.25, rtol=1e-6)

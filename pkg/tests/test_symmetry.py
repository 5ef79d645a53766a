import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcnls.grid import Field, make_grid, mass
from mcnls.propagator import SolverConfig, evolve, free_propagate, free_trajectory, scattering_size
from mcnls.symmetry import (
    EnlargedElement,
    GroupElement,
    RadialElement,
    apply,
    apply_enlarged,
    apply_trajectory,
    compose,
    galilean,
    identity,
    inverse,
    mixed_norm,
    separation,
)

from conftest import gaussian

elements = st.builds(
    GroupElement,
    theta=st.floats(-math.pi, math.pi),
    xi0=st.tuples(st.floats(-2, 2)),
    x0=st.tuples(st.floats(-2, 2)),
    lam=st.floats(0.5, 2.0),
)


def _close(a, b, tol=1e-12):
    dth = abs((a.theta - b.theta + math.pi) % (2 * math.pi) - math.pi)
    return dth < tol and np.allclose(a.xi0, b.xi0, atol=tol) and np.allclose(a.x0, b.x0, atol=tol) and abs(a.lam - b.lam) < tol


def test_action_formula(g1):
    g = GroupElement(0.7, (1.5,), (2.0,), 1.3)
    f = gaussian(g1)
    x = g1.x_axis
    expect = 1.3**-0.5 * np.exp(0.7j + 1.5j * x) * np.exp(-(((x - 2.0) / 1.3) ** 2) / 2)
    assert np.max(np.abs(apply(g, f).values - expect)) < 1e-9


@given(elements, elements, elements)
def test_associativity(a, b, c):
    assert _close(compose(compose(a, b), c), compose(a, compose(b, c)))


@given(elements)
def test_inverse_and_identity(a):
    e = identity(1)
    assert _close(compose(a, inverse(a)), e)
    assert _close(compose(inverse(a), a), e)
    assert _close(compose(a, e), a)


@given(elements, elements)
def test_group_law_matches_action(a, b):
    g = make_grid(1, 1024, 32)
    f = gaussian(g, w=0.5)
    lhs = apply(compose(a, b), f).values
    rhs = apply(a, apply(b, f)).values
    assert np.max(np.abs(lhs - rhs)) < 1e-8


@given(elements)
def test_unitarity(a):
    g = make_grid(1, 512, 16)
    f = gaussian(g, x0=0.5, xi=1.0)
    assert mass(apply(a, f)) == pytest.approx(mass(f), rel=1e-9)


def test_dimension_mismatch_rejected(g1):
    with pytest.raises(ValueError):
        apply(GroupElement(0, (0, 0), (0, 0), 1), gaussian(g1))


def test_aliasing_flag(g1):
    out = apply(GroupElement(lam=0.05), gaussian(g1))
    assert out.diverged and out.meta["aliasing"] > 1e-6


def test_enlarged_is_g_after_free_flow(g1):
    f = gaussian(g1)
    base = GroupElement(0.2, (0.5,), (1.0,), 1.1)
    got = apply_enlarged(EnlargedElement(base, 0.3), f).values
    assert np.allclose(got, apply(base, free_propagate(f, 0.3)).values, atol=1e-12)


def test_radial_element_embeds(g1):
    f = gaussian(g1)
    r = RadialElement(0.4, 2.0, None)
    assert np.allclose(apply_enlarged(r, f).values, apply(GroupElement(0.4, (0.0,), (0.0,), 2.0), f).values)


def test_separation_values():
    a = EnlargedElement(GroupElement(lam=1.0), 0.0)
    assert separation(a, a) == pytest.approx(2.0)
    b = EnlargedElement(GroupElement(0, (3.0,), (4.0,), 2.0), 0.25)
    # 1/2 + 2 + |0 - 0.25*4| + 3 + 4
    assert separation(a, b) == pytest.approx(10.5)


@given(elements, elements)
def test_separation_symmetric_and_bounded_below(a, b):
    assert separation(a, b) == pytest.approx(separation(b, a))
    assert separation(a, b) >= 2.0 - 1e-12


def test_trajectory_action_preserves_S_free(g1):
    tr = free_trajectory(gaussian(g1, w=0.5), np.linspace(0, 2, 201))
    g = GroupElement(0.3, (0.0,), (1.0,), 1.0)
    assert scattering_size(apply_trajectory(g, tr)) == pytest.approx(scattering_size(tr), rel=1e-8)


def test_galilean_commutes_with_flow():
    g = make_grid(1, 512, 32)
    u0 = gaussian(g, w=1.0) * 0.3
    cfg = SolverConfig(mu=1, dt=1e-3, store_every=0.1)
    boosted0 = apply(galilean((1.0,), 0.0), u0)
    lhs = evolve(boosted0, (0, 1), cfg).field(-1)
    rhs = apply(galilean((1.0,), 1.0), evolve(u0, (0, 1), cfg).field(-1))
    assert np.sqrt(mass(lhs - rhs)) < 1e-5


def test_mixed_norm_theta_bounds(g1):
    tr = free_trajectory(gaussian(g1), np.linspace(0, 1, 11))
    assert mixed_norm(tr, tr) == pytest.approx(tr.spacetime_norm(6), rel=1e-10)
    with pytest.raises(ValueError):
        mixed_norm(tr, tr, theta=1.0)

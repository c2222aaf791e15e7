import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gashomotopy.core import ClassKFn, power_gauge
from gashomotopy.errors import UnboundedSup
from gashomotopy.iss import (
    ISSBoundSpec,
    DisturbedSystem,
    build_R_transform,
    canonical_system,
    check_ises_bound,
    check_l2_gain,
    constant_signal,
    dissipation_check,
    dissipation_grid,
    estimate_alpha_tilde,
    example_no_canonical,
    invert_R_transform,
    piecewise_signal,
    random_hold_signal,
    scaled,
    simulate_disturbed,
    sinusoid_signal,
    squared_norm_pair,
    transformed_system,
)
from gashomotopy.normalize import orientation_sign

CANON = canonical_system()
IDENTITY = power_gauge(1.0)


def test_signals():
    c = constant_signal([3.0, 4.0])
    assert c.sup_norm == 5.0 and c(7.0).tolist() == [3.0, 4.0]
    s = sinusoid_signal([1.0], omega=2.0)
    assert s(math.pi / 4)[0] == pytest.approx(1.0)
    p = piecewise_signal([0.0, 1.0], [[1.0], [-2.0]])
    assert p(1.0)[0] == -2.0 and p.left(1.0)[0] == 1.0 and p.sup_norm == 2.0
    assert p.breakpoints(0.0, 5.0) == [1.0]
    with pytest.raises(ValueError):
        piecewise_signal([0.5, 1.0], [[1.0], [2.0]])


def test_random_hold_is_seeded_and_bounded():
    a = random_hold_signal(2, 3.0, 0.5, 10.0, seed=7)
    b = random_hold_signal(2, 3.0, 0.5, 10.0, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    assert np.all(np.linalg.norm(a.values, axis=1) <= 3.0)


def test_constant_disturbance_closed_form():
    d = constant_signal([1.0, -0.5])
    traj = simulate_disturbed(CANON, [2.0, 2.0], d, 4.0)
    expected = d(0)[None, :] + (np.array([2.0, 2.0]) - d(0))[None, :] * np.exp(-traj.times)[:, None]
    np.testing.assert_allclose(traj.states, expected, atol=1e-9)
    assert np.max(np.diff(traj.times)) <= 0.01 + 1e-12


def test_piecewise_jump_is_a_sample_time():
    d = piecewise_signal([0.0, 0.333], [[1.0, 0.0], [0.0, 0.0]])
    traj = simulate_disturbed(CANON, [0.0, 0.0], d, 1.0)
    assert 0.333 in traj.times
    x_jump = 1.0 - math.exp(-0.333)
    np.testing.assert_allclose(traj.at(1.0)[0], x_jump * math.exp(-(1.0 - 0.333)), atol=1e-9)


def test_l2_gain_canonical_and_failure():
    d = random_hold_signal(2, 2.0, 0.5, 20.0, seed=3)
    traj = simulate_disturbed(CANON, [1.0, -1.0], d, 20.0)
    assert check_l2_gain(traj, d).passed
    # x' = x/2 + d grows and breaks the bound
    grow = DisturbedSystem(lambda x, d: 0.5 * x + d, 2, 2)
    traj = simulate_disturbed(grow, [1.0, 0.0], constant_signal([0.0, 0.0]), 5.0)
    assert not check_l2_gain(traj, constant_signal([0.0, 0.0])).passed


def test_l2_gain_rejects_coarse_sampling():
    d = constant_signal([0.0, 0.0])
    traj = simulate_disturbed(CANON, [1.0, 0.0], d, 2.0, sample_dt=0.1)
    with pytest.raises(ValueError):
        check_l2_gain(traj, d)


def test_ises_bound():
    # |x(t)| <= e^{-t}|x0| + |d| <= 2 max(e^{-t}|x0|, |d|)
    batch = [([2.0, 0.0], constant_signal([0.5, 0.5])), ([0.0, -1.0], sinusoid_signal([1.0, 0.0]))]
    spec = ISSBoundSpec(2.0, 1.0, power_gauge(1.0))
    spec_doubled = ISSBoundSpec(2.0, 1.0, ClassKFn(forward=lambda r: 2.0 * np.asarray(r)))
    grid = np.linspace(0, 5, 51)
    assert check_ises_bound(CANON, spec_doubled, batch, grid).passed
    tight = ISSBoundSpec(1.0, 2.0, ClassKFn(forward=lambda r: 0.5 * np.asarray(r)))
    assert not check_ises_bound(CANON, tight, batch, grid).passed
    with pytest.raises(ValueError):
        ISSBoundSpec(0.5, 1.0, IDENTITY)
    assert spec.M == 2.0


def test_alpha_tilde_is_r_squared_for_canonical():
    # sup of -|xi|^2 + 2<u, xi> over |xi| <= r, |u| <= r is r^2 at xi = u
    at = estimate_alpha_tilde(CANON, IDENTITY, [0.5, 1.0, 2.0, 4.0])
    for r in (0.5, 1.0, 2.0, 4.0, 3.0):
        assert float(at(r)) == pytest.approx(r * r, rel=0.02)
    z = np.array([0.3, -1.7])
    assert np.linalg.norm(build_R_transform(at, z) - z) <= 0.02 * np.linalg.norm(z)


def test_alpha_tilde_unbounded():
    blow = DisturbedSystem(lambda x, d: 1e14 * x + d, 1, 1)
    with pytest.raises(UnboundedSup):
        estimate_alpha_tilde(blow, IDENTITY, [1.0])


@given(st.floats(-5, 5), st.floats(-5, 5), st.booleans())
def test_R_transform_roundtrip(z1, z2, flip):
    at = power_gauge(2.0)
    z = np.array([z1, z2])
    back = invert_R_transform(at, build_R_transform(at, z, flip), flip)
    np.testing.assert_allclose(back, z, atol=1e-9)


def test_flipped_R_reverses_orientation():
    at = power_gauge(2.0)
    assert orientation_sign(lambda z: build_R_transform(at, z), np.array([0.4, 0.9])) == 1
    assert orientation_sign(lambda z: build_R_transform(at, z, flip=True), np.array([0.4, 0.9])) == -1


def test_ex4_1_l2_gain_and_orientation():
    sys_ = example_no_canonical()
    R = np.diag([1.0, -1.0])
    assert orientation_sign(lambda z: R @ z, np.array([0.3, 0.7])) == -1
    d = random_hold_signal(2, 3.0, 0.5, 20.0, seed=11)
    traj = simulate_disturbed(sys_, [1.5, -0.5], d, 20.0)
    assert check_l2_gain(traj, d).passed


def test_transformed_system_dissipation():
    # with the identity gauge the transformed canonical system keeps d V <= -V + |v|^2
    at = power_gauge(2.0)
    tsys = transformed_system(CANON, at)
    grid = dissipation_grid(2, 2, 256, 3.0, 3.0)
    pair = squared_norm_pair(2)
    supply = lambda x, v: -np.einsum("...i,...i->...", x, x) + np.einsum("...i,...i->...", v, v)
    assert dissipation_check(tsys, pair, supply, grid).passed
    strict = lambda x, v: -1.5 * np.einsum("...i,...i->...", x, x) + np.einsum("...i,...i->...", v, v)
    assert not dissipation_check(tsys, pair, strict, grid).passed


def test_scaled_gauge():
    g = scaled(power_gauge(2.0), 2.0)
    assert float(g(3.0)) == pytest.approx(18.0)
    assert float(g.inv(18.0)) == pytest.approx(3.0)

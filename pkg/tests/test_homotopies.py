import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gashomotopy.core import FieldDescription, LyapunovPair, quadratic_pair
from gashomotopy.errors import CertificationFailed, EndpointMismatch, NotHurwitz, NotSPD, SpuriousCriticalPoint
from gashomotopy.homotopies import (
    concatenate,
    derivative_sign_changes,
    exponent_family,
    export_path_grid,
    find_spurious_critical_point,
    flow_homotopy,
    gaussian_ot_homotopy,
    gaussian_ot_map,
    gaussian_sigma,
    gradient_interpolation,
    interpolated_pair,
    invex_family,
    invex_path,
    invex_potential,
    linear_flow_homotopy,
    naive_linear_path,
    naive_linear_path_fixed_pair,
    patched_linear_matrix,
    patched_linear_path,
    potential_path,
    reverse,
    rotation_path,
    shifted_equilibrium_family,
    spd_power,
    straight_line,
)
from gashomotopy.index import hurwitz_check, winding_number
from gashomotopy.lyapunov import check_decrease_grid, check_path
from gashomotopy.registry import get

S21 = np.linspace(0, 1, 21)


# ---- straight line ---------------------------------------------------------


def test_straight_line_endpoints():
    ex = get("ex3_3")
    path = straight_line(ex.field, ex.pair)
    assert path.field_at(0.0) is ex.field
    x = np.array([[1.0, 2.0], [-0.5, 0.3]])
    np.testing.assert_array_equal(path.field_at(1.0)(x), -ex.pair.grad(x))
    with pytest.raises(ValueError):
        path.field_at(1.2)


def test_straight_line_rejects_uncertified_start():
    with pytest.raises(CertificationFailed):
        straight_line(FieldDescription(2, lambda x: x), quadratic_pair(n=2))


@given(st.floats(0, 1), st.floats(-5, 5), st.floats(-5, 5))
def test_straight_line_margin_bound(s, x1, x2):
    # margin <= -s |grad V|^2 / 2 whenever the start pair certifies X
    ex = get("ex3_3")
    path = straight_line(ex.field, ex.pair, check=False)
    x = np.array([x1, x2])
    pair = path.lyap_at(s)
    m = float(np.dot(pair.grad(x), path.field_at(s)(x)) + pair.W(x))
    g = ex.pair.grad(x)
    assert m <= -0.5 * s * float(np.dot(g, g)) + 1e-12


# ---- gradient interpolation ------------------------------------------------

C = np.array([2.0, 0.0])


def _bumpy_pair():
    def V(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1) - 20.0 * np.exp(-np.sum((x - C) ** 2, axis=-1))

    def grad(x):
        x = np.asarray(x, dtype=float)
        e = np.exp(-np.sum((x - C) ** 2, axis=-1, keepdims=True))
        return x + 40.0 * (x - C) * e

    return LyapunovPair(V=V, gradV=grad, W=lambda x: 0.5 * np.sum(grad(x) ** 2, axis=-1))


def test_spurious_critical_point_detected():
    with pytest.raises(SpuriousCriticalPoint) as info:
        gradient_interpolation(quadratic_pair(n=2), _bumpy_pair(), 2)
    z, s = info.value.witness, info.value.s
    assert 0.0 < s <= 1.0
    # the witness is a critical point of the interpolated potential at s, away from 0
    p = interpolated_pair(quadratic_pair(n=2), _bumpy_pair(), s)
    assert np.linalg.norm(p.grad(z)) < 1e-8
    assert np.linalg.norm(z) > 1e-2


def test_no_spurious_point_for_ex3_3():
    ex = get("ex3_3")
    assert find_spurious_critical_point(ex.pair, 2) is None
    path = gradient_interpolation(ex.pair, quadratic_pair(n=2), 2)
    assert check_path(path, s_grid=S21, annulus=(1e-2, 10), N=512).passed


@given(st.floats(0, 1))
def test_interpolated_pair_linear_in_s(s):
    a, b = get("ex3_3").pair, quadratic_pair(n=2)
    x = np.array([0.7, -1.3])
    p = interpolated_pair(a, b, s)
    assert float(p.V(x)) == pytest.approx((1 - s) * float(a.V(x)) + s * float(b.V(x)))


# ---- flow homotopy ---------------------------------------------------------

A_SPIRAL = np.array([[-0.5, 1.0], [-1.0, -0.5]])


@pytest.mark.parametrize("s", [0.0, 0.1, 0.5, 0.9, 0.999, 0.9995, 1.0])
def test_flow_homotopy_matches_linear_closed_form(s):
    X = FieldDescription(2, lambda x: x @ A_SPIRAL.T)
    x = np.array([1.3, -0.7])
    if s > 0.999:
        # blended region above the cap: compare with the blend of the closed form
        w = (s - 0.999) / 1e-3
        ref = (1 - w) * linear_flow_homotopy(A_SPIRAL, 0.999, x) - w * x
    else:
        ref = linear_flow_homotopy(A_SPIRAL, s, x)
    np.testing.assert_allclose(flow_homotopy(X, s, x), ref, atol=1e-7)


def test_linear_flow_homotopy_needs_hurwitz():
    with pytest.raises(NotHurwitz):
        linear_flow_homotopy(np.eye(2), 0.5, np.ones(2))


@given(st.floats(0, 1), st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3))
def test_cubic_flow_homotopy_preserves_sign(s, x):
    X = FieldDescription(1, lambda y: -y ** 3)
    v = float(flow_homotopy(X, s, np.array([x]))[0])
    assert v * x < 0


# ---- triangular linear families --------------------------------------------


def test_patched_path_passes_naive_fails():
    assert check_path(patched_linear_path(), s_grid=S21, annulus=(1e-2, 10), N=512).passed
    naive = check_path(naive_linear_path(), s_grid=S21, annulus=(1e-2, 10), N=512)
    assert not naive.passed
    assert dict((float(l), v) for l, _, v in naive.rows)[0.5] == "fail"


def test_patched_path_not_certified_by_half_norm():
    # the patched family is Hurwitz throughout, yet |x|^2/2 does not certify it
    for s in S21:
        assert hurwitz_check(patched_linear_matrix(s))[1]
    cert = check_path(naive_linear_path_fixed_pair(), s_grid=[0.0], annulus=(1e-2, 10), N=256)
    assert not cert.passed
    fixed = check_decrease_grid(patched_linear_path().field_at(0.0), quadratic_pair(n=2, w_scale=0.25),
                                (1e-2, 10), 256)
    assert not fixed.passed


# ---- rotation negative control ---------------------------------------------


def test_rotation_fails_yet_index_constant():
    path = rotation_path()
    cert = check_path(path, s_grid=S21, annulus=(1e-2, 10), N=256)
    assert not cert.passed
    assert dict((float(l), v) for l, _, v in cert.rows)[0.5] == "fail"
    assert [winding_number(path.field_at(s)) for s in S21] == [1] * 21


# ---- invex potentials ------------------------------------------------------

GRID = np.linspace(-10, 10, 1000)


def test_invex_family_start_and_end():
    np.testing.assert_allclose(np.sqrt(np.abs(invex_family(0.0, GRID))), invex_potential(GRID), atol=1e-10)
    np.testing.assert_array_equal(invex_family(1.0, GRID), GRID)


def test_exponent_family_endpoints():
    np.testing.assert_allclose(exponent_family(0.0, GRID), np.sign(GRID) * np.sqrt(np.abs(GRID)))
    np.testing.assert_allclose(exponent_family(1.0, GRID), np.sign(GRID) * GRID ** 2)


def test_potential_path_continuous_at_half():
    np.testing.assert_allclose(potential_path(0.5, GRID), potential_path(0.5 + 1e-12, GRID), atol=1e-9)
    np.testing.assert_allclose(potential_path(1.0, GRID), GRID ** 2, rtol=1e-12)


@pytest.mark.parametrize("s", S21)
def test_every_potential_minimised_at_zero(s):
    x = np.linspace(-10, 10, 4097)
    v = potential_path(float(s), x)
    assert x[int(np.argmin(v))] == 0.0
    assert derivative_sign_changes(v) == 1


def test_invex_derivative_has_single_zero():
    # x + 3/2 sin 2x > 0 for x > 0, so slope changes sign exactly once
    x = np.linspace(-10, 10, 200001)
    d = x + 1.5 * np.sin(2 * x)
    assert np.all(d[x > 0] > 0) and np.all(d[x < 0] < 0)
    assert derivative_sign_changes(invex_potential(x)) == 1


def test_sign_change_counter():
    assert derivative_sign_changes([0, 1, 0, 1, 0]) == 3
    assert derivative_sign_changes([3, 2, 2, 2, 5]) == 1


def test_invex_path_certified():
    assert check_path(invex_path(), s_grid=S21, annulus=(1e-2, 10), N=512).passed


# ---- Gaussian optimal transport --------------------------------------------

S0 = np.diag([4.0, 1.0])


def test_gaussian_ot_closed_forms():
    np.testing.assert_allclose(gaussian_ot_map(S0, np.eye(2)), np.diag([0.5, 1.0]), atol=1e-12)
    for s in S21:
        np.testing.assert_allclose(gaussian_sigma(S0, np.eye(2), s), np.diag([(2 - s) ** 2, 1.0]), atol=1e-12)


@given(st.floats(-1, 1), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0, 1))
def test_gaussian_sigma_spd_and_pushforward(c, a, b, s):
    S1 = np.array([[a, c * math.sqrt(a * b) * 0.9], [c * math.sqrt(a * b) * 0.9, b]])
    Sig = gaussian_sigma(S0, S1, s)
    assert np.linalg.eigvalsh(Sig).min() > 0
    A = gaussian_ot_map(S0, S1)
    np.testing.assert_allclose(A @ S0 @ A, S1, atol=1e-9)
    np.testing.assert_allclose(gaussian_sigma(S0, S1, 1.0), S1, atol=1e-9)


def test_gaussian_rejects_non_spd():
    with pytest.raises(NotSPD):
        gaussian_ot_map(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotSPD):
        gaussian_ot_map(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))


def test_spd_power_inverse_square_root():
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    r = spd_power(S, -0.5)
    np.testing.assert_allclose(r @ S @ r, np.eye(2), atol=1e-12)


def test_gaussian_path_certified():
    assert check_path(gaussian_ot_homotopy(S0, np.eye(2)), s_grid=S21, annulus=(1e-2, 10), N=512).passed


# ---- assembly --------------------------------------------------------------


def test_concatenate_and_reverse():
    ex = get("ex3_3")
    a = straight_line(ex.field, ex.pair)
    b = gradient_interpolation(ex.pair, quadratic_pair(n=2), 2, check=False)
    path = concatenate([a, b])
    x = np.array([[0.4, -1.1]])
    np.testing.assert_allclose(path.field_at(0.25)(x), a.field_at(0.5)(x))
    np.testing.assert_allclose(path.field_at(0.75)(x), b.field_at(0.5)(x))
    np.testing.assert_allclose(path.field_at(1.0)(x), -x, atol=1e-12)
    r = reverse(path)
    np.testing.assert_allclose(r.field_at(0.2)(x), path.field_at(0.8)(x))
    assert r.endpoints_label == path.endpoints_label[::-1]
    with pytest.raises(EndpointMismatch):
        concatenate([b, a])
    with pytest.raises(ValueError):
        concatenate([])


def test_shifted_equilibrium_family():
    xbar = np.array([1.0, -2.0])
    fixed = 0.3 * xbar
    np.testing.assert_allclose(shifted_equilibrium_family(xbar, 0.3, 2.0, fixed), fixed)
    x = np.array([4.0, 1.0])
    once = shifted_equilibrium_family(xbar, 0.3, 1.5, x)
    twice = shifted_equilibrium_family(xbar, 0.3, 1.0, shifted_equilibrium_family(xbar, 0.3, 0.5, x))
    np.testing.assert_allclose(once, twice)


def test_export_path_grid(tmp_path):
    out = tmp_path / "grid.csv"
    export_path_grid(patched_linear_path(), [0.0, 1.0], [[1.0, 0.0], [0.0, 1.0]], out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["s", "x1", "x2", "f1", "f2"]
    assert len(rows) == 5
    assert [float(v) for v in rows[1]] == [0.0, 1.0, 0.0, -1.0, 0.0]
    assert [float(v) for v in rows[2]] == [0.0, 0.0, 1.0, 10.0, -1.0]

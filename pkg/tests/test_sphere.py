import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from gashomotopy.core import FieldDescription
from gashomotopy.errors import AtProjectionPole, NearProjectionPole
from gashomotopy.homotopies import rotation_path
from gashomotopy.integrate import integrate
from gashomotopy.lyapunov import check_traj_decrease
from gashomotopy.registry import get
from gashomotopy.sphere import (
    NORTH,
    SOUTH,
    chart_certificate,
    chart_lyapunov,
    pushforward,
    pushforward_batch,
    simulate_on_sphere,
    sphere_homotopy,
    sphere_trajectory_to_csv,
    stereo_fwd,
    stereo_fwd_jacobian,
    stereo_inv,
    stereo_inv_jacobian,
)

X = get("ex3_7_X").field
Y = get("ex3_7_Y").field
A_X = np.array([[-0.1, -1.0], [1.0, -0.1]])

plane = st.floats(-50, 50)


@given(plane, plane)
def test_chart_roundtrip(x1, x2):
    x = np.array([x1, x2])
    p = stereo_inv(x)
    assert np.linalg.norm(p) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(stereo_fwd(p), x, rtol=1e-9, atol=1e-9)


def test_chart_landmarks():
    np.testing.assert_allclose(stereo_inv([0.0, 0.0]), SOUTH)
    np.testing.assert_allclose(stereo_inv([1.0, 0.0]), [1.0, 0.0, 0.0])
    with pytest.raises(AtProjectionPole):
        stereo_fwd(NORTH)
    with pytest.raises(ValueError):
        stereo_fwd([0.5, 0.0, 0.0])


def test_jacobians_match_finite_differences():
    x = np.array([0.7, -1.3])
    h = 1e-6
    fd = np.column_stack([(stereo_inv(x + h * e) - stereo_inv(x - h * e)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(stereo_inv_jacobian(x), fd, atol=1e-8)
    p = stereo_inv(x)
    # chart Jacobian is a left inverse of the inverse-chart Jacobian on the tangent plane
    np.testing.assert_allclose(stereo_fwd_jacobian(p) @ stereo_inv_jacobian(x), np.eye(2), atol=1e-12)


def test_pushforward_is_tangent():
    rng = np.random.default_rng(5)
    ps = rng.standard_normal((500, 3))
    ps /= np.linalg.norm(ps, axis=1, keepdims=True)
    ps = ps[ps[:, 2] < 0.99]
    for field in (X, Y):
        v = pushforward_batch(field, ps)
        assert np.max(np.abs(np.einsum("ij,ij->i", ps, v))) <= 1e-9
        np.testing.assert_allclose(v[3], pushforward(field, ps[3]), atol=1e-12)


def test_linear_flow_conjugacy():
    x0 = np.array([1.0, 0.0])
    traj = simulate_on_sphere(X, stereo_inv(x0), 5.0)
    for t in (0.5, 2.0, 5.0):
        np.testing.assert_allclose(traj.at(t), stereo_inv(expm(A_X * t) @ x0), atol=1e-5)
    np.testing.assert_allclose(np.linalg.norm(traj.states, axis=1), 1.0, atol=1e-14)


def test_nonlinear_flow_conjugacy():
    x0 = np.array([0.8, 1.1])
    planar = integrate(Y, x0, 5.0)
    sphere = simulate_on_sphere(Y, stereo_inv(x0), 5.0)
    for t in (0.3, 1.0, 4.0):
        np.testing.assert_allclose(sphere.at(t), stereo_inv(planar.at(t)), atol=1e-5)


def test_distance_to_south_pole_at_t20():
    p0 = np.array([1.0, 0.0, 0.0])
    ty = simulate_on_sphere(Y, p0, 20.0)
    assert np.linalg.norm(ty.final - SOUTH) <= 1e-3
    # the planar spiral has radius e^{-t/10}; a chart radius r sits 2r/sqrt(1+r^2) from the south pole
    tx = simulate_on_sphere(X, p0, 20.0)
    r = math.exp(-2.0)
    assert np.linalg.norm(tx.final - SOUTH) == pytest.approx(2 * r / math.sqrt(1 + r * r), rel=1e-5)
    assert check_traj_decrease(tx, chart_lyapunov).passed


def test_north_cap_rejected():
    p = np.array([0.0, 1e-4, math.sqrt(1 - 1e-8)])
    with pytest.raises(NearProjectionPole):
        simulate_on_sphere(X, p, 1.0)
    source = FieldDescription(2, lambda x: x)
    with pytest.raises(NearProjectionPole):
        simulate_on_sphere(source, stereo_inv([1.0, 0.0]), 30.0)


def test_chart_certificate():
    cert = chart_certificate(sphere_homotopy(), s_grid=np.linspace(0, 1, 5), N=256)
    assert cert.passed and len(cert.rows) == 5 and cert.sample_count == 5 * 256
    bad = chart_certificate(rotation_path(), s_grid=[0.0, 0.5, 1.0], N=128)
    # the family starts at the source +x and passes only at its endpoint -x
    assert [row[2] for row in bad.rows] == ["fail", "fail", "pass"]


def test_sphere_homotopy_endpoints():
    path = sphere_homotopy()
    x = np.array([[0.3, -0.4]])
    np.testing.assert_allclose(path.field_at(0.0)(x), X(x))
    np.testing.assert_allclose(path.field_at(0.5)(x), -x, atol=1e-12)
    np.testing.assert_allclose(path.field_at(1.0)(x), Y(x))


def test_sphere_csv(tmp_path):
    traj = simulate_on_sphere(Y, [1.0, 0.0, 0.0], 0.1)
    out = tmp_path / "s.csv"
    sphere_trajectory_to_csv(traj, out)
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["t", "p1", "p2", "p3"] and len(rows) == len(traj.times) + 1

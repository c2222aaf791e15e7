"""Exit criteria, one test each, at their stated tolerances.

The terminal summary lists a PASS/FAIL line per criterion.
"""
import math

import numpy as np
import pytest

from gashomotopy.cli import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, EXIT_UNKNOWN, main
from gashomotopy.core import FieldDescription, Regularity, power_gauge, quadratic_pair, sqrt_gauge
from gashomotopy.homotopies import (
    concatenate,
    derivative_sign_changes,
    flow_homotopy,
    gaussian_ot_homotopy,
    gaussian_ot_map,
    gaussian_sigma,
    gradient_interpolation,
    invex_family,
    invex_potential,
    linear_flow_homotopy,
    naive_linear_matrix,
    naive_linear_path,
    patched_linear_path,
    potential_path,
    rotation_path,
    straight_line,
)
from gashomotopy.index import hurwitz_check, winding_number
from gashomotopy.integrate import (
    EXTINCTION,
    closed_semiflow_blend,
    closed_semiflow_radial,
    closed_semiflow_sign,
    extended_flow,
    integrate,
)
from gashomotopy.iss import (
    build_R_transform,
    canonical_system,
    check_l2_gain,
    estimate_alpha_tilde,
    example_no_canonical,
    random_hold_signal,
    simulate_disturbed,
)
from gashomotopy.lyapunov import check_decrease_grid, check_path, check_traj_decrease
from gashomotopy.normalize import (
    build_T,
    canonical_pair,
    conjugated_field_description,
    gauge_pair,
    invert_T,
    make_normalizer,
    orientation_sign,
    psi_flow,
)
from gashomotopy.registry import SIGMA0, get, radial_gauge_field
from gashomotopy.sphere import (
    SOUTH,
    chart_certificate,
    pushforward_batch,
    simulate_on_sphere,
    sphere_homotopy,
    stereo_inv,
)

S21 = np.linspace(0.0, 1.0, 21)
ANNULUS = (1e-2, 10.0)


def _row_verdict(cert, s):
    for row in cert.rows:
        if abs(float(row[0]) - s) < 1e-12:
            return row[2]
    raise KeyError(s)


@pytest.mark.acceptance("lower/upper triangular linear path: spectra, naive failure, patched certificate")
def test_linear_path_reproduction():
    assert hurwitz_check(naive_linear_matrix(0.0))[0] == -1.0
    assert hurwitz_check(naive_linear_matrix(1.0))[0] == -1.0
    assert abs(hurwitz_check(naive_linear_matrix(0.5))[0] - 4.0) <= 1e-9
    naive = check_path(naive_linear_path(), s_grid=S21, annulus=ANNULUS)
    assert not naive.passed and _row_verdict(naive, 0.5) == "fail"
    assert check_path(patched_linear_path(), s_grid=S21, annulus=ANNULUS).passed


def _sign_blend(s):
    return FieldDescription(1, lambda x: -(1 - s) * np.sign(x) - s * x,
                            Regularity.SET_VALUED_AT_ORIGIN, discontinuities=(0.0,))


@pytest.mark.acceptance("sign field and its blend: event-aware integrator vs closed-form semiflows")
def test_sign_semiflow_oracles():
    tt = np.linspace(0.0, 10.0, 201)
    x0s = np.linspace(-5.0, 5.0, 21)
    worst = 0.0
    # 1e-6 sits below the series threshold of the blended closed form
    for s in (0.0, 1e-6, 0.1, 0.5, 0.9, 1.0):
        for x0 in x0s:
            got = integrate(_sign_blend(s), [x0], 10.0).at(tt)[:, 0]
            if s == 0.0:
                want = np.array([closed_semiflow_sign(x0, t) for t in tt])
            else:
                want = np.array([closed_semiflow_blend(x0, t, s) for t in tt])
            worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst <= 1e-6, worst


@pytest.mark.acceptance("radial square-root field: finite-time extinction at 4/3")
def test_radial_extinction():
    g = sqrt_gauge()
    field = radial_gauge_field(g)
    for angle in np.linspace(0.0, 2 * math.pi, 7)[:-1]:
        x0 = np.array([math.cos(angle), math.sin(angle)])
        traj = integrate(field, x0, 3.0)
        hits = traj.event_times(EXTINCTION)
        assert hits and abs(hits[0] - 4.0 / 3.0) <= 1e-3
        for t in np.linspace(0.0, 4.0 / 3.0 - 1e-3, 40):
            assert np.max(np.abs(traj.at(t) - closed_semiflow_radial(x0, t, g))) <= 1e-4


def _sample_plane(rng, count, lo=1e-2, hi=3.0):
    r = rng.uniform(lo, hi, count)
    a = rng.uniform(0.0, 2 * math.pi, count)
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=1)


@pytest.mark.acceptance("normalizing transform: level identity, round trip, closed form, orientation")
def test_normalizer_identity():
    rng = np.random.default_rng(20240611)
    half = make_normalizer(quadratic_pair(n=2), 2)
    v1 = make_normalizer(get("ex3_3").pair, 2)
    ys = _sample_plane(rng, 500)
    for nd in (half, v1):
        for y in ys:
            x = invert_T(nd, y)
            assert abs(float(nd.pair.V(x)) - math.sqrt(np.linalg.norm(y))) <= 1e-6
            assert np.linalg.norm(build_T(nd, x) - y) <= 1e-6
    for x in _sample_plane(rng, 500):
        expected = 0.25 * np.linalg.norm(x) ** 3 * x
        assert np.linalg.norm(build_T(half, x) - expected) <= 1e-6 * max(1.0, np.linalg.norm(expected))
    for nd in (half, v1):
        for p in _sample_plane(rng, 50, 0.1, 3.0):
            assert orientation_sign(lambda z: build_T(nd, z), p) == 1


@pytest.mark.acceptance("gradient-normalized flow raises V by exactly tau")
def test_psi_flow_identity():
    rng = np.random.default_rng(7)
    pairs = (quadratic_pair(n=2), get("ex3_3").pair)
    for pair in pairs:
        for x in _sample_plane(rng, 200, 0.05, 4.0):
            v0 = float(pair.V(x))
            tau = float(rng.uniform(-0.9 * v0, 5.0))
            assert abs(float(pair.V(psi_flow(pair, x, tau))) - v0 - tau) <= 1e-7


@pytest.mark.acceptance("conjugated field certified by the gauge pair and the canonical pair")
def test_conjugated_field_certificate():
    nd = make_normalizer(get("ex3_3").pair, 2)
    F = conjugated_field_description(nd)
    for pair in (gauge_pair(nd), canonical_pair(nd)):
        cert = check_decrease_grid(F, pair, ANNULUS, 2048)
        assert cert.passed and cert.worst_margin < 0, cert.worst_margin


@pytest.mark.acceptance("nonlinear sink to canonical field: path and spot trajectories certified")
def test_end_to_end_path():
    ex = get("ex3_3")
    path = concatenate([straight_line(ex.field, ex.pair),
                        gradient_interpolation(ex.pair, quadratic_pair(n=2), 2)])
    assert check_path(path, s_grid=S21, annulus=ANNULUS, N=2048).passed
    rng = np.random.default_rng(33)
    for s, x0 in zip(np.linspace(0.0, 1.0, 10), _sample_plane(rng, 10, 0.5, 5.0)):
        traj = extended_flow(path, float(s), x0, 15.0)
        assert check_traj_decrease(traj, path.lyap_at(float(s)).V).passed
    x = _sample_plane(rng, 200, 1e-3, 10.0)
    assert np.max(np.abs(path.field_at(1.0)(x) + x)) <= 1e-12


@pytest.mark.acceptance("invex potentials: identities, argmin at 0, slope zero count falling 5 -> 1")
def test_invex_identities():
    x = np.linspace(-10.0, 10.0, 1000)
    assert np.max(np.abs(invex_potential(x) - np.sqrt(np.abs(invex_family(0.0, x))))) <= 1e-10
    np.testing.assert_array_equal(invex_family(1.0, x), x)
    fine = np.linspace(-10.0, 10.0, 4097)
    counts = []
    for s in S21:
        v = potential_path(float(s), fine)
        assert fine[int(np.argmin(v))] == 0.0
        counts.append(derivative_sign_changes(v))
    assert all(a >= b for a, b in zip(counts, counts[1:])), counts
    assert counts[0] == 5 and counts[-1] == 1, counts


@pytest.mark.acceptance("flow homotopy: sign preservation, linear closed form, rotation index blindness")
def test_flow_homotopy_and_rotation():
    cubic = FieldDescription(1, lambda x: -x ** 3)
    for s in S21:
        for x0 in (-2.0, -0.5, 0.3, 1.7):
            v = flow_homotopy(cubic, float(s), np.array([x0]))[0]
            assert np.sign(v) == -np.sign(x0)
    A = np.array([[-0.5, 1.0], [-1.0, -0.5]])
    lin = FieldDescription(2, lambda x: x @ A.T)
    for s in S21:
        for x0 in ([1.0, 0.0], [-0.3, 2.0]):
            got = flow_homotopy(lin, float(s), np.array(x0))
            assert np.max(np.abs(got - linear_flow_homotopy(A, float(s), np.array(x0)))) <= 1e-7
    path = rotation_path()
    cert = check_path(path, s_grid=S21, annulus=ANNULUS)
    assert _row_verdict(cert, 0.5) == "fail"
    assert all(winding_number(path.field_at(float(s))) == 1 for s in S21)


@pytest.mark.acceptance("disturbed systems: L2 gain, orientation-reversing input, disturbance gauge")
def test_iss_suite():
    canon = canonical_system()
    rng = np.random.default_rng(50)
    for k in range(50):
        d = random_hold_signal(2, float(rng.uniform(0.1, 5.0)), float(rng.uniform(0.1, 2.0)), 20.0, seed=k)
        traj = simulate_disturbed(canon, rng.uniform(-3, 3, 2), d, 20.0)
        assert check_l2_gain(traj, d).passed, k
    R = np.diag([1.0, -1.0])
    assert orientation_sign(lambda z: R @ z, np.array([0.3, 0.7])) == -1
    ex41 = example_no_canonical()
    for k in range(5):
        d = random_hold_signal(2, 2.0, 0.5, 20.0, seed=100 + k)
        assert check_l2_gain(simulate_disturbed(ex41, rng.uniform(-3, 3, 2), d, 20.0), d).passed
    radii = [0.5, 1.0, 2.0, 4.0]
    at = estimate_alpha_tilde(canon, power_gauge(1.0), radii)
    for r in radii:
        assert abs(float(at(r)) - r * r) <= 0.02 * r * r
    for z in _sample_plane(rng, 50, 0.1, 5.0):
        assert np.linalg.norm(build_R_transform(at, z) - z) <= 0.02 * np.linalg.norm(z)


@pytest.mark.acceptance("Gaussian optimal transport path: map, covariance curve, certificate")
def test_gaussian_ot():
    I = np.eye(2)
    assert np.max(np.abs(gaussian_ot_map(SIGMA0, I) - np.diag([0.5, 1.0]))) <= 1e-10
    for s in S21:
        S = gaussian_sigma(SIGMA0, I, float(s))
        assert np.max(np.abs(S - np.diag([(2.0 - s) ** 2, 1.0]))) <= 1e-10
        assert np.all(np.linalg.eigvalsh(S) > 0)
    path = gaussian_ot_homotopy(SIGMA0, I)
    x = np.array([[1.0, -2.0], [0.5, 0.5]])
    for s in (0.0, 0.5, 1.0):
        Si = np.linalg.inv(np.diag([(2.0 - s) ** 2, 1.0]))
        np.testing.assert_allclose(path.lyap_at(s).V(x), 0.5 * np.einsum("ij,jk,ik->i", x, Si, x))
    assert check_path(path, s_grid=S21, annulus=ANNULUS).passed


@pytest.mark.acceptance("sphere: tangency, chart conjugacy, south-pole convergence by t = 20, chart certificate")
def test_sphere_suite():
    X, Y = get("ex3_7_X").field, get("ex3_7_Y").field
    rng = np.random.default_rng(37)
    ps = rng.standard_normal((500, 3))
    ps /= np.linalg.norm(ps, axis=1, keepdims=True)
    ps[ps[:, 2] > 0.999] *= np.array([1.0, 1.0, -1.0])
    for field in (X, Y):
        assert np.max(np.abs(np.einsum("ij,ij->i", ps, pushforward_batch(field, ps)))) <= 1e-9
        for x0 in ([1.0, 0.0], [-0.7, 1.4]):
            planar = integrate(field, x0, 5.0)
            sphere = simulate_on_sphere(field, stereo_inv(x0), 5.0)
            for t in np.linspace(0.0, 5.0, 26):
                assert np.max(np.abs(sphere.at(t) - stereo_inv(planar.at(t)))) <= 1e-5
    assert chart_certificate(sphere_homotopy(), s_grid=S21).passed
    distances = {name: float(np.linalg.norm(simulate_on_sphere(f, [1.0, 0.0, 0.0], 20.0).final - SOUTH))
                 for name, f in (("X", X), ("Y", Y))}
    assert all(d <= 1e-3 for d in distances.values()), distances


def _code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


@pytest.mark.acceptance("CLI: byte-identical verify reports and the exit-code contract")
def test_determinism_and_exit_codes(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "all", "--output-dir", str(a)]) == EXIT_PASS
    assert main(["verify", "all", "--output-dir", str(b)]) == EXIT_PASS
    assert (a / "verify_all.txt").read_bytes() == (b / "verify_all.txt").read_bytes()
    assert _code(["verify", "rotation_family", "--output-dir", str(a)]) == EXIT_FAIL
    assert _code(["verify", "no_such_example", "--output-dir", str(a)]) == EXIT_UNKNOWN
    assert _code(["verify", "--bogus"]) == EXIT_ERROR
    capsys.readouterr()

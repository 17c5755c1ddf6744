import numpy as np
import pytest
from scipy import integrate

from gmc_lab.domain_geometry import Domain, Mobius
from gmc_lab.regularization import (DEFAULT_BUMP, BumpProfile, RegularizationError, ScaleSchedule, bump_block,
                                    circle, circle_average_covariance, circle_log_average, ensemble_covariance,
                                    entry_covariance, mollified, mollified_value, mollifier_circle_schedule,
                                    radial_profile, radial_profile_entries, semicircle,
                                    semicircle_average_covariance, semicircle_gtilde, spectral_weights)

D = Domain.unit_disk()
H = Domain.upper_half_disk()


def test_bump_normalization_and_constant():
    b = DEFAULT_BUMP
    assert b.c == pytest.approx(2.14356577579224, rel=1e-12)
    assert b.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert b.C == pytest.approx(-0.5798708772426203, abs=1e-10)
    gate = b.quadrature_gate()
    assert gate["C_delta"] < 1e-9 and gate["mass_delta"] < 1e-9


def test_bump_constant_independent_route():
    # C = 4π² ∬ log(max(x, y)) f(x) f(y) x y dx dy by scipy dblquad
    b = DEFAULT_BUMP
    g = lambda y, x: np.log(max(x, y)) * b.f(x) * b.f(y) * x * y
    val, _ = integrate.dblquad(g, 0, 1, 0, 1, epsabs=1e-11)
    assert 4 * np.pi**2 * val == pytest.approx(b.C, abs=1e-8)


def test_log_profile():
    b = DEFAULT_BUMP
    assert b.L(np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(b.L(np.array([1.5, 3.0])), -np.log([1.5, 3.0]))
    # -∫ f L = C
    s = np.linspace(0, 1, 4001)[1:-1]
    val = 2 * np.pi * integrate.simpson(b.f(s) * s * b.L(s), x=s)
    assert -val == pytest.approx(b.C, abs=1e-6)


def test_bump_json_roundtrip():
    b = BumpProfile(n_radial=80)
    assert BumpProfile.from_json(b.to_json()) == b


def test_schedule():
    s = ScaleSchedule(range(3, 6))
    assert np.allclose(s.eps, [1 / 8, 1 / 16, 1 / 32])
    assert np.allclose(ScaleSchedule(range(2), refinement=2).eps, [1, 2**-0.5])
    with pytest.raises(ValueError):
        ScaleSchedule([3, 3])
    with pytest.raises(RegularizationError):
        ScaleSchedule(range(0, 3)).check_admissible(D, [0.0])


def test_circle_variance_closed_form():
    for e in (0.5, 0.1, 0.01):
        assert circle_average_covariance(D, 0, e, 0, e) == pytest.approx(-np.log(e), abs=1e-12)
    z = 0.3 + 0.2j
    assert circle_average_covariance(D, z, 0.05, z, 0.05) == pytest.approx(
        -np.log(0.05) + np.log(D.conformal_radius(z)), abs=1e-12)


def test_circle_covariance_disjoint_equals_green():
    assert circle_average_covariance(D, -0.3, 0.05, 0.3, 0.05) == pytest.approx(D.green(-0.3, 0.3), abs=1e-12)


def test_circle_log_average_crossing_brute_force():
    z1, e1, z2, e2 = 0.0, 0.1, 0.08, 0.05
    v, used = circle_log_average(z1, e1, z2, e2, n_nodes=96)
    t = np.linspace(0, 2 * np.pi, 200001)[:-1]
    u = z1 + e1 * np.exp(1j * t)
    brute = np.mean(-np.log(np.maximum(np.abs(u - z2), e2)))
    assert used[0] and v[0] == pytest.approx(brute, abs=1e-6)


def test_nested_circles():
    # inner circle fully inside the outer ball: -log(outer radius)
    v, _ = circle_log_average(0.01, 0.01, 0.0, 0.1)
    assert v[0] == pytest.approx(-np.log(0.1))


def test_entry_rejects_exit():
    with pytest.raises(RegularizationError):
        ensemble_covariance(D, [circle(0.95, 0.1)])
    with pytest.raises(RegularizationError):
        ensemble_covariance(D, [semicircle(0.2 + 0.1j, 0.05)], mixed=True)


def test_mollified_variance_and_cross():
    e = 0.05
    cov, flags = ensemble_covariance(D, [mollified(0, e), mollified(0.1, e), circle(0.0, e)])
    assert cov[0, 0] == pytest.approx(-DEFAULT_BUMP.C - np.log(e), abs=1e-10)
    assert cov[0, 1] == pytest.approx(D.green(0, 0.1), abs=1e-10)  # disjoint bumps
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_bump_pairing_brute_force_overlap():
    b = DEFAULT_BUMP
    z1, z2, r = 0.0, 0.03, 0.05
    val = float(bump_block(D, z1, r, z2, r, b)[0][0])
    # brute quadrature of the log part in Cartesian coordinates, plus regular part
    n = 161
    xs = np.linspace(-1, 1, n)
    X, Y = np.meshgrid(xs, xs)
    rr = np.hypot(X, Y)
    w = b.f(rr) * (xs[1] - xs[0]) ** 2
    w /= w.sum()
    p = (X + 1j * Y).ravel()[w.ravel() > 0] * r
    wp = w.ravel()[w.ravel() > 0]
    L = b.L(np.abs(p + z1 - z2) / r) - np.log(r)
    brute = float(np.sum(wp * L)) + float(D.regular(z1, z2))
    assert val == pytest.approx(brute, abs=5e-4)


def test_pushforward_covariance_conformal_invariance():
    phi = Mobius.disk_automorphism(0.3, 0.7)
    z, e = 0.05 + 0.02j, 0.04
    # the functional (h∘φ⁻¹ ... ) of a pushed bump: covariance of pushed with itself equals the plain bump
    inv = phi.inverse()
    a, _ = entry_covariance(D, mollified(inv(z), e, phi), mollified(inv(z), e, phi))
    b_, _ = entry_covariance(D, mollified(inv(z), e), mollified(inv(z), e))
    assert a == pytest.approx(b_, abs=1e-6)


def test_mollified_value_ensemble_weights():
    radii = mollifier_circle_schedule(0.1, 48)
    assert np.all(np.diff(radii) > 0) and radii[-1] < 0.1
    assert mollified_value(np.ones(48), radii=radii) == pytest.approx(1.0, abs=1e-9)
    cov, _ = ensemble_covariance(D, [circle(0, r) for r in radii])
    w = np.zeros(48)
    for i in range(48):
        e = np.zeros(48)
        e[i] = 1
        w[i] = mollified_value(e, radii=radii)
    assert w @ cov @ w == pytest.approx(-DEFAULT_BUMP.C - np.log(0.1), abs=1e-3)


def test_semicircle_covariance():
    for e in (0.1, 0.01):
        v = semicircle_average_covariance(H, 0.0, e, 0.0, e)
        assert v == pytest.approx(-2 * np.log(e), abs=1e-12)
    x = 0.3
    assert semicircle_average_covariance(H, x, 0.01, x, 0.01) == pytest.approx(
        -2 * np.log(0.01) + 2 * np.log(1 - x**2), abs=1e-12)


def test_gtilde_symmetry_and_diagonal():
    assert semicircle_gtilde(0.1, -0.3) == pytest.approx(semicircle_gtilde(-0.3, 0.1), abs=1e-12)
    assert semicircle_gtilde(0.2, 0.2) == pytest.approx(-2 * np.log(1 - 0.04), abs=1e-12)
    # continuity in the second argument
    assert abs(semicircle_gtilde(0.1, 0.3) - semicircle_gtilde(0.1, 0.3001)) < 1e-3


def test_mixed_kernel_entry_matches_semicircle():
    cov, _ = ensemble_covariance(D, [semicircle(0.1, 0.05), semicircle(-0.2, 0.05)], mixed=True)
    assert cov[0, 1] == pytest.approx(semicircle_average_covariance(H, 0.1, 0.05, -0.2, 0.05), abs=1e-12)


def test_spectral_weights_reject_semicircle():
    with pytest.raises(RegularizationError):
        spectral_weights(semicircle(0.5, 0.1), 8)


def test_radial_profile_entries_and_samples():
    ents, t0 = radial_profile_entries(D, 0.5, [0.0, 1.0])
    assert t0 == pytest.approx(np.log(2))
    assert ents[1].radius == pytest.approx(0.5 * np.exp(-1), rel=1e-9)
    with pytest.raises(RegularizationError):
        radial_profile_entries(D, 0.0, [-1.0])
    V = radial_profile(D, 0.0, [0.0, 0.5, 1.0, 1.5], 20000, seed=3)
    assert np.all(V[:, 0] == 0)
    inc = np.diff(V, axis=1)
    assert np.allclose(inc.var(axis=0), 0.5, rtol=0.05)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmc_lab.domain_geometry import (Domain, DomainError, Mobius, NonInjectiveMapError, grid_automorphism_family,
                                     koebe, koebe_containment_margin, koebe_derivative_bound,
                                     koebe_remainder_bound, random_automorphism_family,
                                     square_center_conformal_radius_sc, square_green_series,
                                     taylor_coefficients)

disk_pts = st.builds(lambda r, t: r * np.exp(1j * t), st.floats(0, 0.9), st.floats(0, 2 * np.pi))


def test_disk_green_closed_form():
    D = Domain.unit_disk()
    g = D.green(-0.3, 0.3)
    assert g == pytest.approx(np.log(abs(1 - (-0.3) * 0.3) / 0.6), abs=1e-14)
    assert g == pytest.approx(0.5970033200070431, abs=1e-12)


def test_disk_conformal_radius_center():
    assert Domain.unit_disk().conformal_radius(0.0) == 1.0
    assert Domain.disk(4.0).conformal_radius(0.0) == pytest.approx(4.0)


@settings(max_examples=50, deadline=None)
@given(disk_pts, disk_pts)
def test_disk_green_symmetric_positive(x, y):
    if abs(x - y) < 1e-6:
        return
    D = Domain.unit_disk()
    assert D.green(x, y) == pytest.approx(D.green(y, x), rel=1e-12, abs=1e-12)
    assert D.green(x, y) > 0


@settings(max_examples=30, deadline=None)
@given(disk_pts, disk_pts, st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0, 2 * np.pi))
def test_green_conformal_invariance(x, y, ar, ai, th):
    if abs(x - y) < 1e-4 or abs(complex(ar, ai)) >= 0.8:
        return
    D = Domain.unit_disk()
    m = Mobius.disk_automorphism(complex(ar, ai), th)
    assert D.green(m(x), m(y)) == pytest.approx(D.green(x, y), rel=1e-9, abs=1e-9)


def test_green_vanishes_at_boundary():
    D = Domain.unit_disk()
    assert abs(D.green(0.2, 0.999999 * np.exp(0.4j))) < 1e-5


def test_green_rejects_outside_and_diagonal():
    D = Domain.unit_disk()
    with pytest.raises(DomainError):
        D.green(1.2, 0.0)
    with pytest.raises(DomainError):
        D.green(0.1, 0.1)


@pytest.mark.parametrize("x,y", [(0.3 + 0.4j, 0.6 + 0.7j), (0.5 + 0.5j, 0.2 + 0.25j), (0.1 + 0.9j, 0.9 + 0.1j)])
def test_square_green_matches_series(x, y):
    sq = Domain.unit_square()
    assert sq.green(x, y) == pytest.approx(square_green_series(x, y), abs=1e-9)


def test_square_center_conformal_radius():
    sq = Domain.unit_square()
    assert sq.conformal_radius(0.5 + 0.5j) == pytest.approx(square_center_conformal_radius_sc(), rel=1e-10)


def test_upper_half_disk_contains_and_distance():
    H = Domain.upper_half_disk()
    assert H.contains(0.5j)
    assert not H.contains(-0.5j)
    assert H.contains(0.2, closed_segment=True)
    assert H.distance_to_boundary(0.5j) == pytest.approx(0.5)


def test_domain_roundtrip():
    for D in (Domain.unit_disk(), Domain.unit_square(), Domain.upper_half_disk(), Domain.disk(4)):
        assert Domain.from_dict(D.to_dict()) == D


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(0, 2 * np.pi), disk_pts)
def test_mobius_inverse_and_derivative(ar, ai, th, z):
    a = complex(ar, ai)
    if abs(a) >= 0.95:
        return
    m = Mobius.disk_automorphism(a, th)
    assert abs(m.inverse()(m(z)) - z) < 1e-12
    assert abs(m(z)) < 1
    h = 1e-6
    fd = (m(z + h) - m(z - h)) / (2 * h)
    assert abs(fd - m.derivative(z)) < 1e-6


def test_mobius_composition_and_identity():
    a = Mobius.disk_automorphism(0.3, 0.5)
    b = Mobius.disk_automorphism(-0.2j, 1.1)
    z = 0.1 + 0.2j
    assert abs(a.then(b)(z) - b(a(z))) < 1e-14
    assert a.then(a.inverse()).is_identity
    assert Mobius.identity().is_identity
    assert not a.is_identity
    assert len(a.then(b).factors) == 2


def test_automorphism_rejects_outside_parameter():
    with pytest.raises(ValueError):
        Mobius.disk_automorphism(1.0)


def test_image_circle():
    m = Mobius.disk_automorphism(0.4, 0.2)
    c, r = m.image_circle(0.1j, 0.05)
    pts = m(0.1j + 0.05 * np.exp(1j * np.linspace(0, 6, 17)))
    assert np.allclose(np.abs(pts - c), r, atol=1e-12)


def test_schlicht_normalization_and_scaled_conjugate():
    m = Mobius.disk_automorphism(0.5, 0.3).schlicht_normalized()
    assert abs(m(0)) < 1e-14 and abs(m.derivative(0) - 1) < 1e-14
    s = m.scaled_conjugate(0.01)
    assert abs(s(0.7) - m(0.007) / 0.01) < 1e-12


def test_families():
    fam = grid_automorphism_family(8, 8, 0.6)
    assert len(fam) == 64
    assert sum(m.is_identity for m in fam) >= 1
    rnd = random_automorphism_family(np.random.default_rng(1), 10)
    assert len(rnd) == 10
    assert all(np.all(np.abs(m(0.5 * np.exp(1j * np.arange(5)))) < 1) for m in rnd)


def test_koebe_function_is_extremal_for_remainder_bound():
    eps, z = 0.1, np.array([0.5, 1.0, 3.0])
    lhs = np.abs(koebe(eps * z) / eps - z)
    assert np.allclose(lhs, koebe_remainder_bound(eps, z), rtol=1e-12)
    with pytest.raises(DomainError):
        koebe_remainder_bound(0.5, 2.0)
    assert np.all(koebe_derivative_bound(eps, z) > 0)


def test_taylor_coefficients_koebe_and_mobius():
    tc = taylor_coefficients(koebe, 20, radius=0.5)
    assert np.allclose(tc.coeffs, np.arange(1, 21), atol=1e-6)
    assert tc.de_branges_violations(1e-6) == []
    m = Mobius.disk_automorphism(0.4, 0.0).schlicht_normalized()
    tm = taylor_coefficients(m, 15)
    assert tm.de_branges_violations() == []


def test_taylor_coefficients_rejects_non_schlicht():
    tc = taylor_coefficients(lambda z: z + 20 * z**3, 12, radius=0.5)
    assert tc.de_branges_violations() == [3]
    with pytest.raises(NonInjectiveMapError):
        taylor_coefficients(lambda z: z + 100 * z**6, 12, radius=0.5)


def test_koebe_containment_margin():
    m = Mobius.disk_automorphism(0.3, 0.4)
    assert koebe_containment_margin(m, 0.1 + 0.1j, 0.01) > 0
    assert koebe_containment_margin(Mobius.identity(), 0.0, 0.1) == pytest.approx(0.3)

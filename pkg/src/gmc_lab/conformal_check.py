"""Coordinate change ``h̃ = h∘φ + Q log|φ'|`` and pathwise checks of the
transformation rule over finite Möbius families.

Both sides use mollified approximants.  For a point ``z`` of the target
region the two regularized values are

* ``X_z = h * f_ε(z)``,
* ``Y_z = (h∘φ) * f_{ε|(φ⁻¹)'(z)|}(φ⁻¹(z))``, the pairing of ``h`` with the
  bump of radius ``ε|(φ⁻¹)'(z)|`` at ``φ⁻¹(z)`` pushed forward by ``φ``.

After the change of variables ``z = φ(ω)`` the pulled-back mass of
``φ⁻¹(A)`` is ``∫_A exp(γ Y_z + (γ²/2)(log ε + C)) dz``, which is compared
with the mollified mass ``∫_A exp(γ X_z + (γ²/2)(log ε + C)) dz``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .domain_geometry import (Domain, Mobius, koebe_containment_margin, koebe_remainder_bound,
                              random_automorphism_family, taylor_coefficients)
from .gff_sampler import chunk_rng, factorize
from .gmc_measure import CellGrid, GmcParams
from .regularization import DEFAULT_BUMP, BumpProfile, Entry, bump_block, ensemble_covariance, mollified


class KoebeMarginError(ValueError):
    pass


# -- single map ---------------------------------------------------------------------


@dataclass
class PullbackField:
    """``h̃_φ`` paired against bumps: the map, its parameters, and the entries it needs."""

    phi: Mobius
    params: GmcParams
    bump: BumpProfile = DEFAULT_BUMP

    def preimage(self, z):
        return self.phi.inverse()(z)

    def radius(self, z, eps):
        """``ε |(φ⁻¹)'(z)|``."""
        return eps * np.abs(self.phi.inverse().derivative(z))

    def entry(self, z: complex, eps: float) -> Entry:
        if self.phi.is_identity:
            return mollified(z, eps)
        return mollified(complex(self.preimage(z)), float(self.radius(z, eps)), self.phi)

    def shift(self, omega):
        """Deterministic part ``γQ log|φ'(ω)|``."""
        return self.params.gamma_Q * np.log(np.abs(self.phi.derivative(omega)))


def pullback_exponent(y_values, phi: Mobius, omega, eps: float, params: GmcParams,
                      bump: BumpProfile = DEFAULT_BUMP):
    """Exponent of the pulled-back mollified measure at ``ω``.

    ``y_values`` are ``(h∘φ) * f_{ε/|φ'(ω)|}(ω)``.  Returns
    ``γ y + γQ log|φ'(ω)| + (γ²/2)(log(ε/|φ'(ω)|) + C)``.
    """
    g = params.gamma
    logd = np.log(np.abs(phi.derivative(omega)))
    return g * np.asarray(y_values) + params.gamma_Q * logd + g**2 / 2 * (np.log(eps) - logd + bump.C)


def mollified_exponent(x_values, eps: float, params: GmcParams, bump: BumpProfile = DEFAULT_BUMP):
    g = params.gamma
    return g * np.asarray(x_values) + g**2 / 2 * (np.log(eps) + bump.C)


def koebe_audit(phi: Mobius, points, eps: float, n_points: int = 256) -> float:
    """Smallest containment margin ``4ε - max|φ(p) - z|`` over ``points``."""
    return min(koebe_containment_margin(phi, complex(z), eps, n_points) for z in np.ravel(points))


def check_pullback_admissible(phi: Mobius, grid: CellGrid, eps: float, domain: Domain) -> float:
    pts = grid.points.ravel()
    pf = PullbackField(phi, GmcParams(0.0))
    w = pf.preimage(pts)
    r = pf.radius(pts, eps)
    if np.any(~(r < domain.distance_to_boundary(w))):
        raise ValueError("pulled-back ball leaves the domain")
    margin = koebe_audit(phi, pts, eps)
    if margin < 0:
        raise KoebeMarginError(f"Koebe containment violated by {-margin:.3g}")
    return margin


# -- joint sampling -------------------------------------------------------------------


@dataclass
class PairedSample:
    X: np.ndarray            # (replicas, n_points)
    Y: np.ndarray
    schur_min_eig: float


def joint_blocks(phi: Mobius, points, eps: float, domain: Domain, bump: BumpProfile = DEFAULT_BUMP,
                 xx: np.ndarray | None = None):
    """Covariance blocks ``(XX, XY, YY)`` for the mollified values and their pullbacks.

    For a disk automorphism, ``G(φu, φv) = G(u, v)``, so ``YY`` is the
    covariance of the unmapped preimage bumps.
    """
    z = np.asarray(points, complex).ravel()
    n = z.size
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    I, J = I.ravel(), J.ravel()
    if xx is None:
        xx = bump_block(domain, z[I], eps, z[J], eps, bump)[0].reshape(n, n)
        xx = (xx + xx.T) / 2
    pf = PullbackField(phi, GmcParams(0.0), bump)
    w = pf.preimage(z)
    r = pf.radius(z, eps)
    yy = bump_block(domain, w[I], r[I], w[J], r[J], bump)[0].reshape(n, n)
    yy = (yy + yy.T) / 2
    xy = bump_block(domain, z[I], eps, w[J], r[J], bump, S=phi)[0].reshape(n, n)
    return xx, xy, yy


def sample_paired(xx, xy, yy, replicas: int, seed_x: int, seed_y: int) -> PairedSample:
    """``X`` from its own factor (same ``seed_x`` gives the same ``X``) and ``Y | X`` exactly.

    The conditional covariance is factorized by eigendecomposition with
    negative eigenvalues (quadrature noise) clipped and reported.
    """
    Lx, _ = factorize(xx)
    X = chunk_rng(seed_x, 0).standard_normal((replicas, xx.shape[0])) @ Lx.T
    B = linalg.cho_solve((Lx, True), xy).T                       # YX XX⁻¹
    S = yy - B @ xy
    S = (S + S.T) / 2
    ev, V = linalg.eigh(S)
    root = V * np.sqrt(np.clip(ev, 0, None))
    Y = X @ B.T + chunk_rng(seed_y, 0).standard_normal((replicas, yy.shape[0])) @ root.T
    return PairedSample(X, Y, float(ev.min()))


def cell_masses(exponent, grid: CellGrid):
    w = grid.weights
    e = np.asarray(exponent).reshape(np.shape(exponent)[:-1] + w.shape)
    return np.sum(w * np.exp(e), axis=-1)


def transformation_residual(sample: PairedSample, phi: Mobius, grid: CellGrid, params: GmcParams, eps: float,
                            bump: BumpProfile = DEFAULT_BUMP, relative: bool = True):
    """Per-replica ``|μ^h_ε(A) - pulled-back mass of φ⁻¹(A)|`` (optionally over ``μ^h_ε(A)``)."""
    if phi.is_identity:
        Y = sample.X
    else:
        Y = sample.Y
    mx = cell_masses(mollified_exponent(sample.X, eps, params, bump), grid).sum(axis=-1)
    my = cell_masses(mollified_exponent(Y, eps, params, bump), grid).sum(axis=-1)
    res = np.abs(mx - my)
    return res / mx if relative else res


def pullback_mass_omega(y_values, phi: Mobius, grid: CellGrid, params: GmcParams, eps: float,
                        bump: BumpProfile = DEFAULT_BUMP):
    """Mass of ``φ⁻¹(A)`` integrated in ``ω`` coordinates with Jacobian-weighted nodes."""
    z = grid.points.ravel()
    inv = phi.inverse()
    omega = inv(z)
    jac = np.abs(inv.derivative(z)) ** 2
    w = grid.weights.ravel() * jac
    return np.sum(w * np.exp(pullback_exponent(y_values, phi, omega, eps, params, bump)), axis=-1)


# -- family stress test ---------------------------------------------------------------


def default_region(n_gauss: int = 4) -> CellGrid:
    """2×2 cells covering ``[-0.2, 0.2]²``."""
    return CellGrid.regular(-0.2, 0.2, -0.2, 0.2, 2, 2, n_gauss)


def family_stress_test(family: Sequence[Mobius], params: GmcParams, eps_list: Sequence[float],
                       replicas: int = 200, seed: int = 0, grid: CellGrid | None = None,
                       domain: Domain | None = None, bump: BumpProfile = DEFAULT_BUMP,
                       progress=None) -> dict:
    """Median relative residuals per map and scale, family max/min, trends and a Koebe audit.

    All maps share the same ``X`` draws; each map's ``Y | X`` uses its own
    seed stream.  The joint law of ``Y`` across maps is not modelled.
    """
    domain = domain or Domain.unit_disk()
    grid = grid or default_region()
    pts = grid.points.ravel()
    n_maps = len(family)
    eps_list = [float(e) for e in eps_list]
    med = np.full((n_maps, len(eps_list)), np.nan)
    koebe_min = np.inf
    schur_min = np.inf
    errors: dict[int, str] = {}
    ss = np.random.SeedSequence(seed)
    seed_x = int(ss.generate_state(1)[0])
    for j, eps in enumerate(eps_list):
        xx = None
        for i, phi in enumerate(family):
            try:
                koebe_min = min(koebe_min, check_pullback_admissible(phi, grid, eps, domain))
                if phi.is_identity:
                    med[i, j] = 0.0
                    continue
                xx_, xy, yy = joint_blocks(phi, pts, eps, domain, bump, xx)
                xx = xx_
                seed_y = int(np.random.SeedSequence(seed, spawn_key=(i + 1,)).generate_state(1)[0])
                smp = sample_paired(xx, xy, yy, replicas, seed_x, seed_y)
                schur_min = min(schur_min, smp.schur_min_eig)
                med[i, j] = float(np.median(transformation_residual(smp, phi, grid, params, eps, bump)))
            except Exception as exc:  # collected, not raised
                errors[i] = f"{type(exc).__name__}: {exc}"
            if progress:
                progress(j, i)
    return _report(family, eps_list, med, koebe_min, schur_min, errors, params, replicas, seed)


RESIDUAL_FLOOR = 1e-6


def _trend_slope(eps_list, values):
    v = np.asarray(values, float)
    ok = v > 0
    if ok.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log2(np.asarray(eps_list)[ok]), np.log2(v[ok]), 1)[0])


def _report(family, eps_list, med, koebe_min, schur_min, errors, params, replicas, seed) -> dict:
    maps = []
    flagged = []
    non_monotone = []
    for i, phi in enumerate(family):
        row = med[i]
        finite = bool(np.all(np.isfinite(row)))
        # residuals pinned at the quadrature floor count as converged (exact symmetries such as z -> -z)
        at_floor = finite and bool(np.max(row) < RESIDUAL_FLOOR)
        clipped = np.maximum(row, RESIDUAL_FLOOR)
        decreasing = finite and (at_floor or bool(np.all(np.diff(clipped) <= 0)))
        shrinks = finite and (at_floor or bool(clipped[-1] < clipped[0]))
        if not phi.is_identity and not shrinks:
            flagged.append(i)
        if not phi.is_identity and not decreasing:
            non_monotone.append(i)
        maps.append({"index": i, "factors": [[complex(a).real, complex(a).imag, th] for a, th in phi.factors],
                     "identity": phi.is_identity, "median_relative_residual": row.tolist(),
                     "decreasing": decreasing, "shrinks": shrinks,
                     "trend_slope_log2": _trend_slope(eps_list, row)})
    fam_max = np.nanmax(med, axis=0)
    fam_min = np.nanmin(med, axis=0)
    fam_med = np.nanmedian(med, axis=0)
    return {
        "gamma": params.gamma, "replicas": replicas, "seed": seed, "eps": eps_list,
        "family_size": len(family), "maps": maps,
        "max_residual": fam_max.tolist(), "min_residual": fam_min.tolist(), "median_residual": fam_med.tolist(),
        "max_trend_slope_log2": _trend_slope(eps_list, fam_max),
        "median_trend_slope_log2": _trend_slope(eps_list, fam_med),
        "flagged_maps": flagged, "non_monotone_maps": non_monotone,
        "koebe_min_margin": float(koebe_min), "schur_min_eigenvalue": float(schur_min),
        "errors": {str(k): v for k, v in errors.items()},
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


# -- distortion --------------------------------------------------------------------------


@dataclass
class DistortedBump:
    """``f_ε^φ(u) = |(φ⁻¹)'(εu)|² f(φ⁻¹(εu)/ε)`` for a schlicht-normalized ``φ⁻¹ = psi``."""

    psi: Mobius
    eps: float
    bump: BumpProfile = DEFAULT_BUMP

    def __call__(self, u):
        u = np.asarray(u, complex)
        v = self.psi(self.eps * u) / self.eps
        return np.abs(self.psi.derivative(self.eps * u)) ** 2 * self.bump.f(np.abs(v))

    def support_radius(self) -> float:
        """Radius containing the support, from the Koebe growth bound on ``psi⁻¹``."""
        return 1.0 + float(koebe_remainder_bound(self.eps, 1.0))

    def sup_norm_diff(self, n_r: int = 200, n_theta: int = 256) -> float:
        R = min(4.0, self.support_radius() * 1.01)
        r = np.linspace(0, R, n_r)
        u = r[:, None] * np.exp(2j * np.pi * np.arange(n_theta) / n_theta)[None, :]
        return float(np.max(np.abs(self(u) - self.bump.f(np.abs(u)))))

    def pushforward(self) -> Mobius:
        """``T(v) = psi⁻¹(εv)/ε``: pairing with ``f_ε^φ`` is pairing ``h∘T`` with ``f``."""
        return self.psi.inverse().scaled_conjugate(self.eps)


def green_integral_ball(R: float) -> float:
    """``∬_{B_R × B_R} G(x, y) dx dy = π² R⁴ / 4``."""
    return np.pi**2 * R**4 / 4


def schlicht_family(rng: np.random.Generator, n_maps: int, max_abs_a: float = 0.6, max_factors: int = 3):
    return [m.schlicht_normalized() for m in random_automorphism_family(rng, n_maps, max_abs_a, max_factors)]


@dataclass
class DistortedPairing:
    sup_pairing: np.ndarray
    base_pairing: np.ndarray
    gap: np.ndarray
    pairings: np.ndarray
    gap_variance: np.ndarray
    variance_bound: np.ndarray
    sup_norms: np.ndarray


def distorted_bump_pairing(family: Sequence[Mobius], eps: float, replicas: int = 1000, seed: int = 0,
                           R: float = 4.0, bump: BumpProfile = DEFAULT_BUMP) -> DistortedPairing:
    """Pairings of a GFF on ``B_R(0)`` with ``f`` and each ``f_ε^φ``, their sup and the gap.

    ``family`` holds schlicht-normalized maps ``psi = φ⁻¹``.
    """
    D = Domain.disk(R)
    bumps = [DistortedBump(p, eps, bump) for p in family]
    entries = [mollified(0.0, 1.0)] + [
        mollified(0.0, 1.0) if b.psi.is_identity else mollified(0.0, 1.0, b.pushforward()) for b in bumps]
    cov, _ = ensemble_covariance(D, entries, bump)
    ev, V = linalg.eigh((cov + cov.T) / 2)
    root = V * np.sqrt(np.clip(ev, 0, None))
    vals = chunk_rng(seed, 0).standard_normal((replicas, len(entries))) @ root.T
    base = vals[:, 0]
    maps = vals[:, 1:]
    sup = maps.max(axis=1)
    n = len(family)
    gap_var = np.array([cov[i + 1, i + 1] + cov[0, 0] - 2 * cov[0, i + 1] for i in range(n)])
    sup_norms = np.array([b.sup_norm_diff() for b in bumps])
    bound = sup_norms**2 * green_integral_ball(R)
    return DistortedPairing(sup, base, sup - base, maps, gap_var, bound, sup_norms)


def borell_tis_check(samples, sigma2: float, r_grid, slack_sd: float = 3.0) -> dict:
    """Empirical two-sided tail of ``X - mean X`` against ``2 exp(-r²/(2σ²))`` plus a binomial slack."""
    x = np.asarray(samples, float)
    c = x - x.mean()
    n = x.size
    rows = []
    for r in r_grid:
        emp = float(np.mean(np.abs(c) > r))
        bound = float(min(1.0, 2 * np.exp(-r**2 / (2 * sigma2))))
        slack = slack_sd * np.sqrt(max(bound * (1 - bound), 1.0 / n) / n)
        rows.append({"r": float(r), "empirical": emp, "bound": bound, "pass": emp <= bound + slack})
    return {"rows": rows, "pass_rate": float(np.mean([r["pass"] for r in rows]))}


def distortion_audit(n_maps: int = 100, seed: int = 0, eps_list=tuple(2.0 ** -np.arange(4, 11)),
                     z_max: float = 4.0, n_max: int = 30, n_grid: int = 17) -> dict:
    """Koebe remainder and de Branges checks over random schlicht-normalized Möbius compositions."""
    rng = np.random.default_rng(seed)
    maps = schlicht_family(rng, n_maps)
    x = np.linspace(-z_max, z_max, n_grid)
    z = (x[None, :] + 1j * x[:, None]).ravel()
    z = z[np.abs(z) <= z_max]
    koebe_viol = 0
    worst_ratio = 0.0
    db_viol = 0
    worst_coeff = 0.0
    for m in maps:
        # each schlicht map plays the role of φ⁻¹
        for eps in eps_list:
            lhs = np.abs(m(eps * z) / eps - z)
            rhs = koebe_remainder_bound(eps, np.abs(z))
            koebe_viol += int(np.sum(lhs > rhs * (1 + 1e-9) + 1e-12 / eps))  # roundoff of m(0)/ε
            nz = rhs > 0
            worst_ratio = max(worst_ratio, float(np.max(lhs[nz] / rhs[nz])))
        tc = taylor_coefficients(m, n_max)
        db_viol += len(tc.de_branges_violations())
        n = np.arange(1, tc.coeffs.size + 1)
        worst_coeff = max(worst_coeff, float(np.max(np.abs(tc.coeffs) / n)))
    return {"n_maps": n_maps, "eps": [float(e) for e in eps_list], "koebe_violations": koebe_viol,
            "koebe_worst_ratio": worst_ratio, "de_branges_violations": db_viol,
            "de_branges_worst_ratio": worst_coeff, "n_max": n_max}

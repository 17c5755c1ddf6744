"""Circle averages, semicircle averages and mollifier convolutions of the GFF.

Every regularized value here is a linear functional of the field, so the
whole module is about *covariances* between such functionals.  They all
split as

    cov = D.regular(x1, x2) + (log-kernel part),

where the log-kernel part is ``∬ ρ1(x) (-log|x - y|) ρ2(y)``.  For radial
profiles that part collapses to one-dimensional integrals of the smoothed
log profile ``L`` of the bump (see :class:`BumpProfile`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import interpolate, special

from .domain_geometry import Domain, DomainError, DomainKind, Mobius


class RegularizationError(DomainError):
    """A circle, semicircle or bump support leaves the domain."""


def _gauss_legendre01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


# -- bump profile ----------------------------------------------------------


def _F(y):
    """∫_0^y exp(-1/u) du."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    yp = y[pos]
    out[pos] = yp * np.exp(-1 / yp) - special.exp1(1 / yp)
    return out


@dataclass(frozen=True)
class BumpProfile:
    """Standard smooth radial mollifier ``f(r) = c exp(-1/(1 - r^2))`` on the unit ball.

    Besides the normalization constant ``c`` it carries the correction
    constant ``C = 4π² ∬ log(x∨y) f(x) f(y) xy dxdy`` and the smoothed log
    profile ``L(ρ) = ∫ f(u) (-log|u - y|) du`` at ``|y| = ρ``.  For ``ρ ≤ 1``
    one has ``L(ρ) = b(1) - ρ² b(ρ)`` with ``b(ρ) = 2π∫_0^1 f(ρσ) σ (-log σ) dσ``
    smooth, which is what makes accurate quadrature of ``L`` cheap.
    """

    n_radial: int = 64
    n_angular: int = 128
    table_size: int = 2049
    name: str = "standard_bump"

    @cached_property
    def c(self) -> float:
        return 1.0 / (np.pi * (np.exp(-1.0) - special.exp1(1.0)))

    def f(self, r):
        r = np.asarray(r, dtype=float)
        inside = r < 1
        out = np.zeros_like(r)
        out[inside] = self.c * np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out

    def mass_within(self, rho):
        """``P(ρ) = 2π ∫_0^ρ f(s) s ds``, in closed form."""
        rho = np.minimum(np.asarray(rho, dtype=float), 1.0)
        return np.pi * self.c * (_F(np.ones(1))[0] - _F(1.0 - rho**2))

    def total_mass(self, n: int | None = None) -> float:
        s, w = _gauss_legendre01(n or self.n_radial)
        return float(2 * np.pi * np.sum(w * self.f(s) * s))

    def b_direct(self, rho, n: int = 256, power: int = 4):
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        s, w = _gauss_legendre01(n)
        sig = s**power
        jac = power * s ** (power - 1)
        vals = self.f(rho[:, None] * sig[None, :]) * sig * (-np.log(sig)) * jac
        return 2 * np.pi * vals @ w

    @cached_property
    def _b_spline(self):
        t = np.linspace(0.0, 1.0, self.table_size)
        return interpolate.CubicSpline(t, self.b_direct(np.sqrt(t)))

    @cached_property
    def log_profile_at_zero(self) -> float:
        return float(self.b_direct(np.array([1.0]))[0])

    def L(self, rho):
        """Smoothed log profile; equals ``-log ρ`` for ``ρ ≥ 1``."""
        rho = np.asarray(rho, dtype=float)
        out = np.empty_like(rho)
        inside = rho < 1
        ri = rho[inside]
        out[inside] = self.log_profile_at_zero - ri**2 * self._b_spline(ri**2)
        out[~inside] = -np.log(rho[~inside])
        return out

    def correction_constant_quadrature(self, n: int) -> float:
        """``C`` via ``4π ∫_0^1 f(x) x log(x) P(x) dx`` on ``n`` Gauss nodes."""
        x, w = _gauss_legendre01(n)
        return float(4 * np.pi * np.sum(w * self.f(x) * x * np.log(x) * self.mass_within(x)))

    @cached_property
    def C(self) -> float:
        return self.correction_constant_quadrature(self.n_radial)

    def quadrature_gate(self) -> dict:
        """Change in mass and ``C`` when the radial node count is doubled."""
        n = self.n_radial
        return {
            "mass_delta": abs(self.total_mass(n) - self.total_mass(2 * n)),
            "C_delta": abs(self.correction_constant_quadrature(n) - self.correction_constant_quadrature(2 * n)),
        }

    def hankel(self, kappa):
        """``2π ∫_0^1 f(r) J_0(κ r) r dr``: the per-mode multiplier of the unit bump."""
        kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
        n = int(max(self.n_radial, 64 + 2 * np.max(kappa, initial=0.0)))
        r, w = _gauss_legendre01(n)
        fr = 2 * np.pi * w * self.f(r) * r
        out = np.empty_like(kappa)
        for i in range(0, len(kappa), 4096):
            out[i : i + 4096] = special.j0(np.outer(kappa[i : i + 4096], r)) @ fr
        return out

    def to_json(self) -> str:
        return json.dumps({"profile": self.name, "c": self.c, "C": self.C,
                           "n_radial": self.n_radial, "n_angular": self.n_angular})

    @classmethod
    def from_json(cls, text: str) -> "BumpProfile":
        d = json.loads(text)
        if d.get("profile", "standard_bump") != "standard_bump":
            raise ValueError(f"unknown profile {d['profile']!r}")
        return cls(n_radial=d["n_radial"], n_angular=d["n_angular"])


DEFAULT_BUMP = BumpProfile()


# -- scale schedules ---------------------------------------------------------


@dataclass(frozen=True)
class ScaleSchedule:
    """Radii ``base^{k/N}`` for ``k`` in ``k_range``."""

    k_range: Sequence[int]
    refinement: int = 1
    base: float = 0.5

    def __post_init__(self):
        if not 0 < self.base < 1 or self.refinement < 1:
            raise ValueError("need 0 < base < 1 and refinement >= 1")
        if any(b <= a for a, b in zip(self.k_range, self.k_range[1:])):
            raise ValueError("k_range must be strictly increasing")

    @property
    def eps(self) -> np.ndarray:
        return self.base ** (np.asarray(self.k_range, dtype=float) / self.refinement)

    def check_admissible(self, domain: Domain, centers) -> None:
        d = np.min(domain.distance_to_boundary(np.asarray(centers)))
        if self.eps[0] >= d:
            raise RegularizationError(f"largest radius {self.eps[0]:.4g} reaches the boundary")


# -- ensemble entries --------------------------------------------------------

Kind = Literal["circle", "semicircle", "mollified"]


@dataclass(frozen=True)
class Entry:
    """One regularized value: ``kind`` average of radius ``radius`` at ``center``.

    ``pushforward`` (mollified only) replaces the bump by its pushforward
    under a Möbius map, i.e. the functional ``ρ ↦ (h∘T, f_r(center - ·))``.
    """

    kind: Kind
    center: complex
    radius: float
    pushforward: Mobius | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.pushforward is not None and self.kind != "mollified":
            raise ValueError("only mollified entries can be pushed forward")

    @property
    def mapped_center(self) -> complex:
        return complex(self.center if self.pushforward is None else self.pushforward(self.center))


def circle(center, radius) -> Entry:
    return Entry("circle", complex(center), float(radius))


def semicircle(center, radius) -> Entry:
    return Entry("semicircle", complex(center), float(radius))


def mollified(center, radius, pushforward: Mobius | None = None) -> Entry:
    return Entry("mollified", complex(center), float(radius), pushforward)


def check_entry_inside(domain: Domain, e: Entry) -> None:
    if e.kind == "semicircle":
        lo, hi = domain.boundary_segment or (np.nan, np.nan)
        if abs(e.center.imag) > 0 or not lo < e.center.real < hi:
            raise RegularizationError("semicircle center must lie on the boundary segment")
        if abs(e.center) + e.radius >= 1:
            raise RegularizationError("semicircle leaves the domain")
        return
    if e.pushforward is None:
        if not e.radius < domain.distance_to_boundary(e.center):
            raise RegularizationError(f"ball B_{e.radius:.4g}({e.center:.4g}) leaves the domain")
        return
    c, R = e.pushforward.image_circle(e.center, e.radius)
    if not R < domain.distance_to_boundary(c):
        raise RegularizationError("pushed-forward bump leaves the domain")


# -- circle-average kernels ----------------------------------------------------


def circle_log_average(z1, eps1, z2, eps2, n_nodes: int = 64):
    """Average over ``|u - z1| = ε1`` of ``-log max(|u - z2|, ε2)``; vectorized.

    Returns ``(values, quadrature_used)``.
    """
    z1, eps1, z2, eps2 = (np.atleast_1d(a) for a in np.broadcast_arrays(
        np.asarray(z1, complex), np.asarray(eps1, float), np.asarray(z2, complex), np.asarray(eps2, float)))
    d = np.abs(z2 - z1)
    out = np.empty(d.shape)
    outside = np.abs(d - eps1) >= eps2          # whole circle 1 outside ball 2
    inside = d + eps1 <= eps2                   # whole circle 1 inside ball 2
    out[outside] = -np.log(np.maximum(d[outside], eps1[outside]))
    out[inside] = -np.log(eps2[inside])
    cross = ~(outside | inside)
    if np.any(cross):
        dc, e1, e2 = d[cross], eps1[cross], eps2[cross]
        alpha = np.angle(z2[cross] - z1[cross])
        beta = np.arccos(np.clip((e1**2 + dc**2 - e2**2) / (2 * e1 * dc), -1, 1))
        # arc |θ - α| < β lies inside ball 2, the rest outside
        x, w = _gauss_legendre01(n_nodes)
        theta = alpha[:, None] + beta[:, None] + (2 * np.pi - 2 * beta[:, None]) * x[None, :]
        u = z1[cross][:, None] + e1[:, None] * np.exp(1j * theta)
        dist = np.abs(u - z2[cross][:, None])
        outer = (2 * np.pi - 2 * beta) * (-np.log(dist) @ w)
        out[cross] = (2 * beta * (-np.log(e2)) + outer) / (2 * np.pi)
    return out, cross


def circle_average_covariance(domain: Domain, z1, eps1, z2, eps2) -> float:
    """``cov(h_ε1(z1), h_ε2(z2))`` for the zero-boundary GFF."""
    for z, e in ((z1, eps1), (z2, eps2)):
        if not e < domain.distance_to_boundary(complex(z)):
            raise RegularizationError("circle exits the domain")
    val, _ = circle_log_average(z1, eps1, z2, eps2)
    return float(domain.regular(complex(z1), complex(z2)) + val[0])


def semicircle_average_covariance(domain: Domain, z1, eps1, z2, eps2) -> float:
    """Covariance of semicircle averages of the mixed-boundary GFF on the upper half disk.

    Averaging the reflected kernel ``G(x, y) + G(x, ȳ)`` over an upper
    semicircle equals twice the full-circle average of ``G`` on the disk.
    """
    if domain.kind is not DomainKind.UPPER_HALF_DISK:
        raise RegularizationError("semicircle averages live on the upper half disk")
    for z, e in ((z1, eps1), (z2, eps2)):
        check_entry_inside(domain, semicircle(z, e))
    return 2.0 * circle_average_covariance(Domain.unit_disk(), complex(z1), eps1, complex(z2), eps2)


def semicircle_gtilde(z1: float, z2: float, eps: float = 1e-3) -> float:
    """Harmonic remainder ``G̃_{z1}(z2)`` of the semicircle covariance.

    Defined operationally: the covariance minus the ``-2 log`` principal
    term, evaluated at a radius small enough for the closed-form regime.
    """
    D = Domain.upper_half_disk()
    if z1 == z2:
        return -semicircle_average_covariance(D, z1, eps, z2, eps) - 2 * np.log(eps)
    r = min(eps, abs(z1 - z2) / 3)
    return -semicircle_average_covariance(D, z1, r, z2, r) - 2 * np.log(abs(z1 - z2))


# -- bump kernels ----------------------------------------------------------------


def _ray_circle_breaks(w1, r1, theta, c, R):
    """Radial fractions in [0, 1] where rays from ``w1`` cross the circle (c, R)."""
    e = np.exp(1j * theta)
    dw = (w1 - c)[:, None]
    p = (dw * np.conj(e)).real
    q = (np.abs(dw) ** 2 - (R**2)[:, None])
    disc = p**2 - q
    has = disc > 0
    sq = np.sqrt(np.where(has, disc, 0.0))
    t1 = np.where(has, -p - sq, r1[:, None])
    t2 = np.where(has, -p + sq, r1[:, None])
    s1 = np.clip(t1 / r1[:, None], 0.0, 1.0)
    s2 = np.clip(t2 / r1[:, None], 0.0, 1.0)
    return s1, s2


def bump_log_pairing(w1, r1, w2, r2, S: Mobius | None = None, bump: BumpProfile = DEFAULT_BUMP,
                     n_theta: int | None = None, n_r: int = 24, chunk: int = 128):
    """``∫ f_{r1}(u - w1) L_{r2}(|S(u) - w2|) du`` for arrays of pairs.

    ``L_r(d) = -log r + L(d / r)`` is the log kernel smoothed by the bump of
    radius ``r``.  Disjoint pairs use the mean-value property; the rest use
    polar Gauss quadrature around ``w1`` split where the integrand has its
    kink (the preimage of the circle ``|y - w2| = r2``).
    Returns ``(values, quadrature_used)``.
    """
    S = S or Mobius.identity()
    Sinv = S.inverse()
    w1, r1, w2, r2 = (np.atleast_1d(a) for a in np.broadcast_arrays(
        np.asarray(w1, complex), np.asarray(r1, float), np.asarray(w2, complex), np.asarray(r2, float)))
    n_theta = n_theta or bump.n_angular
    # preimage circle of ∂B_{r2}(w2)
    if S.is_identity:
        c, R = w2.copy(), r2.copy()
    else:
        pts = w2[:, None] + r2[:, None] * np.exp(2j * np.pi * np.array([0.0, 1 / 3, 2 / 3]))[None, :]
        img = Sinv(pts)
        c, R = _circumcircles(img)
    out = np.empty(w1.shape)
    disjoint = np.abs(w1 - c) >= r1 + R
    out[disjoint] = -np.log(np.abs(S(w1[disjoint]) - w2[disjoint]))
    quad = ~disjoint
    idx = np.nonzero(quad)[0]
    if idx.size:
        x, gw = np.polynomial.legendre.leggauss(n_r)
        x = (x + 1) / 2
        gw = gw / 2
        theta = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
        eth = np.exp(1j * theta)
        for start in range(0, idx.size, chunk):
            sel = idx[start : start + chunk]
            s1, s2 = _ray_circle_breaks(w1[sel], r1[sel], theta, c[sel], R[sel])
            lo = np.stack([np.zeros_like(s1), s1, s2], axis=-1)       # (P, T, 3)
            hi = np.stack([s1, s2, np.ones_like(s1)], axis=-1)
            s = lo[..., None] + (hi - lo)[..., None] * x              # (P, T, 3, n)
            wts = (hi - lo)[..., None] * gw                           # (P, T, 3, n)
            u = w1[sel][:, None, None, None] + r1[sel][:, None, None, None] * s * eth[None, :, None, None]
            dist = np.abs(S(u) - w2[sel][:, None, None, None]) / r2[sel][:, None, None, None]
            integrand = bump.f(s) * s * (bump.L(dist) - np.log(r2[sel])[:, None, None, None])
            out[sel] = (2 * np.pi / n_theta) * np.sum(integrand * wts, axis=(1, 2, 3))
    return out, quad


def _circumcircles(pts):
    a, b, c = pts[:, 0], pts[:, 1], pts[:, 2]
    ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    center = ux + 1j * uy
    return center, np.abs(a - center)


def bump_log_part(e1: Entry, e2: Entry, bump: BumpProfile = DEFAULT_BUMP, **quad_kw) -> tuple[float, bool]:
    """``∬ ρ1(x) (-log|x - y|) ρ2(y)`` for two (possibly pushed-forward) bumps."""
    T1 = e1.pushforward or Mobius.identity()
    T2 = e2.pushforward or Mobius.identity()
    if T2.is_identity and not T1.is_identity:
        return bump_log_part(e2, e1, bump, **quad_kw)
    if T1.is_identity and T2.is_identity and e1.center == e2.center and e1.radius == e2.radius:
        return -bump.C - np.log(e1.radius), False
    # -log|T1 u - T2 v| = -log|S u - v| - log|det| + log|γ S u + δ| + log|γ v + δ|,  S = T2⁻¹ T1
    S = T1.then(T2.inverse())
    (_, _), (g, d) = T2.matrix
    val, used = bump_log_pairing(e1.center, e1.radius, e2.center, e2.radius, S, bump, **quad_kw)
    corr = np.log(abs(g * complex(S(e1.center)) + d)) + np.log(abs(g * e2.center + d))
    return float(val[0] + corr), bool(used[0])


def circle_bump_log_part(c: Entry, b: Entry, bump: BumpProfile = DEFAULT_BUMP, n_nodes: int = 96) -> float:
    """Average over the circle ``c`` of ``L_r(|u - w|)`` for an unmapped bump ``b``."""
    if b.pushforward is not None:
        raise NotImplementedError("circle/pushed-forward bump covariance")
    theta, w = _gauss_legendre01(n_nodes)
    # split the circle where it crosses ∂B_r(w) so each arc is smooth
    d = abs(b.center - c.center)
    brk = [0.0, 1.0]
    if d > 0 and abs(d - c.radius) < b.radius < d + c.radius:
        alpha = np.angle(b.center - c.center)
        beta = np.arccos(np.clip((c.radius**2 + d**2 - b.radius**2) / (2 * c.radius * d), -1, 1))
        brk = sorted([((alpha - beta) / (2 * np.pi)) % 1.0, ((alpha + beta) / (2 * np.pi)) % 1.0])
        brk = [0.0, *brk, 1.0]
    total = 0.0
    for lo, hi in zip(brk[:-1], brk[1:]):
        t = 2 * np.pi * (lo + (hi - lo) * theta)
        u = c.center + c.radius * np.exp(1j * t)
        total += (hi - lo) * np.sum(w * (bump.L(np.abs(u - b.center) / b.radius) - np.log(b.radius)))
    return float(total)


def entry_covariance(domain: Domain, e1: Entry, e2: Entry, bump: BumpProfile = DEFAULT_BUMP,
                     mixed: bool = False) -> tuple[float, bool]:
    """Covariance of two entries and whether a quadrature path was used.

    ``mixed=True`` selects the reflected kernel ``G(x,y) + G(x,ȳ)`` of the
    mixed-boundary field on the upper half disk (``domain`` is then the
    full unit disk carrying the reflection).
    """
    if mixed:
        if e1.kind == "semicircle" and e2.kind == "semicircle":
            v, used = circle_log_average(e1.center, e1.radius, e2.center, e2.radius)
            return float(2 * (domain.regular(e1.center, e2.center) + v[0])), bool(used[0])
        if "semicircle" in (e1.kind, e2.kind):
            raise NotImplementedError("semicircle/bump covariance under the mixed kernel")
        a, ua = entry_covariance(domain, e1, e2, bump)
        e2c = Entry(e2.kind, np.conj(e2.center), e2.radius)
        b, ub = entry_covariance(domain, e1, e2c, bump)
        return a + b, ua or ub
    if "semicircle" in (e1.kind, e2.kind):
        raise RegularizationError("semicircle entries need the mixed kernel")
    reg = float(domain.regular(e1.mapped_center, e2.mapped_center))
    if e1.kind == "circle" and e2.kind == "circle":
        v, used = circle_log_average(e1.center, e1.radius, e2.center, e2.radius)
        return reg + float(v[0]), bool(used[0])
    if e1.kind == "circle" or e2.kind == "circle":
        c, b = (e1, e2) if e1.kind == "circle" else (e2, e1)
        d = abs(c.center - b.center)
        if abs(d - c.radius) >= b.radius:
            return reg - float(np.log(max(d, c.radius))), False
        return reg + circle_bump_log_part(c, b, bump), True
    v, used = bump_log_part(e1, e2, bump)
    return reg + v, used


def ensemble_covariance(domain: Domain, entries: Sequence[Entry], bump: BumpProfile = DEFAULT_BUMP,
                        mixed: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Dense covariance of ``entries`` plus a boolean matrix flagging quadrature entries.

    Circle-only and unmapped-bump-only ensembles are assembled vectorized.
    """
    n = len(entries)
    for e in entries:
        check_entry_inside(Domain.upper_half_disk() if e.kind == "semicircle" else domain, e)
    kinds = {e.kind for e in entries}
    maps = any(e.pushforward is not None for e in entries)
    z = np.array([e.center for e in entries], dtype=complex)
    r = np.array([e.radius for e in entries], dtype=float)
    iu, ju = np.triu_indices(n)
    flags = np.zeros((n, n), dtype=bool)
    if kinds <= {"circle"} or (kinds <= {"semicircle"} and mixed):
        reg_dom = Domain.unit_disk() if mixed else domain
        v, used = circle_log_average(z[iu], r[iu], z[ju], r[ju])
        vals = reg_dom.regular(z[iu], z[ju]) + v
        if mixed:
            vals = 2 * vals
    elif kinds <= {"mollified"} and not maps and not mixed:
        vals, used = bump_block(domain, z[iu], r[iu], z[ju], r[ju], bump)
    else:
        vals = np.empty(iu.size)
        used = np.zeros(iu.size, dtype=bool)
        for k, (i, j) in enumerate(zip(iu, ju)):
            vals[k], used[k] = entry_covariance(domain, entries[i], entries[j], bump, mixed)
    cov = np.empty((n, n))
    cov[iu, ju] = vals
    cov[ju, iu] = vals
    flags[iu, ju] = used
    flags[ju, iu] = used
    return cov, flags


def bump_block(domain: Domain, z1, r1, z2, r2, bump: BumpProfile = DEFAULT_BUMP, S: Mobius | None = None,
               **quad_kw):
    """Vectorized covariance of unmapped bumps ``(z1, r1)`` and bumps ``(z2, r2)`` pushed by ``S``.

    With ``S`` given, the second family is ``ρ ↦ (h∘S, f_{r2}(z2 - ·))``, and
    the pairing is evaluated in the coordinates of the second family.
    """
    z1, r1, z2, r2 = (np.atleast_1d(a) for a in np.broadcast_arrays(
        np.asarray(z1, complex), np.asarray(r1, float), np.asarray(z2, complex), np.asarray(r2, float)))
    if S is None or S.is_identity:
        reg = domain.regular(z1, z2)
        out = np.empty(z1.shape)
        same = (z1 == z2) & (r1 == r2)
        out[same] = -bump.C - np.log(r1[same])
        v, used = bump_log_pairing(z2[~same], r2[~same], z1[~same], r1[~same], None, bump, **quad_kw)
        out[~same] = v
        u = np.zeros(z1.shape, dtype=bool)
        u[~same] = used
        return reg + out, u
    # integrate over the pushed bump: ∫ f_{r2}(v - z2) L_{r1}(|S v - z1|) dv
    v, used = bump_log_pairing(z2, r2, z1, r1, S, bump, **quad_kw)
    return domain.regular(z1, S(z2)) + v, used


# -- spectral multipliers ----------------------------------------------------------------


def mode_frequencies(mode_cutoff: int) -> np.ndarray:
    j = np.arange(1, mode_cutoff + 1)
    return np.pi * np.sqrt(j[:, None] ** 2 + j[None, :] ** 2)


def circle_multiplier(mode_cutoff: int, eps: float) -> np.ndarray:
    """Exact circle average of each sine mode relative to its center value: ``J_0(ε|k|)``."""
    return special.j0(eps * mode_frequencies(mode_cutoff))


def mollifier_multiplier(mode_cutoff: int, eps: float, bump: BumpProfile = DEFAULT_BUMP) -> np.ndarray:
    freq = mode_frequencies(mode_cutoff)
    uniq, inv = np.unique(np.round(freq**2 / np.pi**2).astype(np.int64), return_inverse=True)
    vals = bump.hankel(eps * np.pi * np.sqrt(uniq.astype(float)))
    return vals[inv].reshape(freq.shape)


def sine_modes(mode_cutoff: int, z) -> np.ndarray:
    """Dirichlet-orthonormalized sine basis ``f_jk`` evaluated at points; shape (..., J, J)."""
    z = np.asarray(z, dtype=complex)
    j = np.arange(1, mode_cutoff + 1)
    sx = np.sin(np.pi * np.multiply.outer(z.real, j))
    sy = np.sin(np.pi * np.multiply.outer(z.imag, j))
    norm = np.sqrt(2 * np.pi) / mode_frequencies(mode_cutoff) * 2
    return sx[..., :, None] * sy[..., None, :] * norm


def spectral_weights(entry: Entry, mode_cutoff: int, bump: BumpProfile = DEFAULT_BUMP) -> np.ndarray:
    """Coefficient vector ``w`` with ``entry(h) = Σ α_jk w_jk`` for the spectral sampler."""
    square = Domain.unit_square()
    check_entry_inside(square, entry)
    if entry.pushforward is not None:
        raise NotImplementedError("spectral path supports unmapped entries only")
    modes = sine_modes(mode_cutoff, entry.center)
    if entry.kind == "circle":
        return modes * circle_multiplier(mode_cutoff, entry.radius)
    if entry.kind == "mollified":
        return modes * mollifier_multiplier(mode_cutoff, entry.radius, bump)
    raise RegularizationError("semicircles are not defined on the square")


def spectral_circle_average(field, z, eps) -> float:
    """``h_ε(z)`` of a spectral field realization on the unit square."""
    J = field.mode_cutoff
    if J == 0:
        return 0.0
    w = spectral_weights(circle(z, eps), J)
    return float(np.sum(field.coeffs * w))


def mollified_value(field_or_values, z=None, eps=None, bump: BumpProfile = DEFAULT_BUMP, radii=None):
    """``h * f_ε(z)``.

    Spectral path: pass a spectral field and ``(z, ε)``.  Ensemble path:
    pass sampled concentric circle averages (last axis) at ``radii`` from
    :func:`mollifier_circle_schedule`; they are integrated against the bump.
    """
    if radii is not None:
        values = np.asarray(field_or_values, dtype=float)
        s, w = _gauss_legendre01(len(radii))
        return values @ (2 * np.pi * w * bump.f(s) * s)
    J = field_or_values.mode_cutoff
    if J == 0:
        return 0.0
    wts = spectral_weights(mollified(z, eps), J, bump)
    return float(np.sum(field_or_values.coeffs * wts))


def mollifier_circle_schedule(eps: float, n: int = 64) -> np.ndarray:
    """Radii of the concentric circles used by the ensemble path of :func:`mollified_value`."""
    s, _ = _gauss_legendre01(n)
    return eps * s


def radial_profile_entries(domain: Domain, z: complex, times: Sequence[float]) -> tuple[list[Entry], float]:
    """Concentric circles at ``e^{-(t0 + t)}`` with ``t0 = -log dist(z, ∂D)``.

    The ``t = 0`` circle touches the boundary; it is shrunk by a factor
    ``1 - 1e-12`` so the entry stays admissible.
    """
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise RegularizationError("times must be nonnegative")
    t0 = -np.log(float(domain.distance_to_boundary(z)))
    radii = np.exp(-(t0 + t)) * (1 - 1e-12)
    return [circle(z, r) for r in radii], t0


def radial_profile(domain: Domain, z: complex, times: Sequence[float], replicas: int, seed: int = 0) -> np.ndarray:
    """Samples of ``V_t = h_{e^{-(t0+t)}}(z) - h_{e^{-t0}}(z)``, shape ``(replicas, len(times))``.

    Drawn jointly from the exact circle-average covariance; the factor is
    an eigendecomposition because the ``t = 0`` circle hugs the boundary
    and has near-zero variance.
    """
    from scipy import linalg

    from .gff_sampler import chunk_rng

    entries, _ = radial_profile_entries(domain, z, times)
    cov, _ = ensemble_covariance(domain, entries)
    ev, V = linalg.eigh(cov)
    root = V * np.sqrt(np.clip(ev, 0, None))
    vals = chunk_rng(seed, 0).standard_normal((replicas, len(entries))) @ root.T
    t = np.asarray(times, float)
    base = vals[:, [int(np.argmin(t))]]
    return vals - base

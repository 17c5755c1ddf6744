"""Planar domains, Green's functions, conformal radii and Möbius maps.

Green's functions use the normalization ``ΔG(x, ·) = -2π δ_x`` so that
``G(x, y) = -log|x - y| + (harmonic in each variable)``.  The harmonic
remainder is exposed as :meth:`Domain.regular`; it is what survives when
a radially symmetric average is taken in either variable, which is why
most covariance formulas in this package are written in terms of it.

Points are complex numbers throughout (``x + iy``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special


class DomainError(ValueError):
    """Point outside the domain, coincident arguments, or similar."""


class DomainKind(enum.Enum):
    UNIT_DISK = "unit_disk"
    UNIT_SQUARE = "unit_square"
    UPPER_HALF_DISK = "upper_half_disk"


# Nome of the rectangle lattice for the unit square: q = exp(-pi * height / width).
_SQUARE_NOME = np.exp(-np.pi)
_THETA_TERMS = 14


def _theta1(u):
    """Jacobi theta_1(u, q) for the unit-square nome; complex, vectorized."""
    u = np.asarray(u, dtype=complex)
    out = np.zeros_like(u)
    for n in range(_THETA_TERMS):
        out += (-1) ** n * _SQUARE_NOME ** ((n + 0.5) ** 2) * np.sin((2 * n + 1) * u)
    return 2.0 * out


def _theta1_over_u(u):
    """theta_1(u)/u, finite at u = 0."""
    u = np.asarray(u, dtype=complex)
    out = np.zeros_like(u)
    small = np.abs(u) < 1e-4
    for n in range(_THETA_TERMS):
        k = 2 * n + 1
        v = k * u
        # sin(v)/v with a short Taylor branch near 0
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(small, 1.0 - v**2 / 6.0 + v**4 / 120.0, np.sin(v) / np.where(small, 1.0, v))
        out += (-1) ** n * _SQUARE_NOME ** ((n + 0.5) ** 2) * k * s
    return 2.0 * out


@dataclass(frozen=True)
class Domain:
    """A bounded simply connected planar domain.

    ``radius`` only applies to disks; the default 1 gives the unit disk and
    ``Domain.disk(4)`` the ball ``B_4(0)`` used by the distortion audit.
    """

    kind: DomainKind
    boundary_segment: tuple[float, float] | None = None
    radius: float = 1.0

    def __post_init__(self):
        if (self.kind is DomainKind.UPPER_HALF_DISK) != (self.boundary_segment is not None):
            raise ValueError("boundary_segment is present iff kind is UPPER_HALF_DISK")
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @classmethod
    def unit_disk(cls) -> "Domain":
        return cls(DomainKind.UNIT_DISK)

    @classmethod
    def disk(cls, radius: float) -> "Domain":
        return cls(DomainKind.UNIT_DISK, radius=float(radius))

    @classmethod
    def unit_square(cls) -> "Domain":
        return cls(DomainKind.UNIT_SQUARE)

    @classmethod
    def upper_half_disk(cls) -> "Domain":
        return cls(DomainKind.UPPER_HALF_DISK, boundary_segment=(-1.0, 1.0))

    @property
    def is_disk(self) -> bool:
        return self.kind is DomainKind.UNIT_DISK

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "boundary_segment": self.boundary_segment, "radius": self.radius}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        seg = d.get("boundary_segment")
        return cls(DomainKind(d["kind"]), tuple(seg) if seg is not None else None, d.get("radius", 1.0))

    # -- geometry --------------------------------------------------------
    def distance_to_boundary(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind is DomainKind.UNIT_DISK:
            return self.radius - np.abs(z)
        if self.kind is DomainKind.UNIT_SQUARE:
            return np.minimum.reduce([z.real, 1 - z.real, z.imag, 1 - z.imag])
        # upper half disk: distance to the arc only; the segment is free boundary
        return 1.0 - np.abs(z)

    def contains(self, z, closed_segment: bool = False):
        z = np.asarray(z, dtype=complex)
        if self.kind is DomainKind.UPPER_HALF_DISK:
            lower_ok = z.imag >= 0 if closed_segment else z.imag > 0
            return (np.abs(z) < 1.0) & lower_ok
        return self.distance_to_boundary(z) > 0

    def check_interior(self, z, what: str = "point"):
        if not np.all(self.contains(z)):
            raise DomainError(f"{what} outside {self.kind.value}")

    # -- Green's function ------------------------------------------------
    def regular(self, x, y):
        """``G(x, y) + log|x - y|``: harmonic in each variable, finite on the diagonal.

        On the diagonal it equals ``log C(x; D)``.
        """
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        if self.kind is DomainKind.UNIT_DISK:
            R = self.radius
            return np.log(np.abs(1.0 - x * np.conj(y) / R**2)) + np.log(R)
        if self.kind is DomainKind.UNIT_SQUARE:
            h = np.pi / 2.0
            return (
                -np.log(np.abs(h * _theta1_over_u(h * (x - y))))
                - np.log(np.abs(_theta1(h * (x + y))))
                + np.log(np.abs(_theta1(h * (x - np.conj(y)))))
                + np.log(np.abs(_theta1(h * (x + np.conj(y)))))
            )
        raise DomainError("zero-boundary Green's function is defined for the disk and square only")

    def green(self, x, y):
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        self.check_interior(x, "x")
        self.check_interior(y, "y")
        d = np.abs(x - y)
        if np.any(d == 0):
            raise DomainError("coincident points: G(x, x) diverges")
        return self.regular(x, y) - np.log(d)

    def conformal_radius(self, z):
        z = np.asarray(z, dtype=complex)
        self.check_interior(z, "z")
        if self.kind is DomainKind.UNIT_DISK:
            return (self.radius**2 - np.abs(z) ** 2) / self.radius
        return np.exp(self.regular(z, z))


def green(domain: Domain, x, y):
    return domain.green(x, y)


def conformal_radius(domain: Domain, z):
    return domain.conformal_radius(z)


def square_center_conformal_radius_sc() -> float:
    """Conformal radius of the unit square at its center via Schwarz–Christoffel.

    ``f(w) = ∫_0^w (1 - s^4)^{-1/2} ds`` maps the unit disk onto a square
    with half-diagonal ``f(1)`` and ``f'(0) = 1``; rescaling to side 1 gives
    the answer.  Independent of the theta-function route used by
    :meth:`Domain.conformal_radius`.
    """
    half_diag, _ = integrate.quad(lambda t: (1.0 - t**4) ** -0.5, 0.0, 1.0, limit=200)
    return 1.0 / (half_diag * np.sqrt(2.0))


def square_green_series(x: complex, y: complex, tol: float = 1e-12, max_modes: int = 20000) -> float:
    """Eigenfunction-series Green's function on (0,1)^2, summed in one direction exactly.

    ``G = Σ_j 2 sin(jπx1) sin(jπy1) g_j(x2, y2)`` with the 1D Helmholtz Green
    ``g_j = 2π sinh(k s_<) sinh(k (1 - s_>)) / (k sinh k)``, ``k = jπ``.
    Used as an oracle; converges geometrically unless ``x2 == y2``.
    """
    s_lo, s_hi = sorted((y.imag, x.imag))
    total = 0.0
    for j in range(1, max_modes + 1):
        k = j * np.pi
        # sinh(a)sinh(b)/sinh(k) in overflow-free form
        g = 2 * np.pi / k * 0.5 * (np.exp(k * (s_lo - s_hi)) - np.exp(-k * (s_lo + s_hi))) * (
            (1 - np.exp(-2 * k * (1 - s_hi))) / (1 - np.exp(-2 * k))
        )
        term = 2 * np.sin(k * x.real) * np.sin(k * y.real) * g
        total += term
        if abs(g) < tol and j > 5:
            break
    return float(total)


# -- Möbius maps ---------------------------------------------------------


@dataclass(frozen=True)
class Mobius:
    """Möbius transformation ``z ↦ (αz + β)/(γz + δ)`` stored as a 2×2 matrix.

    ``factors`` records the disk automorphisms ``(a, θ)`` it was composed
    from (applied first to last); it is empty for general maps.
    """

    matrix: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    factors: tuple[tuple[complex, float], ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex).reshape(2, 2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if det == 0:
            raise ValueError("singular Möbius matrix")
        object.__setattr__(self, "matrix", m / np.sqrt(det))

    @classmethod
    def identity(cls) -> "Mobius":
        return cls()

    @classmethod
    def disk_automorphism(cls, a: complex, theta: float = 0.0) -> "Mobius":
        """``z ↦ e^{iθ}(z - a)/(1 - ā z)``; requires ``|a| < 1``."""
        a = complex(a)
        if not abs(a) < 1:
            raise ValueError("disk automorphism needs |a| < 1")
        e = np.exp(1j * theta)
        return cls(np.array([[e, -e * a], [-np.conj(a), 1.0]]), ((a, float(theta)),))

    @classmethod
    def affine(cls, scale: complex, shift: complex = 0.0) -> "Mobius":
        return cls(np.array([[scale, shift], [0.0, 1.0]]))

    @property
    def is_identity(self) -> bool:
        m = self.matrix
        return bool(abs(m[0, 1]) < 1e-15 and abs(m[1, 0]) < 1e-15 and abs(m[0, 0] - m[1, 1]) < 1e-15
                    and (abs(m[0, 0] - 1) < 1e-15 or abs(m[0, 0] + 1) < 1e-15))

    def __call__(self, z):
        (a, b), (c, d) = self.matrix
        z = np.asarray(z, dtype=complex)
        return (a * z + b) / (c * z + d)

    def derivative(self, z):
        (a, b), (c, d) = self.matrix
        z = np.asarray(z, dtype=complex)
        return (a * d - b * c) / (c * z + d) ** 2

    def inverse(self) -> "Mobius":
        (a, b), (c, d) = self.matrix
        inv_factors = tuple((-fa * np.exp(1j * th), -th) for fa, th in reversed(self.factors))
        return Mobius(np.array([[d, -b], [-c, a]]), inv_factors)

    def then(self, other: "Mobius") -> "Mobius":
        """Composition ``other ∘ self`` (apply self first)."""
        return Mobius(other.matrix @ self.matrix, self.factors + other.factors)

    def __matmul__(self, other: "Mobius") -> "Mobius":
        # self ∘ other
        return other.then(self)

    @property
    def pole(self) -> complex:
        (a, b), (c, d) = self.matrix
        return complex(np.inf) if c == 0 else complex(-d / c)

    def image_circle(self, center: complex, radius: float) -> tuple[complex, float]:
        """Image of the circle ``|z - center| = radius`` (assumed not to hit the pole)."""
        pts = center + radius * np.exp(2j * np.pi * np.array([0.0, 1 / 3, 2 / 3]))
        w = self(pts)
        return _circumcircle(*w)

    def schlicht_normalized(self) -> "Mobius":
        """``(M(z) - M(0)) / M'(0)``: fixes 0 with unit derivative."""
        z0 = complex(self(0.0))
        d0 = complex(self.derivative(0.0))
        return self.then(Mobius.affine(1.0 / d0, -z0 / d0))

    def scaled_conjugate(self, eps: float) -> "Mobius":
        """``z ↦ M(εz)/ε``."""
        return Mobius.affine(eps).then(self).then(Mobius.affine(1.0 / eps))


MobiusMap = Mobius


def _circumcircle(a: complex, b: complex, c: complex) -> tuple[complex, float]:
    ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0:
        raise ValueError("collinear points: image is a line")
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
    center = complex(ux, uy)
    return center, float(abs(a - center))


def mobius_derivative(m: Mobius, z):
    return m.derivative(z)


def random_automorphism_family(rng: np.random.Generator, n_maps: int, max_abs_a: float = 0.6,
                               max_factors: int = 3) -> list[Mobius]:
    """Random compositions of 1..max_factors disk automorphisms."""
    maps = []
    for _ in range(n_maps):
        m = Mobius.identity()
        for _ in range(rng.integers(1, max_factors + 1)):
            r = max_abs_a * np.sqrt(rng.uniform())
            a = r * np.exp(2j * np.pi * rng.uniform())
            m = m.then(Mobius.disk_automorphism(a, rng.uniform(0, 2 * np.pi)))
        maps.append(m)
    return maps


def grid_automorphism_family(n_radii: int = 8, n_rotations: int = 8, max_abs_a: float = 0.6) -> list[Mobius]:
    """Default stress family: ``a`` on a radius/angle grid with ``|a| ≤ max_abs_a``, times rotations."""
    maps = []
    radii = np.linspace(0.0, max_abs_a, n_radii)
    for k, r in enumerate(radii):
        for j in range(n_rotations):
            a = r * np.exp(2j * np.pi * (j + 0.5 * k) / n_rotations)
            maps.append(Mobius.disk_automorphism(a, 2 * np.pi * j / n_rotations))
    return maps


# -- distortion estimates ----------------------------------------------


def koebe_remainder_bound(eps, z_abs):
    """Upper bound for ``|ψ(εz)/ε - z|`` over schlicht ``ψ``: ``(f_K(ε|z|) - ε|z|)/ε``."""
    eps = np.asarray(eps, dtype=float)
    z = np.asarray(z_abs, dtype=float)
    ez = eps * z
    if np.any(ez >= 1):
        raise DomainError("koebe bound needs eps * |z| < 1")
    return eps * (2 * z**2 - eps * z**3) / (1 - ez) ** 2


def koebe_derivative_bound(eps, z_abs):
    """Upper bound for ``|ψ'(εz) - 1|``: ``f_K'(ε|z|) - 1``."""
    eps = np.asarray(eps, dtype=float)
    z = np.asarray(z_abs, dtype=float)
    ez = eps * z
    if np.any(ez >= 1):
        raise DomainError("koebe bound needs eps * |z| < 1")
    return eps * (4 * z - 3 * eps * z**2 + eps**2 * z**3) / (1 - ez) ** 3


def koebe(z):
    z = np.asarray(z, dtype=complex)
    return z / (1 - z) ** 2


@dataclass(frozen=True)
class TaylorCoefficients:
    """Coefficients ``a_1..a_n`` of a schlicht-normalized map and their error bound."""

    coeffs: np.ndarray
    error_bound: float
    radius: float

    def __post_init__(self):
        if abs(self.coeffs[0] - 1) > max(1e-8, self.error_bound):
            raise ValueError("a_1 must be 1 after schlicht normalization")

    def de_branges_violations(self, tol: float | None = None) -> list[int]:
        tol = self.error_bound if tol is None else tol
        n = np.arange(1, len(self.coeffs) + 1)
        return [int(k) for k in n[np.abs(self.coeffs) > n + tol]]


class NonInjectiveMapError(DomainError):
    pass


def taylor_coefficients(fn: Callable, n_max: int, radius: float = 0.5, n_samples: int = 512) -> TaylorCoefficients:
    """Taylor coefficients of the schlicht normalization of ``fn`` by DFT on ``|z| = radius``.

    The reported error bound combines aliasing (Cauchy estimate with the
    sampled maximum on a slightly larger circle would be sharper; we use the
    sampled max on ``|z| = radius`` and the de Branges growth ``|a_k| ≤ k``)
    and round-off amplified by ``radius^{-n}``.
    """
    if n_samples <= 2 * n_max:
        raise ValueError("n_samples must exceed 2 * n_max")
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    z = radius * np.exp(1j * theta)
    vals = np.asarray(fn(z), dtype=complex)
    # schlicht normalization from the same samples: a_0 and a_1 via the DFT
    c = np.fft.fft(vals) / n_samples
    a0 = c[0]
    a1 = c[1] / radius
    if abs(a1) == 0:
        raise NonInjectiveMapError("derivative vanishes at 0")
    n = np.arange(1, n_max + 1)
    coeffs = c[1 : n_max + 1] / radius**n / a1
    scale = np.max(np.abs(vals - a0)) / abs(a1)
    roundoff = 1e-15 * n_samples * scale / radius**n_max
    alias = (n_samples + n_max) * radius ** (n_samples)
    err = float(roundoff + alias)
    coeffs = np.asarray(coeffs)
    coeffs[0] = 1.0 + 0j if abs(coeffs[0] - 1) < 1e-12 else coeffs[0]
    if np.any(np.abs(coeffs) > 10 * n + err):
        bad = int(n[np.argmax(np.abs(coeffs) / n)])
        raise NonInjectiveMapError(f"coefficient blow-up at n={bad}: map is not schlicht")
    return TaylorCoefficients(coeffs, err, radius)


def koebe_containment_margin(phi: Mobius, z: complex, eps: float, n_points: int = 256) -> float:
    """``4ε - max|φ(p) - z|`` over the boundary of ``B_{ε|(φ⁻¹)'(z)|}(φ⁻¹(z))``.

    Nonnegative iff the mapped ball lies in ``B_{4ε}(z)`` at the sampled points.
    """
    inv = phi.inverse()
    w = complex(inv(z))
    r = eps * abs(complex(inv.derivative(z)))
    pts = w + r * np.exp(2j * np.pi * np.arange(n_points) / n_points)
    return float(4 * eps - np.max(np.abs(phi(pts) - z)))

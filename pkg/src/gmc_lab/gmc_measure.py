"""Regularized chaos measures, bracket constants and the dyadic decay studies."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate, linalg, special, stats

from .domain_geometry import Domain, DomainError, DomainKind
from .gff_sampler import FieldRealization, chunk_rng, ensemble_factorization, sample_batch
from .regularization import (DEFAULT_BUMP, BumpProfile, Entry, RegularizationError, circle, mollified,
                             semicircle, spectral_weights)
from .stats import ExponentFit, stats_fit_exponent


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class GmcParams:
    gamma: float

    def __post_init__(self):
        if not 0 <= self.gamma < 2:
            raise MeasureError(f"gamma must lie in [0, 2), got {self.gamma}")

    @property
    def Q(self) -> float:
        return np.inf if self.gamma == 0 else 2 / self.gamma + self.gamma / 2

    @property
    def gamma_Q(self) -> float:
        """``γQ = 2 + γ²/2``, finite at ``γ = 0``."""
        return 2 + self.gamma**2 / 2

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "Q": None if self.gamma == 0 else self.Q}


# -- cells -----------------------------------------------------------------------


@dataclass(frozen=True)
class CellGrid:
    """Axis-aligned rectangular cells with a tensor Gauss rule in each."""

    x_edges: tuple
    y_edges: tuple
    n_gauss: int = 4

    @classmethod
    def regular(cls, x0, x1, y0, y1, nx, ny, n_gauss: int = 4) -> "CellGrid":
        return cls(tuple(np.linspace(x0, x1, nx + 1)), tuple(np.linspace(y0, y1, ny + 1)), n_gauss)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.y_edges) - 1, len(self.x_edges) - 1

    @property
    def n_cells(self) -> int:
        return self.shape[0] * self.shape[1]

    def _rule(self):
        x, w = np.polynomial.legendre.leggauss(self.n_gauss)
        return (x + 1) / 2, w / 2

    @property
    def points(self) -> np.ndarray:
        """``(n_cells, n_gauss²)`` complex quadrature points, cells in row-major (y, x) order."""
        s, _ = self._rule()
        xe, ye = np.asarray(self.x_edges), np.asarray(self.y_edges)
        px = xe[:-1, None] + np.diff(xe)[:, None] * s            # (nx, g)
        py = ye[:-1, None] + np.diff(ye)[:, None] * s            # (ny, g)
        pts = px[None, :, None, :] + 1j * py[:, None, :, None]   # (ny, nx, g_y, g_x)
        return pts.reshape(self.n_cells, -1)

    @property
    def weights(self) -> np.ndarray:
        _, w = self._rule()
        xe, ye = np.asarray(self.x_edges), np.asarray(self.y_edges)
        wx = np.diff(xe)[:, None] * w
        wy = np.diff(ye)[:, None] * w
        ww = wy[:, None, :, None] * wx[None, :, None, :]
        return ww.reshape(self.n_cells, -1)

    @property
    def areas(self) -> np.ndarray:
        return np.outer(np.diff(self.y_edges), np.diff(self.x_edges)).ravel()

    @property
    def centers(self) -> np.ndarray:
        xe, ye = np.asarray(self.x_edges), np.asarray(self.y_edges)
        cx = (xe[:-1] + xe[1:]) / 2
        cy = (ye[:-1] + ye[1:]) / 2
        return (cx[None, :] + 1j * cy[:, None]).ravel()

    def to_dict(self) -> dict:
        return {"x_edges": list(self.x_edges), "y_edges": list(self.y_edges), "n_gauss": self.n_gauss}


@dataclass(frozen=True)
class SegmentCells:
    """Intervals of the real axis with a Gauss rule in each."""

    edges: tuple
    n_gauss: int = 4

    @classmethod
    def regular(cls, a, b, n, n_gauss: int = 4) -> "SegmentCells":
        return cls(tuple(np.linspace(a, b, n + 1)), n_gauss)

    @property
    def n_cells(self) -> int:
        return len(self.edges) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return 1, self.n_cells

    @property
    def points(self) -> np.ndarray:
        x, _ = np.polynomial.legendre.leggauss(self.n_gauss)
        e = np.asarray(self.edges)
        return (e[:-1, None] + np.diff(e)[:, None] * (x + 1) / 2).astype(complex)

    @property
    def weights(self) -> np.ndarray:
        _, w = np.polynomial.legendre.leggauss(self.n_gauss)
        return np.diff(self.edges)[:, None] * w / 2

    @property
    def areas(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        e = np.asarray(self.edges)
        return ((e[:-1] + e[1:]) / 2).astype(complex)


Variant = Literal["circle", "mollified", "sup_bracket", "inf_bracket", "boundary", "varying_radius"]


@dataclass
class MeasureField:
    """Cell masses ``(..., n_cells)``; leading axes index replicas."""

    domain: Domain
    grid: CellGrid | SegmentCells
    eps: float
    masses: np.ndarray
    variant: Variant
    scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(~np.isfinite(self.masses)) or np.any(self.masses < 0):
            raise MeasureError("masses must be finite and nonnegative")

    @property
    def unscaled(self) -> np.ndarray:
        return self.masses / self.scale

    def total(self, cells: Sequence[int] | None = None) -> np.ndarray:
        m = self.masses if cells is None else self.masses[..., list(cells)]
        return m.sum(axis=-1)

    def to_csv(self, replica: int = 0) -> str:
        m = self.masses if self.masses.ndim == 1 else self.masses[replica]
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["cell", "center_x", "center_y", "mass"])
        for i, (c, v) in enumerate(zip(self.grid.centers, m)):
            w.writerow([i, repr(float(c.real)), repr(float(c.imag)), repr(float(v))])
        return buf.getvalue()

    def heatmap(self, replica: int = 0, quantiles=(0.01, 0.99)) -> bytes:
        m = self.masses if self.masses.ndim == 1 else self.masses[replica]
        return pgm_bytes(np.log(np.maximum(m, 1e-300)).reshape(self.grid.shape), quantiles)


def pgm_bytes(img: np.ndarray, quantiles=(0.01, 0.99)) -> bytes:
    """8-bit binary PGM of ``img`` clipped at the given quantiles; row 0 is the top."""
    img = np.asarray(img, float)
    lo, hi = np.quantile(img, quantiles)
    scaled = np.zeros_like(img) if hi <= lo else (np.clip(img, lo, hi) - lo) / (hi - lo)
    data = np.round(255 * scaled[::-1]).astype(np.uint8)
    return f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode() + data.tobytes()


# -- building measures --------------------------------------------------------


def grid_entries(grid, eps, kind: str = "circle", g: Callable | None = None) -> list[Entry]:
    pts = grid.points.ravel()
    radii = np.full(pts.shape, float(eps)) if g is None else eps * np.asarray(g(pts), float)
    make = {"circle": circle, "mollified": mollified, "semicircle": semicircle}[kind]
    return [make(z, r) for z, r in zip(pts, radii)]


def check_admissible(domain: Domain, grid, eps, g=None) -> None:
    pts = grid.points.ravel()
    r = eps if g is None else eps * np.asarray(g(pts), float)
    if domain.kind is DomainKind.UPPER_HALF_DISK:
        bad = np.abs(pts) + r >= 1
    else:
        bad = ~(r < domain.distance_to_boundary(pts))
    if np.any(bad):
        raise RegularizationError(f"radius reaches the boundary at {pts[np.argmax(bad)]:.4g}")


def _values(source, grid, eps, kind, bump, g=None) -> np.ndarray:
    if isinstance(source, FieldRealization):
        if not source.is_spectral:
            return np.asarray(source.values, float)
        entries = grid_entries(grid, eps, kind, g)
        if source.mode_cutoff == 0:
            return np.zeros(len(entries))
        W = np.stack([spectral_weights(e, source.mode_cutoff, bump).ravel() for e in entries])
        return W @ source.coeffs.ravel()
    return np.asarray(source, float)


def _integrate(grid, exponent: np.ndarray) -> np.ndarray:
    w = grid.weights
    e = exponent.reshape(exponent.shape[:-1] + w.shape)
    return np.sum(w * np.exp(e), axis=-1)


def build_measure(source, params: GmcParams, eps: float, grid: CellGrid, variant: Variant = "circle",
                  domain: Domain | None = None, bump: BumpProfile = DEFAULT_BUMP) -> MeasureField:
    """Cell masses of ``exp(γ h_ε + (γ²/2) log ε)`` (or the mollified version with ``+ (γ²/2) C``).

    ``source`` is a spectral realization or an array ``(..., n_points)`` of
    regularized values at ``grid.points`` in raveled order.
    """
    domain = domain or (source.domain if isinstance(source, FieldRealization) else Domain.unit_disk())
    check_admissible(domain, grid, eps)
    if variant not in ("circle", "mollified"):
        raise MeasureError("build_measure handles the circle and mollified variants")
    g = params.gamma
    if g == 0:
        return MeasureField(domain, grid, eps, grid.areas.copy(), variant)
    v = _values(source, grid, eps, variant, bump)
    shift = g**2 / 2 * (np.log(eps) + (bump.C if variant == "mollified" else 0.0))
    return MeasureField(domain, grid, eps, _integrate(grid, g * v + shift), variant)


def expected_cell_mass(domain: Domain, grid: CellGrid, params: GmcParams) -> np.ndarray:
    """``∫_cell C(z; D)^{γ²/2} dz`` with the grid's own quadrature rule."""
    cr = domain.conformal_radius(grid.points)
    return np.sum(grid.weights * cr ** (params.gamma**2 / 2), axis=-1)


def varying_radius_measure(source, params: GmcParams, eps: float, g: Callable, grid: CellGrid,
                           domain: Domain | None = None, bump: BumpProfile = DEFAULT_BUMP) -> MeasureField:
    """Mollified measure with radius ``ε g(z)`` at each quadrature point."""
    domain = domain or (source.domain if isinstance(source, FieldRealization) else Domain.unit_disk())
    check_admissible(domain, grid, eps, g)
    r = eps * np.asarray(g(grid.points.ravel()), float)
    if np.any(r <= 0):
        raise MeasureError("g must be positive")
    gam = params.gamma
    if gam == 0:
        return MeasureField(domain, grid, eps, grid.areas.copy(), "varying_radius")
    v = _values(source, grid, eps, "mollified", bump, g)
    expo = gam * v + gam**2 / 2 * (np.log(r) + bump.C)
    return MeasureField(domain, grid, eps, _integrate(grid, expo), "varying_radius")


def boundary_measure(values, params: GmcParams, eps: float, cells: SegmentCells) -> MeasureField:
    """Masses of ``exp((γ/2) h_ε + (γ²/4) log ε)`` on segment cells from semicircle averages."""
    D = Domain.upper_half_disk()
    lo, hi = D.boundary_segment
    if cells.edges[0] <= lo or cells.edges[-1] >= hi:
        raise RegularizationError("cells must lie inside the boundary segment")
    check_admissible(D, cells, eps)
    g = params.gamma
    if g == 0:
        return MeasureField(D, cells, eps, cells.areas.copy(), "boundary")
    v = np.asarray(values, float)
    return MeasureField(D, cells, eps, _integrate(cells, g / 2 * v + g**2 / 4 * np.log(eps)), "boundary")


def expected_boundary_mass(cells: SegmentCells, params: GmcParams) -> np.ndarray:
    """``∫_cell (1 - x²)^{γ²/4} dx``: ε-free because the semicircle variance is ``-2 log ε + 2 log(1 - x²)``."""
    x = cells.points.real
    return np.sum(cells.weights * (1 - x**2) ** (params.gamma**2 / 4), axis=-1)


# -- bracket constants ----------------------------------------------------------------


@dataclass
class BracketConstants:
    N: int
    gamma: float
    C_bar: float
    C_under: float
    C_tilde: float
    C_uwave: float
    mc_paths: int
    dt: float
    half_widths: dict
    seed: int
    n_delta: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def as_dict(self) -> dict:
        return asdict(self)


def _max_increment(rng, a, b, var_dt):
    """Maximum of a Brownian bridge from ``a`` to ``b`` with variance ``var_dt``, sampled exactly."""
    u = rng.random(a.shape)
    return (a + b + np.sqrt((b - a) ** 2 - 2 * var_dt * np.log(u))) / 2


def _sup_inf_paths(rng, n, gamma, T, n_steps):
    """Exact sup/inf over ``[0, T]`` of ``γB_t - γ²t/2``, one bridge per step."""
    dt = T / n_steps
    x = np.zeros(n)
    mx = np.zeros(n)
    mn = np.zeros(n)
    var = gamma**2 * dt
    for _ in range(n_steps):
        y = x + np.sqrt(var) * rng.standard_normal(n) - gamma**2 / 2 * dt
        mx = np.maximum(mx, _max_increment(rng, x, y, var))
        mn = np.minimum(mn, -_max_increment(rng, -x, -y, var))
        x = y
    return mx, mn


def drifted_max_mgf(gamma: float, T: float, sign: int = +1) -> float:
    """``E exp(sup_{[0,T]} (γB_t - γ²t/2))`` (``sign=+1``) or the inf version (``sign=-1``), in closed form.

    Uses the law of the running maximum of ``σB_t + μt``:
    ``P(M ≤ m) = Φ((m - μT)/(σ√T)) - exp(2μm/σ²) Φ((-m - μT)/(σ√T))``.
    For the inf, ``inf X = -sup(-X)`` with drift ``+γ²/2``.
    """
    if gamma == 0:
        return 1.0
    s, mu = gamma, -gamma**2 / 2 * sign
    sT = s * np.sqrt(T)

    def dens(m):
        a = (m - mu * T) / sT
        b = (-m - mu * T) / sT
        k = 2 * mu / s**2
        return (stats.norm.pdf(a) / sT - k * np.exp(k * m) * stats.norm.cdf(b)
                + np.exp(k * m) * stats.norm.pdf(b) / sT)

    upper = abs(mu) * T + 40 * sT
    val, _ = integrate.quad(lambda m: np.exp(sign * m) * dens(m), 0, upper, limit=200, epsabs=1e-13, epsrel=1e-12)
    # atom-free at 0: P(M = 0) = 0 for Brownian motion
    return float(val)


def bracket_constants_exact(gamma: float, N: int) -> tuple[float, float]:
    T = np.log(2) / N
    return 1 / drifted_max_mgf(gamma, T, +1), 1 / drifted_max_mgf(gamma, T, -1)


def mollified_delta_covariance(gamma: float, deltas: np.ndarray, bump: BumpProfile = DEFAULT_BUMP,
                               tail: float = 30.0, n_gl: int = 24) -> np.ndarray:
    """``Cov(X_Δ, X_Δ') = γ² ∫_0^∞ P(e^{-(u-Δ)⁺}) P(e^{-(u-Δ')⁺}) du``.

    ``X_Δ`` is ``γ`` times the bump-weighted average of ``B_{t+Δ}``;
    ``P`` is the bump mass within a radius.
    """
    d = np.asarray(deltas, float)
    brk = np.unique(np.concatenate([[0.0], d, d.max() + np.linspace(0, tail, 61)[1:]]))
    x, w = np.polynomial.legendre.leggauss(n_gl)
    u = (brk[:-1, None] + np.diff(brk)[:, None] * (x + 1) / 2).ravel()
    wu = (np.diff(brk)[:, None] * w / 2).ravel()
    Pm = bump.mass_within(np.exp(-np.maximum(u[None, :] - d[:, None], 0.0)))
    Pm[u[None, :] < d[:, None]] = 1.0
    return gamma**2 * (Pm * wu) @ Pm.T


def bracket_constants(params: GmcParams, N: int, mc_paths: int = 100_000, dt: float | None = None,
                      seed: int = 0, n_delta: int = 64, bump: BumpProfile = DEFAULT_BUMP,
                      chunk: int = 50_000, z: float = 1.96, min_paths: int = 100_000) -> BracketConstants:
    """Monte Carlo ``C̄(N), C̲(N)`` (circle) and ``C̃(N), C̲̃(N)`` (mollified) with ``z``-level half-widths.

    Each time step samples the path maximum of its Brownian bridge exactly,
    so the circle constants carry no time-discretization bias for any
    ``dt``.  The mollified sup/inf runs over ``n_delta + 1`` grid values
    of ``Δ``, which biases ``C̃`` up and ``C̲̃`` down slightly.
    """
    if N < 1:
        raise MeasureError("N must be a positive integer")
    if mc_paths < min_paths:
        raise MeasureError(f"mc_paths={mc_paths} is below the required {min_paths}")
    T = np.log(2) / N
    dt = T if dt is None else float(dt)
    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    g = params.gamma
    if g == 0:
        return BracketConstants(N, g, 1.0, 1.0, 1.0, 1.0, mc_paths, T / n_steps,
                                {"C_bar": 0.0, "C_under": 0.0, "C_tilde": 0.0, "C_uwave": 0.0}, seed, n_delta)
    deltas = np.linspace(0, T, n_delta + 1)
    cov = mollified_delta_covariance(g, deltas, bump)
    evals, evecs = linalg.eigh(cov)
    root = evecs * np.sqrt(np.clip(evals, 0, None))
    mean = -g**2 * deltas / 2
    numer = np.exp(cov[0, 0] / 2)

    sums = np.zeros(4)
    sq = np.zeros(4)
    done = 0
    c = 0
    while done < mc_paths:
        n = min(chunk, mc_paths - done)
        rng = chunk_rng(seed, c)
        mx, mn = _sup_inf_paths(rng, n, g, T, n_steps)
        X = mean + rng.standard_normal((n, deltas.size)) @ root.T
        vals = np.stack([np.exp(mx), np.exp(mn), np.exp(X.max(axis=1)), np.exp(X.min(axis=1))])
        sums += vals.sum(axis=1)
        sq += (vals**2).sum(axis=1)
        done += n
        c += 1
    m = sums / mc_paths
    se = np.sqrt(np.maximum(sq / mc_paths - m**2, 0) / (mc_paths - 1))
    est = np.array([1 / m[0], 1 / m[1], numer / m[2], numer / m[3]])
    hw = z * est * se / m
    keys = ["C_bar", "C_under", "C_tilde", "C_uwave"]
    return BracketConstants(N, g, *map(float, est), mc_paths, T / n_steps,
                            dict(zip(keys, map(float, hw))), seed, n_delta)


def bracket_measures(values, radii, params: GmcParams, N: int, k: int, grid: CellGrid,
                     constants: BracketConstants, variant: str = "circle", domain: Domain | None = None,
                     bump: BumpProfile = DEFAULT_BUMP, min_subscales: int = 16) -> tuple[MeasureField, MeasureField]:
    """Sup and inf bracket measures over ``ε ∈ [2^{-(k+1)/N}, 2^{-k/N}]``.

    ``values`` has shape ``(..., n_points, M)`` with the regularized field at
    each sub-scale radius in ``radii``.  Masses are scaled by the
    constants; ``MeasureField.unscaled`` recovers the raw sup/inf masses.
    """
    domain = domain or Domain.unit_disk()
    radii = np.asarray(radii, float)
    if radii.size < min_subscales:
        raise MeasureError(f"sub-schedule has {radii.size} < {min_subscales} scales")
    lo, hi = 2.0 ** (-(k + 1) / N), 2.0 ** (-k / N)
    if np.any(radii < lo * (1 - 1e-12)) or np.any(radii > hi * (1 + 1e-12)):
        raise MeasureError("sub-schedule leaves the bracket interval")
    check_admissible(domain, grid, radii.max())
    g = params.gamma
    extra = bump.C if variant == "mollified" else 0.0
    expo = g * np.asarray(values, float) + g**2 / 2 * (np.log(radii) + extra)
    up, down = expo.max(axis=-1), expo.min(axis=-1)
    if variant == "mollified":
        cs, ci = constants.C_tilde, constants.C_uwave
    else:
        cs, ci = constants.C_bar, constants.C_under
    meta = {"N": N, "k": k, "subscales": int(radii.size), "variant": variant}
    sup = MeasureField(domain, grid, hi, cs * _integrate(grid, up), "sup_bracket", cs, meta)
    inf = MeasureField(domain, grid, hi, ci * _integrate(grid, down), "inf_bracket", ci, meta)
    return sup, inf


def bracket_schedule(N: int, k: int, M: int = 32) -> np.ndarray:
    """``M`` radii spanning the bracket interval, endpoints included."""
    return 2.0 ** (-(k + np.linspace(0, 1, M)) / N)


# -- dyadic decay ---------------------------------------------------------------------


@dataclass
class DecayResult:
    k: np.ndarray
    second_moment: np.ndarray
    second_moment_se: np.ndarray
    exact_second_moment: np.ndarray
    fit: ExponentFit
    expected_slope: float
    replicas: int

    def to_dict(self) -> dict:
        return {"k": self.k.tolist(), "second_moment": self.second_moment.tolist(),
                "second_moment_se": self.second_moment_se.tolist(),
                "exact_second_moment": self.exact_second_moment.tolist(),
                "fit": self.fit.to_dict(), "expected_slope": self.expected_slope, "replicas": self.replicas}


def dyadic_lattice(region, k: int, offset=(0.5, 0.5)) -> np.ndarray:
    """Points of ``S`` on the lattice ``2^{-k}(Z² + offset)``."""
    x0, x1, y0, y1 = region
    h = 2.0**-k
    xs = np.arange(np.ceil(x0 / h - offset[0]), np.floor(x1 / h - offset[0]) + 1) + offset[0]
    ys = np.arange(np.ceil(y0 / h - offset[1]), np.floor(y1 / h - offset[1]) + 1) + offset[1]
    xs = xs[(xs * h >= x0) & (xs * h < x1)]
    ys = ys[(ys * h >= y0) & (ys * h < y1)]
    return (h * (xs[None, :] + 1j * ys[:, None])).ravel()


def _lattice_differences(domain, pts, eps, replicas, seed, weight, gamma, mixed=False, chunk=1000):
    """Samples of ``A - B`` for the lattice sums at radii ``ε`` and ``ε/2``.

    ``h_ε`` at ``pts`` is drawn from its exact covariance; ``h_{ε/2}`` adds
    independent ``N(0, c log 2)`` increments (``c = 1`` interior, ``2`` for
    semicircles), which is the law of the average process when the
    ``ε``-balls are pairwise disjoint.  Replicas are processed in chunks.
    """
    kind = semicircle if mixed else circle
    fact = ensemble_factorization(Domain.unit_disk() if mixed else domain, [kind(z, eps) for z in pts], mixed=mixed)
    L = fact.cholesky
    c = 2.0 if mixed else 1.0
    a, q = (gamma / 2, gamma**2 / 4) if mixed else (gamma, gamma**2 / 2)
    out = np.empty(replicas)
    for i, lo in enumerate(range(0, replicas, chunk)):
        n = min(chunk, replicas - lo)
        rng = chunk_rng(seed, i)
        hc = rng.standard_normal((n, L.shape[0])) @ L.T
        hf = hc + np.sqrt(c * np.log(2)) * rng.standard_normal(hc.shape)
        A = weight * np.exp(a * hc + q * np.log(eps)).sum(axis=1)
        B = weight * np.exp(a * hf + q * np.log(eps / 2)).sum(axis=1)
        out[lo : lo + n] = A - B
    return out


def dyadic_decay_study(params: GmcParams, region=(-0.25, 0.25, -0.25, 0.25), k_range=range(3, 8),
                       replicas: int = 2000, seed: int = 0, domain: Domain | None = None,
                       min_replicas: int = 100) -> DecayResult:
    """Second moment of ``A_k - B_k`` against ``k`` on a dyadic lattice of ``S``.

    ``A_k = 2^{-2k} Σ exp h̄_{2^{-k-1}}(z)`` and ``B_k`` the same at radius
    ``2^{-k-2}``, over lattice points ``z`` of spacing ``2^{-k}``.
    """
    domain = domain or Domain.unit_disk()
    if replicas < min_replicas:
        raise MeasureError(f"replicas={replicas} too few for a CI")
    g = params.gamma
    ks = np.asarray(list(k_range))
    m2, se, exact = [], [], []
    for k in ks:
        pts = dyadic_lattice(region, int(k))
        e1 = 2.0 ** (-k - 1)
        w = 2.0 ** (-2 * int(k))
        if g == 0:
            d = np.zeros(replicas)
        else:
            d = _lattice_differences(domain, pts, e1, replicas, seed + 7919 * int(k), w, g)
        sq = d**2
        m2.append(sq.mean())
        se.append(sq.std(ddof=1) / np.sqrt(replicas))
        cr = domain.conformal_radius(pts)
        exact.append((np.exp(g**2 * np.log(2)) - 1) * w**2 * np.sum(e1 ** (-g**2) * cr ** (2 * g**2)))
    m2, se, exact = map(np.asarray, (m2, se, exact))
    if g == 0:
        fit = ExponentFit(0.0, -np.inf, 0.0, 0.0, False)
    else:
        fit = stats_fit_exponent(ks, m2)
    return DecayResult(ks, m2, se, exact, fit, g**2 - 2, replicas)


def boundary_decay_study(params: GmcParams, interval=(-0.5, 0.5), k_range=range(3, 8), replicas: int = 2000,
                         seed: int = 0) -> DecayResult:
    """Boundary analogue: ``A_k = 2^{-k} Σ exp h̄_{2^{-k-1}}`` with ``h̄ = (γ/2) h + (γ²/4) log ε``."""
    g = params.gamma
    ks = np.asarray(list(k_range))
    m2, se, exact = [], [], []
    for k in ks:
        h = 2.0**-int(k)
        a, b = interval
        pts = (np.arange(np.ceil(a / h - 0.5), np.floor(b / h - 0.5) + 1) + 0.5) * h
        pts = pts[(pts >= a) & (pts < b)].astype(complex)
        e1 = h / 2
        if g == 0:
            d = np.zeros(replicas)
        else:
            d = _lattice_differences(None, pts, e1, replicas, seed + 7919 * int(k), h, g, mixed=True)
        sq = d**2
        m2.append(sq.mean())
        se.append(sq.std(ddof=1) / np.sqrt(replicas))
        x = pts.real
        exact.append((2.0 ** (g**2 / 2) - 1) * h**2 * np.sum(e1 ** (-g**2 / 2) * (1 - x**2) ** g**2))
    m2, se, exact = map(np.asarray, (m2, se, exact))
    fit = ExponentFit(0.0, -np.inf, 0.0, 0.0, False) if g == 0 else stats_fit_exponent(ks, m2)
    return DecayResult(ks, m2, se, exact, fit, -(1 - g**2 / 2), replicas)

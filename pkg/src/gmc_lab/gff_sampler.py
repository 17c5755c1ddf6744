"""GFF realizations: spectral sine synthesis on the square, exact Cholesky
sampling of linear functionals, and the mixed/free boundary fields on the
upper half disk."""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .domain_geometry import Domain, DomainError, DomainKind
from .regularization import (DEFAULT_BUMP, BumpProfile, Entry, ensemble_covariance, semicircle,
                             spectral_weights)

log = logging.getLogger(__name__)

MAX_JITTER_REL = 1e-8


class IllConditionedError(linalg.LinAlgError):
    pass


class KernelKind(enum.Enum):
    ZERO_BOUNDARY_GREEN = "zero_boundary_green"
    MIXED_BOUNDARY_REFLECTED = "mixed_boundary_reflected"
    AVERAGE_ENSEMBLE = "average_ensemble"


# -- seeding -----------------------------------------------------------------


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Generator for replica chunk ``chunk`` of master seed ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk),)))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GMC_LAB_THREADS", "1")))
    except ValueError:
        return 1


def pairwise_sum(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Sum that does not depend on how replicas were chunked (numpy's sum is pairwise)."""
    return np.add.reduce(np.asarray(x), axis=axis)


# -- covariance specs ------------------------------------------------------------


@dataclass
class CovarianceSpec:
    """What to factorize.

    ``points`` are complex sites for the pointwise kernels and
    :class:`~gmc_lab.regularization.Entry` objects for ensembles.
    """

    kernel: KernelKind
    points: Sequence = ()
    regularization_jitter: float = 0.0
    mixed: bool = False
    bump: BumpProfile = DEFAULT_BUMP


@dataclass
class FactorizedCovariance:
    matrix: np.ndarray
    cholesky: np.ndarray
    jitter: float
    spec: CovarianceSpec
    domain: Domain
    quadrature_flags: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def factor_id(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.matrix).tobytes()).hexdigest()[:16]


def mixed_boundary_kernel(domain: Domain, x, y):
    """``K(x, y) = G(x, y) + G(x, ȳ)`` with ``G`` the unit-disk Green's function."""
    if domain.kind is not DomainKind.UPPER_HALF_DISK:
        raise DomainError("mixed kernel lives on the upper half disk")
    x, y = np.asarray(x, complex), np.asarray(y, complex)
    for p in (x, y):
        if np.any(p.imag < 0) or np.any(np.abs(p) > 1):
            raise DomainError("point outside the closed upper half disk")
    if np.any(x == y) or np.any(x == np.conj(y)):
        raise DomainError("coincident or mirror-coincident points")

    def g(a, b):
        return np.log(np.abs(1 - a * np.conj(b))) - np.log(np.abs(a - b))

    return g(x, y) + g(x, np.conj(y))


def _kernel_matrix(spec: CovarianceSpec, domain: Domain):
    pts = list(spec.points)
    if not pts:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=bool)
    if not all(isinstance(p, Entry) for p in pts):
        raise DomainError("pointwise Green kernel diverges on the diagonal; use averaged entries")
    mixed = spec.mixed or spec.kernel is KernelKind.MIXED_BOUNDARY_REFLECTED
    return ensemble_covariance(Domain.unit_disk() if mixed else domain, pts, spec.bump, mixed=mixed)


def _closest_pair(spec: CovarianceSpec) -> str:
    pts = list(spec.points)
    if len(pts) < 2:
        return "n/a"
    best, pair = np.inf, (0, 1)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            a, b = pts[i], pts[j]
            da = abs(a.center - b.center) + abs(a.radius - b.radius) if isinstance(a, Entry) else abs(a - b)
            if da < best:
                best, pair = da, (i, j)
    return f"entries {pair[0]} and {pair[1]}: {pts[pair[0]]!r}, {pts[pair[1]]!r}"


def factorize(matrix: np.ndarray, spec: CovarianceSpec | None = None, jitter: float = 0.0) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, adding diagonal jitter only when needed."""
    n = matrix.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    scale = float(np.max(np.diag(matrix)))
    cap = MAX_JITTER_REL * scale
    tries = [jitter] if jitter > 0 else [0.0]
    tries += [cap * 10.0**k for k in (-4, -2, 0)]
    for j in tries:
        if j > cap * (1 + 1e-12):
            break
        try:
            L = linalg.cholesky(matrix + j * np.eye(n), lower=True)
            if j > 0:
                log.warning("covariance needed diagonal jitter %.3g", j)
            return L, j
        except linalg.LinAlgError:
            continue
    where = _closest_pair(spec) if spec is not None else "n/a"
    raise IllConditionedError(f"covariance not positive definite with jitter <= {cap:.3g}; closest pair {where}")


def assemble_covariance(spec: CovarianceSpec, domain: Domain) -> FactorizedCovariance:
    matrix, flags = _kernel_matrix(spec, domain)
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-12):
        raise AssertionError("assembled covariance is not symmetric")
    L, jitter = factorize(matrix, spec, spec.regularization_jitter)
    return FactorizedCovariance(matrix, L, jitter, spec, domain, flags)


def ensemble_factorization(domain: Domain, entries: Sequence[Entry], mixed: bool = False,
                           bump: BumpProfile = DEFAULT_BUMP) -> FactorizedCovariance:
    spec = CovarianceSpec(KernelKind.AVERAGE_ENSEMBLE, list(entries), mixed=mixed, bump=bump)
    return assemble_covariance(spec, domain)


# -- realizations ------------------------------------------------------------------


@dataclass
class FieldRealization:
    """One GFF sample: spectral coefficients or values of an ensemble of functionals."""

    domain: Domain
    seed: int
    sampler_id: str
    coeffs: np.ndarray | None = None
    values: np.ndarray | None = None
    sites: list = field(default_factory=list)
    factor_id: str = ""

    @property
    def mode_cutoff(self) -> int:
        return 0 if self.coeffs is None else self.coeffs.shape[0]

    @property
    def is_spectral(self) -> bool:
        return self.coeffs is not None

    def pair(self, entry: Entry, bump: BumpProfile = DEFAULT_BUMP) -> float:
        if not self.is_spectral:
            raise TypeError("grid realizations are only known on their own sites")
        if self.mode_cutoff == 0:
            return 0.0
        return float(np.sum(self.coeffs * spectral_weights(entry, self.mode_cutoff, bump)))

    def payload(self) -> np.ndarray:
        return self.coeffs if self.is_spectral else self.values

    def to_bytes(self) -> bytes:
        header = {"sampler_id": self.sampler_id, "seed": int(self.seed), "domain": self.domain.to_dict(),
                  "dims": list(self.payload().shape), "factor_id": self.factor_id,
                  "representation": "spectral" if self.is_spectral else "grid"}
        return pack_container(header, self.payload())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FieldRealization":
        header, data = unpack_container(blob)
        kw = dict(domain=Domain.from_dict(header["domain"]), seed=header["seed"],
                  sampler_id=header["sampler_id"], factor_id=header.get("factor_id", ""))
        if header["representation"] == "spectral":
            return cls(coeffs=data, **kw)
        return cls(values=data, **kw)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        if self.is_spectral:
            w.writerow(["j", "k", "alpha"])
            for (j, k), a in np.ndenumerate(self.coeffs):
                w.writerow([j + 1, k + 1, repr(float(a))])
        else:
            w.writerow(["index", "value"])
            for i, v in enumerate(self.values):
                w.writerow([i, repr(float(v))])
        return buf.getvalue()


def sample_spectral(square: Domain, mode_cutoff: int, seed: int) -> FieldRealization:
    """Draw the i.i.d. ``α_jk`` of ``h = Σ α_jk f_jk`` on the unit square."""
    if square.kind is not DomainKind.UNIT_SQUARE:
        raise DomainError("spectral sampler needs the unit square")
    if mode_cutoff < 0:
        raise ValueError("mode_cutoff must be nonnegative")
    rng = chunk_rng(seed, 0)
    coeffs = rng.standard_normal((mode_cutoff, mode_cutoff))
    return FieldRealization(square, seed, f"spectral-sine-J{mode_cutoff}", coeffs=coeffs)


def spectral_weight_matrix(entries: Sequence[Entry], mode_cutoff: int, bump: BumpProfile = DEFAULT_BUMP) -> np.ndarray:
    return np.stack([spectral_weights(e, mode_cutoff, bump).ravel() for e in entries]) if entries else \
        np.zeros((0, mode_cutoff**2))


def spectral_pairings(entries: Sequence[Entry], mode_cutoff: int, replicas: int, seed: int,
                      chunk: int = 256, bump: BumpProfile = DEFAULT_BUMP) -> np.ndarray:
    """``(replicas, len(entries))`` values of the functionals under independent spectral fields.

    Replica ``r`` uses exactly the coefficients of ``sample_spectral(.., seed_r)``
    where chunks of ``chunk`` replicas share one generator stream.
    """
    W = spectral_weight_matrix(entries, mode_cutoff, bump)
    out = np.empty((replicas, len(entries)))
    n_chunks = -(-replicas // chunk)

    def run(c):
        lo, hi = c * chunk, min(replicas, (c + 1) * chunk)
        alpha = chunk_rng(seed, c).standard_normal((hi - lo, mode_cutoff**2))
        out[lo:hi] = alpha @ W.T

    _map(run, range(n_chunks))
    return out


def spectral_covariance(entries: Sequence[Entry], mode_cutoff: int, bump: BumpProfile = DEFAULT_BUMP) -> np.ndarray:
    """Exact covariance of the truncated spectral field's functionals."""
    W = spectral_weight_matrix(entries, mode_cutoff, bump)
    return W @ W.T


def _map(fn, items):
    items = list(items)
    nw = min(worker_count(), len(items)) if items else 1
    if nw <= 1:
        for it in items:
            fn(it)
        return
    with ThreadPoolExecutor(nw) as ex:
        list(ex.map(fn, items))


def sample_from_covariance(fact: FactorizedCovariance, seed: int) -> FieldRealization:
    xi = chunk_rng(seed, 0).standard_normal(fact.dim)
    return FieldRealization(fact.domain, seed, "cholesky", values=fact.cholesky @ xi,
                            sites=list(fact.spec.points), factor_id=fact.factor_id)


def sample_batch(L: np.ndarray, replicas: int, seed: int, chunk: int = 4096) -> np.ndarray:
    """``(replicas, dim)`` draws of ``L ξ`` with chunk-seeded normals."""
    L = np.asarray(L)
    d = L.shape[0]
    out = np.empty((replicas, d))
    n_chunks = -(-replicas // chunk)

    def run(c):
        lo, hi = c * chunk, min(replicas, (c + 1) * chunk)
        out[lo:hi] = chunk_rng(seed, c).standard_normal((hi - lo, d)) @ L.T

    _map(run, range(n_chunks))
    return out


# -- free boundary field --------------------------------------------------------


def harmonic_basis(z, n_modes: int) -> np.ndarray:
    """``(2/√n) Re z^n`` for ``n = 1..n_modes``: Dirichlet-orthonormal on the half disk, mean zero."""
    z = np.asarray(z, dtype=complex)
    n = np.arange(1, n_modes + 1)
    return (2 / np.sqrt(n)) * np.real(np.power.outer(z, n))


def mean_functional_cov(entries: Sequence[Entry]) -> tuple[np.ndarray, float]:
    """Covariance of semicircle entries with the mean of the mixed field over the half disk, and its variance.

    ``u(y) = ∫ K(x, y) dx / |D| = 1 - |y|²`` solves the mixed problem for
    the uniform density, so the semicircle average is ``1 - z² - ε²``.
    """
    z = np.array([e.center.real for e in entries])
    r = np.array([e.radius for e in entries])
    return 1 - z**2 - r**2, 0.5


@dataclass
class FreeBoundarySample:
    mixed: np.ndarray
    harmonic: np.ndarray
    free: np.ndarray
    harmonic_coeffs: np.ndarray
    entries: list


def sample_free_boundary(entries: Sequence[Entry], replicas: int, seed: int, n_modes: int = 16,
                         harmonic_scale: float = 1.0) -> FreeBoundarySample:
    """Semicircle averages of ``h = h₁ + h₂`` with ``h₁`` mixed and ``h₂`` even harmonic.

    ``h₂`` is recentred by the sampled mean of ``h₁`` over the half disk,
    so the free field has mean zero over the domain.
    """
    entries = list(entries)
    for e in entries:
        if e.kind != "semicircle":
            raise DomainError("free-boundary sampling uses semicircle entries")
    fact = ensemble_factorization(Domain.unit_disk(), entries, mixed=True)
    c, v = mean_functional_cov(entries)
    d = len(entries)
    full = np.empty((d + 1, d + 1))
    full[:d, :d] = fact.matrix
    full[:d, d] = full[d, :d] = c
    full[d, d] = v
    L, _ = factorize(full)
    joint = sample_batch(L, replicas, seed)
    mixed, mean = joint[:, :d], joint[:, d]
    coeffs = harmonic_scale * chunk_rng(seed, 10**6).standard_normal((replicas, n_modes))
    basis = harmonic_basis([e.center for e in entries], n_modes)
    harmonic = coeffs @ basis.T - mean[:, None]
    return FreeBoundarySample(mixed, harmonic, mixed + harmonic, coeffs, entries)


def free_boundary_decompose(sample: FreeBoundarySample) -> tuple[np.ndarray, np.ndarray]:
    """The stored ``(mixed, harmonic)`` parts; their sum is the free field."""
    return sample.mixed, sample.harmonic


# -- container IO ------------------------------------------------------------------

MAGIC = b"GMCLAB01"


def pack_container(header: dict, data: np.ndarray) -> bytes:
    head = json.dumps(header, sort_keys=True).encode()
    arr = np.ascontiguousarray(data, dtype="<f8")
    return MAGIC + struct.pack("<Q", len(head)) + head + arr.tobytes()


def unpack_container(blob: bytes) -> tuple[dict, np.ndarray]:
    if blob[:8] != MAGIC:
        raise ValueError("not a gmc_lab container")
    (n,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16 : 16 + n])
    data = np.frombuffer(blob[16 + n :], dtype="<f8").reshape(header["dims"]).copy()
    return header, data


def write_container(path, header: dict, data: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(pack_container(header, data))


def read_container(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        return unpack_container(fh.read())


def semicircle_entries(centers, radii) -> list[Entry]:
    return [semicircle(z, r) for z in centers for r in radii]

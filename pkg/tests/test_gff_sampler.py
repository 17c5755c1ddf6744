import numpy as np
import pytest

from gmc_lab.domain_geometry import Domain, DomainError
from gmc_lab.gff_sampler import (CovarianceSpec, FieldRealization, IllConditionedError, KernelKind,
                                 assemble_covariance, chunk_rng, ensemble_factorization, factorize,
                                 free_boundary_decompose, harmonic_basis, mixed_boundary_kernel, read_container,
                                 sample_batch, sample_free_boundary, sample_from_covariance, sample_spectral,
                                 semicircle_entries, spectral_covariance, spectral_pairings, write_container)
from gmc_lab.regularization import DEFAULT_BUMP, circle, mollified, semicircle
from gmc_lab.stats import variance_and_se

D = Domain.unit_disk()
SQ = Domain.unit_square()


def test_single_circle_factor():
    f = ensemble_factorization(D, [circle(0, 0.1)])
    assert f.matrix.shape == (1, 1)
    assert f.matrix[0, 0] == pytest.approx(np.log(10), abs=1e-12)
    assert f.cholesky[0, 0] == pytest.approx(np.sqrt(np.log(10)))
    assert f.jitter == 0


def test_empty_and_pointwise_specs():
    f = assemble_covariance(CovarianceSpec(KernelKind.AVERAGE_ENSEMBLE, []), D)
    assert f.dim == 0
    with pytest.raises(DomainError, match="diverges"):
        assemble_covariance(CovarianceSpec(KernelKind.AVERAGE_ENSEMBLE, [0.1 + 0j]), D)


def test_ill_conditioned_names_pair():
    ents = [circle(0.0, 0.1), circle(0.5, 0.1), circle(1e-9, 0.1)]
    spec = CovarianceSpec(KernelKind.AVERAGE_ENSEMBLE, ents)
    m = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0 - 1e-4]])
    with pytest.raises(IllConditionedError, match="entries 0 and 2"):
        factorize(m, spec)
    # exact duplicates are PSD: the capped jitter absorbs the zero pivot
    assert ensemble_factorization(D, [circle(0.0, 0.1), circle(0.0, 0.1)]).jitter <= 1e-8 * np.log(10)


def test_factorize_jitter_cap():
    m = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-3]])
    with pytest.raises(IllConditionedError):
        factorize(m)


def test_mixed_kernel():
    H = Domain.upper_half_disk()
    assert mixed_boundary_kernel(H, 0.3 + 0.2j, np.exp(0.7j)) == pytest.approx(0.0, abs=1e-12)
    assert mixed_boundary_kernel(H, 0.3, -0.2) == pytest.approx(2 * D.green(0.3, -0.2))
    with pytest.raises(DomainError):
        mixed_boundary_kernel(D, 0.1j, 0.2j)


def test_monte_carlo_covariance_matches():
    ents = [circle(0, 0.1), circle(0.3, 0.05), circle(-0.2 + 0.2j, 0.1)]
    f = ensemble_factorization(D, ents)
    x = sample_batch(f.cholesky, 40000, seed=5)
    emp = np.cov(x.T)
    assert np.max(np.abs(emp - f.matrix)) < 5 * np.max(np.diag(f.matrix)) / np.sqrt(40000)


def test_sample_batch_reproducible_and_chunk_independent_of_threads(monkeypatch):
    L = np.eye(3)
    a = sample_batch(L, 5000, seed=11, chunk=1000)
    monkeypatch.setenv("GMC_LAB_THREADS", "1")
    b = sample_batch(L, 5000, seed=11, chunk=1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_batch(L, 5000, seed=12, chunk=1000))


def test_chunk_rng_streams_distinct():
    assert chunk_rng(1, 0).standard_normal() != chunk_rng(1, 1).standard_normal()
    assert chunk_rng(1, 3).standard_normal() == chunk_rng(1, 3).standard_normal()


def test_spectral_variance_converges_to_green():
    z, e = 0.5 + 0.5j, 0.1
    f = ensemble_factorization(SQ, [mollified(z, e)])
    exact = f.matrix[0, 0]
    errs = [abs(spectral_covariance([mollified(z, e)], J)[0, 0] - exact) / exact for J in (32, 64, 128)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5


def test_spectral_pairings_match_realizations():
    ents = [mollified(0.5 + 0.5j, 0.1)]
    vals = spectral_pairings(ents, 16, 3, seed=4, chunk=1)
    for r in range(3):
        field = FieldRealization(SQ, 4, "x", coeffs=chunk_rng(4, r).standard_normal((16, 16)))
        assert vals[r, 0] == pytest.approx(field.pair(ents[0]), abs=1e-12)


def test_spectral_mc_variance():
    ents = [mollified(0.3 + 0.4j, 0.08)]
    x = spectral_pairings(ents, 64, 20000, seed=2)[:, 0]
    v, se = variance_and_se(x)
    assert abs(v - spectral_covariance(ents, 64)[0, 0]) < 4 * se


def test_realization_roundtrip(tmp_path):
    s = sample_spectral(SQ, 8, seed=3)
    back = FieldRealization.from_bytes(s.to_bytes())
    assert np.array_equal(back.coeffs, s.coeffs) and back.domain == SQ and back.seed == 3
    f = ensemble_factorization(D, [circle(0, 0.1), circle(0.2, 0.1)])
    g = sample_from_covariance(f, seed=1)
    back = FieldRealization.from_bytes(g.to_bytes())
    assert np.array_equal(back.values, g.values) and back.factor_id == f.factor_id
    assert g.to_csv().splitlines()[0] == "index,value"
    write_container(tmp_path / "x.bin", {"dims": [2, 2]}, np.eye(2))
    h, d = read_container(tmp_path / "x.bin")
    assert np.array_equal(d, np.eye(2))
    with pytest.raises(ValueError):
        FieldRealization.from_bytes(b"garbage!" + bytes(16))


def test_spectral_sampler_needs_square():
    with pytest.raises(DomainError):
        sample_spectral(D, 4, 0)
    assert sample_spectral(SQ, 0, 0).pair(mollified(0.5 + 0.5j, 0.1)) == 0.0


def test_semicircle_ensemble_variance():
    ents = semicircle_entries([0.0, 0.3], [0.05])
    f = ensemble_factorization(D, ents, mixed=True)
    assert f.matrix[0, 0] == pytest.approx(-2 * np.log(0.05), abs=1e-12)


def test_free_boundary_decomposition():
    ents = [semicircle(0.0, 0.05), semicircle(0.4, 0.05)]
    s = sample_free_boundary(ents, 2000, seed=9)
    mixed, harm = free_boundary_decompose(s)
    assert np.allclose(mixed + harm, s.free)
    assert harmonic_basis(np.array([0.5]), 3).shape == (1, 3)
    # mixed part is the zero-mean mixed field
    v, se = variance_and_se(mixed[:, 0])
    assert abs(v - (-2 * np.log(0.05))) < 4 * se

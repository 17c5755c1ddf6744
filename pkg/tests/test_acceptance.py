"""Acceptance studies A1 to A10 at their stated sizes and tolerances.

Each test prints one PASS/FAIL line for its criterion, then asserts. Run with
``pytest -v -s tests/test_acceptance.py`` to see the lines inline.
"""

import time

import pytest

from gmc_lab.harness import StudyConfig, run_study

pytestmark = pytest.mark.slow

SUMMARY: dict[str, str] = {}


def _run(capsys, crit, title, limit_s=None, **kw):
    t0 = time.perf_counter()
    rep = run_study(StudyConfig(**kw))
    dt = time.perf_counter() - t0
    failed = [m for m in rep.metrics if not m.passed]
    within_time = limit_s is None or dt < limit_s
    ok = not failed and within_time
    detail = f"{len(rep.metrics) - len(failed)}/{len(rep.metrics)} metrics pass, {dt:.0f}s"
    if limit_s is not None:
        detail += f" (limit {limit_s:.0f}s)"
    if failed:
        detail += "; failing: " + ", ".join(
            f"{m.id}={m.estimate:.4g}" + (f" vs {m.target:.4g}" if m.target is not None else "")
            + (f" +/- {m.ci_halfwidth:.3g}" if m.ci_halfwidth is not None else "") for m in failed[:6])
    line = f"{crit} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    SUMMARY[crit] = line
    with capsys.disabled():
        print("\n" + line)
    return rep, failed, within_time


def test_a1_covariance_law(capsys):
    _, failed, timely = _run(capsys, "A1", "covariance law", 60, kind="covariance", replicas=100_000, seed=1,
                             options={"checks": "circle"})
    assert not failed and timely


def test_a2_moment_identity(capsys):
    _, failed, timely = _run(capsys, "A2", "moment identity", 300, kind="moment", replicas=100_000, seed=2,
                             gammas=(0.5, 1.0, 1.5), options={"k": "6"})
    assert not failed and timely


def test_a3_mollifier_variance(capsys):
    _, failed, _ = _run(capsys, "A3", "mollifier variance", kind="covariance", replicas=100_000, seed=3,
                        options={"checks": "mollifier", "spectral_replicas": "100000"})
    assert not failed


def test_a4_dyadic_decay(capsys):
    _, failed, timely = _run(capsys, "A4", "dyadic decay", 900, kind="decay", replicas=2000, seed=4,
                             gammas=(0.5, 1.0))
    assert not failed and timely


def test_a5_bracket_constants(capsys):
    _, failed, _ = _run(capsys, "A5", "bracket constants", kind="constants", replicas=100_000, seed=5,
                        gamma=1.0)
    assert not failed


def test_a6_brownian_profile(capsys):
    _, failed, _ = _run(capsys, "A6", "Brownian profile", kind="profile", replicas=100_000, seed=6)
    assert not failed


def test_a7_conformal_rule(capsys):
    _, failed, timely = _run(capsys, "A7", "conformal rule", 1800, kind="conformal", replicas=200, seed=7,
                             gamma=1.0)
    assert not failed and timely


def test_a8_distortion_audit(capsys):
    _, failed, _ = _run(capsys, "A8", "distortion audit", kind="distortion", replicas=4000, seed=8,
                        options={"n_maps": "100", "n_max": "30"})
    assert not failed


def test_a9_boundary_measures(capsys):
    _, failed, _ = _run(capsys, "A9", "boundary measures", kind="boundary", replicas=100_000, seed=9, gamma=1.0,
                        options={"decay_replicas": "2000", "decay_gamma": "1.0"})
    assert not failed


def test_a10_oracle_equivalence(capsys):
    _, failed, _ = _run(capsys, "A10", "oracle equivalence", kind="covariance", replicas=5000, seed=10,
                        options={"checks": "oracle"})
    assert not failed


def test_zz_summary(capsys):
    with capsys.disabled():
        print("\nacceptance summary")
        for k in sorted(SUMMARY, key=lambda s: int(s[1:])):
            print("  " + SUMMARY[k])

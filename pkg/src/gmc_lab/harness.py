"""Study configuration, orchestration and report emission."""

from __future__ import annotations

import configparser
import csv
import enum
import io
import json
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy
from scipy import stats

from . import __version__
from .conformal_check import (borell_tis_check, distorted_bump_pairing, distortion_audit, family_stress_test,
                              schlicht_family)
from .domain_geometry import Domain, DomainKind, Mobius, grid_automorphism_family
from .gff_sampler import (FieldRealization, ensemble_factorization, sample_batch, sample_from_covariance,
                          sample_spectral, spectral_pairings, write_container)
from .gmc_measure import (CellGrid, GmcParams, SegmentCells, boundary_decay_study, boundary_measure,
                          bracket_constants, build_measure, dyadic_decay_study, expected_boundary_mass,
                          expected_cell_mass, grid_entries)
from .regularization import (DEFAULT_BUMP, ScaleSchedule, circle, mollified, mollified_value,
                             mollifier_circle_schedule, radial_profile, semicircle)
from .stats import correlation_and_se, covariance_and_se, stats_fit_exponent, stats_ks_test, variance_and_se


class ConfigError(ValueError):
    pass


class StudyKind(enum.Enum):
    COVARIANCE = "covariance"
    MOMENT = "moment"
    DECAY = "decay"
    CONSTANTS = "constants"
    CONFORMAL = "conformal"
    BOUNDARY = "boundary"
    PROFILE = "profile"
    DISTORTION = "distortion"
    SAMPLE = "sample"


CI_STUDIES = {StudyKind.COVARIANCE, StudyKind.MOMENT, StudyKind.DECAY, StudyKind.CONSTANTS,
              StudyKind.CONFORMAL, StudyKind.BOUNDARY, StudyKind.PROFILE}

DEFAULT_REPLICAS = {
    StudyKind.COVARIANCE: 100_000, StudyKind.MOMENT: 100_000, StudyKind.DECAY: 2000,
    StudyKind.CONSTANTS: 100_000, StudyKind.CONFORMAL: 200, StudyKind.BOUNDARY: 100_000,
    StudyKind.PROFILE: 100_000, StudyKind.DISTORTION: 4000, StudyKind.SAMPLE: 1,
}


@dataclass
class StudyConfig:
    kind: StudyKind
    gamma: float = 1.0
    gammas: tuple = ()
    domain: str = "unit_disk"
    schedule: ScaleSchedule = field(default_factory=lambda: ScaleSchedule(range(3, 8)))
    replicas: int | None = None
    seed: int = 0
    out_dir: str | None = None
    n_se: float = 3.0
    slope_tol: float = 0.3
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.kind, str):
            try:
                self.kind = StudyKind(self.kind)
            except ValueError:
                raise ConfigError(f"study.kind: unknown study {self.kind!r}") from None
        if self.replicas is None:
            self.replicas = DEFAULT_REPLICAS[self.kind]
        if not isinstance(self.replicas, (int, np.integer)) or self.replicas < 1:
            raise ConfigError(f"study.replicas: must be a positive integer, got {self.replicas!r}")
        if self.kind in CI_STUDIES and self.replicas < 100:
            raise ConfigError(f"study.replicas: {self.kind.value} reports CIs and needs >= 100 replicas")
        try:
            GmcParams(self.gamma)
            for g in self.gammas:
                GmcParams(g)
        except ValueError as exc:
            raise ConfigError(f"params.gamma: {exc}") from None
        if self.domain not in ("unit_disk", "unit_square", "upper_half_disk"):
            raise ConfigError(f"domain.kind: unknown domain {self.domain!r}")
        if self.n_se <= 0:
            raise ConfigError("tolerances.n_se: must be positive")

    @property
    def params(self) -> GmcParams:
        return GmcParams(self.gamma)

    def opt(self, key: str, default, cast: Callable = None):
        v = self.options.get(key)
        if v is None:
            return default
        cast = cast or type(default)
        try:
            return cast(v)
        except (TypeError, ValueError):
            raise ConfigError(f"options.{key}: cannot parse {v!r}") from None

    def echo(self) -> dict:
        return {"kind": self.kind.value, "gamma": self.gamma, "gammas": list(self.gammas), "domain": self.domain,
                "schedule": {"k_range": list(self.schedule.k_range), "refinement": self.schedule.refinement,
                             "base": self.schedule.base},
                "replicas": self.replicas, "seed": self.seed, "n_se": self.n_se, "slope_tol": self.slope_tol,
                "options": dict(self.options)}

    @classmethod
    def from_ini(cls, text: str | None, kind: str | None = None, **overrides) -> "StudyConfig":
        cp = configparser.ConfigParser()
        if text:
            cp.read_string(text)

        def get(section, key, default=None):
            return cp.get(section, key, fallback=default) if cp.has_section(section) else default

        kw: dict = {}
        kw["kind"] = kind or get("study", "kind")
        if kw["kind"] is None:
            raise ConfigError("study.kind: missing")
        try:
            if get("study", "replicas") is not None:
                kw["replicas"] = int(get("study", "replicas"))
            if get("study", "seed") is not None:
                kw["seed"] = int(get("study", "seed"))
            if get("params", "gamma") is not None:
                kw["gamma"] = float(get("params", "gamma"))
            if get("params", "gammas") is not None:
                kw["gammas"] = tuple(float(x) for x in get("params", "gammas").split(",") if x.strip())
            if get("domain", "kind") is not None:
                kw["domain"] = get("domain", "kind").strip()
            if cp.has_section("schedule"):
                k_min = int(get("schedule", "k_min", 3))
                k_max = int(get("schedule", "k_max", 7))
                kw["schedule"] = ScaleSchedule(range(k_min, k_max + 1), int(get("schedule", "refinement", 1)),
                                               float(get("schedule", "base", 0.5)))
            if get("output", "dir") is not None:
                kw["out_dir"] = get("output", "dir")
            if get("tolerances", "n_se") is not None:
                kw["n_se"] = float(get("tolerances", "n_se"))
            if get("tolerances", "slope_tol") is not None:
                kw["slope_tol"] = float(get("tolerances", "slope_tol"))
        except ValueError as exc:
            raise ConfigError(f"config: {exc}") from None
        kw["options"] = dict(cp.items("options")) if cp.has_section("options") else {}
        for k, v in overrides.items():
            if v is not None:
                kw[k] = v
        return cls(**kw)


@dataclass
class Metric:
    id: str
    name: str
    estimate: float
    target: float | None
    ci_halfwidth: float | None
    passed: bool
    criterion: str
    exact: bool = False

    def row(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        return d


@dataclass
class StudyReport:
    config: dict
    metrics: list
    wall_clock: float
    versions: dict
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)

    def to_dict(self) -> dict:
        return {"config": self.config, "metrics": [m.row() for m in self.metrics], "passed": self.passed,
                "wall_clock_s": self.wall_clock, "versions": self.versions, "extra": _jsonable(self.extra)}

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        cols = ["id", "name", "estimate", "target", "ci_halfwidth", "passed", "criterion", "exact", "seed"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for m in self.metrics:
            r = m.row()
            r["seed"] = self.config["seed"]
            w.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        return None if not np.isfinite(o) else float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return o


def versions() -> dict:
    return {"gmc_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _within(est, target, se, n_se) -> bool:
    return bool(abs(est - target) <= n_se * se)


# -- studies -------------------------------------------------------------------------


def _study_covariance(cfg: StudyConfig, out) -> tuple[list, dict]:
    checks = [c.strip() for c in cfg.opt("checks", "circle,mollifier,oracle").split(",") if c.strip()]
    metrics, extra = [], {}
    R = cfg.replicas
    if "circle" in checks:
        metrics += _circle_checks(cfg, extra, out)
    if "mollifier" in checks:
        metrics += _mollifier_checks(cfg, extra)
    if "oracle" in checks:
        metrics += _oracle_checks(cfg, extra)
    return metrics, extra


def _circle_checks(cfg, extra, out):
    D = Domain.unit_disk()
    eps = cfg.schedule.eps
    n_grid = cfg.opt("grid_centers", 0)
    entries = [circle(0, e) for e in eps] + [circle(-0.3, 0.05), circle(0.3, 0.05)]
    if n_grid:
        xs = np.linspace(-0.5, 0.5, n_grid)
        grid_scales = eps[: cfg.opt("grid_scales", 4)]
        entries += [circle(complex(x, y), e) for x in xs for y in xs for e in grid_scales]
    fact = ensemble_factorization(D, entries)
    vals = sample_batch(fact.cholesky, cfg.replicas, cfg.seed)
    if out is not None:
        write_container(out / "fields" / "circle_ensemble.bin",
                        {"sampler_id": "cholesky", "seed": cfg.seed, "domain": D.to_dict(),
                         "dims": [min(cfg.replicas, 100), len(entries)], "factor_id": fact.factor_id},
                        vals[:100])
    m = []
    for i, e in enumerate(eps):
        v, se = variance_and_se(vals[:, i])
        m.append(Metric(f"A1.var.eps={e:.6g}", "var h_eps(0) on the unit disk", float(v), float(-np.log(e)),
                        cfg.n_se * float(se), _within(v, -np.log(e), se, cfg.n_se), "A1"))
    c, se = covariance_and_se(vals[:, len(eps)], vals[:, len(eps) + 1])
    g = float(D.green(-0.3, 0.3))
    m.append(Metric("A1.cov.disjoint", "cov of disjoint circles at -0.3, 0.3 (r=0.05)", c, g, cfg.n_se * se,
                    _within(c, g, se, cfg.n_se), "A1"))
    if n_grid:
        emp = np.cov(vals.T)
        err = float(np.max(np.abs(emp - fact.matrix)))
        bound = 5 * float(np.max(np.diag(fact.matrix))) / np.sqrt(cfg.replicas)
        m.append(Metric("A1.cov.grid_max_error", "max entry error of the empirical covariance", err, 0.0, bound,
                        err <= bound, "A1"))
        extra["quadrature_flagged_entries"] = int(np.sum(fact.quadrature_flags))
    return m


def _mollifier_checks(cfg, extra):
    bump = DEFAULT_BUMP
    gate = bump.quadrature_gate()
    m = [Metric("A3.gate.C", "change in C with doubled radial nodes", gate["C_delta"], 0.0, None,
                gate["C_delta"] < 1e-9, "A3", exact=True),
         Metric("A3.gate.mass", "change in bump mass with doubled radial nodes", gate["mass_delta"], 0.0, None,
                gate["mass_delta"] < 1e-9, "A3", exact=True)]
    extra["C"] = bump.C
    D = Domain.unit_disk()
    R = cfg.replicas
    n_circ = cfg.opt("mollifier_circles", 48)
    for z in (0.0, complex(0.3, 0.2)):
        for e in cfg.schedule.eps[:4]:
            radii = mollifier_circle_schedule(e, n_circ)
            fact = ensemble_factorization(D, [circle(z, r) for r in radii])
            vals = mollified_value(sample_batch(fact.cholesky, R, cfg.seed + 17), radii=radii)
            v, se = variance_and_se(vals)
            target = -bump.C - np.log(e) + float(np.log(D.conformal_radius(z)))
            m.append(Metric(f"A3.disk.z={z:.3g}.eps={e:.6g}", "var h*f_eps(z) from circle averages (disk)",
                            float(v), target, cfg.n_se * float(se), _within(v, target, se, cfg.n_se), "A3"))
    sq = Domain.unit_square()
    J = cfg.opt("mode_cutoff", 96)
    Rs = min(R, cfg.opt("spectral_replicas", 20000))
    center = 0.5 + 0.5j
    for e in cfg.schedule.eps[:2]:
        vals = spectral_pairings([mollified(center, e)], J, Rs, cfg.seed + 29)[:, 0]
        v, se = variance_and_se(vals)
        target = -bump.C - np.log(e) + float(np.log(sq.conformal_radius(center)))
        m.append(Metric(f"A3.square.eps={e:.6g}", "var h*f_eps(center) from the spectral sampler (square)",
                        float(v), target, cfg.n_se * float(se), _within(v, target, se, cfg.n_se), "A3"))
    return m


ORACLE_BUMPS = [(0.5, 0.5, 0.1), (0.3, 0.6, 0.08), (0.7, 0.3, 0.12), (0.25, 0.25, 0.05), (0.6, 0.75, 0.06),
                (0.4, 0.4, 0.15), (0.8, 0.8, 0.1), (0.5, 0.2, 0.07), (0.2, 0.7, 0.09), (0.65, 0.55, 0.04)]


def _oracle_checks(cfg, extra):
    sq = Domain.unit_square()
    entries = [mollified(complex(x, y), r) for x, y, r in ORACLE_BUMPS]
    n = min(cfg.replicas, cfg.opt("oracle_replicas", 5000))
    J = cfg.opt("oracle_mode_cutoff", 128)
    spec = spectral_pairings(entries, J, n, cfg.seed + 101)
    fact = ensemble_factorization(sq, entries)
    chol = sample_batch(fact.cholesky, n, cfg.seed + 103)
    alpha = 0.01 / len(entries)
    m = []
    for i, e in enumerate(entries):
        r = stats.ks_2samp(spec[:, i], chol[:, i])
        sd = np.sqrt(fact.matrix[i, i])
        _, p1 = stats_ks_test(spec[:, i] / sd, stats.norm.cdf)
        m.append(Metric(f"A10.ks2.bump{i}", "two-sample KS p, spectral vs Cholesky", float(r.pvalue), None,
                        None, r.pvalue > alpha, "A10"))
        m.append(Metric(f"A10.ks1.bump{i}", "KS p of spectral pairing vs N(0, Green quadrature)", p1, None, None,
                        p1 > alpha, "A10"))
    return m


def _study_moment(cfg: StudyConfig, out):
    D = Domain.unit_disk()
    gammas = cfg.gammas or (0.5, 1.0, 1.5)
    e = 2.0 ** -cfg.opt("k", 6)
    half = cfg.opt("half_width", 0.4)
    n_cells = cfg.opt("cells", 2)
    grid = CellGrid.regular(-half, half, -half, half, n_cells, n_cells, cfg.opt("n_gauss", 4))
    fact = ensemble_factorization(D, grid_entries(grid, e))
    K = fact.matrix
    vals = sample_batch(fact.cholesky, cfg.replicas, cfg.seed)
    m, extra = [], {"eps": e, "cells": grid.n_cells}
    w = grid.weights
    for g in gammas:
        p = GmcParams(g)
        mf = build_measure(vals, p, e, grid, domain=D)
        target = expected_cell_mass(D, grid, p)
        emp = mf.masses.mean(axis=0)
        emp_se = mf.masses.std(axis=0, ddof=1) / np.sqrt(cfg.replicas)
        d = np.diag(K)
        for c in range(grid.n_cells):
            idx = np.arange(c * w.shape[1], (c + 1) * w.shape[1])
            Kc = K[np.ix_(idx, idx)]
            second = np.sum(np.outer(w[c], w[c]) * np.exp(g**2 / 2 * (d[idx][:, None] + d[idx][None, :])
                                                          + g**2 * Kc + g**2 * np.log(e)))
            se = np.sqrt(max(second - target[c] ** 2, 0) / cfg.replicas)
            m.append(Metric(f"A2.gamma={g}.cell{c}", "mean cell mass vs integral of C(z;D)^(gamma^2/2)",
                            float(emp[c]), float(target[c]), cfg.n_se * float(se),
                            _within(emp[c], target[c], se, cfg.n_se), "A2"))
            extra[f"sample_se.gamma={g}.cell{c}"] = float(emp_se[c])
        if out is not None:
            fine = CellGrid.regular(-half, half, -half, half, 8, 8, 1)
            f2 = ensemble_factorization(D, grid_entries(fine, e))
            one = sample_batch(f2.cholesky, 1, cfg.seed + 1)
            mf2 = build_measure(one, p, e, fine, domain=D)
            (out / "heatmaps" / f"moment_gamma{g}.pgm").write_bytes(mf2.heatmap())
            (out / f"moment_masses_gamma{g}.csv").write_text(mf2.to_csv())
    return m, extra


def _study_decay(cfg: StudyConfig, out):
    gammas = cfg.gammas or (0.5, 1.0)
    m, extra = [], {}
    for g in gammas:
        r = dyadic_decay_study(GmcParams(g), k_range=cfg.schedule.k_range, replicas=cfg.replicas, seed=cfg.seed)
        extra[f"gamma={g}"] = r.to_dict()
        m.append(Metric(f"A4.slope.gamma={g}", "fitted log2 slope of E|A_k - B_k|^2", r.fit.slope,
                        r.expected_slope, cfg.slope_tol, abs(r.fit.slope - r.expected_slope) <= cfg.slope_tol,
                        "A4"))
    return m, extra


def _study_constants(cfg: StudyConfig, out):
    Ns = [int(x) for x in cfg.opt("N", "1,2,4,8,16,32,64").split(",")]
    p = cfg.params
    rows = [bracket_constants(p, N, cfg.replicas, seed=cfg.seed + N, n_delta=cfg.opt("n_delta", 64),
                              min_paths=cfg.opt("min_paths", 100_000))
            for N in Ns]
    keys = ["C_bar", "C_under", "C_tilde", "C_uwave"]
    m = []
    last = rows[-1]
    for k in keys:
        est, hw = getattr(last, k), last.half_widths[k]
        m.append(Metric(f"A5.{k}.N={last.N}.within_hw", f"{k}(N) within its half-width of 1", est, 1.0, hw,
                        abs(est - 1) <= hw, "A5"))
        dist = np.array([abs(getattr(r, k) - 1) for r in rows])
        hws = np.array([r.half_widths[k] for r in rows])
        ok = bool(np.all(np.diff(dist) <= hws[1:] + hws[:-1]))
        m.append(Metric(f"A5.{k}.monotone", f"|{k}(N) - 1| nonincreasing in N up to half-widths",
                        float(dist[-1]), 0.0, None, ok, "A5"))
    extra = {"constants": [r.as_dict() for r in rows]}
    if out is not None:
        (out / "constants.json").write_text(json.dumps(extra, indent=2))
    return m, extra


def _study_conformal(cfg: StudyConfig, out):
    family = grid_automorphism_family(cfg.opt("n_radii", 8), cfg.opt("n_rotations", 8), cfg.opt("max_abs_a", 0.6))
    eps = list(cfg.schedule.eps)
    rep = family_stress_test(family, cfg.params, eps, cfg.replicas, cfg.seed)
    single = family_stress_test([Mobius.disk_automorphism(cfg.opt("single_a", 0.3), 0.0)], cfg.params, eps,
                                cfg.replicas, cfg.seed)
    med = np.array([mp["median_relative_residual"] for mp in rep["maps"]])
    ident = [i for i, mp in enumerate(rep["maps"]) if mp["identity"]]
    ident_res = float(np.nanmax(np.abs(med[ident]))) if ident else 0.0
    fam_max = np.array(rep["max_residual"])
    m = [
        Metric("A7.identity_residual", "identity-map residual", ident_res, 0.0, None, ident_res == 0.0, "A7",
               exact=True),
        Metric("A7.family_max_decreasing", "max over family of median residual decreases in eps",
               float(np.max(np.diff(fam_max))), 0.0, None, bool(np.all(np.diff(fam_max) < 0)), "A7"),
        Metric("A7.family_median_decreasing", "family median of median residuals decreases in eps",
               float(np.max(np.diff(rep["median_residual"]))), 0.0, None,
               bool(np.all(np.diff(rep["median_residual"]) < 0)), "A7"),
        Metric("A7.all_maps_shrink", "number of maps whose residual fails to shrink",
               float(len(rep["flagged_maps"])), 0.0, None, not rep["flagged_maps"], "A7", exact=True),
        Metric("A7.final_max", "max over family of median residual at the smallest eps", float(fam_max[-1]), 0.0,
               0.1, fam_max[-1] < 0.1, "A7"),
        Metric("A7.trend_sign", "family-max trend slope has the single-map sign",
               rep["max_trend_slope_log2"], single["median_trend_slope_log2"], None,
               bool(np.sign(rep["max_trend_slope_log2"]) == np.sign(single["median_trend_slope_log2"])), "A7"),
        Metric("A7.koebe_margin", "smallest Koebe containment margin", rep["koebe_min_margin"], 0.0, None,
               rep["koebe_min_margin"] >= 0, "A7", exact=True),
        Metric("A7.errors", "maps with errors", float(len(rep["errors"])), 0.0, None, not rep["errors"], "A7",
               exact=True),
    ]
    if out is not None:
        (out / "conformal_report.json").write_text(json.dumps(_jsonable(rep), indent=2))
    ratio = float(fam_max[-1] / single["median_residual"][-1])
    return m, {"family": rep, "single_map": single, "max_over_single_median_at_smallest_eps": ratio}


def _study_boundary(cfg: StudyConfig, out):
    p = cfg.params
    eps = 2.0 ** -np.arange(cfg.opt("k_min", 4), cfg.opt("k_max", 8) + 1)
    R = cfg.replicas
    m, extra = [], {}
    # variance slope at z = 0
    fact = ensemble_factorization(Domain.unit_disk(), [semicircle(0.0, e) for e in eps], mixed=True)
    vals = sample_batch(fact.cholesky, R, cfg.seed)
    v, se = variance_and_se(vals, axis=0)
    x = np.log(eps)
    wls = np.polyfit(x, v, 1, w=1 / se, cov="unscaled")
    slope, slope_se = wls[0][0], float(np.sqrt(wls[1][0, 0]))
    m.append(Metric("A9.variance_slope", "slope of semicircle variance in log eps", float(slope), -2.0,
                    cfg.n_se * slope_se, _within(slope, -2.0, slope_se, cfg.n_se), "A9"))
    extra["semicircle_variance"] = {"eps": eps, "var": v, "se": se}
    # mean boundary mass across eps
    cells = SegmentCells.regular(-0.5, 0.5, cfg.opt("cells", 4), cfg.opt("n_gauss", 4))
    pts = cells.points.ravel()
    target = expected_boundary_mass(cells, p)
    g = p.gamma
    for i, e in enumerate(eps):
        f2 = ensemble_factorization(Domain.unit_disk(), [semicircle(z, e) for z in pts], mixed=True)
        s = sample_batch(f2.cholesky, R, cfg.seed + 1000 + i)
        mf = boundary_measure(s, p, e, cells)
        K = f2.matrix
        d = np.diag(K)
        nq = cells.weights.shape[1]
        for c in range(cells.n_cells):
            idx = np.arange(c * nq, (c + 1) * nq)
            wc = cells.weights[c]
            second = np.sum(np.outer(wc, wc) * np.exp(g**2 / 8 * (d[idx][:, None] + d[idx][None, :])
                                                      + g**2 / 4 * K[np.ix_(idx, idx)] + g**2 / 2 * np.log(e)))
            sec = np.sqrt(max(second - target[c] ** 2, 0) / R)
            est = float(mf.masses[:, c].mean())
            m.append(Metric(f"A9.mean_mass.eps={e:.6g}.cell{c}", "mean boundary cell mass (eps-free target)",
                            est, float(target[c]), cfg.n_se * sec, _within(est, target[c], sec, cfg.n_se), "A9"))
    # dyadic boundary decay
    r = boundary_decay_study(GmcParams(cfg.opt("decay_gamma", 1.0)), k_range=cfg.schedule.k_range,
                             replicas=cfg.opt("decay_replicas", 2000), seed=cfg.seed)
    extra["decay"] = r.to_dict()
    m.append(Metric("A9.decay_slope", "fitted log2 slope of boundary E|A_k - B_k|^2", r.fit.slope,
                    r.expected_slope, cfg.slope_tol, abs(r.fit.slope - r.expected_slope) <= cfg.slope_tol, "A9"))
    return m, extra


def _study_profile(cfg: StudyConfig, out):
    D = Domain.unit_disk()
    dt = cfg.opt("dt", 0.5)
    n = cfg.opt("intervals", 8)
    t = dt * np.arange(n + 1)
    V = radial_profile(D, 0.0, t, cfg.replicas, cfg.seed)
    inc = np.diff(V, axis=1)
    alpha = 0.01 / n
    m = [Metric("A6.V0", "V_0", float(np.max(np.abs(V[:, 0]))), 0.0, None, bool(np.all(V[:, 0] == 0)), "A6",
                exact=True)]
    for i in range(n):
        stat, pval = stats_ks_test(inc[:, i], stats.norm(scale=np.sqrt(dt)).cdf)
        m.append(Metric(f"A6.ks.interval{i}", "KS p of increment vs N(0, dt)", pval, None, None, pval > alpha,
                        "A6"))
    for i in range(n):
        for j in range(i + 1, n):
            r, se = correlation_and_se(inc[:, i], inc[:, j])
            m.append(Metric(f"A6.corr.{i}.{j}", "increment correlation", r, 0.0, cfg.n_se * se,
                            _within(r, 0.0, se, cfg.n_se), "A6"))
    return m, {"times": t}


def _study_distortion(cfg: StudyConfig, out):
    aud = distortion_audit(cfg.opt("n_maps", 100), cfg.seed, n_max=cfg.opt("n_max", 30))
    m = [Metric("A8.koebe_violations", "Koebe remainder bound violations", float(aud["koebe_violations"]), 0.0,
                None, aud["koebe_violations"] == 0, "A8", exact=True),
         Metric("A8.de_branges_violations", "de Branges |a_n| <= n violations", float(aud["de_branges_violations"]),
                0.0, None, aud["de_branges_violations"] == 0, "A8", exact=True)]
    extra = {"audit": aud}
    fam = schlicht_family(np.random.default_rng(cfg.seed + 1), cfg.opt("pairing_maps", 8))
    gaps = []
    for e in 2.0 ** -np.arange(4, 9, 2):
        d = distorted_bump_pairing(fam, e, cfg.replicas, cfg.seed + 7)
        gaps.append(float(d.gap.mean()))
        ok = bool(np.all(d.gap_variance <= d.variance_bound))
        m.append(Metric(f"A8.gap_var_bound.eps={e:.6g}", "max gap variance over its sup-norm bound",
                        float(np.max(d.gap_variance / d.variance_bound)), None, 1.0, ok, "A8", exact=True))
        m.append(Metric(f"A8.sup_norm.eps={e:.6g}", "max sup-norm distance / eps", float(d.sup_norms.max() / e),
                        None, None, bool(d.sup_norms.max() / e < 10), "A8", exact=True))
        s2 = float(d.gap_variance.max())
        bt = borell_tis_check(d.gap, s2, np.linspace(0, 5 * np.sqrt(s2), 21))
        m.append(Metric(f"A8.tail.eps={e:.6g}", "sub-Gaussian tail pass rate", bt["pass_rate"], 1.0, None,
                        bt["pass_rate"] >= 0.99, "A8"))
    m.append(Metric("A8.sup_gap_decreasing", "mean sup gap decreases in eps", float(np.max(np.diff(gaps))), 0.0,
                    None, bool(np.all(np.diff(gaps) < 0)), "A8"))
    extra["mean_sup_gap"] = gaps
    return m, extra


def _study_sample(cfg: StudyConfig, out):
    sampler = cfg.opt("sampler", "spectral")
    if sampler == "spectral":
        field_ = sample_spectral(Domain.unit_square(), cfg.opt("mode_cutoff", 64), cfg.seed)
    else:
        D = Domain.unit_disk()
        n = cfg.opt("grid", 8)
        grid = CellGrid.regular(-0.5, 0.5, -0.5, 0.5, n, n, 1)
        fact = ensemble_factorization(D, grid_entries(grid, cfg.opt("eps", 0.05)))
        field_ = sample_from_covariance(fact, cfg.seed)
    if out is not None:
        (out / "fields" / f"{sampler}.bin").write_bytes(field_.to_bytes())
        (out / f"{sampler}.csv").write_text(field_.to_csv())
    return [Metric("sample.finite", "all sampled values finite", 1.0, None, None,
                   bool(np.all(np.isfinite(field_.payload()))), "sample", exact=True)], {
        "sampler_id": field_.sampler_id}


STUDIES = {
    StudyKind.COVARIANCE: _study_covariance, StudyKind.MOMENT: _study_moment, StudyKind.DECAY: _study_decay,
    StudyKind.CONSTANTS: _study_constants, StudyKind.CONFORMAL: _study_conformal,
    StudyKind.BOUNDARY: _study_boundary, StudyKind.PROFILE: _study_profile,
    StudyKind.DISTORTION: _study_distortion, StudyKind.SAMPLE: _study_sample,
}


def run_study(cfg: StudyConfig) -> StudyReport:
    """Run a study; when ``cfg.out_dir`` is set also write report.json, metrics.csv and artifacts."""
    out = None
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        for sub in ("", "fields", "heatmaps"):
            (out / sub).mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    metrics, extra = STUDIES[cfg.kind](cfg, out)
    rep = StudyReport(cfg.echo(), metrics, time.perf_counter() - t0, versions(), extra)
    if out is not None:
        (out / "report.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
        (out / "metrics.csv").write_text(rep.metrics_csv())
    return rep

"""Config-driven verification studies.

Every study follows the same pattern: sample the Poisson process restricted
to the gauge tail {gamma >= t_n} once per replicate (the parent), restrict
the parent to each angle's dilated outer support halfspace, evaluate the
U-statistic, and compare normalized empirical moments or Kolmogorov
distances against the limit constants. Replicates use counter-based
(seed, replicate) streams, so results are bitwise reproducible in any
execution order, including parallel.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import limits as lim
from .densities import (DensityModel, classify_regime, expectation_normalizer,
                        generator_from_config, normalizer, tail_params,
                        threshold_rule)
from .errors import ConfigError, DegenerateError, HalfspaceUstatsError
from .geometry import Halfspace, initial_transformation, make_body
from .sampling import restrict, sample_conditional, sample_tail
from .ustats import compute_S, kernel_from_config

STUDIES = ("moments", "clt", "independence", "conditional", "rates")


# -- plan ------------------------------------------------------------------------


@dataclass
class ExperimentPlan:
    study: str
    seed: int
    body_spec: dict
    generator_spec: dict
    kernel_spec: dict
    angles: np.ndarray
    weights: np.ndarray
    n_grid: np.ndarray
    threshold_spec: dict
    r_spec: dict
    replicates: int
    k: int = field(init=False)
    regime: str | None = None
    chi: float | None = None
    s_levels: tuple = (0.0, 0.0)
    conditional_generators: list = field(default_factory=list)
    mc_samples: int = lim.DEFAULT_SAMPLES
    fit_points: int = 5
    bootstrap: int = 500
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k = kernel_from_config(self.kernel_spec).k


def _need(cfg, key, path=""):
    if key not in cfg:
        raise ConfigError(f"missing config field {path}{key}")
    return cfg[key]


def _angles_array(raw, d):
    if not isinstance(raw, list) or not raw:
        raise ConfigError("angles: need a nonempty list")
    out = []
    for i, item in enumerate(raw):
        if isinstance(item, (int, float)):
            if d != 2:
                raise ConfigError(f"angles[{i}]: scalar angles are 2-d only")
            out.append([math.cos(item), math.sin(item)])
        else:
            vec = np.asarray(item, float)
            if vec.shape != (d,):
                raise ConfigError(f"angles[{i}]: expected a {d}-vector")
            nrm = np.linalg.norm(vec)
            if abs(nrm - 1.0) > 1e-6:
                raise ConfigError(f"angles[{i}]: not a unit vector (norm {nrm:.3g})")
            out.append((vec / nrm).tolist())
    return np.asarray(out, float)


def parse_config(cfg):
    """Validate a config dict into an ExperimentPlan; errors name the field."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    study = _need(cfg, "study")
    if study not in STUDIES:
        raise ConfigError(f"study: unknown kind {study!r} (expected one of "
                          f"{', '.join(STUDIES)})")
    body_spec = dict(_need(cfg, "body"))
    if "tag" not in body_spec:
        raise ConfigError("body.tag is required")
    d = int(body_spec.get("d", 2))
    gen_spec = dict(_need(cfg, "generator"))
    kern_spec = dict(_need(cfg, "kernel"))
    angles = _angles_array(_need(cfg, "angles"), d)
    weights = np.asarray(cfg.get("weights", [1.0] + [0.0] * (len(angles) - 1)),
                         float)
    if weights.shape != (len(angles),):
        raise ConfigError("weights: length must match angles")
    if np.all(weights == 0):
        raise ConfigError("weights: must not be all zero")
    n_grid = np.asarray(_need(cfg, "n_grid"), float)
    if n_grid.ndim != 1 or n_grid.size < 1 or np.any(n_grid <= 0):
        raise ConfigError("n_grid: need positive intensities")
    if n_grid.size > 1 and not np.all(np.diff(n_grid) > 0):
        raise ConfigError("n_grid: must be strictly increasing")
    thr = dict(_need(cfg, "thresholds"))
    r_spec = cfg.get("r", {"kind": "const", "value": 1.0})
    if isinstance(r_spec, (int, float)):
        r_spec = {"kind": "const", "value": float(r_spec)}
    replicates = int(cfg.get("replicates", 2000))
    if replicates < 1:
        raise ConfigError("replicates: must be positive")
    if study in ("clt", "independence", "conditional") and replicates < 100:
        raise ConfigError(f"replicates: {study} studies need at least 100")
    s_levels = tuple(cfg.get("s_levels", (0.0, 0.0)))
    if any(s < 0 for s in s_levels):
        raise ConfigError("s_levels: thresholds must be nonnegative")
    regime = cfg.get("regime")
    if regime is not None and regime not in ("sparse", "critical", "dense"):
        raise ConfigError(f"regime: unknown {regime!r}")
    plan = ExperimentPlan(
        study=study, seed=int(cfg.get("seed", 0)), body_spec=body_spec,
        generator_spec=gen_spec, kernel_spec=kern_spec, angles=angles,
        weights=weights, n_grid=n_grid, threshold_spec=thr, r_spec=r_spec,
        replicates=replicates, regime=regime,
        chi=cfg.get("chi"), s_levels=s_levels,
        conditional_generators=cfg.get("conditional_generators", []),
        mc_samples=int(cfg.get("mc_samples", lim.DEFAULT_SAMPLES)),
        fit_points=int(cfg.get("fit_points", 5)),
        bootstrap=int(cfg.get("bootstrap", 500)),
        threads=int(cfg.get("threads", 1)), raw=cfg)
    return plan


def _r_rule(spec):
    kind = spec.get("kind", "const")
    if kind == "const":
        value = float(spec.get("value", 1.0))
        return lambda n: value
    if kind == "power":
        c = float(spec.get("c", 0.0))
        value = float(spec.get("value", 1.0))
        return lambda n: value * float(n) ** -c
    raise ConfigError(f"r.kind: unknown {kind!r}")


def _build(plan):
    body = make_body(plan.body_spec["tag"], d=int(plan.body_spec.get("d", 2)))
    model = DensityModel.build(body, generator_from_config(plan.generator_spec))
    kernel = kernel_from_config(plan.kernel_spec)
    frames = [initial_transformation(body, th) for th in plan.angles]
    t_of_n = threshold_rule(plan.threshold_spec)
    r_of_n = _r_rule(plan.r_spec)
    return model, kernel, frames, t_of_n, r_of_n


# -- replicate engines ----------------------------------------------------------------


def _angle_stats(model, kernel, halfspaces, n, t_n, r_n, seed, rep):
    parent = sample_tail(model, n, t_n, seed, rep)
    return [compute_S(restrict(parent, hs), kernel, r_n).value
            for hs in halfspaces]


def _replicate_matrix(model, kernel, frames, n, t_n, r_n, seed, reps, threads):
    halfspaces = [Halfspace(fr.theta, fr.level, t_n) for fr in frames]
    if threads > 1:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=threads)(
            delayed(_angle_stats)(model, kernel, halfspaces, n, t_n, r_n,
                                  seed, rep) for rep in range(reps))
    else:
        rows = [_angle_stats(model, kernel, halfspaces, n, t_n, r_n, seed, rep)
                for rep in range(reps)]
    return np.asarray(rows, float)


def _conditional_values(model, kernel, frame, n, t_n, r_n, seed, reps, threads):
    hs = Halfspace(frame.theta, frame.level, t_n)

    def one(rep):
        cloud = sample_conditional(model, n, hs, seed, rep)
        return compute_S(cloud, kernel, r_n).value

    if threads > 1:
        from joblib import Parallel, delayed
        vals = Parallel(n_jobs=threads)(delayed(one)(rep) for rep in range(reps))
    else:
        vals = [one(rep) for rep in range(reps)]
    return np.asarray(vals, float)


# -- Kolmogorov distance and rate fits --------------------------------------------------


def kolmogorov_distance(values):
    """Sup distance between the empirical law of the standardized values and
    the standard normal, evaluated at the jump points."""
    values = np.asarray(values, float)
    sd = values.std(ddof=1)
    if sd == 0:
        raise DegenerateError("replicate values are constant; d_K undefined")
    z = np.sort((values - values.mean()) / sd)
    R = z.size
    cdf = norm.cdf(z)
    hi = np.abs(np.arange(1, R + 1) / R - cdf)
    lo = np.abs(np.arange(0, R) / R - cdf)
    return float(max(hi.max(), lo.max()))


def fit_rate_slope(n_values, dk_values, n_points=5):
    """Least-squares slope of log d_K against log n on the last n_points."""
    n_values = np.asarray(n_values, float)[-n_points:]
    dk_values = np.asarray(dk_values, float)[-n_points:]
    if np.any(dk_values <= 0):
        raise DegenerateError("d_K must be positive for the log-log fit")
    coef = np.polyfit(np.log(n_values), np.log(dk_values), 1)
    return float(coef[0])


def bootstrap_slope_ci(n_values, replicate_table, n_points=5, resamples=500,
                       seed=1234, level=0.95):
    """Percentile bootstrap CI of the rate slope: replicates are resampled
    within each n, d_K recomputed, and the slope refit."""
    slopes = np.empty(resamples)
    tables = replicate_table[-n_points:]
    ns = np.asarray(n_values, float)[-n_points:]
    for b in range(resamples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        dks = []
        for vals in tables:
            idx = rng.integers(0, len(vals), size=len(vals))
            dks.append(kolmogorov_distance(np.asarray(vals)[idx]))
        slopes[b] = np.polyfit(np.log(ns), np.log(dks), 1)[0]
    alpha = (1 - level) / 2
    return (float(np.quantile(slopes, alpha)),
            float(np.quantile(slopes, 1 - alpha)))


# -- Mecke first-moment oracle ------------------------------------------------------------


def mecke_edge_mean_quadrature(model, hs, r, n, nodes=16):
    """Deterministic quadrature of the exact first moment of the edge count
    on the restricted process (d = 2):

        E[S_1] = (n^2/2) int_H f(x) [int_{B(x,r) ^ H} f(y) dy] dx.

    The outer integral runs in coordinates aligned with the halfspace
    normal over graded Gauss-Legendre panels; the inner integral is polar
    around x with exact angular limits for the halfspace cut.
    """
    if model.body.d != 2:
        raise ConfigError("the quadrature oracle is 2-d only")
    theta = hs.theta
    b = np.array([-theta[1], theta[0]])
    T = hs.threshold
    from .sampling import _samplers
    radial, _ = _samplers(model)
    radial.ensure_cover(T)
    # radial extent where the tail beyond is negligible relative to the level
    base = radial.neg_log_tail(T)
    s_hi = T
    while radial.neg_log_tail(s_hi) - base < 34.5 and s_hi < radial.s_max:
        s_hi *= 1.25
    rb = model.body.bounding_radius()
    u_max = s_hi * rb
    v_max = s_hi * rb

    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)

    def panel_nodes(a_, b_):
        half = (b_ - a_) / 2
        return a_ + half * (gl_x + 1), gl_w * half

    def graded(lo, hi, scale):
        edges = [lo]
        step = scale
        while edges[-1] < hi:
            edges.append(min(edges[-1] + step, hi))
            step *= 2
        return edges

    scale_v = 1.0 / max(model.generator.psi_prime(T), 1e-2) \
        if model.generator.kind == "light" else T
    v_edges = graded(T, T + v_max, max(scale_v, r))
    u_scale = math.sqrt(max(T * scale_v, 1.0))
    u_edges = graded(0.0, u_max, max(u_scale, r))

    vx, vw = [], []
    for a_, b_ in zip(v_edges[:-1], v_edges[1:]):
        x_, w_ = panel_nodes(a_, b_)
        vx.append(x_)
        vw.append(w_)
    vx, vw = np.concatenate(vx), np.concatenate(vw)
    ux, uw = [], []
    for a_, b_ in zip(u_edges[:-1], u_edges[1:]):
        x_, w_ = panel_nodes(a_, b_)
        ux.append(x_)
        uw.append(w_)
    ux, uw = np.concatenate(ux), np.concatenate(uw)

    # outer nodes (mirrored in u), inner polar rule
    s_nodes, s_weights = panel_nodes(0.0, 1.0)
    p_nodes, p_weights = gl_x, gl_w

    uu, vv = np.meshgrid(ux, vx, indexing="ij")
    ww = np.outer(uw, vw)

    total = 0.0
    for side in (1.0, -1.0):
        x_side = side * uu[..., None] * b + vv[..., None] * theta
        inner = np.zeros(uu.shape)
        for s, s_w in zip(s_nodes, s_weights):
            # angular window where x + r s w stays in the halfspace:
            # sin(ang) >= (T - v)/(r s); the full circle when that is <= -1
            mlim = (T - vv) / (r * s)
            lo_ang = np.where(mlim <= -1.0, -np.pi / 2,
                              np.arcsin(np.clip(mlim, -1, 1)))
            width = np.where(mlim <= -1.0, 2 * np.pi, np.pi - 2 * lo_ang)
            ang = lo_ang[..., None] + (p_nodes + 1) / 2 * width[..., None]
            wts = np.broadcast_to(p_weights, ang.shape) * width[..., None] / 2
            y = (x_side[..., None, :]
                 + r * s * (np.cos(ang)[..., None] * b
                            + np.sin(ang)[..., None] * theta))
            inner += s_w * r * r * s * np.sum(model.density(y) * wts, axis=-1)
        total += float(np.sum(ww * model.density(x_side) * inner))
    return 0.5 * n * n * total


# -- studies ---------------------------------------------------------------------------


def run_moment_study(plan, cache_dir=None, progress=None):
    model, kernel, frames, t_of_n, r_of_n = _build(plan)
    k = kernel.k
    t_seq = np.array([float(t_of_n(n)) for n in plan.n_grid])
    r_seq = np.array([float(r_of_n(n)) for n in plan.n_grid])
    tail = tail_params(model, t_seq, r_seq)
    regime, chi = (plan.regime, plan.chi) if plan.regime else \
        classify_regime(model, plan.n_grid, t_seq, r_seq, tail.tail_class)
    if plan.regime and plan.regime == "critical" and plan.chi is None:
        raise ConfigError("chi: critical regime override needs a value")

    constants = {}
    for i, fr in enumerate(frames):
        key = f"angle{i}"
        exp_lc = lim.cached_constant(
            cache_dir, f"expectation-{key}", {"plan": _plan_hash(plan), "i": i},
            lambda fr=fr: lim.expectation_limit(model, k, fr, kernel, tail,
                                                tail.r, samples=plan.mc_samples))
        comps = lim.variance_components(model, k, fr, kernel, tail, tail.r,
                                        regime, samples=plan.mc_samples)
        var_lc = lim.variance_limit(tail.tail_class, k, regime, comps, chi)
        constants[key] = {"expectation": exp_lc, "variance": var_lc}

    rows = []
    rep_tables = []
    for idx, n in enumerate(plan.n_grid):
        t_n, r_n = t_seq[idx], r_seq[idx]
        table = _replicate_matrix(model, kernel, frames, n, t_n, r_n,
                                  plan.seed, plan.replicates, plan.threads)
        rep_tables.append(table)
        mean = table.mean(axis=0)
        var = table.var(axis=0, ddof=1)
        cov = np.cov(table.T) if len(frames) > 1 else np.array([[var[0]]])
        tau = normalizer(model, k, n, t_n, r_n, regime, tail.tail_class)
        e_norm = expectation_normalizer(model, k, n, t_n, r_n, tail.tail_class)
        row = {"n": float(n), "t_n": float(t_n), "r_n": float(r_n),
               "tau": tau, "angles": []}
        for i in range(len(frames)):
            c = constants[f"angle{i}"]
            mean_se = table[:, i].std(ddof=1) / math.sqrt(plan.replicates)
            m4 = np.mean((table[:, i] - mean[i]) ** 4)
            var_se = math.sqrt(max(m4 - var[i] ** 2, 0.0) / plan.replicates)
            row["angles"].append({
                "mean": float(mean[i]), "mean_se": float(mean_se),
                "var": float(var[i]), "var_se": float(var_se),
                "mean_ratio": float(mean[i] / (e_norm * c["expectation"].value)),
                "mean_ratio_se": float(mean_se / (e_norm * c["expectation"].value)),
                "var_ratio": float(var[i] / (tau * c["variance"].value)),
                "var_ratio_se": float(var_se / (tau * c["variance"].value)),
            })
        if len(frames) > 1:
            pairs = []
            for i in range(len(frames)):
                for j in range(i + 1, len(frames)):
                    denom = math.sqrt(var[i] * var[j])
                    pairs.append({
                        "i": i, "j": j,
                        "cov_norm": float(cov[i, j] / tau),
                        "corr": float(cov[i, j] / denom) if denom > 0 else 0.0,
                        "corr_se": 1.0 / math.sqrt(plan.replicates),
                    })
            row["cross"] = pairs
        rows.append(row)
        if progress:
            progress(f"moments n={n:g} done")
    report = {
        "study": "moments", "regime": regime, "chi": chi,
        "tail_class": tail.tail_class,
        "constants": {key: {kk: vv.record() for kk, vv in val.items()}
                      for key, val in constants.items()},
        "rows": rows,
    }
    return report, rep_tables


def run_clt_study(plan, cache_dir=None, progress=None):
    model, kernel, frames, t_of_n, r_of_n = _build(plan)
    k = kernel.k
    t_seq = np.array([float(t_of_n(n)) for n in plan.n_grid])
    r_seq = np.array([float(r_of_n(n)) for n in plan.n_grid])
    tail = tail_params(model, t_seq, r_seq)
    regime, chi = (plan.regime, plan.chi) if plan.regime else \
        classify_regime(model, plan.n_grid, t_seq, r_seq, tail.tail_class)

    comps0 = lim.variance_components(model, k, frames[0], kernel, tail, tail.r,
                                     regime, samples=plan.mc_samples)
    var_lc = lim.variance_limit(tail.tail_class, k, regime, comps0, chi)
    if var_lc.value <= 5 * var_lc.se:
        raise DegenerateError(
            "variance limit is not positive at 5 standard errors; the kernel "
            "fails the positivity conditions needed for a CLT")

    rows, g_tables, angle_tables = [], [], []
    for idx, n in enumerate(plan.n_grid):
        t_n, r_n = t_seq[idx], r_seq[idx]
        table = _replicate_matrix(model, kernel, frames, n, t_n, r_n,
                                  plan.seed, plan.replicates, plan.threads)
        g_vals = table @ plan.weights
        g_tables.append(g_vals)
        angle_tables.append(table)
        dk = kolmogorov_distance(g_vals)
        row = {"n": float(n), "t_n": float(t_n), "r_n": float(r_n), "dk": dk}
        if len(frames) > 1:
            cc = np.corrcoef(table.T)
            row["cross_corr"] = float(cc[0, 1])
        rows.append(row)
        if progress:
            progress(f"clt n={n:g} dk={dk:.4f}")
    dks = [r["dk"] for r in rows]
    slope = fit_rate_slope(plan.n_grid, dks, plan.fit_points)
    ci = bootstrap_slope_ci(plan.n_grid, g_tables, plan.fit_points,
                            plan.bootstrap, seed=plan.seed + 99)
    report = {"study": "clt", "regime": regime, "chi": chi,
              "tail_class": tail.tail_class,
              "variance_limit": var_lc.record(),
              "rows": rows, "slope": slope, "slope_ci": ci}
    if tail.tail_class == "heavy" and len(frames) > 1:
        pred = _heavy_correlation_prediction(plan, model, kernel, frames,
                                             regime, chi)
        report["correlation_prediction"] = pred
    return report, angle_tables


def _heavy_correlation_prediction(plan, model, kernel, frames, regime, chi):
    alpha = model.generator.alpha
    c12 = lim.covariance_function(kernel.k, model.body, kernel, alpha,
                                  frames[0].theta, frames[1].theta, regime,
                                  chi, samples=plan.mc_samples)
    c11 = lim.covariance_function(kernel.k, model.body, kernel, alpha,
                                  frames[0].theta, frames[0].theta, regime,
                                  chi, samples=plan.mc_samples)
    c22 = lim.covariance_function(kernel.k, model.body, kernel, alpha,
                                  frames[1].theta, frames[1].theta, regime,
                                  chi, samples=plan.mc_samples)
    denom = math.sqrt(c11.value * c22.value)
    corr = c12.value / denom if denom > 0 else 0.0
    rel = 0.0
    if c12.value != 0:
        rel = math.sqrt((c12.se / c12.value) ** 2
                        + (0.5 * c11.se / c11.value) ** 2
                        + (0.5 * c22.se / c22.value) ** 2)
    return {"corr": corr, "corr_se": abs(corr) * rel,
            "C12": c12.record(), "C11": c11.record(), "C22": c22.record()}


def run_independence_study(plan, cache_dir=None, progress=None):
    if len(plan.angles) < 2:
        raise ConfigError("angles: independence study needs two angles")
    model, kernel, frames, t_of_n, r_of_n = _build(plan)
    t_seq = np.array([float(t_of_n(n)) for n in plan.n_grid])
    r_seq = np.array([float(r_of_n(n)) for n in plan.n_grid])
    tail = tail_params(model, t_seq, r_seq)
    regime, chi = (plan.regime, plan.chi) if plan.regime else \
        classify_regime(model, plan.n_grid, t_seq, r_seq, tail.tail_class)
    s1, s2 = plan.s_levels[:2]
    rows = []
    for idx, n in enumerate(plan.n_grid):
        t_n, r_n = t_seq[idx], r_seq[idx]
        table = _replicate_matrix(model, kernel, frames[:2], n, t_n, r_n,
                                  plan.seed, plan.replicates, plan.threads)
        mu = table.mean(axis=0)
        sd = table.std(axis=0, ddof=1)
        thr1 = s1 * sd[0] + mu[0]
        thr2 = s2 * sd[1] + mu[1]
        ind1 = table[:, 0] <= thr1
        ind2 = table[:, 1] <= thr2
        p1, p2 = float(np.mean(ind1)), float(np.mean(ind2))
        p12 = float(np.mean(ind1 & ind2))
        gap = abs(p12 - p1 * p2)
        gap_se = math.sqrt(max(p12 * (1 - p12), 0.25e-2) / plan.replicates)
        rows.append({"n": float(n), "t_n": float(t_n), "p1": p1, "p2": p2,
                     "p12": p12, "gap": gap, "gap_se": gap_se,
                     "mu": mu.tolist(), "sigma": sd.tolist(),
                     "s_thresholds": [float(thr1), float(thr2)],
                     "corr": float(np.corrcoef(table.T)[0, 1])})
        if progress:
            progress(f"independence n={n:g} gap={gap:.4f}")
    gaps = np.array([r["gap"] for r in rows])
    trend = float(np.polyfit(np.log(plan.n_grid), gaps, 1)[0]) \
        if len(rows) > 1 else 0.0
    report = {"study": "independence", "tail_class": tail.tail_class,
              "regime": regime, "chi": chi, "rows": rows,
              "final_gap": float(gaps[-1]), "gap_trend": trend}
    if tail.tail_class == "heavy":
        report["correlation_prediction"] = _heavy_correlation_prediction(
            plan, model, kernel, frames, regime, chi)
        corr_emp = np.array([r["corr"] for r in rows[-3:]])
        report["empirical_corr_tail_mean"] = float(np.mean(corr_emp))
    return report


def run_conditional_study(plan, cache_dir=None, progress=None):
    """Kolmogorov-rate comparison of the conditioned statistic across the
    three tail classes on one body, at matched (n, t_n)."""
    if not plan.conditional_generators:
        raise ConfigError("conditional_generators: the conditional study "
                          "needs a list of generator specs")
    body = make_body(plan.body_spec["tag"], d=int(plan.body_spec.get("d", 2)))
    kernel = kernel_from_config(plan.kernel_spec)
    k = kernel.k
    d = body.d
    frame = initial_transformation(body, plan.angles[0])
    t_of_n = threshold_rule(plan.threshold_spec)
    r_of_n = _r_rule(plan.r_spec)
    t_seq = np.array([float(t_of_n(n)) for n in plan.n_grid])
    r_seq = np.array([float(r_of_n(n)) for n in plan.n_grid])
    if len(plan.n_grid) > 1 and not np.all(np.diff(t_seq**d / plan.n_grid) < 0):
        raise ConfigError("thresholds: conditional study needs t_n = o(n^{1/d})")

    out = {}
    tables_by_model = {}
    for mi, gen_spec in enumerate(plan.conditional_generators):
        model = DensityModel.build(body, generator_from_config(gen_spec))
        tail = tail_params(model, t_seq, r_seq)
        label = gen_spec.get("label", f"{tail.tail_class}:{model.generator.name}")
        orders = lim.conditional_variance_order(model, k, plan.n_grid, t_seq,
                                                tail.tail_class)
        rows, tables, means = [], [], []
        for idx, n in enumerate(plan.n_grid):
            t_n, r_n = t_seq[idx], r_seq[idx]
            vals = _conditional_values(model, kernel, frame, n, t_n, r_n,
                                       plan.seed + 1000 * mi, plan.replicates,
                                       plan.threads)
            dk = kolmogorov_distance(vals)
            rows.append({"n": float(n), "t_n": float(t_n), "dk": dk,
                         "mean": float(vals.mean()),
                         "mean_se": float(vals.std(ddof=1)
                                          / math.sqrt(plan.replicates))})
            tables.append(vals)
            means.append(vals.mean())
            if progress:
                progress(f"conditional[{label}] n={n:g} dk={dk:.4f}")
        dks = [r["dk"] for r in rows]
        slope = fit_rate_slope(plan.n_grid, dks, plan.fit_points)
        ci = bootstrap_slope_ci(plan.n_grid, tables, plan.fit_points,
                                plan.bootstrap, seed=plan.seed + 7 * mi)
        growth = float(np.polyfit(np.log(plan.n_grid), np.log(means), 1)[0])
        pred_growth = _predicted_mean_exponent(model, tail, k, plan.n_grid, t_seq)
        out[label] = {"tail_class": tail.tail_class, "rows": rows,
                      "dk_slope": slope, "dk_slope_ci": ci,
                      "dk_order_exponent": orders["dk_exponent"],
                      "mean_growth_exponent": growth,
                      "mean_growth_predicted": pred_growth,
                      "orders": orders}
        tables_by_model[label] = tables
    labels = list(out.keys())
    ordering = []
    for idx in range(len(plan.n_grid)):
        ordering.append({lab: out[lab]["rows"][idx]["dk"] for lab in labels})
    report = {"study": "conditional", "models": out, "dk_by_n": ordering}
    return report, tables_by_model


def _predicted_mean_exponent(model, tail, k, n_grid, t_seq):
    """Fitted exponent of the predicted conditional mean order along the
    grid: n^{k+1} for the lite class, n^{k+1}/q_n^k otherwise (heavy uses
    the same reduction with t_n^{dk})."""
    n_grid = np.asarray(n_grid, float)
    if tail.tail_class == "lite":
        pred = n_grid ** (k + 1)
    elif tail.tail_class == "light":
        pred = n_grid ** (k + 1) / tail.q_seq**k
    else:
        pred = n_grid ** (k + 1) / t_seq ** (model.body.d * k)
    return float(np.polyfit(np.log(n_grid), np.log(pred), 1)[0])


def run_rates_study(plan, cache_dir=None, progress=None):
    model, kernel, frames, t_of_n, r_of_n = _build(plan)
    k = kernel.k
    t_seq = np.array([float(t_of_n(n)) for n in plan.n_grid])
    r_seq = np.array([float(r_of_n(n)) for n in plan.n_grid])
    tail = tail_params(model, t_seq, r_seq)
    regime, chi = (plan.regime, plan.chi) if plan.regime else \
        classify_regime(model, plan.n_grid, t_seq, r_seq, tail.tail_class)
    comps = lim.variance_components(model, k, frames[0], kernel, tail, tail.r,
                                    regime, samples=plan.mc_samples)
    var_lc = lim.variance_limit(tail.tail_class, k, regime, comps, chi)
    diag = lim.clt_rate_diagnostic(model, frames[0], kernel, plan.n_grid,
                                   t_of_n, r_of_n, tail.tail_class, regime,
                                   var_lc, seed=plan.seed + 5)
    return {"study": "rates", "tail_class": tail.tail_class, "regime": regime,
            "chi": chi, "variance_limit": var_lc.record(),
            "diagnostic": diag.record()}


# -- artifact writing ------------------------------------------------------------


def _plan_hash(plan):
    return hashlib.sha256(
        json.dumps(plan.raw, sort_keys=True).encode()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.10g}" if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def execute(config, out_dir, seed=None, threads=None, progress=print):
    """Run the study named in the config and write its artifacts.

    `config` is a path or a dict. Returns the artifact directory. Writes
    <study>_report.json, study-specific CSV plot data, and manifest.json
    (config hash, seed, version).
    """
    if isinstance(config, (str, os.PathLike)):
        with open(config) as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        cfg = dict(config)
    if seed is not None:
        cfg["seed"] = int(seed)
    if threads is not None:
        cfg["threads"] = int(threads)
    plan = parse_config(cfg)
    os.makedirs(out_dir, exist_ok=True)
    cache_dir = os.path.join(out_dir, "constants-cache")

    if plan.study == "moments":
        report, _ = run_moment_study(plan, cache_dir, progress)
        _write_csv(os.path.join(out_dir, "ratios.csv"),
                   ["n", "angle", "mean_ratio", "mean_ratio_se", "var_ratio",
                    "var_ratio_se"],
                   [(row["n"], i, a["mean_ratio"], a["mean_ratio_se"],
                     a["var_ratio"], a["var_ratio_se"])
                    for row in report["rows"]
                    for i, a in enumerate(row["angles"])])
        report_name = "moments_report.json"
    elif plan.study == "clt":
        report, _ = run_clt_study(plan, cache_dir, progress)
        _write_csv(os.path.join(out_dir, "dk.csv"), ["n", "dk"],
                   [(row["n"], row["dk"]) for row in report["rows"]])
        report_name = "clt_report.json"
    elif plan.study == "independence":
        report = run_independence_study(plan, cache_dir, progress)
        _write_csv(os.path.join(out_dir, "gap.csv"), ["n", "gap", "gap_se"],
                   [(row["n"], row["gap"], row["gap_se"])
                    for row in report["rows"]])
        report_name = "independence_report.json"
    elif plan.study == "conditional":
        report, _ = run_conditional_study(plan, cache_dir, progress)
        rows = []
        for label, res in report["models"].items():
            for row in res["rows"]:
                rows.append((label, row["n"], row["dk"], row["mean"]))
        _write_csv(os.path.join(out_dir, "conditional_dk.csv"),
                   ["model", "n", "dk", "mean"], rows)
        report_name = "conditional_report.json"
    elif plan.study == "rates":
        report = run_rates_study(plan, cache_dir, progress)
        diag = report["diagnostic"]
        _write_csv(os.path.join(out_dir, "bound_rate.csv"),
                   ["n", "bound_rate"],
                   list(zip(diag["n"], diag["bound_rate"])))
        report_name = "rates_report.json"
    else:  # pragma: no cover - parse_config rejects unknown studies
        raise ConfigError(f"study: unknown kind {plan.study!r}")

    report_path = os.path.join(out_dir, report_name)
    with open(report_path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
    manifest = {
        "config_sha256": hashlib.sha256(
            json.dumps(cfg, sort_keys=True).encode()).hexdigest(),
        "seed": plan.seed,
        "study": plan.study,
        "version": _version(),
        "report": report_name,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return out_dir


def _version():
    from . import __version__
    return __version__


def run_study(plan, cache_dir=None, progress=None):
    """Dispatch a parsed plan to its study runner; returns the report dict."""
    if plan.study == "moments":
        return run_moment_study(plan, cache_dir, progress)[0]
    if plan.study == "clt":
        return run_clt_study(plan, cache_dir, progress)[0]
    if plan.study == "independence":
        return run_independence_study(plan, cache_dir, progress)
    if plan.study == "conditional":
        return run_conditional_study(plan, cache_dir, progress)[0]
    if plan.study == "rates":
        return run_rates_study(plan, cache_dir, progress)
    raise ConfigError(f"study: unknown kind {plan.study!r}")

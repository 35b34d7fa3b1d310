"""Limit constants of the moment asymptotics and the CLT rate diagnostic.

Each Monte Carlo constant uses an importance sampler matched to the exact
exponential/Gaussian/power factors of its integrand, leaving only bounded
kernel and indicator terms, so estimator variance is finite by the kernel
bound. Estimates are batch means over independent counter-based streams;
the standard error is the batch-mean spread.

Notation used throughout: a frame at angle theta supplies z (|det A|), the
map A, and grad gamma(p(theta)) = A^{-T} e_d; the two inner products
<A^{-1} y, e_d> and <grad gamma(p), y> appearing in the displays coincide
by this frame identity, and the gradient form is used for both.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .densities import (expectation_normalizer, gauge_power_halfspace_integral,
                        light_q, normalizer)
from .errors import (ConfigError, DegenerateError, DependencyError,
                     InvalidInputError)
from .geometry import Halfspace
from .sampling import ConeSampler, replicate_rng

TWO_PI = 2.0 * math.pi
DEFAULT_SAMPLES = 1 << 20
DEFAULT_BATCHES = 64


@dataclass
class LimitConstant:
    kind: str
    value: float
    se: float
    regime: str | None = None
    inputs: dict = field(default_factory=dict)

    def record(self):
        return {"kind": self.kind, "regime": self.regime, "value": self.value,
                "se": self.se, "inputs": self.inputs}


def _ball_volume(d, radius=1.0):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


def _uniform_ball(rng, m, d, radius):
    x = rng.standard_normal((m, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    u = rng.random(m) ** (1.0 / d)
    return radius * x * u[:, None]


def _mc_batches(fn, seed, samples, batches):
    per = max(samples // batches, 1)
    means = np.empty(batches)
    for b in range(batches):
        rng = replicate_rng(seed, b)
        means[b] = fn(rng, per)
    return float(np.mean(means)), float(np.std(means, ddof=1) / math.sqrt(batches))


def _precision_note(value, se):
    if value != 0 and se > 0.05 * abs(value):
        return "relative standard error exceeds 5%; increase the sample budget"
    return None


# -- light-tail constants (xi > 0) -------------------------------------------------


def expectation_limit_light(k, frame, kernel, xi, r, samples=DEFAULT_SAMPLES,
                            batches=DEFAULT_BATCHES, seed=20_0):
    """Limit of E[S_{k,n}] / ([n g]^{k+1} r^{dk} q_n) for xi > 0.

    Sampler: v ~ Exp(k+1) absorbs e^{-(k+1)v}; the horizontal Gaussian block
    integrates to C_{k,d} = (2 pi /(k+1))^{(d-1)/2} exactly; y_i uniform in
    the locality ball. Indicators and the exponential tilt stay in the
    integrand. xi = inf (or r = 0) collapses both to the plain case.
    """
    if not (xi > 0):
        raise InvalidInputError("expectation limit requires xi > 0")
    d = frame.d
    kappa = kernel.kappa
    rho = 0.0 if (math.isinf(xi) or r == 0) else r / xi
    grad = frame.normal_gradient()
    vball = _ball_volume(d, kappa)

    def batch(rng, m):
        y = _uniform_ball(rng, m * k, d, kappa).reshape(m, k, d)
        v = rng.exponential(1.0 / (k + 1), size=m)
        tuples = np.concatenate([np.zeros((m, 1, d)), y], axis=1)
        w = kernel._value(tuples, 1.0)
        if rho > 0:
            gi = y @ grad
            w = w * np.all(v[:, None] >= -rho * gi, axis=1) \
                  * np.exp(-rho * np.sum(gi, axis=1))
        return float(np.mean(w))

    mean, se = _mc_batches(batch, seed, samples, batches)
    ckd = (TWO_PI / (k + 1)) ** ((d - 1) / 2)
    scale = ckd * frame.z / math.factorial(k + 1) * vball**k / (k + 1)
    lc = LimitConstant("expectation", scale * mean, scale * se,
                       inputs={"k": k, "xi": xi, "r": r, "kernel": kernel.kind,
                               "theta": frame.theta.tolist()})
    note = _precision_note(lc.value, lc.se)
    if note:
        lc.inputs["warning"] = note
    return lc


def _paired_tuples(zero_and_y, k, l):
    """Split (m, 2k+1-l, d) samples into the two kernel tuples that share
    the origin and the first l-1 points."""
    m, _, d = zero_and_y.shape
    zero = np.zeros((m, 1, d))
    shared = zero_and_y[:, : l - 1] if l > 1 else zero_and_y[:, :0]
    t1 = np.concatenate([zero, shared, zero_and_y[:, l - 1: k]], axis=1)
    t2 = np.concatenate([zero, shared, zero_and_y[:, k:]], axis=1)
    return t1, t2


def integral_Ikl(k, l, frame, kernel, xi, r, samples=DEFAULT_SAMPLES,
                 batches=DEFAULT_BATCHES, seed=20_1):
    """The variance component integral for xi > 0 at overlap l.

    Two kernel factors share the origin plus l-1 of the offsets; the
    common vertical coordinate is Exp(2k+2-l), the horizontal Gaussian
    gives (2 pi/(2k+2-l))^{(d-1)/2}, offsets are uniform in the locality
    ball.
    """
    if not 1 <= l <= k + 1:
        raise InvalidInputError("overlap l must lie in 1..k+1")
    if not (xi > 0):
        raise InvalidInputError("integral requires xi > 0")
    d = frame.d
    kappa = kernel.kappa
    nsamp = 2 * k + 1 - l
    m_exp = 2 * k + 2 - l
    rho = 0.0 if (math.isinf(xi) or r == 0) else r / xi
    grad = frame.normal_gradient()
    vball = _ball_volume(d, kappa)

    def batch(rng, m):
        y = _uniform_ball(rng, m * nsamp, d, kappa).reshape(m, nsamp, d)
        v = rng.exponential(1.0 / m_exp, size=m)
        t1, t2 = _paired_tuples(y, k, l)
        w = kernel._value(t1, 1.0) * kernel._value(t2, 1.0)
        if rho > 0:
            gi = y @ grad
            w = w * np.all(v[:, None] >= -rho * gi, axis=1) \
                  * np.exp(-rho * np.sum(gi, axis=1))
        return float(np.mean(w))

    mean, se = _mc_batches(batch, seed, samples, batches)
    scale = frame.z * (TWO_PI / m_exp) ** ((d - 1) / 2) / m_exp * vball**nsamp
    lc = LimitConstant("integral-Ikl", scale * mean, scale * se,
                       inputs={"k": k, "l": l, "xi": xi, "r": r,
                               "kernel": kernel.kind,
                               "theta": frame.theta.tolist()})
    note = _precision_note(lc.value, lc.se)
    if note:
        lc.inputs["warning"] = note
    return lc


# -- lite-tail constants (xi = 0, beta < inf) -----------------------------------------


def expectation_limit_lite(k, frame, kernel, beta, r, samples=DEFAULT_SAMPLES,
                           batches=DEFAULT_BATCHES, seed=20_2):
    """Limit of E[S_{k,n}] / [n g q_n]^{k+1} for xi = 0, beta < inf.

    The limit lives on horizontal coordinates only (loss of dimension):
    points are A(beta u_i, 0) with u_i standard Gaussians in R^{d-1}.
    At beta = 0 the exact degenerate value c0 [z (2 pi)^{(d-1)/2}]^{k+1}/(k+1)!
    is returned with zero standard error.
    """
    if beta < 0 or math.isinf(beta):
        raise InvalidInputError("beta must be finite and nonnegative")
    d = frame.d
    gauss_factor = TWO_PI ** ((d - 1) / 2)
    if beta == 0.0:
        val = kernel.c0 * (frame.z * gauss_factor) ** (k + 1) / math.factorial(k + 1)
        return LimitConstant("expectation", val, 0.0,
                             inputs={"k": k, "beta": beta, "r": r,
                                     "kernel": kernel.kind, "exact": True,
                                     "theta": frame.theta.tolist()})

    def batch(rng, m):
        u = rng.standard_normal((m, k + 1, d - 1))
        pts = _lift_horizontal(frame, beta * u)
        return float(np.mean(kernel._value(pts, r)))

    mean, se = _mc_batches(batch, seed, samples, batches)
    scale = (frame.z * gauss_factor) ** (k + 1) / math.factorial(k + 1)
    return LimitConstant("expectation", scale * mean, scale * se,
                         inputs={"k": k, "beta": beta, "r": r,
                                 "kernel": kernel.kind,
                                 "theta": frame.theta.tolist()})


def _lift_horizontal(frame, u):
    """Map horizontal blocks (…, d-1) to A(u, 0)."""
    shape = u.shape[:-1]
    x = np.concatenate([u, np.zeros(shape + (1,))], axis=-1)
    return x @ frame.matrix.T


def integral_Istar_kl(k, l, frame, kernel, beta, r, samples=DEFAULT_SAMPLES,
                      batches=DEFAULT_BATCHES, seed=20_3):
    """Variance component for the lite tail at overlap l: an integral over
    (R^{d-1})-products only, evaluated on the points A(beta u_i, 0)."""
    if not 1 <= l <= k + 1:
        raise InvalidInputError("overlap l must lie in 1..k+1")
    if beta < 0 or math.isinf(beta):
        raise InvalidInputError("beta must be finite and nonnegative")
    d = frame.d
    m_pts = 2 * k + 2 - l
    gauss_factor = TWO_PI ** ((d - 1) * m_pts / 2)
    if beta == 0.0:
        val = kernel.c0**2 * frame.z**m_pts * gauss_factor
        return LimitConstant("integral-Istar", val, 0.0,
                             inputs={"k": k, "l": l, "beta": beta, "r": r,
                                     "kernel": kernel.kind, "exact": True,
                                     "theta": frame.theta.tolist()})

    def batch(rng, m):
        u = rng.standard_normal((m, m_pts, d - 1))
        pts = _lift_horizontal(frame, beta * u)
        shared = pts[:, 1:l] if l > 1 else pts[:, :0]
        t1 = np.concatenate([pts[:, :1], shared, pts[:, l: k + 1]], axis=1)
        t2 = np.concatenate([pts[:, :1], shared, pts[:, k + 1:]], axis=1)
        return float(np.mean(kernel._value(t1, r) * kernel._value(t2, r)))

    mean, se = _mc_batches(batch, seed, samples, batches)
    scale = frame.z**m_pts * gauss_factor
    lc = LimitConstant("integral-Istar", scale * mean, scale * se,
                       inputs={"k": k, "l": l, "beta": beta, "r": r,
                               "kernel": kernel.kind,
                               "theta": frame.theta.tolist()})
    note = _precision_note(lc.value, lc.se)
    if note:
        lc.inputs["warning"] = note
    return lc


# -- heavy-tail constants ------------------------------------------------------------


def _kernel_volume(kernel, k, d, samples, batches, seed, paired_l=None):
    """Monte Carlo of the kernel volume integrals over locality-ball offsets:
    int h(0, y) dy, or the paired int h(y0, y1) h(y0, y2) dy at overlap l."""
    kappa = kernel.kappa
    vball = _ball_volume(d, kappa)
    if paired_l is None:
        nsamp = k

        def batch(rng, m):
            y = _uniform_ball(rng, m * nsamp, d, kappa).reshape(m, nsamp, d)
            tuples = np.concatenate([np.zeros((m, 1, d)), y], axis=1)
            return float(np.mean(kernel._value(tuples, 1.0)))
    else:
        l = paired_l
        nsamp = 2 * k + 1 - l

        def batch(rng, m):
            y = _uniform_ball(rng, m * nsamp, d, kappa).reshape(m, nsamp, d)
            t1, t2 = _paired_tuples(y, k, l)
            return float(np.mean(kernel._value(t1, 1.0) * kernel._value(t2, 1.0)))

    mean, se = _mc_batches(batch, seed, samples, batches)
    return vball**nsamp * mean, vball**nsamp * se


def gauge_power_set_integral(body, halfspaces, power, samples=400_000, seed=20_4):
    """int over the intersection of halfspaces of gamma^-power: deterministic
    angular quadrature in d = 2, cone Monte Carlo with the closed-form radial
    integral in d >= 3. Returns (value, se)."""
    if any(np.allclose(h1.theta, -h2.theta)
           for i, h1 in enumerate(halfspaces)
           for h2 in halfspaces[i + 1:]):
        return 0.0, 0.0
    if body.d == 2:
        return gauge_power_halfspace_integral(body, halfspaces, power), 0.0
    d = body.d
    vol = body.volume()
    cone = ConeSampler(body)

    def batch(rng, m):
        w = cone.sample(m, rng)
        smin = np.zeros(m)
        ok = np.ones(m, bool)
        for hs in halfspaces:
            inner = w @ hs.theta
            ok &= inner > 0
            with np.errstate(divide="ignore"):
                smin = np.maximum(smin, np.where(inner > 0,
                                                 hs.threshold / inner, np.inf))
        vals = np.where(ok, smin ** (d - power), 0.0)
        return float(np.mean(vals))

    mean, se = _mc_batches(batch, seed, samples, DEFAULT_BATCHES)
    scale = d * vol / (power - d)
    return scale * mean, scale * se


def expectation_limit_heavy(k, body, hs, kernel, alpha, r,
                            samples=DEFAULT_SAMPLES, batches=DEFAULT_BATCHES,
                            seed=20_5):
    """Limit of E[S_{k,n}] / ([n g]^{k+1} r^{dk} t_n^d) for heavy tails:
    (1/(k+1)!) * int h(0, y) dy * int_H gamma^{-alpha(k+1)}."""
    if alpha <= body.d:
        raise InvalidInputError("alpha must exceed the dimension")
    yval, yse = _kernel_volume(kernel, k, body.d, samples, batches, seed)
    xval, xse = gauge_power_set_integral(body, [hs.scaled(1.0)], alpha * (k + 1))
    val = yval * xval / math.factorial(k + 1)
    se = math.sqrt((yse * xval) ** 2 + (yval * xse) ** 2) / math.factorial(k + 1)
    return LimitConstant("expectation", val, se,
                         inputs={"k": k, "alpha": alpha, "r": r,
                                 "kernel": kernel.kind,
                                 "theta": hs.theta.tolist()})


def integral_Hkl(k, l, body, kernel, alpha, theta1, theta2,
                 level1=None, level2=None, samples=DEFAULT_SAMPLES,
                 batches=DEFAULT_BATCHES, seed=20_6):
    """nu_{h,l} evaluated on H(theta1) intersect H(theta2): the product of the
    paired kernel volume and the gauge-power mass of the intersection.
    Exactly zero for opposite angles (empty intersection)."""
    if not 1 <= l <= k + 1:
        raise InvalidInputError("overlap l must lie in 1..k+1")
    if alpha <= body.d:
        raise InvalidInputError("alpha must exceed the dimension")
    theta1 = np.asarray(theta1, float)
    theta2 = np.asarray(theta2, float)
    if np.allclose(theta1, -theta2):
        return LimitConstant("integral-Hkl", 0.0, 0.0,
                             inputs={"k": k, "l": l, "alpha": alpha,
                                     "empty_intersection": True})
    h1 = Halfspace(theta1, level1 if level1 is not None
                   else body.support_function(theta1))
    h2 = Halfspace(theta2, level2 if level2 is not None
                   else body.support_function(theta2))
    power = alpha * (2 * k + 2 - l)
    yval, yse = _kernel_volume(kernel, k, body.d, samples, batches, seed,
                               paired_l=l)
    xval, xse = gauge_power_set_integral(body, [h1, h2], power)
    val = yval * xval
    se = math.sqrt((yse * xval) ** 2 + (yval * xse) ** 2)
    return LimitConstant("integral-Hkl", val, se,
                         inputs={"k": k, "l": l, "alpha": alpha,
                                 "kernel": kernel.kind,
                                 "theta1": theta1.tolist(),
                                 "theta2": theta2.tolist()})


def covariance_function(k, body, kernel, alpha, theta1, theta2, regime,
                        chi=None, samples=DEFAULT_SAMPLES, seed=20_7):
    """C(theta1, theta2) = nu_h(H(theta1) ^ H(theta2)) with the regime's
    weights over the overlap components."""
    comps = {}
    for l in _regime_overlaps(k, regime):
        comps[l] = integral_Hkl(k, l, body, kernel, alpha, theta1, theta2,
                                samples=samples, seed=seed + l)
    return _assemble_variance(k, regime, comps, chi, kind="covariance")


# -- assembly ------------------------------------------------------------------------


def _regime_overlaps(k, regime):
    if regime == "sparse":
        return [k + 1]
    if regime == "dense":
        return [1]
    if regime == "critical":
        return list(range(1, k + 2))
    raise ConfigError(f"unknown regime {regime!r}")


def _assemble_variance(k, regime, components, chi=None, kind="variance"):
    need = _regime_overlaps(k, regime)
    missing = [l for l in need if l not in components]
    if missing:
        raise DependencyError(f"missing overlap components {missing} for "
                              f"the {regime} regime")
    if regime == "critical" and chi is None:
        raise DependencyError("critical regime needs the finite limit chi")

    def cval(l):
        c = components[l]
        return (c.value, c.se) if isinstance(c, LimitConstant) else (float(c), 0.0)

    if regime == "sparse":
        v, s = cval(k + 1)
        w = 1.0 / math.factorial(k + 1)
        value, se = w * v, w * s
    elif regime == "dense":
        v, s = cval(1)
        w = 1.0 / math.factorial(k) ** 2
        value, se = w * v, w * s
    else:
        value, var = 0.0, 0.0
        for l in need:
            v, s = cval(l)
            w = chi ** (2 * k + 1 - l) / (math.factorial(l)
                                          * math.factorial(k + 1 - l) ** 2)
            value += w * v
            var += (w * s) ** 2
        se = math.sqrt(var)
    inputs = {"k": k, "regime": regime}
    if chi is not None:
        inputs["chi"] = chi
    return LimitConstant(kind, value, se, regime=regime, inputs=inputs)


def variance_limit(tail_class, k, regime, components, chi=None):
    """Assemble the three-case variance limit from the overlap components
    (I, I*, or H constants, keyed by the overlap l)."""
    if tail_class not in ("light", "lite", "heavy"):
        raise ConfigError(f"unknown tail class {tail_class!r}")
    lc = _assemble_variance(k, regime, components, chi)
    lc.inputs["tail_class"] = tail_class
    return lc


# -- rate diagnostic -----------------------------------------------------------------


@dataclass
class RateDiagnostic:
    n_grid: np.ndarray
    b_n: np.ndarray
    h2_norm: np.ndarray
    variance: np.ndarray
    bound_rate: np.ndarray
    slope: float
    theory_slope: float

    def record(self):
        return {"n": self.n_grid.tolist(), "B_n": self.b_n.tolist(),
                "h2_norm": self.h2_norm.tolist(),
                "variance": self.variance.tolist(),
                "bound_rate": self.bound_rate.tolist(),
                "slope": self.slope, "theory_slope": self.theory_slope}


def clt_rate_diagnostic(model, frame, kernel, n_grid, t_of_n, r_of_n,
                        tail_class, regime, var_limit, samples=1 << 16,
                        seed=20_8):
    """The normal-approximation bound sequence, up to its k-dependent constant:

        n^{(k+1)/2} (1 v B_n^{3k/2}) ||h_n^2||_f / Var(S_{k,n}),

    with B_n the maximal local mass sup_y n rho(B(y, 4 kappa r_n)), the
    fourth-moment norm estimated by importance sampling on the halfspace
    tail, and the variance taken from the normalizing sequence times the
    given variance limit.
    """
    if isinstance(var_limit, LimitConstant):
        var_limit = var_limit.value
    if var_limit <= 0:
        raise DegenerateError("variance limit must be positive for the bound")
    d = model.body.d
    k = kernel.k
    n_grid = np.asarray(n_grid, float)
    b_n = np.empty(n_grid.size)
    h2 = np.empty(n_grid.size)
    var = np.empty(n_grid.size)
    bound = np.empty(n_grid.size)
    for i, n in enumerate(n_grid):
        t_n = float(t_of_n(n))
        r_n = float(r_of_n(n))
        b_n[i] = n * _max_ball_mass(model, 4 * kernel.kappa * r_n)
        h2[i] = math.sqrt(_fourth_moment_integral(
            model, frame, kernel, t_n, r_n, samples, seed + i))
        var[i] = normalizer(model, k, n, t_n, r_n, regime, tail_class) * var_limit
        bound[i] = n ** ((k + 1) / 2) * max(1.0, b_n[i] ** (1.5 * k)) \
            * h2[i] / var[i]
    slope = _loglog_slope(n_grid, bound)
    theory = _theory_rate_slope(model, n_grid, t_of_n, tail_class, k, d)
    return RateDiagnostic(n_grid, b_n, h2, var, bound, slope, theory)


def _max_ball_mass(model, radius, grid=33):
    """sup_y rho(B(y, radius)), via the small-ball density approximation
    maximized over a ray grid through the mode."""
    smax = model.body.bounding_radius() * 3
    ray = np.linspace(0.0, smax, grid)
    e = np.zeros(model.body.d)
    e[-1] = 1.0
    pts = ray[:, None] * e
    dens = model.density(pts)
    fmax = max(float(np.max(dens)), model.mode_density())
    return fmax * _ball_volume(model.body.d, radius)


def _fourth_moment_integral(model, frame, kernel, t_n, r_n, samples, seed):
    """int h_n^4 prod f(x_i) dx for h_n = h^k_{r_n} 1{tuple in H_n^{k+1}},
    by sampling the base point from f conditioned on {gauge >= t_n} and the
    offsets uniformly in the locality ball."""
    from .sampling import _samplers
    k = kernel.k
    d = model.body.d
    radial, cone = _samplers(model)
    radial.ensure_cover(t_n)
    tail_mass = model.gauge_tail_mass(t_n)
    hs = Halfspace(frame.theta, frame.level, t_n)
    kappa = kernel.kappa
    vball = _ball_volume(d, kappa * r_n)

    def batch(rng, m):
        s = radial.sample_tail(t_n, m, rng)
        w = cone.sample(m, rng)
        x0 = s[:, None] * w
        y = _uniform_ball(rng, m * k, d, kappa * r_n).reshape(m, k, d)
        pts = x0[:, None, :] + np.concatenate([np.zeros((m, 1, d)), y], axis=1)
        hval = kernel._value(pts, r_n)
        inside = np.all(pts @ hs.theta >= hs.threshold, axis=1)
        dens = np.prod(model.density(pts[:, 1:, :]), axis=1)
        return float(np.mean(hval**4 * inside * dens))

    mean, _ = _mc_batches(batch, seed, samples, 16)
    return tail_mass * vball**k * mean


def _loglog_slope(x, y):
    mask = np.asarray(y) > 0
    if np.sum(mask) < 2:
        return math.nan
    lx, ly = np.log(np.asarray(x)[mask]), np.log(np.asarray(y)[mask])
    return float(np.polyfit(lx, ly, 1)[0])


def _theory_rate_slope(model, n_grid, t_of_n, tail_class, k, d):
    """Slope of the predicted normal-approximation rate along the grid:
    (n q g^{3k+1})^{-1/2} for light tails, (n [q g]^{3k+1})^{-1/2} for lite,
    (n t^d g^{3k+1})^{-1/2} for heavy."""
    t = np.array([float(t_of_n(n)) for n in n_grid])
    g = model.g(t)
    if tail_class == "light":
        q = np.array([light_q(model.generator, ti, d) for ti in t])
        rate = (n_grid * q * g ** (3 * k + 1)) ** -0.5
    elif tail_class == "lite":
        q = np.array([light_q(model.generator, ti, d) for ti in t])
        rate = (n_grid * (q * g) ** (3 * k + 1)) ** -0.5
    else:
        rate = (n_grid * t**d * g ** (3 * k + 1)) ** -0.5
    return _loglog_slope(n_grid, rate)


# -- conditional variance orders ------------------------------------------------------


def conditional_variance_order(model, k, n_grid, t_grid, tail_class):
    """Predicted conditional variance and Kolmogorov-rate orders per tail
    class, on a grid with t_n = o(n^{1/d})."""
    n_grid = np.asarray(n_grid, float)
    t_grid = np.asarray(t_grid, float)
    d = model.body.d
    ratio = t_grid**d / n_grid
    if n_grid.size >= 2 and not np.all(np.diff(ratio) < 0):
        raise ConfigError("grid violates t_n = o(n^{1/d}): t^d/n must decrease")
    if tail_class == "lite":
        var = n_grid ** (2 * k + 1)
        dk = n_grid ** -0.5
    elif tail_class == "light":
        q = np.array([light_q(model.generator, t, d) for t in t_grid])
        var = n_grid ** (2 * k + 1) / q ** (2 * k)
        dk = q ** (2 * k) / np.sqrt(n_grid)
    elif tail_class == "heavy":
        var = n_grid ** (2 * k + 1) / t_grid ** (2 * d * k)
        dk = t_grid ** (2 * d * k) / np.sqrt(n_grid)
    else:
        raise ConfigError(f"unknown tail class {tail_class!r}")
    return {"tail_class": tail_class, "n": n_grid.tolist(),
            "t": t_grid.tolist(), "variance_order": var.tolist(),
            "dk_order": dk.tolist(),
            "variance_exponent": _loglog_slope(n_grid, var),
            "dk_exponent": _loglog_slope(n_grid, dk)}


# -- expectation dispatch and disk cache ----------------------------------------------


def expectation_limit(model, k, frame, kernel, tail, r, **kw):
    """Tail-class dispatch of the expectation limit (TailParams in, constant
    out)."""
    if tail.tail_class == "light":
        return expectation_limit_light(k, frame, kernel, tail.xi, r, **kw)
    if tail.tail_class == "lite":
        return expectation_limit_lite(k, frame, kernel, tail.beta, r, **kw)
    hs = Halfspace(frame.theta, frame.level, 1.0)
    return expectation_limit_heavy(k, model.body, hs, kernel, tail.alpha, r, **kw)


def variance_components(model, k, frame, kernel, tail, r, regime, **kw):
    """All overlap components the regime needs, keyed by l."""
    comps = {}
    for l in _regime_overlaps(k, regime):
        if tail.tail_class == "light":
            comps[l] = integral_Ikl(k, l, frame, kernel, tail.xi, r, **kw)
        elif tail.tail_class == "lite":
            comps[l] = integral_Istar_kl(k, l, frame, kernel, tail.beta, r, **kw)
        else:
            comps[l] = integral_Hkl(k, l, model.body, kernel, tail.alpha,
                                    frame.theta, frame.theta,
                                    level1=frame.level, level2=frame.level, **kw)
    return comps


def cached_constant(cache_dir, name, inputs, compute):
    """Disk cache of a LimitConstant keyed by a content hash of the inputs."""
    if cache_dir is None:
        return compute()
    os.makedirs(cache_dir, exist_ok=True)
    digest = hashlib.sha256(
        json.dumps({"name": name, **inputs}, sort_keys=True).encode()).hexdigest()[:24]
    path = os.path.join(cache_dir, f"{name}-{digest}.json")
    if os.path.exists(path):
        with open(path) as fh:
            rec = json.load(fh)
        return LimitConstant(rec["kind"], rec["value"], rec["se"],
                             rec.get("regime"), rec.get("inputs", {}))
    lc = compute()
    with open(path, "w") as fh:
        json.dump(lc.record(), fh, indent=2, sort_keys=True)
    return lc

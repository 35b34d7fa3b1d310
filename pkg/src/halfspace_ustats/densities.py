"""Homothetic densities f = g(gamma(x)) on a convex body's gauge.

Two generator families:

* light: g(t) = C exp(-psi(t)) with psi a von Mises function (psi' > 0,
  psi -> inf, (1/psi')' -> 0). The auxiliary scale is a(t) = 1/psi'(t);
  the tail class is decided by xi = lim a(t_n) and beta = lim sqrt(t_n a(t_n)).
* heavy: g regularly varying with tail index alpha > d, nonincreasing.

The normalizing constant C makes f integrate to 1 via the radial identity
d * vol(D) * int_0^inf g(s) s^{d-1} ds = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import (ClassificationError, ConfigError, InvalidInputError,
                     NumericError, StateError)
from .geometry import Halfspace

TWO_PI = 2.0 * math.pi


# -- generators -----------------------------------------------------------------


class LightGenerator:
    """Unnormalized light-tailed generator exp(-psi)."""

    kind = "light"

    def __init__(self, name, psi, psi_prime):
        self.name = name
        self.psi = psi
        self.psi_prime = psi_prime

    @classmethod
    def exponential(cls):
        gen = cls("t", lambda t: np.asarray(t, float),
                  lambda t: np.ones_like(np.asarray(t, float)))
        gen.radial_upper = gen._radial_upper_exponential
        return gen

    @classmethod
    def gaussian(cls):
        gen = cls("t^2/2", lambda t: 0.5 * np.asarray(t, float) ** 2,
                  lambda t: np.asarray(t, float))
        gen.radial_upper = gen._radial_upper_gaussian
        return gen

    def _radial_upper_exponential(self, s0, d):
        # int_{s0}^inf s^{d-1} e^{-s} ds = Gamma(d) * Q(d, s0)
        from scipy.special import gammaincc
        return math.gamma(d) * float(gammaincc(d, max(s0, 0.0)))

    def _radial_upper_gaussian(self, s0, d):
        # int_{s0}^inf s^{d-1} e^{-s^2/2} ds = 2^{d/2-1} Gamma(d/2) Q(d/2, s0^2/2)
        from scipy.special import gammaincc
        return 2 ** (d / 2 - 1) * math.gamma(d / 2) * \
            float(gammaincc(d / 2, max(s0, 0.0) ** 2 / 2))

    @classmethod
    def from_table(cls, ts, psis, name="table"):
        ts = np.asarray(ts, float)
        psis = np.asarray(psis, float)
        if ts.ndim != 1 or ts.shape != psis.shape or ts.size < 4:
            raise InvalidInputError("psi table needs matching 1-d arrays, >= 4 knots")
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(psis) <= 0):
            raise InvalidInputError("psi table must be strictly increasing")
        spline = PchipInterpolator(ts, psis, extrapolate=True)
        deriv = spline.derivative()
        return cls(name, spline, deriv)

    def profile(self, t):
        return np.exp(-self.psi(np.asarray(t, float)))

    def log_profile(self, t):
        return -self.psi(np.asarray(t, float))

    def a(self, t):
        """Auxiliary function a(t) = 1/psi'(t)."""
        ap = self.psi_prime(np.asarray(t, float))
        return 1.0 / ap

    def b(self, t):
        t = np.asarray(t, float)
        return np.sqrt(self.a(t) * t)

    def von_mises_report(self, probe=(10.0, 1e2, 1e3, 1e4)):
        """Numeric check that (1/psi')' vanishes along the probe grid."""
        probe = np.asarray(probe, float)
        h = 1e-4 * probe
        da = (self.a(probe + h) - self.a(probe - h)) / (2 * h)
        return {"probe": probe.tolist(), "a_derivative": da.tolist(),
                "vanishing": bool(abs(da[-1]) < abs(da[0]) + 1e-12 and abs(da[-1]) < 0.1)}


class HeavyGenerator:
    """Unnormalized regularly varying generator with tail index alpha > d.

    forms: 'shifted' -> (1+t)^-alpha (finite at 0, nonincreasing on [0, inf));
           'capped'  -> min(1, t^-alpha) (exact power law beyond 1).
    """

    kind = "heavy"

    def __init__(self, alpha, form="shifted"):
        if form not in ("shifted", "capped"):
            raise InvalidInputError(f"unknown heavy generator form {form!r}")
        self.alpha = float(alpha)
        self.form = form
        self.name = f"rv:{alpha:g}:{form}"

    def profile(self, t):
        t = np.asarray(t, float)
        if self.form == "shifted":
            return (1.0 + t) ** -self.alpha
        return np.maximum(t, 1.0) ** -self.alpha

    def log_profile(self, t):
        return np.log(self.profile(t))

    def radial_upper(self, s0, d):
        """Exact int_{s0}^inf s^{d-1} profile(s) ds (requires alpha > d)."""
        a = self.alpha
        s0 = max(float(s0), 0.0)
        if self.form == "shifted":
            # expand s^{d-1} = ((1+s) - 1)^{d-1} and integrate term by term
            u = 1.0 + s0
            total = 0.0
            for j in range(int(d)):
                total += (math.comb(int(d) - 1, j) * (-1.0) ** j
                          * u ** (d - j - a) / (a + j - d))
            return total
        if s0 >= 1.0:
            return s0 ** (d - a) / (a - d)
        return (1.0 - s0 ** d) / d + 1.0 / (a - d)


# -- density model ----------------------------------------------------------------


class DensityModel:
    """Normalized homothetic density f(x) = C * profile(gamma(x))."""

    def __init__(self, body, generator):
        self.body = body
        self.generator = generator
        self.C = None
        self.vol = None

    @classmethod
    def build(cls, body, generator):
        model = cls(body, generator)
        model.normalize()
        return model

    @property
    def tag(self):
        return f"{self.body.tag}|{self.generator.name}"

    @property
    def normalized(self):
        return self.C is not None

    def normalize(self):
        if self.generator.kind == "heavy" and self.generator.alpha <= self.body.d:
            raise InvalidInputError("heavy tail index must exceed the dimension")
        self.vol = self.body.volume()
        radial, err = self._radial_moment()
        if not np.isfinite(radial) or radial <= 0:
            raise NumericError("radial normalization integral failed", residual=err)
        self.C = 1.0 / (self.body.d * self.vol * radial)
        return self

    def _radial_moment(self):
        d = self.body.d
        upper = getattr(self.generator, "radial_upper", None)
        if upper is not None:
            return upper(0.0, d), 0.0

        def integrand(s):
            return float(self.generator.profile(s)) * s ** (d - 1)

        val, err = quad(integrand, 0.0, np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
        if err > 1e-8 * val:
            raise NumericError("radial quadrature tolerance not met", residual=err)
        return val, err

    def _require_normalized(self):
        if not self.normalized:
            raise StateError("density model is not normalized; call normalize()")

    def density(self, x):
        """f(x), vectorized."""
        self._require_normalized()
        return self.C * self.generator.profile(self.body.gauge(x))

    def g(self, t):
        """The normalized generator, g(t) = C * profile(t)."""
        self._require_normalized()
        return self.C * self.generator.profile(t)

    def mode_density(self):
        self._require_normalized()
        return float(self.C * self.generator.profile(0.0))

    # -- radial integrals ----------------------------------------------------

    def radial_integral(self, s0, s1=np.inf):
        """Unnormalized int_{s0}^{s1} profile(s) s^{d-1} ds; exact when the
        generator provides a closed-form upper integral."""
        d = self.body.d
        if s0 >= s1:
            return 0.0
        upper = getattr(self.generator, "radial_upper", None)
        if upper is not None:
            head = upper(s0, d)
            return head if np.isinf(s1) else head - upper(s1, d)

        def integrand(s):
            return float(self.generator.profile(s)) * s ** (d - 1)

        val, _ = quad(integrand, s0, s1, limit=400, epsabs=1e-14, epsrel=1e-11)
        return val

    def gauge_tail_mass(self, s0):
        """rho({gamma >= s0}) = d vol(D) C int_{s0}^inf profile(s) s^{d-1} ds."""
        self._require_normalized()
        return self.body.d * self.vol * self.C * self.radial_integral(s0)

    # -- halfspace mass --------------------------------------------------------

    def halfspace_mass(self, frame, t):
        """Mass of the dilated outer support halfspace t*H(theta).

        Returns (asymptotic, numeric): the tail-class asymptotic formula and
        an independent numeric estimate (angular quadrature in d = 2, cone
        Monte Carlo in d >= 3).
        """
        self._require_normalized()
        if t < 1.0:
            raise InvalidInputError("halfspace scale must be >= 1")
        hs = Halfspace(frame.theta, frame.level, t)
        if self.generator.kind == "light":
            q = light_q(self.generator, t, self.body.d)
            asym = TWO_PI ** ((self.body.d - 1) / 2) * frame.z * float(self.g(t)) * q
        else:
            alpha = self.generator.alpha
            base = gauge_power_halfspace_integral(self.body, [hs.scaled(1.0)], alpha) \
                if self.body.d == 2 else self._gauge_power_mc([hs.scaled(1.0)], alpha)
            asym = float(self.g(t)) * t ** self.body.d * base
        numeric = self.halfspace_mass_numeric(hs)
        return asym, numeric

    def halfspace_mass_numeric(self, hs, n_phi=4096, mc_samples=400_000):
        """Direct rho(t*H) by quadrature (d=2) or Monte Carlo (d>=3)."""
        self._require_normalized()
        d = self.body.d
        if d == 2:
            phi = (np.arange(n_phi) + 0.5) * (TWO_PI / n_phi)
            e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
            gam = self.body.gauge(e)
            w = e / gam[:, None]
            inner = w @ hs.theta
            total = 0.0
            for i in range(n_phi):
                if inner[i] <= 0:
                    continue
                smin = hs.threshold / inner[i]
                total += self.radial_integral(smin) / gam[i] ** 2
            return self.C * total * (TWO_PI / n_phi)
        # d >= 3: Monte Carlo on the gauge-radial decomposition, radius
        # conditioned on the reachable tail {gauge >= scale}
        from .sampling import ConeSampler, RadialSampler
        rng = np.random.default_rng(314159)
        cone = ConeSampler(self.body, rng)
        radial = RadialSampler(self)
        tail = self.gauge_tail_mass(hs.scale)
        w = cone.sample(mc_samples, rng)
        s = radial.sample_tail(hs.scale, mc_samples, rng)
        frac = float(np.mean(hs.contains(s[:, None] * w)))
        return tail * frac

    def _gauge_power_mc(self, halfspaces, power, samples=400_000):
        from .sampling import ConeSampler
        rng = np.random.default_rng(271828)
        cone = ConeSampler(self.body, rng)
        w = cone.sample(samples, rng)
        smin = np.full(samples, -np.inf)
        ok = np.ones(samples, bool)
        for hs in halfspaces:
            inner = w @ hs.theta
            ok &= inner > 0
            with np.errstate(divide="ignore"):
                smin = np.maximum(smin, np.where(inner > 0, hs.threshold / inner, np.inf))
        d = self.body.d
        vals = np.where(ok, np.maximum(smin, 0.0) ** (d - power), 0.0)
        return d * self.vol * float(np.mean(vals)) / (power - d)


def light_q(generator, t, d):
    """q(t) = (a(t) t)^{(d-1)/2} a(t), the Jacobian of the tail window map."""
    a = float(generator.a(t))
    return (a * t) ** ((d - 1) / 2) * a


def gauge_power_halfspace_integral(body, halfspaces, power, n_phi=8192):
    """int over the intersection of halfspaces of gamma(x)^-power dx, d = 2.

    Polar reduction: the ray at angle phi enters the intersection at radius
    rho_min(phi) = max_i threshold_i / <theta_i, e(phi)> (empty if any inner
    product is nonpositive), and the radial integral is closed-form.
    """
    if body.d != 2:
        raise InvalidInputError("quadrature form is 2-d only")
    if power <= 2:
        raise InvalidInputError("power must exceed the dimension")
    phi = (np.arange(n_phi) + 0.5) * (TWO_PI / n_phi)
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    gam = body.gauge(e)
    rho_min = np.zeros(n_phi)
    ok = np.ones(n_phi, bool)
    for hs in halfspaces:
        inner = e @ hs.theta
        ok &= inner > 0
        with np.errstate(divide="ignore"):
            rho_min = np.maximum(rho_min, np.where(inner > 0, hs.threshold / inner, np.inf))
    vals = np.where(ok, gam ** -power * rho_min ** (2.0 - power), 0.0)
    return float(np.sum(vals)) * (TWO_PI / n_phi) / (power - 2.0)


# -- tail parameters ----------------------------------------------------------------


@dataclass
class TailParams:
    """Classified tail parameters along a threshold sequence."""

    xi: float                 # lim a(t_n): 0, finite positive, or inf
    beta: float               # lim b(t_n) = lim sqrt(t_n a(t_n))
    tail_class: str           # "light" (xi>0), "lite" (xi=0, beta<inf), "heavy"
    a_seq: np.ndarray
    b_seq: np.ndarray
    q_seq: np.ndarray
    t_seq: np.ndarray
    r_seq: np.ndarray
    r: float
    alpha: float | None = None


def classify_limit(values, floor=1e-4, cap=1e4):
    """Classify the limit of a positive sequence as 0, a finite value, or inf.

    The last three probe values decide: monotone decrease beyond the floor
    gives 0, monotone increase beyond the cap gives inf; otherwise the final
    value is taken as a finite limit. An oscillating tail with large relative
    spread is refused.
    """
    v = np.asarray(values, float)
    if v.size < 3:
        return float(v[-1])
    tail = v[-3:]
    slack = 1e-9 * np.abs(tail).max()
    down = tail[0] >= tail[1] - slack and tail[1] >= tail[2] - slack
    up = tail[0] <= tail[1] + slack and tail[1] <= tail[2] + slack
    if down and tail[2] < floor:
        return 0.0
    if up and tail[2] > cap:
        return math.inf
    spread = (tail.max() - tail.min()) / max(tail.max(), 1e-300)
    if not (down or up) and spread > 0.5:
        raise ClassificationError(
            f"sequence tail oscillates without a limit: {tail.tolist()}; "
            "override the regime in the config")
    return float(tail[2])


def tail_params(model, t_seq, r_seq=None, probe_factor=1e8, probe_points=24):
    """Tail parameters for a density model along a diverging threshold grid.

    Light generators get xi and beta classified from a(t) and b(t) on the
    grid extended geometrically by `probe_factor` (psi is analytic, so
    probing beyond the experiment grid is free). Heavy generators only
    report alpha.
    """
    t_seq = np.asarray(t_seq, float)
    if t_seq.ndim != 1 or t_seq.size < 1:
        raise InvalidInputError("threshold sequence must be a nonempty vector")
    if t_seq.size >= 2 and not np.all(np.diff(t_seq) > 0):
        raise InvalidInputError("threshold sequence must diverge (strictly increase)")
    if r_seq is None:
        r_seq = np.ones_like(t_seq)
    r_seq = np.asarray(r_seq, float)
    d = model.body.d

    if model.generator.kind == "heavy":
        t_pow = t_seq ** d
        return TailParams(xi=math.nan, beta=math.nan, tail_class="heavy",
                          a_seq=np.full_like(t_seq, math.nan),
                          b_seq=np.full_like(t_seq, math.nan),
                          q_seq=t_pow, t_seq=t_seq, r_seq=r_seq,
                          r=float(r_seq[-1]), alpha=model.generator.alpha)

    gen = model.generator
    a_seq = gen.a(t_seq)
    b_seq = gen.b(t_seq)
    q_seq = (a_seq * t_seq) ** ((d - 1) / 2) * a_seq
    probe = np.geomspace(t_seq[-1], t_seq[-1] * probe_factor, probe_points)
    xi = classify_limit(gen.a(probe))
    beta = classify_limit(gen.b(probe))
    if xi > 0:
        tail_class = "light"
    elif math.isfinite(beta):
        tail_class = "lite"
    else:
        raise ClassificationError(
            "xi = 0 with beta = inf is outside the supported regimes")
    return TailParams(xi=xi, beta=beta, tail_class=tail_class,
                      a_seq=np.asarray(a_seq), b_seq=np.asarray(b_seq),
                      q_seq=np.asarray(q_seq), t_seq=t_seq, r_seq=r_seq,
                      r=float(r_seq[-1]))


# -- normalizing sequences ------------------------------------------------------------


REGIMES = ("sparse", "critical", "dense")


def classify_regime(model, n_seq, t_seq, r_seq, tail_class):
    """Regime from the limit of n g(t_n) r_n^d (light/heavy) or n g(t_n) q_n
    (lite). Returns (regime, chi) with chi the finite limit when critical."""
    n_seq = np.asarray(n_seq, float)
    t_seq = np.asarray(t_seq, float)
    r_seq = np.asarray(r_seq, float)
    g = model.g(t_seq)
    d = model.body.d
    if tail_class == "lite":
        q = (model.generator.a(t_seq) * t_seq) ** ((d - 1) / 2) * model.generator.a(t_seq)
        driver = n_seq * g * q
    else:
        driver = n_seq * g * r_seq ** d
    lim = classify_limit(driver)
    if lim == 0.0:
        return "sparse", 0.0
    if math.isinf(lim):
        return "dense", math.inf
    return "critical", lim


def normalizer(model, k, n, t_n, r_n, regime, tail_class):
    """Variance normalizing sequence: tau (light/lite) or upsilon (heavy)."""
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}")
    d = model.body.d
    g = float(model.g(t_n))
    if tail_class == "light":
        q = light_q(model.generator, t_n, d)
        if regime == "sparse":
            return (n * g) ** (k + 1) * r_n ** (d * k) * q
        if regime == "critical":
            return n * g * q
        return (n * g) ** (2 * k + 1) * r_n ** (2 * d * k) * q
    if tail_class == "lite":
        q = light_q(model.generator, t_n, d)
        if regime == "sparse":
            return (n * g * q) ** (k + 1)
        if regime == "critical":
            return 1.0
        return (n * g * q) ** (2 * k + 1)
    if tail_class == "heavy":
        if regime == "sparse":
            return (n * g) ** (k + 1) * r_n ** (d * k) * t_n ** d
        if regime == "critical":
            return n * g * t_n ** d
        return (n * g) ** (2 * k + 1) * r_n ** (2 * d * k) * t_n ** d
    raise ConfigError(f"unknown tail class {tail_class!r}")


def expectation_normalizer(model, k, n, t_n, r_n, tail_class):
    """Normalizer of E[S_{k,n}] per tail class. Heavy tails follow the
    t_n^d scaling of the variance display (the expectation display's bare
    t_n does not match the change of variables); both are reported by the
    harness."""
    d = model.body.d
    g = float(model.g(t_n))
    if tail_class == "light":
        q = light_q(model.generator, t_n, d)
        return (n * g) ** (k + 1) * r_n ** (d * k) * q
    if tail_class == "lite":
        q = light_q(model.generator, t_n, d)
        return (n * g * q) ** (k + 1)
    if tail_class == "heavy":
        return (n * g) ** (k + 1) * r_n ** (d * k) * t_n ** d
    raise ConfigError(f"unknown tail class {tail_class!r}")


# -- Potter bound check ------------------------------------------------------------


def potter_check(model, epsilon, t_grid=None, x_grid=None):
    """Empirical Potter-bound scan for a heavy generator.

    Finds the smallest grid t0 such that g(t x)/g(t) < (1 + eps) x^{-alpha+eps}
    for every sampled t >= t0 and x >= 1. Violations at every t0 are reported
    rather than raised.
    """
    if model.generator.kind != "heavy":
        raise InvalidInputError("Potter bounds apply to heavy generators")
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    alpha = model.generator.alpha
    if t_grid is None:
        t_grid = np.geomspace(0.1, 1e6, 60)
    if x_grid is None:
        x_grid = np.geomspace(1.0, 1e3, 50)
    t_grid = np.asarray(t_grid, float)
    x_grid = np.asarray(x_grid, float)
    prof = model.generator.profile
    ratio = prof(np.outer(t_grid, x_grid)) / prof(t_grid)[:, None]
    bound = (1 + epsilon) * x_grid ** (-alpha + epsilon)
    ok_rows = np.all(ratio < bound[None, :], axis=1)
    t0 = None
    for i in range(t_grid.size):
        if np.all(ok_rows[i:]):
            t0 = float(t_grid[i])
            break
    violations = [
        {"t": float(t_grid[i]), "x": float(x_grid[j]),
         "ratio": float(ratio[i, j]), "bound": float(bound[j])}
        for i, j in zip(*np.nonzero(ratio >= bound[None, :]))
    ]
    return {"passes": t0 is not None, "t0": t0, "epsilon": epsilon,
            "violations": violations[:50], "n_violations": len(violations)}


# -- threshold presets --------------------------------------------------------------


def threshold_rule(spec):
    """Threshold sequence t_n from a config dict.

    kinds: 'log'    -> t0 + c * log(n)          (exponential-type psi)
           'sqrtlog'-> sqrt(t0 + 2 c log(n))    (Gaussian-type psi; t0 is the
                       additive constant inside the root and may be negative)
           'power'  -> t0 * n^c                 (heavy tails; c ~ const/alpha)
    """
    kind = spec.get("kind")
    c = float(spec.get("c", 1.0))
    t0 = float(spec.get("t0", 0.0))
    if kind == "log":
        return lambda n: t0 + c * np.log(np.asarray(n, float))
    if kind == "sqrtlog":
        def rule(n):
            arg = t0 + 2 * c * np.log(np.asarray(n, float))
            if np.any(arg <= 0):
                raise ConfigError("sqrtlog threshold is imaginary at this n; "
                                  "raise t0 or start the grid later")
            return np.sqrt(arg)
        return rule
    if kind == "power":
        base = t0 if t0 > 0 else 1.0
        return lambda n: base * np.asarray(n, float) ** c
    raise ConfigError(f"threshold rule kind {kind!r} not recognized "
                      "(expected log | sqrtlog | power)")


def generator_from_config(spec):
    """Generator from a config dict: {"kind": "light", "psi": "t" | "t^2/2" |
    {"table": [[t, psi], ...]}} or {"kind": "heavy", "alpha": a, "form": ...}."""
    kind = spec.get("kind")
    if kind == "light":
        psi = spec.get("psi")
        if psi == "t":
            return LightGenerator.exponential()
        if psi == "t^2/2":
            return LightGenerator.gaussian()
        if isinstance(psi, dict) and "table" in psi:
            tab = np.asarray(psi["table"], float)
            return LightGenerator.from_table(tab[:, 0], tab[:, 1])
        raise ConfigError(f"light generator psi {psi!r} not recognized")
    if kind == "heavy":
        if "alpha" not in spec:
            raise ConfigError("heavy generator requires 'alpha'")
        return HeavyGenerator(float(spec["alpha"]), spec.get("form", "shifted"))
    raise ConfigError(f"generator kind {kind!r} not recognized")

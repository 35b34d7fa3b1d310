"""Convex bodies given by gauge functions.

A body D is an open bounded convex set containing the origin, described by
its gauge gamma(x) = inf{a >= 0 : x in a*D}. Everything downstream (outer
support halfspaces, initial transformations, homothetic densities) is driven
by gamma, so bodies only need to supply a vectorized gauge evaluator;
derivatives fall back to central finite differences.

Conventions: points are numpy arrays of shape (..., d); the last axis is the
coordinate axis. The vertical coordinate is the last one, e_d = (0, ..., 0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, InvalidInputError, NumericError

FD_STEP = 1e-5          # central-difference step for Hessians
UNIT_TOL = 1e-6         # directions within this of unit length are renormalized
SUPPORT_TOL = 1e-10     # convergence tolerance on the support objective
MIN_EIGENVALUE = 1e-7   # below this the body is treated as flat (not rotund)


def as_direction(theta):
    """Validate and renormalize a direction vector.

    Non-unit input within UNIT_TOL of unit length is renormalized; anything
    further off is rejected.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.ndim != 1:
        raise InvalidInputError("direction must be a flat vector")
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("direction has non-finite entries")
    nrm = float(np.linalg.norm(theta))
    if abs(nrm - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"direction norm {nrm!r} is not 1 within {UNIT_TOL}")
    return theta / nrm


def _check_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise InvalidInputError(f"expected points in R^{d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("point has non-finite coordinates")
    return x


class RotundBody:
    """Base class: a convex body represented by its gauge function.

    Subclasses implement `_gauge` (vectorized over the leading axes) and may
    override the derivative and support-function methods with analytic
    versions. The generic implementations only assume the gauge.
    """

    def __init__(self, d, tag):
        if d < 2:
            raise InvalidInputError("dimension must be >= 2")
        self.d = int(d)
        self.tag = tag

    # -- gauge and derivatives ------------------------------------------------

    def _gauge(self, x):
        raise NotImplementedError

    def gauge(self, x):
        """gamma(x), vectorized over leading axes of x."""
        x = _check_points(x, self.d)
        return self._gauge(x)

    def gauge_grad(self, x):
        """Gradient of gamma at x != 0 (central differences by default)."""
        x = _check_points(x, self.d)
        if np.any(np.all(x == 0.0, axis=-1)):
            raise GeometryError("gauge gradient undefined at the origin")
        h = FD_STEP * max(1.0, float(np.max(np.abs(x))))
        eye = np.eye(self.d)
        grad = np.empty(x.shape)
        for i in range(self.d):
            grad[..., i] = (self._gauge(x + h * eye[i]) - self._gauge(x - h * eye[i])) / (2 * h)
        if not np.all(np.isfinite(grad)):
            raise NumericError("finite-difference gradient is non-finite")
        return grad

    def hess_gauge_sq_half(self, x):
        """Hessian of gamma^2/2 at a single point x != 0."""
        x = _check_points(x, self.d)
        if x.ndim != 1:
            raise InvalidInputError("Hessian is evaluated one point at a time")
        if np.all(x == 0.0):
            raise GeometryError("Hessian undefined at the origin")

        def f(y):
            return 0.5 * float(self._gauge(y)) ** 2

        h = FD_STEP * max(1.0, float(np.max(np.abs(x))))
        eye = np.eye(self.d)
        H = np.empty((self.d, self.d))
        f0 = f(x)
        for i in range(self.d):
            H[i, i] = (f(x + h * eye[i]) - 2 * f0 + f(x - h * eye[i])) / h**2
            for j in range(i + 1, self.d):
                v = (f(x + h * (eye[i] + eye[j])) - f(x + h * (eye[i] - eye[j]))
                     - f(x - h * (eye[i] - eye[j])) + f(x - h * (eye[i] + eye[j]))) / (4 * h**2)
                H[i, j] = H[j, i] = v
        if not np.all(np.isfinite(H)):
            raise NumericError("finite-difference Hessian is non-finite")
        return 0.5 * (H + H.T)

    # -- support machinery ----------------------------------------------------

    def boundary_point(self, u):
        """Radial projection u -> u/gamma(u) onto the boundary."""
        u = np.asarray(u, dtype=float)
        g = self._gauge(u)
        return u / g[..., None]

    def support_function(self, theta):
        """zeta_D(theta) = sup{<x, theta> : x in D}, the unique level at
        which the halfspace {<theta, x> >= L} touches the closure of D."""
        theta = as_direction(theta)
        val, _ = self._support_search(theta)
        return val

    def support_point(self, theta):
        """The unique boundary point p(theta) with <theta, p> = zeta_D(theta)."""
        theta = as_direction(theta)
        _, p = self._support_search(theta)
        return p

    def _support_search(self, theta):
        if self.d == 2:
            return self._support_search_2d(theta)
        return self._support_search_nd(theta)

    def _support_search_2d(self, theta, grid=512):
        # coarse scan over boundary angles, then golden-section refinement
        phi = np.linspace(0.0, 2 * np.pi, grid, endpoint=False)
        w = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        b = self.boundary_point(w)
        vals = b @ theta
        i = int(np.argmax(vals))
        lo = phi[i] - 2 * np.pi / grid
        hi = phi[i] + 2 * np.pi / grid

        def obj(a):
            v = np.array([np.cos(a), np.sin(a)])
            return float(v @ theta) / float(self._gauge(v))

        invphi = (math.sqrt(5.0) - 1) / 2
        a, bnd = lo, hi
        c = bnd - invphi * (bnd - a)
        dd = a + invphi * (bnd - a)
        fc, fd = obj(c), obj(dd)
        for _ in range(200):
            if fc > fd:
                bnd, dd, fd = dd, c, fc
                c = bnd - invphi * (bnd - a)
                fc = obj(c)
            else:
                a, c, fc = c, dd, fd
                dd = a + invphi * (bnd - a)
                fd = obj(dd)
            if abs(fc - fd) < SUPPORT_TOL and abs(bnd - a) < 1e-12:
                break
        ang = 0.5 * (a + bnd)
        v = np.array([np.cos(ang), np.sin(ang)])
        p = v / float(self._gauge(v))
        return float(p @ theta), p

    def _support_search_nd(self, theta, restarts=32, iters=400):
        # projected-gradient ascent of <theta, u/gamma(u)> on the sphere
        rng = np.random.default_rng(12345)
        best_val, best_p = -np.inf, None
        starts = [theta] + list(rng.standard_normal((restarts - 1, self.d)))
        for u0 in starts:
            u = np.asarray(u0, float)
            u = u / np.linalg.norm(u)
            step = 0.5
            val = float(u @ theta) / float(self._gauge(u))
            for _ in range(iters):
                g = self.gauge_grad(u)
                gam = float(self._gauge(u))
                # gradient of <theta, u>/gamma(u)
                grad = theta / gam - (float(u @ theta) / gam**2) * g
                grad -= (grad @ u) * u
                if np.linalg.norm(grad) < 1e-13:
                    break
                cand = u + step * grad
                cand /= np.linalg.norm(cand)
                cval = float(cand @ theta) / float(self._gauge(cand))
                if cval > val:
                    u, val = cand, cval
                    step *= 1.2
                else:
                    step *= 0.5
                    if step < 1e-14:
                        break
            if val > best_val:
                best_val, best_p = val, u / float(self._gauge(u))
        if best_p is None or not np.isfinite(best_val):
            raise NumericError("support search failed to converge", residual=best_val)
        return best_val, best_p

    def bounding_radius(self):
        """A radius R with D contained in the centered ball of radius R."""
        if self.d == 2:
            phi = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
            w = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        else:
            rng = np.random.default_rng(42)
            w = rng.standard_normal((200_000, self.d))
            w /= np.linalg.norm(w, axis=-1, keepdims=True)
        r = 1.0 / self._gauge(w)
        return float(np.max(r)) * 1.05

    def volume(self):
        """Lebesgue volume of D (generic: boundary-radius quadrature in d=2,
        sphere Monte Carlo in d>=3)."""
        if self.d == 2:
            from scipy.integrate import quad
            val, err = quad(self._radial_area_density, 0.0, 2 * np.pi, limit=400)
            if err > 1e-8 * max(1.0, abs(val)):
                raise NumericError("area quadrature did not converge", residual=err)
            return val
        rng = np.random.default_rng(2024)
        w = rng.standard_normal((2_000_000, self.d))
        w /= np.linalg.norm(w, axis=-1, keepdims=True)
        r = 1.0 / self._gauge(w)
        sphere = 2 * np.pi ** (self.d / 2) / math.gamma(self.d / 2)
        return sphere / self.d * float(np.mean(r**self.d))

    def _radial_area_density(self, phi):
        v = np.array([np.cos(phi), np.sin(phi)])
        return 0.5 / float(self._gauge(v)) ** 2

    def __repr__(self):
        return f"{type(self).__name__}(d={self.d}, tag={self.tag!r})"


class UnitBall(RotundBody):
    """Euclidean unit ball: gamma is the Euclidean norm."""

    def __init__(self, d=2):
        super().__init__(d, "ball")

    def _gauge(self, x):
        return np.linalg.norm(x, axis=-1)

    def gauge_grad(self, x):
        x = _check_points(x, self.d)
        n = np.linalg.norm(x, axis=-1)
        if np.any(n == 0.0):
            raise GeometryError("gauge gradient undefined at the origin")
        return x / n[..., None]

    def hess_gauge_sq_half(self, x):
        return np.eye(self.d)

    def support_function(self, theta):
        as_direction(theta)
        return 1.0

    def support_point(self, theta):
        return as_direction(theta)

    def bounding_radius(self):
        return 1.0

    def volume(self):
        return math.pi ** (self.d / 2) / math.gamma(self.d / 2 + 1)


class LpEllipsoid(RotundBody):
    """Image of an open lp ball of radius r under an invertible linear map.

    gamma(x) = || L^-1 x ||_p / r. Strictly convex with egg-shaped level
    sets for p in (2, inf); p = 2 gives an ellipsoid. Boundary points whose
    lp preimage has zero coordinates are second-order flat for p > 2, so
    frames are unavailable at those angles.
    """

    def __init__(self, p, d=2, radius=1.0, linear_map=None):
        if p < 2:
            raise InvalidInputError("lp bodies require p >= 2")
        tag = f"lp:{p:g}:r={radius:g}"
        super().__init__(d, tag)
        self.p = float(p)
        self.radius = float(radius)
        self.L = np.eye(d) if linear_map is None else np.asarray(linear_map, float)
        if self.L.shape != (d, d):
            raise InvalidInputError("linear map must be d x d")
        self.Linv = np.linalg.inv(self.L)

    def _gauge(self, x):
        y = x @ self.Linv.T
        return np.linalg.norm(y, ord=self.p, axis=-1) / self.radius

    def gauge_grad(self, x):
        x = _check_points(x, self.d)
        y = x @ self.Linv.T
        n = np.linalg.norm(y, ord=self.p, axis=-1)
        if np.any(n == 0.0):
            raise GeometryError("gauge gradient undefined at the origin")
        g = np.sign(y) * np.abs(y) ** (self.p - 1) / n[..., None] ** (self.p - 1)
        return g @ self.Linv / self.radius

    def support_function(self, theta):
        theta = as_direction(theta)
        q = self.p / (self.p - 1)
        return self.radius * float(np.linalg.norm(self.L.T @ theta, ord=q))

    def support_point(self, theta):
        theta = as_direction(theta)
        s = self.L.T @ theta
        q = self.p / (self.p - 1)
        z = np.sign(s) * np.abs(s) ** (q - 1) / np.linalg.norm(s, ord=q) ** (q - 1)
        return self.radius * (self.L @ z)

    def bounding_radius(self):
        smax = float(np.linalg.norm(self.L, ord=2))
        return self.radius * smax * self.d ** max(0.0, 0.5 - 1.0 / self.p)

    def volume(self):
        p, d = self.p, self.d
        unit = (2 * math.gamma(1 / p + 1)) ** d / math.gamma(d / p + 1)
        return abs(float(np.linalg.det(self.L))) * self.radius**d * unit


class Egg2D(RotundBody):
    """The 2-d egg: lower half-disk of radius 2 glued to an upper half-ellipse.

    The printed gauge uses sin^2(arctan(y/2x)); via the identity
    sin^2(arctan(z)) = z^2/(1+z^2) the upper branch simplifies exactly to
    sqrt(4x^2 + y^2)/4, which is also the continuous x -> 0 limit
    (arctan(+-inf) = +-pi/2). The gauge is C^1 but not C^2 across y = 0,
    so frames are unavailable at the two seam normals (+-e_1).
    """

    def __init__(self):
        super().__init__(2, "egg2d")

    def _gauge(self, x):
        xx, yy = x[..., 0], x[..., 1]
        upper = np.sqrt(4 * xx**2 + yy**2) / 4.0
        lower = np.sqrt(xx**2 + yy**2) / 2.0
        return np.where(yy >= 0, upper, lower)

    def gauge_grad(self, x):
        x = _check_points(x, self.d)
        xx, yy = x[..., 0], x[..., 1]
        if np.any((xx == 0.0) & (yy == 0.0)):
            raise GeometryError("gauge gradient undefined at the origin")
        su = np.sqrt(4 * xx**2 + yy**2)
        sl = np.sqrt(xx**2 + yy**2)
        gx = np.where(yy >= 0, xx / su, 0.5 * xx / sl)
        gy = np.where(yy >= 0, 0.25 * yy / su, 0.5 * yy / sl)
        return np.stack([gx, gy], axis=-1)

    def bounding_radius(self):
        return 4.0

    def volume(self):
        # half-disk radius 2 plus half-ellipse with semi-axes (2, 4)
        return 2 * math.pi + 4 * math.pi


class TabulatedBody2D(RotundBody):
    """User body from tabulated gauge values on a circular grid.

    Rows give a direction (two components, not necessarily unit) and the
    gauge value at that direction; by homogeneity the unit-direction profile
    is value/||direction||. A periodic cubic spline interpolates the profile.
    """

    def __init__(self, directions, values, tag="user2d"):
        super().__init__(2, tag)
        directions = np.asarray(directions, float)
        values = np.asarray(values, float)
        if directions.ndim != 2 or directions.shape[1] != 2:
            raise InvalidInputError("directions must be an (n, 2) array")
        if np.any(values <= 0):
            raise InvalidInputError("gauge values must be positive")
        norms = np.linalg.norm(directions, axis=1)
        if np.any(norms == 0):
            raise InvalidInputError("zero direction in gauge table")
        phi = np.mod(np.arctan2(directions[:, 1], directions[:, 0]), 2 * np.pi)
        prof = values / norms
        order = np.argsort(phi)
        phi, prof = phi[order], prof[order]
        if phi.size < 8:
            raise InvalidInputError("gauge table needs at least 8 directions")
        from scipy.interpolate import CubicSpline
        phi_ext = np.concatenate([phi, [phi[0] + 2 * np.pi]])
        prof_ext = np.concatenate([prof, [prof[0]]])
        self._profile = CubicSpline(phi_ext, prof_ext, bc_type="periodic")

    @classmethod
    def from_csv(cls, path, tag=None):
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
        if raw.shape[1] != 3:
            raise InvalidInputError("gauge CSV must have columns x, y, gauge")
        return cls(raw[:, :2], raw[:, 2], tag=tag or f"user2d:{path}")

    def _gauge(self, x):
        xx, yy = x[..., 0], x[..., 1]
        phi = np.mod(np.arctan2(yy, xx), 2 * np.pi)
        return np.hypot(xx, yy) * self._profile(phi)


# -- halfspaces ----------------------------------------------------------------


@dataclass(frozen=True)
class Halfspace:
    """Closed halfspace {x : <theta, x> >= scale * level}.

    At scale 1 and level zeta_D(theta) this is the outer support halfspace:
    it touches the boundary of D exactly at p(theta) and misses D.
    """

    theta: np.ndarray
    level: float
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta", as_direction(self.theta))
        if self.level <= 0:
            raise InvalidInputError("halfspace level must be positive")
        if self.scale < 1.0:
            raise InvalidInputError("halfspace scale must be >= 1")

    @property
    def threshold(self):
        return self.scale * self.level

    def contains(self, x):
        x = np.asarray(x, float)
        return x @ self.theta >= self.threshold

    def scaled(self, t):
        return Halfspace(self.theta, self.level, t)

    def describe(self):
        return {"theta": self.theta.tolist(), "level": self.level, "scale": self.scale}


def outer_halfspace(body, theta, scale=1.0):
    """Outer support halfspace of the body at angle theta, dilated by scale."""
    theta = as_direction(theta)
    return Halfspace(theta, body.support_function(theta), scale)


def gauge_derivatives(body, x):
    """(grad gamma(x), Hessian of gamma^2 at x) for x != 0.

    The gradient satisfies the Euler identity <grad, x> = gamma(x); the
    Hessian of gamma^2 is symmetric, and positive definite where the body
    is rotund.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError("derivatives are evaluated one point at a time")
    if np.all(x == 0.0):
        raise GeometryError("gauge derivatives undefined at the origin")
    grad = body.gauge_grad(x)
    hess = 2.0 * body.hess_gauge_sq_half(x)
    return grad, hess


# -- initial transformations -----------------------------------------------------


@dataclass(frozen=True)
class AffineFrame:
    """Linear change of coordinates A with A(e_d) = p(theta) and
    A({v >= 1}) = H(theta), normalized so that near u = 0

        gamma(A(u, 1)) - 1 ~ ||u||^2 / 2.

    z is |det A| = (lambda_1 ... lambda_{d-1})^{-1/2} * zeta_D(theta).
    """

    theta: np.ndarray
    matrix: np.ndarray
    point: np.ndarray
    level: float
    z: float
    eigenvalues: np.ndarray
    inverse: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.inverse is None:
            object.__setattr__(self, "inverse", np.linalg.inv(self.matrix))

    @property
    def d(self):
        return self.matrix.shape[0]

    def apply(self, x):
        return np.asarray(x, float) @ self.matrix.T

    def apply_inverse(self, y):
        return np.asarray(y, float) @ self.inverse.T

    def lift(self, u):
        """Map horizontal coordinates u in R^{d-1} to A(u, 1)."""
        u = np.asarray(u, float)
        x = np.concatenate([u, np.ones(u.shape[:-1] + (1,))], axis=-1)
        return self.apply(x)

    def normal_gradient(self):
        """grad gamma(p(theta)) = A^{-T} e_d = theta / zeta_D(theta)."""
        return self.inverse.T[:, -1].copy()


def _rotation_to_last_axis(theta):
    """Orthogonal matrix R (rows orthonormal) with R @ theta = e_d."""
    d = theta.shape[0]
    basis = [theta]
    for i in range(d):
        cand = np.zeros(d)
        cand[i] = 1.0
        for b in basis:
            cand = cand - (cand @ b) * b
        n = np.linalg.norm(cand)
        if n > 1e-8:
            basis.append(cand / n)
        if len(basis) == d:
            break
    rows = basis[1:] + [theta]
    return np.array(rows)


def initial_transformation(body, theta, skip_eigen_scaling=False):
    """Construct an initial transformation at angle theta.

    Composition (of the inverse map): rotation sending H(theta) to {v >= L},
    vertical division by L, a shear removing the horizontal offset of the
    support point, then an eigen-rotation and per-axis scaling by 1/sqrt(lambda_i)
    of the reduced Hessian of gamma^2/2 in the sheared coordinates.

    `skip_eigen_scaling` keeps the first three factors only; it exists as a
    negative control for the correct-initial-position diagnostics.
    """
    theta = as_direction(theta)
    d = body.d
    L = body.support_function(theta)
    p = body.support_point(theta)

    R = _rotation_to_last_axis(theta)
    rp = R @ p
    a = rp[:-1]
    if abs(rp[-1] - L) > 1e-6 * max(1.0, L):
        raise NumericError("support point inconsistent with support level",
                           residual=abs(rp[-1] - L))

    v_inv = np.eye(d)
    v_inv[-1, -1] = L
    s_inv = np.eye(d)
    s_inv[:-1, -1] = a
    M = R.T @ v_inv @ s_inv      # inverse of (shear o vertical o rotation)

    if skip_eigen_scaling:
        A = M
        lams = np.ones(d - 1)
    else:
        H = M.T @ body.hess_gauge_sq_half(M @ _e(d)) @ M if _has_analytic_hess(body) \
            else _fd_hess_half(body, M)
        G = H[:-1, :-1]
        lams, Q = np.linalg.eigh(0.5 * (G + G.T))
        if np.any(lams <= MIN_EIGENVALUE):
            raise GeometryError(
                f"body is not rotund at p({theta.tolist()}): reduced Hessian "
                f"eigenvalues {lams.tolist()}")
        W_inv = np.eye(d)
        W_inv[:-1, :-1] = Q @ np.diag(lams ** -0.5)
        A = M @ W_inv

    z = abs(float(np.linalg.det(A)))
    z_pred = float(np.prod(lams) ** -0.5 * L)
    if abs(z - z_pred) > 1e-6 * z_pred:
        raise NumericError("determinant disagrees with eigenvalue formula",
                           residual=abs(z - z_pred))
    return AffineFrame(theta=theta, matrix=A, point=p, level=L, z=z,
                       eigenvalues=lams)


def _e(d):
    v = np.zeros(d)
    v[-1] = 1.0
    return v


def _has_analytic_hess(body):
    return type(body).hess_gauge_sq_half is not RotundBody.hess_gauge_sq_half


def _fd_hess_half(body, M):
    d = body.d

    def f(x):
        return 0.5 * float(body.gauge(M @ x)) ** 2

    h = FD_STEP
    eye = np.eye(d)
    e = _e(d)
    H = np.empty((d, d))
    f0 = f(e)
    for i in range(d):
        H[i, i] = (f(e + h * eye[i]) - 2 * f0 + f(e - h * eye[i])) / h**2
        for j in range(i + 1, d):
            v = (f(e + h * (eye[i] + eye[j])) - f(e + h * (eye[i] - eye[j]))
                 - f(e - h * (eye[i] - eye[j])) + f(e - h * (eye[i] + eye[j]))) / (4 * h**2)
            H[i, j] = H[j, i] = v
    return H


def check_initial_position(body, frame, radii, n_directions=16):
    """Diagnostics for the correct-initial-position property.

    For each radius rho, evaluates (gamma(A(u,1)) - 1) / (||u||^2 / 2) at
    n_directions horizontal unit directions scaled to ||u|| = rho. The frame
    is correct when the ratios approach 1 as rho decreases.
    """
    d = body.d
    if d == 2:
        dirs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(7)
        dirs = rng.standard_normal((n_directions, d - 1))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rows = []
    for rho in radii:
        u = rho * dirs
        vals = body.gauge(frame.lift(u))
        ratio = (vals - 1.0) / (0.5 * rho**2)
        rows.append({
            "radius": float(rho),
            "ratio_mean": float(np.mean(ratio)),
            "ratio_min": float(np.min(ratio)),
            "ratio_max": float(np.max(ratio)),
        })
    final = rows[-1]
    worst = max(abs(final["ratio_min"] - 1.0), abs(final["ratio_max"] - 1.0))
    return {"rows": rows, "final_worst_error": worst}


# -- registry -----------------------------------------------------------------


def make_body(tag, d=2):
    """Build a body from a string tag: 'ball', 'lp:<p>[:r=<r>]', 'egg2d',
    or 'csv:<path>' for a tabulated 2-d gauge."""
    if tag == "ball":
        return UnitBall(d)
    if tag == "egg2d":
        return Egg2D()
    if tag.startswith("lp:"):
        parts = tag.split(":")
        p = float(parts[1])
        radius = 1.0
        for extra in parts[2:]:
            if extra.startswith("r="):
                radius = float(extra[2:])
            else:
                raise InvalidInputError(f"unknown lp body option {extra!r}")
        return LpEllipsoid(p, d=d, radius=radius)
    if tag.startswith("csv:"):
        if d != 2:
            raise InvalidInputError("tabulated bodies are 2-d only")
        return TabulatedBody2D.from_csv(tag[4:])
    raise InvalidInputError(f"unknown body tag {tag!r}")

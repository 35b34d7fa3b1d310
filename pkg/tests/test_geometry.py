import math

import numpy as np
import pytest

from halfspace_ustats import (Egg2D, Halfspace, LpEllipsoid, TabulatedBody2D,
                              UnitBall, check_initial_position,
                              initial_transformation, make_body,
                              outer_halfspace)
from halfspace_ustats.errors import (GeometryError, InvalidInputError,
                                     HalfspaceUstatsError)

BODIES = {
    "ball": UnitBall(2),
    "lp4": LpEllipsoid(4),
    "egg": Egg2D(),
}

# angles offset from the axes: the egg gauge is not C^2 across y = 0 and the
# plain l4 ball is second-order flat at its axis points, so frames only exist
# away from those directions
ANGLES16 = [np.array([math.cos(a), math.sin(a)])
            for a in (np.arange(16) + 0.5) * (2 * np.pi / 16)]


def test_gauge_values():
    assert BODIES["ball"].gauge(np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert BODIES["egg"].gauge(np.array([0.0, -1.0])) == pytest.approx(0.5)
    assert BODIES["egg"].gauge(np.array([0.0, 1.0])) == pytest.approx(0.25)


def test_ball_radius_scaling():
    # a radius-s ball has gauge ||x||/s
    body = LpEllipsoid(2, radius=3.0)
    x = np.array([1.2, -0.4])
    assert body.gauge(x) == pytest.approx(np.linalg.norm(x) / 3.0)


def test_egg_matches_printed_formula_off_axis():
    rng = np.random.default_rng(0)
    egg = BODIES["egg"]
    for _ in range(200):
        x, y = rng.normal(size=2) * 3
        if abs(x) < 1e-12:
            continue
        if y >= 0:
            expected = math.sqrt((x * x + y * y)
                                 / (12 * math.sin(math.atan(y / (2 * x))) ** 2 + 4))
        else:
            expected = math.hypot(x, y) / 2
        assert egg.gauge(np.array([x, y])) == pytest.approx(expected, rel=1e-12)


def test_egg_branch_continuity_on_axis():
    egg = BODIES["egg"]
    for x in (-3.0, -1.0, 0.5, 2.0):
        up = egg.gauge(np.array([x, 1e-14]))
        dn = egg.gauge(np.array([x, -1e-14]))
        assert up == pytest.approx(dn, rel=1e-10)
        assert up == pytest.approx(abs(x) / 2, rel=1e-10)


@pytest.mark.parametrize("name", list(BODIES))
def test_homogeneity(name):
    body = BODIES[name]
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10_000, 2)) * 2
    alpha = rng.uniform(0.1, 5.0, size=10_000)
    lhs = body.gauge(alpha[:, None] * x)
    rhs = alpha * body.gauge(x)
    assert np.allclose(lhs, rhs, rtol=1e-10)


@pytest.mark.parametrize("name", list(BODIES))
def test_gauge_zero_only_at_origin(name):
    body = BODIES[name]
    assert body.gauge(np.zeros(2)) == 0.0
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1000, 2))
    assert np.all(body.gauge(x) > 0)


def test_gauge_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        BODIES["ball"].gauge(np.array([np.nan, 1.0]))


@pytest.mark.parametrize("name", list(BODIES))
def test_euler_identity(name):
    body = BODIES[name]
    rng = np.random.default_rng(3)
    x = rng.normal(size=(10_000, 2)) * 2
    x = x[np.abs(x[:, 1]) > 1e-3]  # egg gradient is only piecewise C^1 at y=0
    grad = body.gauge_grad(x)
    assert np.allclose(np.einsum("ij,ij->i", grad, x), body.gauge(x), atol=1e-6)


def test_gradient_examples():
    assert np.allclose(BODIES["ball"].gauge_grad(np.array([0.0, 1.0])), [0, 1])
    assert np.allclose(BODIES["lp4"].gauge_grad(np.array([0.0, 1.0])), [0, 1])


def test_gradient_fd_matches_analytic_on_egg():
    egg = BODIES["egg"]
    rng = np.random.default_rng(4)
    for _ in range(50):
        x = rng.normal(size=2) * 2
        if abs(x[1]) < 0.05 or np.linalg.norm(x) < 0.1:
            continue
        fd = super(Egg2D, egg).gauge_grad(x)  # finite-difference fallback
        assert np.allclose(fd, egg.gauge_grad(x), atol=1e-6)


def test_gradient_origin_rejected():
    with pytest.raises(GeometryError):
        BODIES["ball"].gauge_grad(np.zeros(2))


def test_gauge_derivatives_pair():
    from halfspace_ustats import gauge_derivatives
    rng = np.random.default_rng(11)
    for name in BODIES:
        body = BODIES[name]
        for _ in range(20):
            x = rng.normal(size=2) * 2
            if abs(x[1]) < 0.05 or np.linalg.norm(x) < 0.2:
                continue
            grad, hess = gauge_derivatives(body, x)
            assert float(grad @ x) == pytest.approx(float(body.gauge(x)),
                                                    abs=1e-6)
            assert np.allclose(hess, hess.T, atol=1e-8)
            eigs = np.linalg.eigvalsh(hess)
            assert np.all(eigs > -1e-6)
    with pytest.raises(GeometryError):
        gauge_derivatives(BODIES["ball"], np.zeros(2))


def test_support_function_values():
    assert BODIES["ball"].support_function(np.array([0.6, 0.8])) == 1.0
    th = np.array([1.0, 1.0]) / math.sqrt(2)
    assert BODIES["lp4"].support_function(th) == pytest.approx(2 ** 0.25, rel=1e-9)
    assert BODIES["egg"].support_function(np.array([0.0, -1.0])) == pytest.approx(2.0, rel=1e-9)


def test_support_function_generic_matches_analytic():
    # the 2-d golden-section search against the lp closed form
    lp = BODIES["lp4"]
    rng = np.random.default_rng(5)
    for _ in range(25):
        th = rng.normal(size=2)
        th /= np.linalg.norm(th)
        generic = super(LpEllipsoid, lp)._support_search_2d(th)[0]
        assert generic == pytest.approx(lp.support_function(th), rel=1e-8)


def test_support_point_properties():
    for name in BODIES:
        body = BODIES[name]
        for th in ANGLES16:
            p = body.support_point(th)
            assert body.gauge(p) == pytest.approx(1.0, abs=1e-8)
            assert float(p @ th) == pytest.approx(body.support_function(th), abs=1e-8)
            # normal alignment: grad gamma(p) = theta / zeta(theta)
            grad = body.gauge_grad(p)
            assert np.allclose(grad, th / body.support_function(th), atol=1e-6)


def test_support_point_examples():
    assert np.allclose(BODIES["ball"].support_point(np.array([0.0, 1.0])), [0, 1])
    assert np.allclose(BODIES["lp4"].support_point(np.array([1.0, 0.0])), [1, 0])
    assert np.allclose(BODIES["egg"].support_point(np.array([0.0, -1.0])), [0, -2],
                       atol=1e-6)


def test_dual_consistency():
    # zeta(theta) equals the max of <theta, w> over boundary points
    rng = np.random.default_rng(6)
    for name in BODIES:
        body = BODIES[name]
        phi = np.linspace(0, 2 * np.pi, 20_000, endpoint=False)
        w = body.boundary_point(np.stack([np.cos(phi), np.sin(phi)], axis=-1))
        for _ in range(5):
            th = rng.normal(size=2)
            th /= np.linalg.norm(th)
            assert float(np.max(w @ th)) == pytest.approx(
                body.support_function(th), abs=1e-4)


def test_direction_normalization():
    ball = BODIES["ball"]
    assert ball.support_function(np.array([0.0, 1.0 + 1e-8])) == 1.0
    with pytest.raises(InvalidInputError):
        ball.support_function(np.array([0.0, 1.1]))


def test_outer_halfspace():
    hs = outer_halfspace(BODIES["ball"], np.array([0.0, 1.0]), 5.0)
    assert hs.threshold == pytest.approx(5.0)
    assert hs.contains(np.array([0.3, 5.0]))
    assert not hs.contains(np.array([0.3, 4.999]))
    egg_hs = outer_halfspace(BODIES["egg"], np.array([0.0, -1.0]), 3.0)
    assert egg_hs.threshold == pytest.approx(6.0)


def test_halfspace_disjoint_from_body():
    rng = np.random.default_rng(7)
    for name in BODIES:
        body = BODIES[name]
        hs = outer_halfspace(body, np.array([0.38268343, 0.92387953]))
        inside = rng.uniform(-body.bounding_radius(), body.bounding_radius(),
                             size=(20_000, 2))
        inside = inside[body.gauge(inside) < 1]
        assert not np.any(hs.contains(inside))


def test_gauge_lower_bound_in_scaled_halfspace():
    # x in t*H forces gauge(x) >= t
    rng = np.random.default_rng(8)
    for name in BODIES:
        body = BODIES[name]
        th = ANGLES16[3]
        hs = outer_halfspace(body, th, 4.0)
        pts = rng.uniform(-40, 40, size=(50_000, 2))
        pts = pts[hs.contains(pts)]
        assert np.all(body.gauge(pts) >= 4.0 - 1e-9)


@pytest.mark.parametrize("name", list(BODIES))
def test_frames(name):
    body = BODIES[name]
    rng = np.random.default_rng(9)
    for th in ANGLES16:
        fr = initial_transformation(body, th)
        e2 = np.array([0.0, 1.0])
        assert np.allclose(fr.apply(e2), fr.point, atol=1e-7)
        # A maps {v >= 1} into H(theta): sampled check
        x = rng.normal(size=(200, 2))
        x[:, 1] = 1.0 + np.abs(x[:, 1])
        hs = Halfspace(th, fr.level)
        assert np.all(hs.contains(fr.apply(x)) | (np.abs(fr.apply(x) @ th - fr.level) < 1e-9))
        # |det A| = z and the eigenvalue formula
        assert abs(np.linalg.det(fr.matrix)) == pytest.approx(fr.z, rel=1e-9)
        assert fr.z == pytest.approx(np.prod(fr.eigenvalues) ** -0.5 * fr.level,
                                     rel=1e-6)
        # frame identity <A^-1 y, e_d> = <grad gamma(p), y>
        y = rng.normal(size=(1000, 2))
        lhs = fr.apply_inverse(y)[:, 1]
        rhs = y @ body.gauge_grad(fr.point)
        assert np.allclose(lhs, rhs, atol=1e-6)


def test_frame_examples():
    ball = BODIES["ball"]
    fr = initial_transformation(ball, np.array([0.0, 1.0]))
    assert np.allclose(fr.matrix, np.eye(2), atol=1e-7)
    assert fr.z == pytest.approx(1.0, rel=1e-9)
    generic = initial_transformation(ball, np.array([0.6, 0.8]))
    assert np.allclose(generic.matrix.T @ generic.matrix, np.eye(2), atol=1e-8)
    assert generic.z == pytest.approx(1.0, rel=1e-8)

    egg = initial_transformation(BODIES["egg"], np.array([0.0, -1.0]))
    assert egg.eigenvalues[0] == pytest.approx(0.25, abs=1e-5)
    assert egg.z == pytest.approx(4.0, rel=1e-4)


def test_initial_position_ratios():
    for name in BODIES:
        body = BODIES[name]
        for th in ANGLES16[:4]:
            fr = initial_transformation(body, th)
            diag = check_initial_position(body, fr, [1e-1, 1e-2, 1e-3])
            errs = [abs(row["ratio_mean"] - 1) for row in diag["rows"]]
            # monotone until the finite-difference noise floor of the frame
            assert errs[1] <= errs[0]
            assert errs[2] <= max(errs[1], 2e-5)
            assert diag["final_worst_error"] < 1e-2


def test_initial_position_negative_control():
    # skipping the eigen-scaling leaves the ratio bounded away from 1
    egg = BODIES["egg"]
    th = np.array([0.0, -1.0])
    bad = initial_transformation(egg, th, skip_eigen_scaling=True)
    diag = check_initial_position(egg, bad, [1e-2, 1e-3])
    assert abs(diag["rows"][-1]["ratio_mean"] - 1) > 0.5


def test_lp4_flat_axis_rejected():
    # the plain l4 ball is second-order flat at the axis contact points, so
    # no frame exists there
    with pytest.raises(GeometryError):
        initial_transformation(BODIES["lp4"], np.array([0.0, 1.0]))


def test_registry():
    assert make_body("ball").tag == "ball"
    assert make_body("egg2d").tag == "egg2d"
    lp = make_body("lp:4:r=2")
    assert lp.p == 4 and lp.radius == 2
    with pytest.raises(HalfspaceUstatsError):
        make_body("dodecahedron")


def test_tabulated_body_roundtrip(tmp_path):
    egg = BODIES["egg"]
    phi = np.linspace(0, 2 * np.pi, 720, endpoint=False)
    dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    vals = egg.gauge(dirs)
    path = tmp_path / "egg.csv"
    np.savetxt(path, np.column_stack([dirs, vals]), delimiter=",")
    user = TabulatedBody2D.from_csv(str(path))
    rng = np.random.default_rng(10)
    x = rng.normal(size=(500, 2)) * 2
    assert np.allclose(user.gauge(x), egg.gauge(x), rtol=2e-4, atol=2e-4)
    assert user.support_function(np.array([0.0, -1.0])) == pytest.approx(2.0, rel=1e-3)


def test_three_dimensional_bodies():
    ball3 = UnitBall(3)
    th = np.array([1.0, 2.0, 2.0]) / 3.0
    assert ball3.support_function(th) == pytest.approx(1.0)
    assert np.allclose(ball3.support_point(th), th)
    fr = initial_transformation(ball3, th)
    assert np.allclose(fr.apply(np.array([0.0, 0.0, 1.0])), th, atol=1e-8)
    assert fr.z == pytest.approx(1.0, rel=1e-7)
    diag = check_initial_position(ball3, fr, [1e-2, 1e-3], n_directions=8)
    assert diag["final_worst_error"] < 1e-2

    lp3 = LpEllipsoid(4, d=3)
    # projected-gradient support search against the dual-norm closed form
    generic_val, generic_p = lp3._support_search_nd(th)
    assert generic_val == pytest.approx(lp3.support_function(th), rel=1e-6)
    assert lp3.gauge(generic_p) == pytest.approx(1.0, abs=1e-8)
    assert lp3.volume() == pytest.approx(
        (2 * math.gamma(1.25)) ** 3 / math.gamma(1.75), rel=1e-9)


def test_halfspace_validation():
    with pytest.raises(InvalidInputError):
        Halfspace(np.array([0.0, 1.0]), level=1.0, scale=0.5)
    with pytest.raises(InvalidInputError):
        Halfspace(np.array([0.0, 2.0]), level=1.0)

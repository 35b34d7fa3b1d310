import math

import numpy as np
import pytest

from halfspace_ustats import (DensityModel, Egg2D, HeavyGenerator,
                              LightGenerator, UnitBall, expectation_normalizer,
                              initial_transformation, normalizer, potter_check,
                              tail_params)
from halfspace_ustats.densities import (classify_limit, classify_regime,
                                        gauge_power_halfspace_integral,
                                        generator_from_config, light_q,
                                        threshold_rule)
from halfspace_ustats.errors import (ClassificationError, ConfigError,
                                     InvalidInputError, StateError)
from halfspace_ustats.geometry import Halfspace, outer_halfspace

BALL = UnitBall(2)
EXP = DensityModel.build(BALL, LightGenerator.exponential())
GAUSS = DensityModel.build(BALL, LightGenerator.gaussian())
HEAVY = DensityModel.build(BALL, HeavyGenerator(5.0))


def test_normalizing_constants():
    # exponential on the unit disk: 2 pi C int s e^-s ds = 1
    assert EXP.C == pytest.approx(1 / (2 * math.pi), rel=1e-10)
    assert GAUSS.C == pytest.approx(1 / (2 * math.pi), rel=1e-10)
    # shifted power law: int s (1+s)^-5 ds = 1/12
    assert HEAVY.C == pytest.approx(12 / (2 * math.pi), rel=1e-10)


@pytest.mark.parametrize("model", [EXP, GAUSS, HEAVY])
def test_radial_normalization_identity(model):
    d = model.body.d
    total = d * model.vol * model.C * model.radial_integral(0.0)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_radial_identity_via_quadrature_for_egg():
    egg_model = DensityModel.build(Egg2D(), LightGenerator.exponential())
    assert egg_model.vol == pytest.approx(6 * math.pi, rel=1e-8)
    total = 2 * egg_model.vol * egg_model.C * egg_model.radial_integral(0.0)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_density_eval_examples():
    assert EXP.density(np.zeros(2)) == pytest.approx(EXP.mode_density())
    x = np.array([3.0, 0.0])
    assert EXP.density(x) == pytest.approx(EXP.C * math.exp(-3.0))
    egg_heavy = DensityModel.build(Egg2D(), HeavyGenerator(5.0))
    pt = np.array([0.0, -4.0])  # gauge 2 on the lower branch
    assert egg_heavy.density(pt) == pytest.approx(egg_heavy.C * 3.0 ** -5)


def test_unnormalized_model_raises():
    model = DensityModel(BALL, LightGenerator.exponential())
    with pytest.raises(StateError):
        model.density(np.zeros(2))


def test_rapid_variation_probe():
    # ratios compared in the log domain; the Gaussian profile underflows
    # float64 at the probe point
    for model in (EXP, GAUSS):
        lg = model.generator.log_profile
        assert lg(1100.0) - lg(1000.0) < math.log(1e-6)
        assert lg(900.0) - lg(1000.0) > math.log(1e6)


def test_heavy_regular_variation():
    for x in (2.0, 5.0, 10.0):
        ratio = HEAVY.generator.profile(1e6 * x) / HEAVY.generator.profile(1e6)
        assert ratio == pytest.approx(x ** -5, rel=1e-3)


def test_von_mises_report():
    rep = EXP.generator.von_mises_report()
    assert rep["vanishing"]


def test_tail_params_classification():
    t_seq = np.array([4.0, 8.0, 16.0])
    tp = tail_params(EXP, t_seq)
    assert tp.xi == 1.0 and math.isinf(tp.beta)
    assert tp.tail_class == "light"
    # q_n = (log n)^{(d-1)/2} for a == 1: with d=2, q = sqrt(t)
    assert np.allclose(tp.q_seq, np.sqrt(t_seq))

    tg = tail_params(GAUSS, t_seq)
    assert tg.xi == 0.0 and tg.beta == pytest.approx(1.0)
    assert tg.tail_class == "lite"
    assert tg.a_seq[0] == pytest.approx(0.25)

    th = tail_params(HEAVY, t_seq)
    assert th.tail_class == "heavy" and th.alpha == 5.0


def test_gaussian_point_values():
    # a(100) = 0.01, q(100) = (100 * 0.01)^{1/2} * 0.01 = 0.01, b = 1
    gen = GAUSS.generator
    assert gen.a(100.0) == pytest.approx(0.01)
    assert light_q(gen, 100.0, 2) == pytest.approx(0.01)
    assert gen.b(100.0) == pytest.approx(1.0)


def test_tail_params_requires_divergence():
    with pytest.raises(InvalidInputError):
        tail_params(EXP, np.array([4.0, 4.0, 4.0]))


def test_classify_limit():
    assert classify_limit([1.0, 0.5, 1e-3, 1e-5, 1e-6]) == 0.0
    assert math.isinf(classify_limit([10, 1e3, 1e5, 1e6]))
    assert classify_limit([2.0, 2.2, 2.1]) == pytest.approx(2.1)
    with pytest.raises(ClassificationError):
        classify_limit([1.0, 100.0, 0.01])


def test_halfspace_mass_light():
    fr = initial_transformation(BALL, np.array([0.0, 1.0]))
    for t in (12.0, 24.0):
        asym, num = EXP.halfspace_mass(fr, t)
        expect = math.sqrt(2 * math.pi) * EXP.C * math.exp(-t) * math.sqrt(t)
        assert asym == pytest.approx(expect, rel=1e-12)
        assert num / asym == pytest.approx(1.0, abs=0.1)
    a12, n12 = EXP.halfspace_mass(fr, 12.0)
    a24, n24 = EXP.halfspace_mass(fr, 24.0)
    assert abs(n24 / a24 - 1) < abs(n12 / a12 - 1)


def test_halfspace_mass_gaussian_uses_q():
    fr = initial_transformation(BALL, np.array([0.0, 1.0]))
    asym, num = GAUSS.halfspace_mass(fr, 12.0)
    q = light_q(GAUSS.generator, 12.0, 2)
    assert q == pytest.approx(1 / 12.0)
    assert asym == pytest.approx(math.sqrt(2 * math.pi) * float(GAUSS.g(12.0)) * q)
    assert num / asym == pytest.approx(1.0, abs=0.1)


def test_halfspace_mass_heavy():
    fr = initial_transformation(BALL, np.array([0.0, 1.0]))
    asym, num = HEAVY.halfspace_mass(fr, 50.0)
    base = gauge_power_halfspace_integral(BALL, [Halfspace(fr.theta, 1.0)], 5.0)
    assert asym == pytest.approx(float(HEAVY.g(50.0)) * 50.0 ** 2 * base)
    assert num / asym == pytest.approx(1.0, abs=0.1)


def test_gauge_power_halfspace_integral_closed_form():
    # ball, one halfspace at level 1: (1/(p-2)) int cos^{p-2} over the window
    hs = Halfspace(np.array([0.0, 1.0]), 1.0)
    val = gauge_power_halfspace_integral(BALL, [hs], 5.0)
    from scipy.integrate import quad
    expect = quad(lambda p: math.cos(p) ** 3, -math.pi / 2, math.pi / 2)[0] / 3.0
    assert val == pytest.approx(expect, rel=1e-6)
    # empty intersection integrates to zero
    hs2 = Halfspace(np.array([0.0, -1.0]), 1.0)
    assert gauge_power_halfspace_integral(BALL, [hs, hs2], 5.0) == 0.0


def test_normalizer_paper_cases():
    n, t, r = 1e5, 8.0, 0.5
    g = float(EXP.g(t))
    q = light_q(EXP.generator, t, 2)
    # light, dense: [ng]^{2k+1} r^{2dk} q at k=1
    assert normalizer(EXP, 1, n, t, r, "dense", "light") == \
        pytest.approx((n * g) ** 3 * r ** 4 * q)
    # light, sparse expectation normalizer: [ng]^{k+1} r^{dk} q
    assert expectation_normalizer(EXP, 1, n, t, r, "light") == \
        pytest.approx((n * g) ** 2 * r ** 2 * q)
    # lite, critical: 1
    assert normalizer(GAUSS, 1, n, t, r, "critical", "lite") == 1.0
    gq = float(GAUSS.g(t)) * light_q(GAUSS.generator, t, 2)
    assert normalizer(GAUSS, 2, n, t, r, "sparse", "lite") == \
        pytest.approx((n * gq) ** 3)
    # heavy, sparse: [ng]^{k+1} r^{dk} t^d at k=1
    gh = float(HEAVY.g(t))
    assert normalizer(HEAVY, 1, n, t, r, "sparse", "heavy") == \
        pytest.approx((n * gh) ** 2 * r ** 2 * t ** 2)
    assert normalizer(HEAVY, 1, n, t, r, "critical", "heavy") == \
        pytest.approx(n * gh * t ** 2)


def test_classify_regime():
    n = np.array([1e2, 1e4, 1e6, 1e8, 1e10])
    t = np.log(n)
    regime, chi = classify_regime(EXP, n, t, np.full(5, 1e-8), "light")
    assert regime == "sparse" and chi == 0.0
    regime, _ = classify_regime(EXP, n, 2.0 + 0.1 * np.log(n), np.ones(5), "light")
    assert regime == "dense"


def test_potter_check():
    rep = potter_check(HEAVY, 0.1)
    assert rep["passes"] and rep["t0"] is not None
    # exact power law passes from t = 1 with generous epsilon
    capped = DensityModel.build(BALL, HeavyGenerator(5.0, form="capped"))
    rep2 = potter_check(capped, 0.5, t_grid=np.geomspace(1.0, 1e5, 40))
    assert rep2["passes"] and rep2["t0"] == pytest.approx(1.0)
    # negative control: an increasing profile violates the bound
    class Bad:
        kind = "heavy"
        alpha = 5.0
        name = "bad"
        def profile(self, t):
            return 1.0 + np.asarray(t, float)
    bad = DensityModel(BALL, Bad())
    bad.C, bad.vol = 1.0, math.pi
    rep3 = potter_check(bad, 0.1)
    assert not rep3["passes"] and rep3["n_violations"] > 0


def test_threshold_rules():
    log_rule = threshold_rule({"kind": "log", "c": 2.0, "t0": 1.0})
    assert log_rule(math.e ** 2) == pytest.approx(5.0)
    sq = threshold_rule({"kind": "sqrtlog", "c": 1.0, "t0": 0.0})
    assert sq(math.e ** 8) == pytest.approx(4.0)
    pw = threshold_rule({"kind": "power", "c": 0.25, "t0": 2.0})
    assert pw(16.0) == pytest.approx(4.0)
    with pytest.raises(ConfigError):
        threshold_rule({"kind": "cubic"})


def test_generator_from_config():
    assert generator_from_config({"kind": "light", "psi": "t"}).name == "t"
    assert generator_from_config({"kind": "light", "psi": "t^2/2"}).name == "t^2/2"
    heavy = generator_from_config({"kind": "heavy", "alpha": 4.5})
    assert heavy.alpha == 4.5
    table = generator_from_config(
        {"kind": "light", "psi": {"table": [[0.0, 0.0], [1.0, 1.1],
                                            [2.0, 2.3], [4.0, 4.9]]}})
    assert float(table.psi(2.0)) == pytest.approx(2.3)
    with pytest.raises(ConfigError):
        generator_from_config({"kind": "light", "psi": "cosh"})


def test_tail_concentration_orders_with_lightness():
    # at matched halfspace scale the lighter tail hugs the hyperplane more:
    # vertical overshoot scale a(t) is 1 for the exponential and 1/t for the
    # Gaussian generator
    from halfspace_ustats import sample_conditional
    hs = outer_halfspace(BALL, np.array([0.0, 1.0]), 6.0)
    exp_cloud = sample_conditional(EXP, 4000, hs, seed=7)
    gauss_cloud = sample_conditional(GAUSS, 4000, hs, seed=7)
    d_exp = np.mean(exp_cloud.points[:, 1]) - 6.0
    d_gauss = np.mean(gauss_cloud.points[:, 1]) - 6.0
    assert d_gauss < d_exp / 3

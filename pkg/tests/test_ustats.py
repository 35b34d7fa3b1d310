import itertools
import math

import numpy as np
import pytest

from halfspace_ustats import (CechSimplexKernel, EdgeKernel,
                              LinearCombinationKernel, PointCloud,
                              SubgraphKernel, VRSimplexKernel, compute_S,
                              compute_S_bruteforce, kernel_eval,
                              kernel_from_config, weighted_combination)
from halfspace_ustats.errors import BudgetExceededError, InvalidInputError
from halfspace_ustats.ustats import default_backend

PATH2 = SubgraphKernel([[0, 1], [1, 2]])
KERNELS = [EdgeKernel(), VRSimplexKernel(2), VRSimplexKernel(3),
           CechSimplexKernel(2), PATH2,
           SubgraphKernel([[0, 1], [1, 2]], induced=True)]


def random_tuple(rng, k, d=2, scale=1.0):
    return rng.normal(size=(k + 1, d)) * scale


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.kind + str(k.k))
def test_axioms(kernel):
    rng = np.random.default_rng(0)
    r = 1.0
    for _ in range(1000):
        pts = random_tuple(rng, kernel.k, scale=rng.uniform(0.1, 2.0))
        val = kernel.value(pts, r)
        # (H4) bounded
        assert 0.0 <= val <= kernel.bound + 1e-12
        # symmetry
        perm = rng.permutation(kernel.k + 1)
        assert kernel.value(pts[perm], r) == pytest.approx(val, abs=1e-12)
        # (H1) translation invariance
        shift = rng.normal(size=2) * 5
        assert kernel.value(pts + shift, r) == pytest.approx(val, abs=1e-12)
        # (H3) scaling: h_r(s x) = h_{r/s}(x)
        s = rng.uniform(0.3, 3.0)
        assert kernel.value(s * pts, r) == pytest.approx(
            kernel.value(pts, r / s), abs=1e-12)
        # (H2) locality at r = 1
        if kernel.value(pts, 1.0) > 0:
            diam = max(np.linalg.norm(a - b) for a, b in itertools.combinations(pts, 2))
            assert diam <= kernel.kappa + 1e-12


def test_kernel_examples():
    edge = EdgeKernel()
    assert kernel_eval(edge, np.array([[0.0, 0.0], [0.0, 0.5]]), 1.0) == 1.0
    vr = VRSimplexKernel(2)
    tri = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    assert kernel_eval(vr, tri, 1.0) == 1.0
    assert kernel_eval(vr, tri * 3, 1.0) == 0.0
    # Cech on the same triangle: circumradius ~ 0.354 <= 1/2
    cech = CechSimplexKernel(2)
    assert kernel_eval(cech, tri, 1.0) == 1.0
    # a triple with all pairwise distances <= r but enclosing radius > r/2
    eq = np.array([[0.0, 0.0], [0.9, 0.0], [0.45, 0.9 * math.sqrt(3) / 2]])
    assert kernel_eval(VRSimplexKernel(2), eq, 1.0) == 1.0
    assert kernel_eval(cech, eq, 1.0) == 0.0
    # 2-path count: centers with both neighbors within r
    line = np.array([[0.0, 0.0], [0.8, 0.0], [1.6, 0.0]])
    assert kernel_eval(PATH2, line, 1.0) == 1.0
    assert kernel_eval(SubgraphKernel([[0, 1], [1, 2]], induced=True), line, 1.0) == 1.0
    tight = np.array([[0.0, 0.0], [0.3, 0.0], [0.6, 0.0]])
    assert kernel_eval(PATH2, tight, 1.0) == 3.0
    assert kernel_eval(SubgraphKernel([[0, 1], [1, 2]], induced=True), tight, 1.0) == 0.0


def test_c0_values():
    for k in (1, 2, 3):
        assert VRSimplexKernel(k).c0 == 1.0
    assert EdgeKernel().c0 == 1.0
    assert CechSimplexKernel(2).c0 == 1.0
    assert PATH2.c0 == 3.0
    # induced non-complete template vanishes at the origin tuple
    assert SubgraphKernel([[0, 1], [1, 2]], induced=True).c0 == 0.0


def test_kernel_eval_rejects_duplicates():
    with pytest.raises(InvalidInputError):
        kernel_eval(EdgeKernel(), np.zeros((2, 2)), 1.0)


def test_disconnected_template_rejected():
    with pytest.raises(InvalidInputError):
        SubgraphKernel([[0, 1], [2, 3]])


def test_compute_S_examples():
    pts = np.array([[0.0, 0.0], [0.0, 0.5], [0.0, 2.0]])
    assert compute_S(pts, EdgeKernel(), 1.0).value == 1.0
    assert compute_S(pts[:1], EdgeKernel(), 1.0).value == 0.0
    assert compute_S(np.empty((0, 2)), VRSimplexKernel(2), 1.0).value == 0.0


@pytest.mark.parametrize("kernel", [EdgeKernel(), VRSimplexKernel(2), PATH2,
                                    CechSimplexKernel(2)],
                         ids=lambda k: k.kind)
def test_oracle_equality_random_clouds(kernel):
    rng = np.random.default_rng(42)
    for trial in range(200):
        n = rng.integers(0, 13)
        pts = rng.uniform(0, 3, size=(n, 2))
        r = rng.uniform(0.2, 1.5)
        fast = compute_S(pts, kernel, r).value
        slow = compute_S_bruteforce(pts, kernel, r).value
        assert fast == slow, f"trial {trial}: {fast} != {slow}"


def test_backends_agree_bitwise():
    if default_backend() != "compiled":
        pytest.skip("compiled backend not built")
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(2000, 2)) * 3
    for kernel in (EdgeKernel(), VRSimplexKernel(2), PATH2):
        a = compute_S(pts, kernel, 0.4, backend="compiled")
        b = compute_S(pts, kernel, 0.4, backend="python")
        assert a.value == b.value
        assert a.tuples_examined == b.tuples_examined


def test_shell_split_with_far_outliers():
    rng = np.random.default_rng(8)
    bulk = rng.normal(size=(300, 2))
    far = np.array([[1e9, 0.0], [1e9, 0.3], [-2e9, 5.0]])
    pts = np.vstack([bulk, far])
    val = compute_S(pts, EdgeKernel(), 0.5).value
    expect = compute_S(bulk, EdgeKernel(), 0.5).value + 1.0  # the 1e9 pair
    assert val == expect


def test_monotone_in_radius():
    rng = np.random.default_rng(9)
    pts = rng.uniform(0, 4, size=(60, 2))
    for kernel in (EdgeKernel(), VRSimplexKernel(2)):
        vals = [compute_S(pts, kernel, r).value for r in (0.2, 0.5, 1.0, 2.0)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_value_bounded_by_tuple_count():
    rng = np.random.default_rng(10)
    pts = rng.uniform(0, 2, size=(40, 2))
    for kernel in (EdgeKernel(), PATH2):
        stat = compute_S(pts, kernel, 0.8)
        assert stat.value <= kernel.bound * stat.tuples_examined + 1e-9


def test_budget_guard():
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(500, 2)) * 0.01  # everything within one cell
    with pytest.raises(BudgetExceededError):
        compute_S(pts, EdgeKernel(), 1.0, budget=100)


def test_linear_combination_closure():
    rng = np.random.default_rng(12)
    combo = LinearCombinationKernel([VRSimplexKernel(2), PATH2], [0.5, 2.0])
    assert combo.bound == pytest.approx(0.5 * 1.0 + 2.0 * 3.0)
    for _ in range(200):
        pts = random_tuple(rng, 2, scale=rng.uniform(0.2, 2.0))
        val = combo.value(pts, 1.0)
        direct = 0.5 * VRSimplexKernel(2).value(pts, 1.0) + 2.0 * PATH2.value(pts, 1.0)
        assert val == pytest.approx(direct, abs=1e-12)
        assert 0 <= val <= combo.bound
        shift = rng.normal(size=2)
        assert combo.value(pts + shift, 1.0) == pytest.approx(val, abs=1e-12)


def test_doubling_bound_scales_linearly():
    # a kernel scaled by 2 doubles S (bilinearity enters the variance
    # integrals as the square)
    rng = np.random.default_rng(13)
    pts = rng.uniform(0, 3, size=(30, 2))
    base = compute_S(pts, VRSimplexKernel(2), 1.0).value
    doubled = LinearCombinationKernel([VRSimplexKernel(2)], [2.0])
    assert compute_S(pts, doubled, 1.0).value == pytest.approx(2 * base)


def test_weighted_combination():
    meta = {"parent": "m|1|0|100"}
    rng = np.random.default_rng(14)
    pts = rng.uniform(-2, 2, size=(50, 2))
    upper = PointCloud(pts[pts[:, 1] >= 0.5], meta)
    lower = PointCloud(pts[pts[:, 1] <= -0.5], meta)
    kernel = EdgeKernel()
    s_up = compute_S(upper, kernel, 1.0).value
    s_dn = compute_S(lower, kernel, 1.0).value
    assert weighted_combination([upper, lower], kernel, 1.0, [1.0, 0.0]) == s_up
    assert weighted_combination([upper, lower], kernel, 1.0, [1.0, 1.0]) == s_up + s_dn
    assert weighted_combination([upper, upper], kernel, 1.0, [1.0, -1.0]) == 0.0
    with pytest.raises(InvalidInputError):
        weighted_combination([upper, lower], kernel, 1.0, [0.0, 0.0])
    other = PointCloud(pts, {"parent": "m|2|0|100"})
    with pytest.raises(InvalidInputError):
        weighted_combination([upper, other], kernel, 1.0, [1.0, 1.0])


def test_kernel_from_config():
    assert kernel_from_config({"kind": "edge"}).kind == "edge"
    assert kernel_from_config({"kind": "vr", "k": 3}).k == 3
    sub = kernel_from_config({"kind": "noninduced", "adjacency": [[0, 1], [1, 2]]})
    assert sub.k == 2 and sub.kappa == 2.0
    with pytest.raises(InvalidInputError):
        kernel_from_config({"kind": "moment"})


def test_grid_completeness_against_unfiltered_enumeration():
    # every positive-valued subset is found by the grid pass
    rng = np.random.default_rng(15)
    pts = rng.uniform(0, 6, size=(45, 2))
    for kernel in (VRSimplexKernel(2), PATH2):
        grid_val = compute_S(pts, kernel, 0.9).value
        total = 0.0
        for combo in itertools.combinations(range(45), kernel.k + 1):
            total += kernel.value(pts[list(combo)], 0.9)
        assert grid_val == pytest.approx(total, abs=1e-9)

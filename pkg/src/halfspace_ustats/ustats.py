"""Local U-statistics: kernels and exact tuple-sum evaluation.

A kernel of order k evaluates (k+1)-point configurations and must be
symmetric, translation invariant, locally determined (positive value forces
diameter <= kappa * r), scale-covariant in r, and bounded by M. The
statistic S_k(X, r) is the sum of the kernel over all (k+1)-subsets of X.

`compute_S` enumerates only subsets with diameter <= kappa * r using a
uniform grid of cells of width kappa * r; each subset is visited once, from
its minimal index. The inner counting loops run in the compiled extension
when available and in `_ustat_fallback` otherwise; both produce identical
integer-valued sums.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _ustat_fallback as _py_engine
from .errors import BudgetExceededError, InvalidInputError

try:  # compiled core is optional
    from . import _ustat_core as _cy_engine
except ImportError:  # pragma: no cover - depends on build environment
    _cy_engine = None

DEFAULT_BUDGET = 1 << 34


def default_backend():
    forced = os.environ.get("HALFSPACE_USTATS_BACKEND", "auto")
    if forced == "python":
        return "python"
    if forced == "compiled":
        if _cy_engine is None:
            raise ImportError("compiled backend requested but not built")
        return "compiled"
    return "compiled" if _cy_engine is not None else "python"


def _engine(backend):
    backend = backend or default_backend()
    if backend == "python":
        return _py_engine
    if backend == "compiled":
        if _cy_engine is None:
            raise ImportError("compiled backend not built")
        return _cy_engine
    raise InvalidInputError(f"unknown backend {backend!r}")


# -- kernels ---------------------------------------------------------------------


class Kernel:
    """Base kernel. Subclasses set order k, locality kappa, bound M, and the
    batched evaluator `_value(tuples, r)` over arrays of shape (m, k+1, d)."""

    kind = "custom"
    core = None  # fast-path id used by compute_S

    def __init__(self, k, kappa, bound):
        self.k = int(k)
        self.kappa = float(kappa)
        self.bound = float(bound)

    def _value(self, tuples, r):
        raise NotImplementedError

    def value(self, tuples, r):
        tuples = np.asarray(tuples, float)
        if tuples.ndim == 2:
            return float(self._value(tuples[None], r)[0])
        return self._value(tuples, r)

    @property
    def c0(self):
        """h^k_1 evaluated at the all-zero configuration."""
        d = 2
        zeros = np.zeros((1, self.k + 1, d))
        return float(self._value(zeros, 1.0)[0])

    def __repr__(self):
        return f"{type(self).__name__}(k={self.k}, kappa={self.kappa}, M={self.bound})"


def _pairwise_sq(tuples):
    diff = tuples[:, :, None, :] - tuples[:, None, :, :]
    return np.einsum("mijk,mijk->mij", diff, diff)


class EdgeKernel(Kernel):
    """1{||x0 - x1|| <= r}; closed condition so c0 = 1."""

    kind = "edge"
    core = ("pairs",)

    def __init__(self):
        super().__init__(k=1, kappa=1.0, bound=1.0)

    def _value(self, tuples, r):
        d2 = _pairwise_sq(tuples)
        return (d2[:, 0, 1] <= r * r).astype(float)


class VRSimplexKernel(Kernel):
    """Vietoris-Rips k-simplex indicator: all pairwise distances <= r."""

    kind = "vr"

    def __init__(self, k):
        super().__init__(k=k, kappa=1.0, bound=1.0)
        if k == 2:
            self.core = ("triples", 0)

    def _value(self, tuples, r):
        d2 = _pairwise_sq(tuples)
        iu, ju = np.triu_indices(self.k + 1, k=1)
        return np.all(d2[:, iu, ju] <= r * r, axis=1).astype(float)


def _miniball_radius_sq(points):
    """Exact smallest enclosing ball of a small point set.

    Enumerates candidate support subsets of up to d+1 points; for each, the
    circumcenter within the subset's affine hull is computed, and the
    candidate is valid when its circumball contains all points. The answer
    is the smallest valid circumradius; enumeration order cannot affect it,
    so the kernel stays exactly permutation symmetric.
    """
    n, d = points.shape
    best = math.inf
    for m in range(1, min(n, d + 1) + 1):
        for idx in itertools.combinations(range(n), m):
            S = points[list(idx)]
            if m == 1:
                c = S[0]
            else:
                B = S[1:] - S[0]
                rhs = 0.5 * np.einsum("ij,ij->i", B, B)
                gram = B @ B.T
                try:
                    lam = np.linalg.solve(gram, rhs)
                except np.linalg.LinAlgError:
                    continue
                c = S[0] + lam @ B
            r2 = float(np.einsum("j,j->", S[0] - c, S[0] - c))
            dists = np.einsum("ij,ij->i", points - c, points - c)
            if np.max(dists) <= r2 * (1 + 1e-9) + 1e-15:
                best = min(best, r2)
    return best


class CechSimplexKernel(Kernel):
    """Cech k-simplex indicator: balls of radius r/2 around the points share
    a common point, i.e. the smallest enclosing ball has radius <= r/2."""

    kind = "cech"

    def __init__(self, k):
        super().__init__(k=k, kappa=1.0, bound=1.0)

    def _value(self, tuples, r):
        out = np.empty(tuples.shape[0])
        lim = (0.5 * r) ** 2 * (1 + 1e-12)
        for i in range(tuples.shape[0]):
            out[i] = 1.0 if _miniball_radius_sq(tuples[i]) <= lim else 0.0
        return out


class SubgraphKernel(Kernel):
    """Subgraph-count kernel on the distance graph at scale r.

    For a connected template on k+1 vertices, the value on a tuple is the
    number of embeddings of the template into the tuple's distance graph
    divided by |Aut|, i.e. the number of distinct copies spanning the tuple.
    Non-induced counts are positive whenever all pairwise distances are
    small; induced counts can vanish (positivity not guaranteed), so CLT
    studies default to non-induced templates.
    """

    def __init__(self, edges, induced=False):
        edges = [tuple(sorted(map(int, e))) for e in edges]
        if not edges:
            raise InvalidInputError("template needs at least one edge")
        nv = max(max(e) for e in edges) + 1
        k = nv - 1
        eset = set(edges)
        if any(a == b for a, b in eset):
            raise InvalidInputError("template has a self-loop")
        diam = _graph_diameter(nv, eset)
        if not math.isfinite(diam):
            raise InvalidInputError("template must be connected for locality")
        self.edges = sorted(eset)
        self.non_edges = [(a, b) for a in range(nv) for b in range(a + 1, nv)
                          if (a, b) not in eset]
        self.induced = bool(induced)
        self.perms = np.array(list(itertools.permutations(range(nv))), dtype=np.int64)
        self.aut = _count_automorphisms(self.perms, eset, nv)
        self.kind = "induced-subgraph" if induced else "noninduced-subgraph"
        bound = math.factorial(nv) / self.aut
        super().__init__(k=k, kappa=float(diam), bound=bound)
        if not induced and self.edges == [(0, 1), (1, 2)]:
            self.core = ("triples", 1)

    def _value(self, tuples, r):
        d2 = _pairwise_sq(tuples)
        adj = d2 <= r * r
        m = tuples.shape[0]
        good = np.zeros(m, dtype=np.int64)
        for perm in self.perms:
            ok = np.ones(m, dtype=bool)
            for a, b in self.edges:
                ok &= adj[:, perm[a], perm[b]]
            if self.induced:
                for a, b in self.non_edges:
                    ok &= ~adj[:, perm[a], perm[b]]
            good += ok
        return good / self.aut


def _graph_diameter(nv, eset):
    nbrs = {v: set() for v in range(nv)}
    for a, b in eset:
        nbrs[a].add(b)
        nbrs[b].add(a)
    diam = 0
    for src in range(nv):
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for v in frontier:
                for w in nbrs[v]:
                    if w not in dist:
                        dist[w] = dist[v] + 1
                        nxt.append(w)
            frontier = nxt
        if len(dist) < nv:
            return math.inf
        diam = max(diam, max(dist.values()))
    return diam


def _count_automorphisms(perms, eset, nv):
    count = 0
    for perm in perms:
        mapped = {tuple(sorted((perm[a], perm[b]))) for a, b in eset}
        if mapped == eset:
            count += 1
    return count


class LinearCombinationKernel(Kernel):
    """Nonnegative linear combination of kernels of a common order."""

    kind = "linear-combination"

    def __init__(self, kernels, weights):
        if len(kernels) != len(weights) or not kernels:
            raise InvalidInputError("kernels and weights must match and be nonempty")
        if any(w < 0 for w in weights):
            raise InvalidInputError("weights must be nonnegative")
        k = kernels[0].k
        if any(kern.k != k for kern in kernels):
            raise InvalidInputError("kernels must share the order k")
        self.parts = list(zip(weights, kernels))
        kappa = max(kern.kappa for kern in kernels)
        bound = sum(w * kern.bound for w, kern in self.parts)
        super().__init__(k=k, kappa=kappa, bound=bound)

    def _value(self, tuples, r):
        acc = np.zeros(tuples.shape[0])
        for w, kern in self.parts:
            acc += w * kern._value(tuples, r)
        return acc


def kernel_from_config(spec):
    """Kernel from a config dict: {"kind": "edge"}, {"kind": "vr", "k": 2},
    {"kind": "cech", "k": 2}, {"kind": "noninduced"|"induced",
    "adjacency": [[0,1],[1,2]]}."""
    kind = spec.get("kind")
    if kind == "edge":
        return EdgeKernel()
    if kind == "vr":
        return VRSimplexKernel(int(spec.get("k", 2)))
    if kind == "cech":
        return CechSimplexKernel(int(spec.get("k", 2)))
    if kind in ("noninduced", "induced"):
        return SubgraphKernel(spec["adjacency"], induced=(kind == "induced"))
    raise InvalidInputError(f"kernel kind {kind!r} not recognized")


def kernel_eval(kernel, tuple_points, r):
    """Evaluate the kernel on one (k+1)-tuple of distinct points."""
    pts = np.asarray(tuple_points, float)
    if pts.shape[0] != kernel.k + 1:
        raise InvalidInputError(f"kernel of order {kernel.k} takes "
                                f"{kernel.k + 1} points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("tuple has non-finite coordinates")
    for i in range(pts.shape[0]):
        for j in range(i + 1, pts.shape[0]):
            if np.array_equal(pts[i], pts[j]):
                raise InvalidInputError("tuple points must be distinct")
    return kernel.value(pts, r)


# -- statistic evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class StatisticValue:
    value: float
    tuples_examined: int
    r: float


def _points_of(cloud):
    pts = cloud.points if hasattr(cloud, "points") else np.asarray(cloud, float)
    if pts.ndim != 2:
        raise InvalidInputError("expected an (n, d) point array")
    return np.ascontiguousarray(pts, dtype=float)


def _build_grid(pts, width):
    cells = np.floor(pts / width).astype(np.int64)
    shifted = cells - cells.min(axis=0) + 1
    ext = shifted.max(axis=0) + 2
    if float(np.prod(ext.astype(float))) >= 2**62:
        raise InvalidInputError("grid extent overflow; radius too small for "
                                "the cloud's spread")
    d = pts.shape[1]
    strides = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * ext[i + 1]
    keys = shifted @ strides
    order = np.argsort(keys, kind="stable")
    keys_sorted = keys[order]
    ucells, counts = np.unique(keys_sorted, return_counts=True)
    starts = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    deltas = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
    packed = deltas @ strides
    pos_offsets = np.sort(packed[packed > 0])
    all_offsets = np.sort(packed)
    return order, keys_sorted, ucells, starts, pos_offsets, all_offsets


def compute_S(cloud, kernel, r, budget=DEFAULT_BUDGET, backend=None):
    """S_k(cloud, r): exact sum of the kernel over all (k+1)-subsets.

    Only subsets of diameter <= kappa * r can contribute, so enumeration is
    restricted to the grid neighborhoods of width kappa * r. The cloud is
    first split into radial shells separated by norm gaps above kappa * r;
    a contributing subset can never straddle such a gap, and the split keeps
    grid extents bounded when heavy tails throw isolated points far out.
    Raises BudgetExceededError when the candidate-tuple count passes
    `budget`.
    """
    if r <= 0:
        raise InvalidInputError("radius must be positive")
    pts = _points_of(cloud)
    n = pts.shape[0]
    if n < kernel.k + 1:
        return StatisticValue(0.0, 0, r)
    width = kernel.kappa * r
    total = 0.0
    checked = 0
    for shell in _radial_shells(pts, width):
        if shell.shape[0] < kernel.k + 1:
            continue
        val, chk = _count_shell(shell, kernel, r, width, budget - checked,
                                backend)
        total += val
        checked += chk
    return StatisticValue(total, checked, r)


def _radial_shells(pts, width):
    norms = np.linalg.norm(pts, axis=1)
    order = np.argsort(norms)
    gaps = np.nonzero(np.diff(norms[order]) > width)[0]
    prev = 0
    for g in gaps:
        yield pts[order[prev:g + 1]]
        prev = g + 1
    yield pts[order[prev:]]


def _count_shell(pts, kernel, r, width, budget, backend):
    order, keys, ucells, starts, pos_off, all_off = _build_grid(pts, width)
    spts = np.ascontiguousarray(pts[order])
    eng = _engine(backend)
    if kernel.core == ("pairs",):
        return eng.count_pairs(spts, keys, ucells, starts, pos_off,
                               r * r, np.int64(budget))
    if kernel.core is not None and kernel.core[0] == "triples":
        return eng.count_triples(spts, keys, ucells, starts, all_off,
                                 r * r, kernel.core[1], np.int64(budget))
    return _generic_count(spts, ucells, starts, all_off, kernel, r, budget)


def _generic_count(spts, ucells, starts, all_offsets, kernel, r, budget):
    n = spts.shape[0]
    k = kernel.k
    point_cell = np.repeat(np.arange(ucells.shape[0]), np.diff(starts))
    reach = (kernel.kappa * r) ** 2
    total = 0.0
    checked = 0
    for i in range(n):
        ci = point_cell[i]
        cand = []
        for off in all_offsets:
            key = ucells[ci] + off
            cj = np.searchsorted(ucells, key)
            if cj >= ucells.shape[0] or ucells[cj] != key:
                continue
            lo = max(starts[cj], i + 1)
            if lo < starts[cj + 1]:
                cand.append(np.arange(lo, starts[cj + 1]))
        if not cand:
            continue
        cand = np.concatenate(cand)
        diff = spts[cand] - spts[i]
        near = np.einsum("ij,ij->i", diff, diff) <= reach
        cand = cand[near]
        if cand.shape[0] < k:
            continue
        checked += math.comb(cand.shape[0], k)
        if checked > budget:
            raise BudgetExceededError("tuple enumeration exceeded budget")
        combos = np.array(list(itertools.combinations(cand.tolist(), k)),
                          dtype=np.int64)
        tuples = np.concatenate(
            [np.broadcast_to(spts[i], (combos.shape[0], 1, spts.shape[1])),
             spts[combos]], axis=1)
        total += float(np.sum(kernel._value(tuples, r)))
    return total, checked


def compute_S_bruteforce(cloud, kernel, r, max_points=64):
    """Direct enumeration of all (k+1)-subsets; the oracle for compute_S."""
    pts = _points_of(cloud)
    n = pts.shape[0]
    if n > max_points:
        raise InvalidInputError(f"brute force limited to {max_points} points")
    if n < kernel.k + 1:
        return StatisticValue(0.0, 0, r)
    combos = list(itertools.combinations(range(n), kernel.k + 1))
    tuples = pts[np.array(combos, dtype=np.int64)]
    vals = kernel._value(tuples, r)
    return StatisticValue(float(np.sum(vals)), len(combos), r)


def weighted_combination(clouds, kernel, r, weights, budget=DEFAULT_BUDGET):
    """sum_i a_i S_k(cloud_i, r) for clouds restricted from one parent sample.

    The clouds must carry identical parent metadata (same seed, replicate,
    intensity, and model); mixing parents would break the covariance coupling.
    """
    if len(clouds) != len(weights) or not clouds:
        raise InvalidInputError("need matching nonempty clouds and weights")
    if all(w == 0 for w in weights):
        raise InvalidInputError("weights must not be all zero")
    parents = {c.meta.get("parent") for c in clouds}
    if len(parents) != 1 or None in parents:
        raise InvalidInputError("clouds come from different parent samples")
    acc = 0.0
    for w, c in zip(weights, clouds):
        if w == 0:
            continue
        acc += w * compute_S(c, kernel, r, budget=budget).value
    return acc

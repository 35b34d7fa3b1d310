"""Pure-numpy counting engine for the built-in indicator kernels.

Mirrors the compiled core in `_ustat_core.pyx`; selected at import time when
the extension is unavailable (or forced via HALFSPACE_USTATS_BACKEND).
Counts are exact integers accumulated in float64, so both backends agree
bitwise.
"""

from __future__ import annotations

import numpy as np

from .errors import BudgetExceededError


def count_pairs(pts, keys, ucells, starts, pos_offsets, r2, budget):
    """Pairs with squared distance <= r2; each pair counted once.

    pts are sorted by packed cell key; `starts` delimits the block of each
    unique cell; `pos_offsets` are the packed key offsets of the strictly
    positive half of the 3^d neighborhood.
    """
    total = 0.0
    checked = 0
    ncell = ucells.shape[0]
    for ci in range(ncell):
        a0, a1 = starts[ci], starts[ci + 1]
        block = pts[a0:a1]
        na = a1 - a0
        if na > 1:
            checked += na * (na - 1) // 2
            if checked > budget:
                raise BudgetExceededError("pair enumeration exceeded budget")
            diff = block[:, None, :] - block[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            total += float(np.sum(np.triu(d2 <= r2, k=1)))
        for off in pos_offsets:
            key = ucells[ci] + off
            cj = np.searchsorted(ucells, key)
            if cj >= ncell or ucells[cj] != key:
                continue
            b0, b1 = starts[cj], starts[cj + 1]
            nb = b1 - b0
            if nb == 0 or na == 0:
                continue
            checked += na * nb
            if checked > budget:
                raise BudgetExceededError("pair enumeration exceeded budget")
            other = pts[b0:b1]
            diff = block[:, None, :] - other[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            total += float(np.sum(d2 <= r2))
    return total, checked


def count_triples(pts, keys, ucells, starts, all_offsets, r2, mode, budget):
    """Triple kernels decided by the three pairwise squared distances.

    mode 0: Vietoris-Rips triangle, value 1 when all three <= r2.
    mode 1: 2-path count, value = number of vertices adjacent to both others.
    Tuples are enumerated from their minimal sorted index.
    """
    total = 0.0
    checked = 0
    n = pts.shape[0]
    ncell = ucells.shape[0]
    point_cell = np.repeat(np.arange(ncell), np.diff(starts))
    for i in range(n):
        ci = point_cell[i]
        cand = []
        for off in all_offsets:
            key = ucells[ci] + off
            cj = np.searchsorted(ucells, key)
            if cj >= ncell or ucells[cj] != key:
                continue
            b0, b1 = starts[cj], starts[cj + 1]
            lo = max(b0, i + 1)
            if lo < b1:
                cand.append(np.arange(lo, b1))
        if not cand:
            continue
        cand = np.concatenate(cand)
        m = cand.shape[0]
        if m < 2:
            continue
        checked += m * (m - 1) // 2
        if checked > budget:
            raise BudgetExceededError("triple enumeration exceeded budget")
        diff_i = pts[cand] - pts[i]
        d2i = np.einsum("ij,ij->i", diff_i, diff_i)
        diff = pts[cand][:, None, :] - pts[cand][None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        ai = d2i <= r2                      # adjacency to i
        ajl = d2 <= r2                      # adjacency among candidates
        iu, ju = np.triu_indices(m, k=1)
        if mode == 0:
            total += float(np.sum(ai[iu] & ai[ju] & ajl[iu, ju]))
        else:
            centers = ((ai[iu] & ai[ju]).astype(np.int64)
                       + (ai[iu] & ajl[iu, ju]).astype(np.int64)
                       + (ai[ju] & ajl[iu, ju]).astype(np.int64))
            total += float(np.sum(centers))
    return total, checked

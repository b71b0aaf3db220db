"""Network structure comparison via net multipliers and hierarchical clustering."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import leontief_inverse

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
LINKAGES = ("average", "complete", "single")


def net_multipliers(S) -> np.ndarray:
    """``[I - S]^{-1} - I``; column ``j`` is sector j's net multiplier."""
    S = np.asarray(S, dtype=float)
    return leontief_inverse(S) - np.eye(S.shape[0])


@dataclass
class DistanceMatrix:
    d: np.ndarray
    zero_variance: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def n(self) -> int:
        return self.d.shape[0]


def distance_matrix(multipliers) -> DistanceMatrix:
    """``d_jk = sqrt(1 - corr(mu_j, mu_k))`` over the multiplier columns.

    A column with zero variance gets distance 1 to every other column.
    """
    mu = np.asarray(multipliers, dtype=float)
    n = mu.shape[1]
    centered = mu - mu.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    flat = norms <= 1e-14 * np.maximum(np.abs(mu).max(axis=0), 1.0)
    safe = np.where(flat, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = np.clip(corr, -1.0, 1.0)
    d = np.sqrt(np.clip(1.0 - corr, 0.0, 2.0))
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    if flat.any():
        logger.info("%d zero-variance multiplier columns", int(flat.sum()))
    return DistanceMatrix(d, flat)


@dataclass
class Dendrogram:
    """Merge history in scipy linkage layout plus the plotting leaf order.

    ``linkage[k] = (a, b, height, size)`` with cluster ids ``< n`` for leaves
    and ``n + k`` for the cluster formed at step ``k``.
    """

    linkage: np.ndarray
    leaf_order: np.ndarray
    method: str = "average"

    @property
    def merges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(h)) for a, b, h, _ in self.linkage]

    def cophenetic(self) -> np.ndarray:
        n = len(self.leaf_order)
        members = {k: [k] for k in range(n)}
        C = np.zeros((n, n))
        for k, (a, b, h, _) in enumerate(self.linkage):
            ma, mb = members.pop(int(a)), members.pop(int(b))
            C[np.ix_(ma, mb)] = h
            C[np.ix_(mb, ma)] = h
            members[n + k] = ma + mb
        return C


def hierarchical_cluster(D, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering with Lance-Williams updates.

    Ties in the minimum distance (within 1e-12 relative) go to the pair whose
    smallest member sector indices are lexicographically smallest.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    d = np.array(D.d if isinstance(D, DistanceMatrix) else D, dtype=float)
    n = d.shape[0]
    if n < 2:
        return Dendrogram(np.zeros((0, 4)), np.arange(n), linkage)
    work = d.copy()
    np.fill_diagonal(work, np.inf)
    active = np.ones(n, dtype=bool)
    slot_id = np.arange(n)  # current cluster id held in each slot
    slot_min = np.arange(n)  # smallest sector index in each slot's cluster
    size = np.ones(n)
    Z = np.zeros((n - 1, 4))
    children = {}
    for step in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], work, np.inf)
        best = masked.min()
        tol = 1e-12 * max(abs(best), 1e-300)
        cand = np.argwhere(masked <= best + tol)
        keys = [(min(slot_min[i], slot_min[j]), max(slot_min[i], slot_min[j]), i, j) for i, j in cand]
        _, _, i, j = min(keys)
        if slot_min[i] > slot_min[j]:
            i, j = j, i
        h = float(work[i, j])
        a, b = slot_id[i], slot_id[j]
        Z[step] = (min(a, b), max(a, b), h, size[i] + size[j])
        children[n + step] = (a, b) if slot_min[i] <= slot_min[j] else (b, a)
        # merge j into i
        if linkage == "average":
            new = (size[i] * work[i] + size[j] * work[j]) / (size[i] + size[j])
        elif linkage == "complete":
            new = np.maximum(work[i], work[j])
        else:
            new = np.minimum(work[i], work[j])
        work[i, :] = new
        work[:, i] = new
        work[i, i] = np.inf
        active[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf
        size[i] += size[j]
        slot_id[i] = n + step
        slot_min[i] = min(slot_min[i], slot_min[j])
    return Dendrogram(Z, _leaf_order(children, n), linkage)


def _leaf_order(children: dict, n: int) -> np.ndarray:
    order = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            stack.append(right)
            stack.append(left)
    return np.array(order, dtype=int)


def tanglegram_pairs(left: Dendrogram, right: Dendrogram) -> np.ndarray:
    """``(sector, position_left, position_right)`` rows for connector lines."""
    n = len(left.leaf_order)
    pl = np.empty(n, dtype=int)
    pr = np.empty(n, dtype=int)
    pl[left.leaf_order] = np.arange(n)
    pr[right.leaf_order] = np.arange(n)
    return np.column_stack((np.arange(n), pl, pr))


@dataclass
class DistanceChange:
    counts: np.ndarray
    edges: np.ndarray
    diffs: np.ndarray
    mean_shift: float

    @property
    def n_obs(self) -> int:
        return len(self.diffs)


def distance_change_histogram(D_before, D_after, bins=40) -> DistanceChange:
    """Histogram of upper-triangle changes ``d_after - d_before``.

    A negative ``mean_shift`` means distances contracted.
    """
    a = np.asarray(D_before.d if isinstance(D_before, DistanceMatrix) else D_before, dtype=float)
    b = np.asarray(D_after.d if isinstance(D_after, DistanceMatrix) else D_after, dtype=float)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"distance matrices differ in shape: {a.shape} vs {b.shape}")
    iu = np.triu_indices(a.shape[0], 1)
    diffs = b[iu] - a[iu]
    rng = None
    if np.ndim(bins) == 0 and diffs.size:
        lo, hi = float(diffs.min()), float(diffs.max())
        if hi - lo <= 1e-12 * max(1.0, abs(lo)):
            # near-constant changes: numpy cannot split a rounding-width range
            rng = (lo - 0.5, hi + 0.5)
    counts, edges = np.histogram(diffs, bins=bins, range=rng)
    mean = float(diffs.mean()) if diffs.size else 0.0
    return DistanceChange(counts, edges, diffs, mean)

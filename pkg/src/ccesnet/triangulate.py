"""Stream order: triangulating an input-output incidence matrix.

Sectors are sorted by the weighted input/output incidence ratio
``z_gamma(k) = colsum_k**gamma / rowsum_k`` and the exponent ``gamma`` is
chosen on a grid to maximize the linearity (share of off-diagonal
incidences above the diagonal).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LinearityError
from .io_data import IncidenceMatrix

DEFAULT_GAMMA_GRID = np.round(np.arange(0, 301) * 0.01, 10)
BRUTE_FORCE_MAX_N = 10


def _as_u(U) -> np.ndarray:
    return U.u if isinstance(U, IncidenceMatrix) else np.asarray(U, dtype=np.int64)


def _check_perm(phi, n):
    phi = np.asarray(phi, dtype=int)
    if phi.shape != (n,) or not np.array_equal(np.sort(phi), np.arange(n)):
        raise ValueError("phi is not a permutation of 0..n-1")
    return phi


def above_diagonal(U, phi) -> int:
    u = _as_u(U)
    phi = _check_perm(phi, u.shape[0])
    return int(np.triu(u[np.ix_(phi, phi)], 1).sum())


def linearity(U, phi) -> float:
    """Fraction of off-diagonal incidences above the diagonal after permuting by ``phi``.

    ``phi[k]`` is the original index of the sector placed at position ``k``.
    """
    u = _as_u(U)
    K = int(u.sum() - np.trace(u))
    if K == 0:
        raise LinearityError("linearity undefined: no off-diagonal incidences")
    return above_diagonal(u, phi) / K


def cw_ratios(U, gamma: float) -> np.ndarray:
    """``z_gamma`` for every sector.

    A zero row sum gives ``+inf`` (furthest downstream); a zero column sum
    with ``gamma > 0`` gives 0 (furthest upstream).
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    u = _as_u(U)
    col = u.sum(axis=0).astype(float)
    row = u.sum(axis=1).astype(float)
    z = np.full(len(col), np.inf)
    ok = row > 0
    z[ok] = col[ok] ** gamma / row[ok]
    return z


def cw_ratio(U, gamma: float, k: int) -> float:
    return float(cw_ratios(U, gamma)[k])


def order_for_gamma(U, gamma: float) -> np.ndarray:
    return np.argsort(cw_ratios(U, gamma), kind="stable")


@dataclass
class StreamOrder:
    phi: np.ndarray
    gamma_star: float
    linearity: float
    gammas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    curve: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rank(self) -> np.ndarray:
        """Position of each original sector in the stream order."""
        r = np.empty(len(self.phi), dtype=int)
        r[self.phi] = np.arange(len(self.phi))
        return r


def stream_order(U, gamma_grid: Sequence[float] | None = None) -> StreamOrder:
    """Best ratio ordering over ``gamma_grid`` (ties go to the smaller gamma)."""
    u = _as_u(U)
    grid = DEFAULT_GAMMA_GRID if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    if grid.size == 0 or np.any(grid < 0):
        raise ValueError("gamma grid must be a nonempty set of nonnegative values")
    K = int(u.sum() - np.trace(u))
    if K == 0:
        raise LinearityError("linearity undefined: no off-diagonal incidences")
    curve = np.empty(len(grid))
    best = None
    for k, g in enumerate(grid):
        phi = order_for_gamma(u, float(g))
        h = above_diagonal(u, phi)
        curve[k] = h / K
        if best is None or h > best[0]:
            best = (h, float(g), phi)
    h, g, phi = best
    return StreamOrder(phi, g, h / K, grid.copy(), curve)


def gamma_grid(gamma_min: float = 0.0, gamma_max: float = 3.0, step: float = 0.01) -> np.ndarray:
    if step <= 0 or gamma_max < gamma_min:
        raise ValueError("invalid gamma grid")
    count = int(math.floor((gamma_max - gamma_min) / step + 1e-9)) + 1
    return np.round(gamma_min + step * np.arange(count), 10)


def brute_force_order(U) -> tuple[np.ndarray, float]:
    """Exact linear ordering by enumerating all ``n!`` permutations (n <= 10).

    Returns the lexicographically first maximizer and its linearity.
    """
    u = _as_u(U)
    n = u.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N}")
    K = int(u.sum() - np.trace(u))
    if K == 0:
        raise LinearityError("linearity undefined: no off-diagonal incidences")
    best_h, best_phi = -1, None
    chunk = 200_000
    perms = itertools.permutations(range(n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    while True:
        block = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(perms, chunk)), dtype=np.int8
        ).reshape(-1, n)
        if block.size == 0:
            break
        h = np.zeros(len(block), dtype=np.int64)
        for i, j in pairs:
            h += u[block[:, i], block[:, j]]
        k = int(np.argmax(h))
        if h[k] > best_h:
            best_h, best_phi = int(h[k]), block[k].astype(int)
    return best_phi, best_h / K

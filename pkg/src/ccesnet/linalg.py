"""Leontief inverses with a spectral-radius guard."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ProductivityError


def spectral_radius(S, steps: int = 200) -> float:
    """Power-iteration estimate of the spectral radius of a nonnegative matrix.

    Uses the geometric mean growth rate over ``steps`` iterations, which
    also behaves for imprimitive (periodic) matrices where the plain
    Rayleigh ratio oscillates.
    """
    S = np.abs(np.asarray(S, dtype=float))
    n = S.shape[0]
    if n == 0:
        return 0.0
    x = np.full(n, 1.0 / n)
    log_growth = 0.0
    for _ in range(steps):
        y = S @ x
        norm = np.abs(y).sum()
        if norm == 0.0:
            return 0.0
        log_growth += np.log(norm)
        x = y / norm
    return float(np.exp(log_growth / steps))


def leontief_inverse(S) -> np.ndarray:
    """``[I - S]^{-1}`` by LU, after checking the Neumann series converges."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("coefficient matrix must be square")
    colmax = np.abs(S).sum(axis=0).max(initial=0.0)
    if colmax >= 1.0:
        rho = spectral_radius(S)
        if rho >= 1.0 - 1e-12:
            raise ProductivityError(f"spectral radius {rho:.6g} >= 1", spectral_radius=rho)
    try:
        lu = scipy.linalg.lu_factor(np.eye(n) - S, check_finite=True)
    except (ValueError, scipy.linalg.LinAlgError) as exc:
        raise ProductivityError(f"[I - S] is singular: {exc}") from None
    if np.min(np.abs(np.diag(lu[0])), initial=np.inf) <= np.finfo(float).eps * n:
        raise ProductivityError("[I - S] is numerically singular")
    return scipy.linalg.lu_solve(lu, np.eye(n))


def neumann_series(S, terms: int) -> np.ndarray:
    """``S + S^2 + ... + S^terms``."""
    S = np.asarray(S, dtype=float)
    total = np.zeros_like(S)
    power = np.eye(S.shape[0])
    for _ in range(terms):
        power = power @ S
        total += power
    return total

"""Economy-wide cascaded CES network: unit costs, fixed-point prices, shares.

The per-sector nest chains are packed into padded ``(n, L)`` arrays so that
all sectors are evaluated together, one nest depth at a time.  Padding
nests are masked out and pass the compound price through unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .cces import SIGMA_ONE_TOL, SectorTechnology
from .errors import ConvergenceError

logger = logging.getLogger(__name__)

REFERENCE, CURRENT, PROJECTED = "reference", "current", "projected"


@dataclass
class Economy:
    """All sector technologies (the meta structure) plus the numeraire price."""

    sector_ids: list[str]
    technologies: list[SectorTechnology]
    p0: float
    current_prices: np.ndarray | None = None

    def __post_init__(self):
        if len(self.sector_ids) != len(self.technologies):
            raise ValueError("one technology per sector required")
        if not self.p0 > 0:
            raise ValueError("numeraire price must be positive")
        if self.current_prices is not None:
            self.current_prices = np.asarray(self.current_prices, dtype=float)

    @property
    def n(self) -> int:
        return len(self.sector_ids)

    @property
    def theta(self) -> np.ndarray:
        return np.array([t.theta for t in self.technologies], dtype=float)

    @cached_property
    def _packed(self):
        n = self.n
        L = max((len(t.nests) for t in self.technologies), default=0)
        idx = np.zeros((n, L), dtype=int)
        lam = np.zeros((n, L))
        sig = np.zeros((n, L))
        mask = np.zeros((n, L), dtype=bool)
        for j, tech in enumerate(self.technologies):
            m = len(tech.nests)
            idx[j, :m] = tech.input_indices
            lam[j, :m] = tech.lambdas
            sig[j, :m] = tech.sigmas
            mask[j, :m] = True
        cd = np.abs(sig - 1.0) < SIGMA_ONE_TOL
        rho = np.where(cd, 1.0, 1.0 - sig)
        return idx, lam, sig, mask, cd, rho

    def with_sigmas(self, sigma: float | Sequence[np.ndarray]) -> "Economy":
        """Copy with every elasticity replaced (scalar) or set per sector."""
        if np.isscalar(sigma):
            techs = [t.with_sigmas(np.full(len(t.nests), float(sigma))) for t in self.technologies]
        else:
            techs = [t.with_sigmas(s) for t, s in zip(self.technologies, sigma)]
        return Economy(list(self.sector_ids), techs, self.p0, self.current_prices)

    def to_json(self) -> dict:
        return {
            "sector_ids": list(self.sector_ids),
            "p0": float(self.p0),
            "current_prices": None if self.current_prices is None else self.current_prices.tolist(),
            "technologies": [
                {
                    "sector_id": t.sector_id,
                    "theta": float(t.theta),
                    "inputs": [int(n.input_index) for n in t.nests],
                    "lambdas": [float(n.lam) for n in t.nests],
                    "sigmas": [float(n.sigma) for n in t.nests],
                }
                for t in self.technologies
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Economy":
        from .cces import NestSpec

        techs = [
            SectorTechnology(
                t["sector_id"],
                tuple(NestSpec(k, l, s) for k, l, s in zip(t["inputs"], t["lambdas"], t["sigmas"])),
                t["theta"],
            )
            for t in obj["technologies"]
        ]
        cp = obj.get("current_prices")
        return cls(obj["sector_ids"], techs, obj["p0"], None if cp is None else np.array(cp))


@dataclass
class EquilibriumState:
    """Prices and Shephard coefficients of one equilibrium."""

    prices: np.ndarray
    coefficients: np.ndarray  # S, (n, n): input i per unit cost of sector j
    primary_row: np.ndarray  # s0, (n,)
    label: str = PROJECTED
    p0: float = 1.0

    def column_residual(self) -> float:
        return float(np.max(np.abs(self.primary_row + self.coefficients.sum(axis=0) - 1.0), initial=0.0))


def compound_prices(econ: Economy, w, w0: float) -> np.ndarray:
    """``(n, L+1)`` stack of compound prices ``W_1 .. W_{L+1}`` per sector."""
    idx, lam, _, mask, cd, rho = econ._packed
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0) or not w0 > 0:
        raise ValueError("prices must be positive")
    n, L = idx.shape
    logw = np.log(w)
    out = np.empty((n, L + 1))
    logW = np.full(n, np.log(w0))
    out[:, 0] = logW
    for k in range(L):
        lw = logw[idx[:, k]]
        r = rho[:, k]
        l = lam[:, k]
        ces = np.log(l * np.exp(r * lw) + (1.0 - l) * np.exp(r * logW)) / r
        cobb = l * lw + (1.0 - l) * logW
        new = np.where(cd[:, k], cobb, ces)
        logW = np.where(mask[:, k], new, logW)
        out[:, k + 1] = logW
    return np.exp(out)


def H(econ: Economy, w, w0: float) -> np.ndarray:
    """Row of cascaded CES cost functions at productivity 1."""
    return compound_prices(econ, w, w0)[:, -1]


def unit_costs(econ: Economy, w, w0: float | None = None, z=None) -> np.ndarray:
    w0 = econ.p0 if w0 is None else w0
    c = H(econ, w, w0) / econ.theta
    return c if z is None else c / np.asarray(z, dtype=float)


def share_matrix(econ: Economy, w, w0: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic cost shares ``(s0, S)`` at prices ``(w, w0)``.

    Nest ``k`` splits its cost between the direct input (local share
    ``beta_k``) and the compound below (``1 - beta_k``, evaluated as
    ``Lam_k (W_k/W_{k+1})^(1-sig_k)`` to keep precision).  The global share
    of an input is its local share times the complements of every nest
    above it.
    """
    idx, lam, _, mask, cd, rho = econ._packed
    n, L = idx.shape
    W = compound_prices(econ, w, w0)
    logW = np.log(W)
    lw = np.log(np.asarray(w, dtype=float))[idx]
    expo = np.where(cd, 0.0, rho)
    beta = lam * np.exp(expo * (lw - logW[:, 1:]))
    comp = (1.0 - lam) * np.exp(expo * (logW[:, :-1] - logW[:, 1:]))
    beta = np.where(mask, beta, 0.0)
    comp = np.where(mask, comp, 1.0)
    if L:
        suffix = np.cumprod(comp[:, ::-1], axis=1)[:, ::-1]  # prod_{j>=k}
        above = np.concatenate((suffix[:, 1:], np.ones((n, 1))), axis=1)  # prod_{j>k}
        s0 = suffix[:, 0]
    else:
        above = np.ones((n, 0))
        s0 = np.ones(n)
    shares = beta * above
    S = np.zeros((n, n))
    cols = np.broadcast_to(np.arange(n)[:, None], (n, L))
    np.add.at(S, (idx[mask], cols[mask]), shares[mask])
    return s0, S


def coefficients(econ: Economy, prices, z=None, w0: float | None = None, label: str = PROJECTED) -> EquilibriumState:
    """Shephard coefficient matrix at an equilibrium price vector.

    At a fixed point ``prices = H(prices, p0) / (theta z)`` the expression
    ``<p> grad H <theta>^-1 <z>^-1 <p>^-1`` reduces to the cost-share
    formula, which is what is evaluated here; productivity and shock
    cancel.
    """
    w0 = econ.p0 if w0 is None else w0
    prices = np.asarray(prices, dtype=float)
    s0, S = share_matrix(econ, prices, w0)
    return EquilibriumState(prices.copy(), S, s0, label, float(w0))


def reference_state(econ: Economy) -> EquilibriumState:
    return coefficients(econ, np.ones(econ.n), w0=1.0, label=REFERENCE)


def current_state(econ: Economy) -> EquilibriumState:
    if econ.current_prices is None:
        raise ValueError("economy carries no current prices")
    return coefficients(econ, econ.current_prices, label=CURRENT)


def resettle(econ: Economy) -> Economy:
    """Copy whose current prices are re-solved as the z=1 fixed point.

    Needed after editing technologies, e.g. the all-sigma-zero economy
    used for the Leontief comparison.
    """
    out = Economy(list(econ.sector_ids), list(econ.technologies), econ.p0, econ.current_prices)
    out.current_prices = solve_equilibrium(out, tol=1e-15, max_iter=100_000)
    return out


def solve_equilibrium(
    econ: Economy,
    z=None,
    start=None,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    history: list | None = None,
) -> np.ndarray:
    """Fixed point ``pi = H(pi, p0) <theta>^-1 <z>^-1`` by synchronous iteration.

    Starts from the current prices unless ``start`` is given and stops when
    the largest relative price change falls below ``tol``.  Pass a list as
    ``history`` to collect every iterate.
    """
    n = econ.n
    z = np.ones(n) if z is None else np.asarray(z, dtype=float)
    if z.shape != (n,) or np.any(z <= 0):
        raise ValueError("shock vector must be positive with one entry per sector")
    if start is None:
        start = econ.current_prices if econ.current_prices is not None else np.full(n, econ.p0)
    w = np.asarray(start, dtype=float).copy()
    if np.any(w <= 0):
        raise ValueError("start prices must be positive")
    denom = econ.theta * z
    if history is not None:
        history.append(w.copy())
    changes = []
    for it in range(1, max_iter + 1):
        w_new = H(econ, w, econ.p0) / denom
        if not np.all(np.isfinite(w_new)) or np.any(w_new <= 0) or np.max(w_new) > 1e300:
            raise ConvergenceError(
                f"price iteration diverged at step {it}", iterations=it, trace=changes[-5:]
            )
        change = float(np.max(np.abs(w_new - w) / w))
        changes.append(change)
        w = w_new
        if history is not None:
            history.append(w.copy())
        if change < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations", iterations=max_iter, trace=changes[-5:]
        )
    resid = np.max(np.abs(w - H(econ, w, econ.p0) / denom)) / np.max(np.abs(w))
    if resid >= 1e-10:
        raise ConvergenceError(f"fixed-point residual {resid:.3e} too large", residual=float(resid))
    logger.debug("fixed point reached in %d iterations", len(changes))
    return w


@dataclass
class ReplicationReport:
    """Max-abs residual and worst sector for each replication check."""

    residuals: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)

    def ok(self, tol: float = 1e-8) -> bool:
        return all(v < tol for v in self.residuals.values())

    def failures(self, tol: float = 1e-8) -> dict:
        return {k: self.worst[k] for k, v in self.residuals.items() if not v < tol}

    def to_json(self) -> dict:
        return {k: {"max_abs": float(v), "worst_sector": self.worst[k]} for k, v in self.residuals.items()}


def verify_replication(econ: Economy, data) -> ReplicationReport:
    """Check that t=1 and t=theta reproduce both observed states."""
    ids = econ.sector_ids
    rep = ReplicationReport()

    def record(name, err):
        err = np.asarray(err)
        if err.ndim == 2:
            err = err.max(axis=0)
        j = int(np.argmax(err)) if err.size else 0
        rep.residuals[name] = float(err.max(initial=0.0))
        rep.worst[name] = ids[j] if err.size else None

    ones = np.ones(econ.n)
    record("reference_prices", np.abs(H(econ, ones, 1.0) - 1.0))
    record("current_prices", np.abs(unit_costs(econ, data.p, data.p0) - data.p))
    s0, S = share_matrix(econ, ones, 1.0)
    record("reference_shares", np.abs(np.vstack((s0, S)) - data.A))
    s0, S = share_matrix(econ, data.p, data.p0)
    record("current_shares", np.abs(np.vstack((s0, S)) - data.B))
    return rep

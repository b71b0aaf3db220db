"""Productivity-shock scenarios and welfare accounting.

Final demand ``f`` is the current-state nominal final demand.  Its physical
bundle is ``f / p``, so valued at projected prices it costs
``<pi/p> f``; at ``pi = p`` this reduces to ``f`` and the no-shock scenario
gives ``delta* = 1`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    CURRENT,
    PROJECTED,
    Economy,
    EquilibriumState,
    coefficients,
    solve_equilibrium,
)
from .linalg import leontief_inverse

CCES, LEONTIEF = "cces", "leontief"


@dataclass
class ShockScenario:
    z: np.ndarray
    label: str = "scenario"

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.ndim != 1 or np.any(~(self.z > 0)):
            raise ValueError("shock entries must be positive")

    @classmethod
    def single(cls, n: int, sector: int, magnitude: float = 1.10, label: str | None = None):
        """All ones except ``magnitude`` at ``sector``."""
        z = np.ones(n)
        z[sector] = magnitude
        return cls(z, label or f"z[{sector}]={magnitude:g}")

    @classmethod
    def from_mapping(cls, sector_ids, mapping: dict, label: str = "scenario"):
        """Sparse form: unlisted sectors default to 1."""
        pos = {s: k for k, s in enumerate(sector_ids)}
        z = np.ones(len(sector_ids))
        for sid, val in mapping.items():
            if sid not in pos:
                raise KeyError(f"unknown sector {sid!r} in shock")
            z[pos[sid]] = float(val)
        return cls(z, label)


@dataclass
class WelfareReport:
    delta_star: float
    delta_f: float
    delta_v: np.ndarray
    gross_output_current: np.ndarray
    gross_output_projected: np.ndarray
    value_added_current: np.ndarray
    value_added_projected: np.ndarray
    baseline: str = CCES
    shocked: int | None = None
    projected: EquilibriumState | None = field(default=None, repr=False)

    @property
    def gross_output_shocked_sector(self) -> float | None:
        return None if self.shocked is None else float(self.gross_output_projected[self.shocked])

    @property
    def value_added_shocked_sector(self) -> float | None:
        return None if self.shocked is None else float(self.value_added_projected[self.shocked])


def welfare(
    current: EquilibriumState,
    projected: EquilibriumState,
    pi,
    f,
    baseline: str = CCES,
    shocked: int | None = None,
) -> WelfareReport:
    """Earnable final demand ``delta*``, primary redistribution and welfare gain.

    ``delta* = b0 [I-B]^-1 f / (m0 [I-M]^-1 <pi/p> f)``.  ``delta_v`` is
    indexed by final-demand commodity and sums to zero.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0) or not np.any(f > 0):
        raise ValueError("final demand must be nonnegative and not all zero")
    pi = np.asarray(pi, dtype=float)
    LB = leontief_inverse(current.coefficients)
    LM = leontief_inverse(projected.coefficients)
    f_proj = pi / current.prices * f
    v_cur = (current.primary_row @ LB) * f
    v_unit = (projected.primary_row @ LM) * f_proj
    delta_star = float(v_cur.sum() / v_unit.sum())
    delta_v = v_cur - v_unit * delta_star
    x_cur = LB @ f
    x_proj = LM @ (f_proj * delta_star)
    return WelfareReport(
        delta_star=delta_star,
        delta_f=float(f.sum() * (delta_star - 1.0)),
        delta_v=delta_v,
        gross_output_current=x_cur,
        gross_output_projected=x_proj,
        value_added_current=current.primary_row * x_cur,
        value_added_projected=projected.primary_row * x_proj,
        baseline=baseline,
        shocked=shocked,
        projected=projected,
    )


def leontief_projection(current: EquilibriumState, z, p0: float) -> EquilibriumState:
    """Projected state with physical coefficients frozen at the current state.

    Physical input per unit output is ``p_j S_ij / p_i`` (primary
    ``p_j s0_j / p0``); a shock divides it by ``z_j``.  Prices solve the
    linear system ``pi = (pi A_phys + p0 a0_phys) <z>^-1``.
    """
    p = current.prices
    z = np.asarray(z, dtype=float)
    A_phys = current.coefficients * p[None, :] / p[:, None]
    a0_phys = current.primary_row * p / p0
    Az = A_phys / z[None, :]
    rhs = p0 * a0_phys / z
    # pi (I - Az) = rhs  <=>  (I - Az)^T pi = rhs
    pi = leontief_inverse(Az).T @ rhs
    M = Az * pi[:, None] / pi[None, :]
    m0 = rhs / pi
    return EquilibriumState(pi, M, m0, PROJECTED, p0)


def leontief_baseline(econ: Economy, current: EquilibriumState, z, f, shocked: int | None = None) -> WelfareReport:
    proj = leontief_projection(current, z, econ.p0)
    return welfare(current, proj, proj.prices, f, baseline=LEONTIEF, shocked=shocked)


def cces_projection(econ: Economy, z, start=None) -> EquilibriumState:
    pi = solve_equilibrium(econ, z, start=start)
    return coefficients(econ, pi, z, label=PROJECTED)


def cces_welfare(econ: Economy, current: EquilibriumState, z, f, shocked: int | None = None) -> WelfareReport:
    proj = cces_projection(econ, z, start=current.prices)
    return welfare(current, proj, proj.prices, f, baseline=CCES, shocked=shocked)


def run_scenario(econ: Economy, current: EquilibriumState, scenario: ShockScenario, f,
                 baseline: str = "both") -> dict:
    """Welfare reports keyed by ``"cces"`` and/or ``"leontief"``."""
    if baseline not in ("both", CCES, LEONTIEF):
        raise ValueError(f"unknown baseline {baseline!r}")
    z = scenario.z
    shocked = int(np.argmax(z)) if np.any(z != 1.0) else None
    out = {}
    if baseline in ("both", LEONTIEF):
        out[LEONTIEF] = leontief_baseline(econ, current, z, f, shocked)
    if baseline in ("both", CCES):
        out[CCES] = cces_welfare(econ, current, z, f, shocked)
    return out


@dataclass
class RedistributionProfile:
    """``ln |delta_v_j|`` in stream order; exact zeros are flagged, value NaN."""

    order: np.ndarray
    log_abs: np.ndarray
    is_zero: np.ndarray


def primary_redistribution_profile(report: WelfareReport, order=None) -> RedistributionProfile:
    dv = np.asarray(report.delta_v, dtype=float)
    order = np.arange(len(dv)) if order is None else np.asarray(order, dtype=int)
    vals = dv[order]
    is_zero = vals == 0.0
    log_abs = np.full(len(vals), np.nan)
    log_abs[~is_zero] = np.log(np.abs(vals[~is_zero]))
    return RedistributionProfile(order, log_abs, is_zero)


def current_from_data(data) -> EquilibriumState:
    """Observed current state straight from two-state data."""
    return EquilibriumState(np.asarray(data.p, dtype=float).copy(), data.B[1:].copy(),
                            data.B[0].copy(), CURRENT, float(data.p0))

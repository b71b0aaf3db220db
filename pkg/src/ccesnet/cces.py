"""Cascaded CES unit costs and the two-state restoring-elasticity calibration.

A sector's technology is a chain of binary CES nests.  Nest ``i`` (1-based,
innermost first) combines the direct input ``x_i`` with the compound ``X_i``
coming out of the nest below; ``X_1`` is the primary input.  Everything here
works on the dual side: compound prices ``W_{i+1}(w_i, W_i)`` and the
sector unit cost ``c = W_{n+1} / theta``.

Array conventions used throughout:

* share and price vectors of one sector are primary-first and then in nest
  order, so ``a[0]`` is the primary share and ``a[i]`` the share of the
  input entering nest ``i``;
* compound prices are stored as ``W[k] = W_{k+1}``, i.e. ``W[0]`` is the
  primary price and ``W[-1]`` the top compound price.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import (
    CalibrationError,
    DataValidationError,
    DegenerateShareError,
    InfeasibleProductivity,
)

logger = logging.getLogger(__name__)

#: |sigma - 1| below this switches a nest to its Cobb-Douglas limit.
SIGMA_ONE_TOL = 1e-9
#: |ln(W_{i+1}/p_i)| below this leaves sigma unidentified at that nest.
DEGENERATE_LOG_TOL = 1e-12

DEFAULT_BRACKET = (0.25, 4.0)
BRACKET_LIMITS = (1e-3, 1e3)


@dataclass(frozen=True)
class NestSpec:
    """One binary nest: direct input, share parameter and elasticity."""

    input_index: int
    lam: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"share parameter {self.lam} outside [0, 1]")


@dataclass(frozen=True)
class SectorTechnology:
    sector_id: str
    nests: tuple[NestSpec, ...]
    theta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nests", tuple(self.nests))
        if not self.theta > 0:
            raise ValueError(f"{self.sector_id}: productivity must be positive")
        seen = [n.input_index for n in self.nests]
        if len(set(seen)) != len(seen):
            raise ValueError(f"{self.sector_id}: an input appears in two nests")

    @property
    def input_indices(self) -> np.ndarray:
        return np.array([n.input_index for n in self.nests], dtype=int)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([n.lam for n in self.nests], dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([n.sigma for n in self.nests], dtype=float)

    def reference_shares(self) -> np.ndarray:
        return reference_shares(self.lambdas)

    def with_sigmas(self, sigmas) -> "SectorTechnology":
        nests = tuple(
            NestSpec(n.input_index, n.lam, float(s)) for n, s in zip(self.nests, sigmas)
        )
        return SectorTechnology(self.sector_id, nests, self.theta)


@dataclass(frozen=True)
class SectorObservation:
    """Observables of one sector in nest order (primary first).

    ``p[0]`` is the current primary (numeraire) price and ``p_out`` the
    current price of the sector's own output.  Reference prices are all 1.
    """

    a: np.ndarray
    b: np.ndarray
    p: np.ndarray
    p_out: float
    input_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sector_id: str = ""

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "p", p)
        idx = np.asarray(self.input_indices, dtype=int)
        if idx.size == 0 and a.ndim == 1 and len(a) > 1:
            idx = np.arange(len(a) - 1)  # commodities numbered by nest position
        object.__setattr__(self, "input_indices", idx)
        if not (a.shape == b.shape == p.shape) or a.ndim != 1:
            raise DataValidationError(
                f"{self.sector_id}: a, b and p must be vectors of equal length",
                sector=self.sector_id,
            )
        if len(self.input_indices) not in (0, len(a) - 1):
            raise DataValidationError(
                f"{self.sector_id}: need one input index per nest", sector=self.sector_id
            )
        if np.any(p <= 0) or not self.p_out > 0:
            raise DataValidationError(
                f"{self.sector_id}: prices must be positive", sector=self.sector_id
            )
        if np.any((a > 0) != (b > 0)):
            raise DataValidationError(
                f"{self.sector_id}: reference and current shares differ in incidence",
                sector=self.sector_id,
            )
        for name, s in (("a", a), ("b", b)):
            if np.any(s < 0) or abs(s.sum() - 1.0) > 1e-9:
                raise DataValidationError(
                    f"{self.sector_id}: shares {name} must be nonnegative and sum to 1",
                    sector=self.sector_id,
                )

    @property
    def n_nests(self) -> int:
        return len(self.a) - 1

    @property
    def p0(self) -> float:
        return float(self.p[0])


def nest_cost(w, W_lower, lam, sigma):
    """Compound price of one CES nest.

    Works elementwise on arrays.  Within ``SIGMA_ONE_TOL`` of sigma = 1 the
    Cobb-Douglas limit ``w**lam * W**(1-lam)`` is returned.
    """
    w = np.asarray(w, dtype=float)
    W_lower = np.asarray(W_lower, dtype=float)
    if np.any(w <= 0) or np.any(W_lower <= 0):
        raise ValueError("nest prices must be positive")
    lam = np.asarray(lam, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    cd = np.abs(sigma - 1.0) < SIGMA_ONE_TOL
    rho = np.where(cd, 0.5, 1.0 - sigma)  # dummy exponent on the CD branch
    lw, lW = np.log(w), np.log(W_lower)
    ces = np.exp(
        np.log(lam * np.exp(rho * lw) + (1.0 - lam) * np.exp(rho * lW)) / rho
    )
    out = np.where(cd, np.exp(lam * lw + (1.0 - lam) * lW), ces)
    return out[()] if out.ndim == 0 else out


def compound_prices(tech: SectorTechnology, w, w0: float) -> np.ndarray:
    """Forward pass ``W_1 = w0``, ``W_{i+1} = nest_cost(w_i, W_i)``."""
    w = np.asarray(w, dtype=float)
    W = np.empty(len(tech.nests) + 1)
    W[0] = w0
    for k, nest in enumerate(tech.nests):
        W[k + 1] = nest_cost(w[nest.input_index], W[k], nest.lam, nest.sigma)
    return W


def unit_cost(tech: SectorTechnology, w, w0: float) -> float:
    """Unit cost ``c = W_{n+1} / theta``; ``w`` is indexed by commodity."""
    if w0 <= 0:
        raise ValueError("primary price must be positive")
    return float(compound_prices(tech, w, w0)[-1] / tech.theta)


def cost_shares(tech: SectorTechnology, w, w0: float) -> np.ndarray:
    """All cost shares (primary first, then nest order) by the product formula.

    For the input of nest ``i``::

        s_i = lam_i w_i^(1-sig_i) W_{n+1}^(sig_n-1)
              * prod_{j>i} Lam_j W_j^(sig_{j-1}-sig_j)

    The primary input is the ``i = 0`` case with ``lam_0 = 1`` and
    ``sig_0 = 0`` (only ``W_1 = w0`` enters, so the choice of ``sig_0``
    drops out).
    """
    w = np.asarray(w, dtype=float)
    W = compound_prices(tech, w, w0)
    m = len(tech.nests)
    lam = np.concatenate(([1.0], tech.lambdas))
    sig = np.concatenate(([0.0], tech.sigmas))
    logw = np.log(np.concatenate(([w0], w[tech.input_indices])))
    logW = np.log(W)
    with np.errstate(divide="ignore"):
        logLam = np.log(1.0 - lam)
        loglam = np.log(lam)
    # tail[i] = sum_{j=i+1..m} [ln Lam_j + (sig_{j-1} - sig_j) ln W_j]
    terms = logLam[1:] + (sig[:-1] - sig[1:]) * logW[:-1]
    tail = np.concatenate((np.cumsum(terms[::-1])[::-1], [0.0]))
    logs = loglam + (1.0 - sig) * logw + (sig[m] - 1.0) * logW[m] + tail
    return np.exp(logs)


def reference_shares(lambdas) -> np.ndarray:
    """Shares at unit prices: ``a_i = lam_i * prod_{j>i} (1 - lam_j)``."""
    lam = np.asarray(lambdas, dtype=float)
    lam_ext = np.concatenate(([1.0], lam))
    outer = np.concatenate((np.cumprod((1.0 - lam)[::-1])[::-1], [1.0]))
    return lam_ext * outer


def calibrate_lambdas(a) -> np.ndarray:
    """Share parameters from reference shares (primary first).

    ``lam_i = a_i / (1 - sum_{j>i} a_j)``; the denominator is evaluated as
    the equivalent inner partial sum ``a_0 + ... + a_i`` to avoid
    cancellation.
    """
    a = np.asarray(a, dtype=float)
    if abs(a.sum() - 1.0) > 1e-9:
        raise DegenerateShareError("reference shares must sum to 1")
    if len(a) > 1 and not a[0] > 0:
        raise DegenerateShareError("primary share must be positive", nest=0)
    denom = np.cumsum(a)[1:]
    if np.any(denom <= 0):
        k = int(np.argmax(denom <= 0)) + 1
        raise DegenerateShareError(f"share denominator vanishes at nest {k}", nest=k)
    return a[1:] / denom


def tornqvist(obs: SectorObservation) -> float:
    """Log Tornqvist TFP growth ``-ln p_out + sum (a_i+b_i)/2 ln p_i``."""
    if obs.p_out <= 0 or np.any(obs.p <= 0):
        raise ValueError("prices must be positive")
    return float(-math.log(obs.p_out) + np.sum(0.5 * (obs.a + obs.b) * np.log(obs.p)))


def _backward(obs: SectorObservation, lams: np.ndarray, t: float):
    """Outer-to-inner recursion for sigma_i and W_i at trial productivity t."""
    try:
        return _backward_unchecked(obs, lams, t)
    except (OverflowError, ZeroDivisionError, ValueError) as exc:
        raise InfeasibleProductivity(f"recursion failed at t={t:g}: {exc}", t=t) from None


def _backward_unchecked(obs, lams, t):
    m = obs.n_nests
    a, b, p = obs.a, obs.b, obs.p
    W = np.empty(m + 1)
    sig = np.empty(m)
    W[m] = t * obs.p_out
    logWtop = math.log(W[m])
    acc = 0.0  # sum_{j>i} sigma_j ln(W_j / W_{j+1})
    degenerate = []
    for i in range(m, 0, -1):
        denom = math.log(W[i] / p[i])
        if abs(denom) < DEGENERATE_LOG_TOL:
            s = 1.0
            degenerate.append(i - 1)
        else:
            s = (math.log(b[i] / a[i]) + acc + logWtop - math.log(p[i])) / denom
        lam = lams[i - 1]
        if abs(s - 1.0) < SIGMA_ONE_TOL:
            if lam >= 1.0:
                raise InfeasibleProductivity("nest with unit share parameter", nest=i)
            Wi = math.exp((math.log(W[i]) - lam * math.log(p[i])) / (1.0 - lam))
        else:
            rho = 1.0 - s
            radicand = (math.exp(rho * math.log(W[i])) - lam * math.exp(rho * math.log(p[i]))) / (
                1.0 - lam
            )
            if not radicand > 0 or not math.isfinite(radicand):
                raise InfeasibleProductivity(
                    f"nonpositive radicand at nest {i}", nest=i, t=t
                )
            Wi = math.exp(math.log(radicand) / rho)
        if not (Wi > 0 and math.isfinite(Wi)):
            raise InfeasibleProductivity(f"compound price left (0, inf) at nest {i}", nest=i, t=t)
        W[i - 1] = Wi
        sig[i - 1] = s
        acc += s * math.log(Wi / W[i])
    return sig, W, sorted(degenerate)


def calibrate_sector(obs: SectorObservation, t: float):
    """Elasticities and compound prices for a trial productivity ``t``.

    Returns ``(sigmas, W)`` with ``W[0] = W_1`` to be compared with
    ``p0``.  Raises :class:`InfeasibleProductivity` when the recursion
    leaves the domain for this ``t``.
    """
    if not t > 0:
        raise ValueError("trial productivity must be positive")
    lams = calibrate_lambdas(obs.a)
    sig, W, _ = _backward(obs, lams, t)
    return sig, W


@dataclass
class SectorCalibration:
    """Calibrated technology of one sector plus diagnostics."""

    sector_id: str
    theta: float
    sigmas: np.ndarray
    lambdas: np.ndarray
    compound_prices: np.ndarray
    input_indices: np.ndarray
    tornqvist: float
    residual: float
    n_sign_changes: int = 1
    degenerate_nests: list = field(default_factory=list)

    @property
    def ln_theta(self) -> float:
        return math.log(self.theta)

    def technology(self) -> SectorTechnology:
        nests = tuple(
            NestSpec(int(k), float(l), float(s))
            for k, l, s in zip(self.input_indices, self.lambdas, self.sigmas)
        )
        return SectorTechnology(self.sector_id, nests, float(self.theta))

    def to_record(self) -> dict:
        return {
            "sector_id": self.sector_id,
            "theta": float(self.theta),
            "ln_theta": self.ln_theta,
            "tornqvist": float(self.tornqvist),
            "sigmas": [float(s) for s in self.sigmas],
            "lambdas": [float(x) for x in self.lambdas],
            "inputs": [int(k) for k in self.input_indices],
            "residual": float(self.residual),
            "n_sign_changes": int(self.n_sign_changes),
            "degenerate_nests": [int(k) for k in self.degenerate_nests],
        }


def calibrate_theta(
    obs: SectorObservation,
    bracket: tuple[float, float] = DEFAULT_BRACKET,
    limits: tuple[float, float] = BRACKET_LIMITS,
    samples: int = 33,
) -> SectorCalibration:
    """Solve ``W_1(t) = p0`` for the productivity level ``theta``.

    The residual is sampled on a log grid over ``bracket``; the bracket is
    widened by a factor 4 on each side until a sign change appears or
    ``limits`` are reached.  When several sign changes are found the one
    nearest the Tornqvist estimate is refined with Brent's method and the
    count is kept in ``n_sign_changes``.
    """
    lams = calibrate_lambdas(obs.a)
    tfpg = tornqvist(obs)
    p0 = obs.p0
    m = obs.n_nests

    if m == 0:
        theta = p0 / obs.p_out
        return SectorCalibration(
            obs.sector_id, theta, np.zeros(0), lams, np.array([p0]),
            obs.input_indices, tfpg, 0.0,
        )

    def resid(t):
        try:
            return _backward(obs, lams, t)[1][0] - p0
        except InfeasibleProductivity:
            return None

    t_guess = min(max(math.exp(tfpg), limits[0]), limits[1])
    lo, hi = bracket
    cache: dict[float, float | None] = {}
    while True:
        ts = np.unique(np.concatenate((np.geomspace(lo, hi, samples), [t_guess])))
        ts = ts[(ts >= lo) & (ts <= hi)]
        vals = []
        for t in ts:
            if t not in cache:
                cache[t] = resid(float(t))
            vals.append(cache[t])
        pairs = []
        for k in range(len(ts) - 1):
            g0, g1 = vals[k], vals[k + 1]
            if g0 is None or g1 is None:
                continue
            if g0 == 0.0:
                pairs.append((ts[k], ts[k]))
            elif g0 * g1 < 0:
                pairs.append((ts[k], ts[k + 1]))
        if vals and vals[-1] == 0.0:
            pairs.append((ts[-1], ts[-1]))
        if pairs:
            break
        if lo <= limits[0] and hi >= limits[1]:
            raise CalibrationError(
                f"sector {obs.sector_id!r}: no sign change of W_1(t) - p0 in "
                f"[{limits[0]:g}, {limits[1]:g}]",
                sector=obs.sector_id,
            )
        lo, hi = max(lo / 4.0, limits[0]), min(hi * 4.0, limits[1])

    ln_guess = math.log(t_guess)
    t_lo, t_hi = min(pairs, key=lambda pr: abs(0.5 * (math.log(pr[0]) + math.log(pr[1])) - ln_guess))
    if t_lo == t_hi:
        theta = float(t_lo)
    else:
        def f(t):
            g = resid(t)
            if g is None:
                raise CalibrationError(
                    f"sector {obs.sector_id!r}: residual undefined inside bracket",
                    sector=obs.sector_id,
                )
            return g

        theta = optimize.brentq(f, t_lo, t_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    sig, W, degenerate = _backward(obs, lams, theta)
    residual = W[0] - p0
    if abs(residual) >= 1e-10 * p0:
        raise CalibrationError(
            f"sector {obs.sector_id!r}: root residual {residual:.3e} too large",
            sector=obs.sector_id,
        )
    if len(pairs) > 1:
        logger.info("sector %s: %d sign changes of W_1(t) - p0", obs.sector_id, len(pairs))
    if degenerate:
        logger.info("sector %s: sigma unidentified at nests %s, set to 1", obs.sector_id, degenerate)
    return SectorCalibration(
        obs.sector_id, float(theta), sig, lams, W, obs.input_indices, tfpg,
        float(residual), len(pairs), degenerate,
    )


def sector_observation(data, j: int, rank: Sequence[int]) -> SectorObservation:
    """Observation of sector ``j`` with its nonzero inputs in stream order.

    ``data`` is a :class:`~ccesnet.io_data.TwoStateData`; ``rank[i]`` is the
    position of commodity ``i`` in the stream order (upstream first).  Inputs
    with ``a = b = 0`` are dropped; the most upstream input becomes nest 1.
    """
    rank = np.asarray(rank)
    A, B = data.A[:, j], data.B[:, j]
    used = np.flatnonzero((A[1:] > 0) | (B[1:] > 0))
    used = used[np.argsort(rank[used], kind="stable")]
    rows = np.concatenate(([0], used + 1))
    p = np.concatenate(([data.p0], data.p[used]))
    return SectorObservation(
        a=A[rows], b=B[rows], p=p, p_out=float(data.p[j]),
        input_indices=used, sector_id=data.sector_ids[j],
    )

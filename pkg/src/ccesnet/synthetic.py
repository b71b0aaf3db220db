"""Synthetic two-state economies with known technologies.

The current state is obtained by solving the price fixed point of a
cascaded CES economy with drawn elasticities and productivities, so the
observed pair (reference shares, current shares and prices) is exactly
consistent with a known ground truth.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cces import NestSpec, SectorTechnology, calibrate_lambdas
from .equilibrium import Economy, share_matrix, solve_equilibrium
from .errors import ConvergenceError
from .io_data import LinkedTables, TwoStateData, write_linked_tables
from .linalg import leontief_inverse

logger = logging.getLogger(__name__)


@dataclass
class GeneratorConfig:
    n: int = 50
    density: float = 0.3
    sigma_ranges: tuple = ((-3.0, -0.1), (0.1, 4.0))
    theta_range: tuple = (0.85, 1.2)
    seed: int = 0
    triangular_bias: float = 0.9
    p0: float = 1.1
    primary_share: tuple = (0.2, 0.5)
    concentration: float = 2.0
    sigma_gap: tuple | None = (0.95, 1.05)
    max_retries: int = 20
    sector_prefix: str = "S"

    def __post_init__(self):
        self.sigma_ranges = tuple(tuple(float(x) for x in r) for r in self.sigma_ranges)
        self.theta_range = tuple(float(x) for x in self.theta_range)
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 < self.density <= 1 or self.density * self.n < 1:
            raise ValueError("density must lie in (0, 1] with density * n >= 1")
        if not 0 <= self.triangular_bias <= 1:
            raise ValueError("triangular_bias must lie in [0, 1]")
        if not 0 < self.theta_range[0] <= self.theta_range[1]:
            raise ValueError("theta range must be positive")
        if any(lo > hi for lo, hi in self.sigma_ranges):
            raise ValueError("sigma ranges must be ordered pairs")


@dataclass
class SyntheticEconomy:
    economy: Economy
    data: TwoStateData
    hidden_order: np.ndarray
    config: GeneratorConfig = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.economy, self.data, self.hidden_order))

    def ground_truth(self) -> dict:
        return {
            "config": {k: v for k, v in asdict(self.config).items()},
            "hidden_order": [self.data.sector_ids[k] for k in self.hidden_order],
            "p0": float(self.economy.p0),
            "theta": self.economy.theta.tolist(),
            "economy": self.economy.to_json(),
        }


def _draw_sigma(rng, cfg: GeneratorConfig, size: int) -> np.ndarray:
    ranges = np.array(cfg.sigma_ranges, dtype=float)
    widths = ranges[:, 1] - ranges[:, 0]
    probs = widths / widths.sum() if widths.sum() > 0 else np.full(len(widths), 1 / len(widths))
    out = np.empty(size)
    for k in range(size):
        while True:
            r = rng.choice(len(ranges), p=probs)
            s = rng.uniform(*ranges[r])
            if cfg.sigma_gap is None or not cfg.sigma_gap[0] <= s <= cfg.sigma_gap[1]:
                out[k] = s
                break
    return out


def _incidence(rng, cfg: GeneratorConfig, pos: np.ndarray) -> np.ndarray:
    n = cfg.n
    forward = pos[:, None] < pos[None, :]
    prob = np.where(forward, cfg.density, cfg.density * (1.0 - cfg.triangular_bias))
    np.fill_diagonal(prob, cfg.density * (1.0 - cfg.triangular_bias))
    return (rng.random((n, n)) < prob).astype(np.int64)


def generate_economy(cfg: GeneratorConfig) -> SyntheticEconomy:
    """Draw a cascaded CES economy and its two observed states.

    Self-inputs count as backward incidences, so ``triangular_bias = 1``
    yields an incidence matrix that is strictly triangular under the hidden
    order.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    ids = [f"{cfg.sector_prefix}{k:03d}" for k in range(n)]
    hidden = rng.permutation(n)
    pos = np.empty(n, dtype=int)
    pos[hidden] = np.arange(n)
    U = _incidence(rng, cfg, pos)

    A = np.zeros((n + 1, n))
    nest_inputs = []
    for j in range(n):
        used = np.flatnonzero(U[:, j])
        used = used[np.argsort(pos[used], kind="stable")]
        if len(used):
            a0 = rng.uniform(*cfg.primary_share)
            rest = (1.0 - a0) * rng.dirichlet(np.full(len(used), cfg.concentration))
            A[0, j] = a0
            A[used + 1, j] = rest
        else:
            A[0, j] = 1.0
        A[:, j] /= A[:, j].sum()
        nest_inputs.append(used)
    sigmas = [_draw_sigma(rng, cfg, len(u)) for u in nest_inputs]

    for attempt in range(cfg.max_retries):
        theta = rng.uniform(*cfg.theta_range, size=n)
        techs = []
        for j in range(n):
            used = nest_inputs[j]
            lams = calibrate_lambdas(A[np.concatenate(([0], used + 1)), j])
            nests = tuple(NestSpec(int(k), float(l), float(s)) for k, l, s in zip(used, lams, sigmas[j]))
            techs.append(SectorTechnology(ids[j], nests, float(theta[j])))
        econ = Economy(ids, techs, cfg.p0)
        try:
            p = solve_equilibrium(econ, start=np.ones(n), tol=1e-15, max_iter=20_000)
            break
        except ConvergenceError as exc:
            logger.warning("seed %s attempt %d: %s; redrawing productivities", cfg.seed, attempt, exc)
    else:
        raise ConvergenceError(f"no convergent draw after {cfg.max_retries} attempts", seed=cfg.seed)

    econ.current_prices = p
    s0, S = share_matrix(econ, p, cfg.p0)
    B = np.vstack((s0, S))
    B[(A == 0)] = 0.0
    B /= B.sum(axis=0)
    f_cur = 100.0 * rng.uniform(0.5, 1.5, size=n)
    f_ref = 100.0 * rng.uniform(0.5, 1.5, size=n)
    data = TwoStateData(ids, A, B, p, cfg.p0, final_demand=f_cur, reference_final_demand=f_ref)
    return SyntheticEconomy(econ, data, hidden, cfg)


def perturb(data: TwoStateData, noise: float, seed: int = 0) -> TwoStateData:
    """Multiplicative lognormal noise on both share matrices, columns renormalized."""
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    if noise == 0:
        return TwoStateData(
            list(data.sector_ids), data.A.copy(), data.B.copy(), data.p.copy(), data.p0,
            data.final_demand, data.reference_final_demand,
        )
    rng = np.random.default_rng(seed)
    A = data.A * np.exp(noise * rng.standard_normal(data.A.shape))
    B = data.B * np.exp(noise * rng.standard_normal(data.B.shape))
    return TwoStateData(
        list(data.sector_ids), A / A.sum(axis=0), B / B.sum(axis=0), data.p.copy(), data.p0,
        data.final_demand, data.reference_final_demand,
    )


def to_linked_tables(data: TwoStateData) -> LinkedTables:
    """Three balanced nominal periods whose pairwise merges reproduce ``data``.

    With merged reference ``R`` and current ``C`` (gross outputs from the
    Leontief inverse of each share matrix), the periods are
    ``T0 = (2-k) R``, ``T1 = k R`` and ``T2 = 2C - k R``; ``k`` is small
    enough to keep ``T2`` positive.  Deflators are built the same way
    around reference 1 and current ``p``.
    """
    n = data.n
    fr = np.asarray(data.reference_final_demand if data.reference_final_demand is not None else np.full(n, 100.0))
    fc = np.asarray(data.final_demand if data.final_demand is not None else np.full(n, 100.0))
    Xr = leontief_inverse(data.A[1:]) @ fr
    Xc = leontief_inverse(data.B[1:]) @ fc
    R = data.A * Xr  # (n+1, n) nominal values, row 0 primary
    C = data.B * Xc
    nz = R > 0
    k = 0.5 * min(1.0, float(np.min(2.0 * C[nz] / R[nz])), float(np.min(2.0 * fc / fr)))
    T = np.stack(((2 - k) * R, k * R, 2 * C - k * R))
    F = np.stack(((2 - k) * fr, k * fr, 2 * fc - k * fr))
    kd = 0.5 * min(1.0, float(data.p.min()), data.p0)
    D = np.stack((np.full(n, 2 - kd), np.full(n, kd), 2 * data.p - kd))
    D0 = np.array([2 - kd, kd, 2 * data.p0 - kd])
    return LinkedTables(
        list(data.sector_ids), T[:, 1:, :], T[:, 0, :], F, D, D0, ["T0", "T1", "T2"]
    )


def write_synthetic(synth: SyntheticEconomy, directory: str | Path) -> list[Path]:
    """Write the io_data CSV schema, a run config and the ground truth."""
    directory = Path(directory)
    tables = to_linked_tables(synth.data)
    tpath, dpath = write_linked_tables(tables, directory)
    cpath = directory / "config.json"
    cpath.write_text(json.dumps({"split": [0.25, 0.75], "balance_tol": 1e-6, "p0": synth.data.p0}, indent=2) + "\n")
    gpath = directory / "ground_truth.json"
    gpath.write_text(json.dumps(synth.ground_truth(), indent=1, sort_keys=True) + "\n")
    return [tpath, dpath, cpath, gpath]

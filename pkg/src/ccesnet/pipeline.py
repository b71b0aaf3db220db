"""End-to-end composition of the modules: ingest, order, calibrate, project."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cces import SectorCalibration, calibrate_theta, sector_observation
from .equilibrium import Economy, verify_replication
from .errors import CCESError
from .io_data import TwoStateData, incidence, load_config, load_linked_tables, merge_states, to_two_state
from .triangulate import StreamOrder, stream_order

logger = logging.getLogger(__name__)


def ingest(transactions, deflators, config: str | Path | dict | None = None) -> TwoStateData:
    cfg = config if isinstance(config, dict) else load_config(config)
    tables = load_linked_tables(transactions, deflators, balance_tol=float(cfg["balance_tol"]))
    merged = merge_states(tables, cfg["split"])
    if merged.n_repaired:
        logger.info("repaired %d inconsistent cells while merging", merged.n_repaired)
    return to_two_state(merged, cfg.get("p0"))


def data_incidence(data: TwoStateData):
    """Incidence of the intermediate block (identical in both states)."""
    return incidence(data.B[1:])


def order_sectors(data: TwoStateData, gamma_grid=None) -> StreamOrder:
    return stream_order(data_incidence(data), gamma_grid)


@dataclass
class CalibrationResult:
    economy: Economy | None
    sectors: list
    failures: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def calibrate_economy(data: TwoStateData, rank, threads: int = 1) -> CalibrationResult:
    """Calibrate every sector independently; failures are collected, not raised."""
    rank = np.asarray(rank)

    def one(j):
        try:
            return calibrate_theta(sector_observation(data, j, rank))
        except CCESError as exc:
            return exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(data.n)))
    else:
        results = [one(j) for j in range(data.n)]
    failures = {data.sector_ids[j]: r for j, r in enumerate(results) if not isinstance(r, SectorCalibration)}
    econ = None
    if not failures:
        econ = Economy(list(data.sector_ids), [r.technology() for r in results], data.p0, data.p.copy())
    return CalibrationResult(econ, results, failures)


def replication_report(econ: Economy, data: TwoStateData):
    return verify_replication(econ, data)

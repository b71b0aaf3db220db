"""Shared fixtures and the acceptance-criteria summary."""

from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from ccesnet.cces import SectorObservation
from ccesnet.synthetic import GeneratorConfig, generate_economy

# Sample sector: primary, input 1, input 2 (nest order).
SAMPLE = dict(
    a=np.array([0.2, 0.5, 0.3]),
    b=np.array([0.1, 0.7, 0.2]),
    p=np.array([0.9, 0.6, 1.2]),
    p_out=0.8,
)

ACCEPTANCE_IDS = [f"AC{k}" for k in range(1, 10)]
_results: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """``acceptance(ac_id, ok, detail)`` records one criterion's verdict.

    A criterion checked by several tests passes only if every part passes.
    """

    def record(ac: str, ok: bool, detail: str) -> None:
        if ac in _results:
            prev_ok, prev_detail = _results[ac]
            _results[ac] = (prev_ok and bool(ok), f"{prev_detail}; {detail}")
        else:
            _results[ac] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for ac in ACCEPTANCE_IDS:
        if ac in _results:
            ok, detail = _results[ac]
            terminalreporter.write_line(f"{ac} {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"{ac} FAIL  not evaluated")


@pytest.fixture
def sample_obs() -> SectorObservation:
    return SectorObservation(input_indices=[0, 1], sector_id="out", **SAMPLE)


@pytest.fixture
def sample_dir() -> Path:
    return Path(str(resources.files("ccesnet") / "data" / "sample_sector"))


@functools.lru_cache(maxsize=None)
def synthetic(seed: int, n: int = 50, **kw):
    """Cached synthetic economy; treat the result as read-only."""
    return generate_economy(GeneratorConfig(n=n, seed=seed, **kw))


@pytest.fixture
def synth50():
    return synthetic(7)


@pytest.fixture
def synth_small():
    return synthetic(3, n=6, density=0.6)

import json

import numpy as np
import pytest

from ccesnet.equilibrium import verify_replication
from ccesnet.io_data import load_linked_tables, merge_states, to_two_state
from ccesnet.pipeline import calibrate_economy
from ccesnet.synthetic import (
    GeneratorConfig,
    generate_economy,
    perturb,
    to_linked_tables,
    write_synthetic,
)
from ccesnet.triangulate import linearity

from conftest import synthetic


def _hidden_rank(hidden):
    r = np.empty(len(hidden), dtype=int)
    r[hidden] = np.arange(len(hidden))
    return r


def test_generation_is_deterministic():
    a = generate_economy(GeneratorConfig(n=12, seed=5))
    b = generate_economy(GeneratorConfig(n=12, seed=5))
    assert np.array_equal(a.data.A, b.data.A) and np.array_equal(a.data.B, b.data.B)
    assert np.array_equal(a.data.p, b.data.p) and np.array_equal(a.hidden_order, b.hidden_order)
    assert json.dumps(a.ground_truth(), sort_keys=True) == json.dumps(b.ground_truth(), sort_keys=True)
    c = generate_economy(GeneratorConfig(n=12, seed=6))
    assert not np.array_equal(a.data.A, c.data.A)


def test_unit_productivity_leaves_state_unchanged():
    synth = generate_economy(GeneratorConfig(n=10, seed=2, theta_range=(1.0, 1.0), p0=1.0))
    assert np.allclose(synth.data.p, 1.0, atol=1e-13)
    assert np.allclose(synth.data.B, synth.data.A, atol=1e-13)


@pytest.mark.parametrize("seed", range(5))
def test_full_bias_and_density_is_triangular(seed):
    synth = generate_economy(GeneratorConfig(n=8, seed=seed, density=1.0, triangular_bias=1.0))
    U = (synth.data.A[1:] > 0).astype(int)
    assert linearity(U, synth.hidden_order) == 1.0
    assert U[np.ix_(synth.hidden_order, synth.hidden_order)].tolist() == np.triu(np.ones((8, 8), int), 1).tolist()


@pytest.mark.parametrize("seed", range(3))
def test_full_bias_is_triangular_under_hidden_order(seed):
    synth = generate_economy(GeneratorConfig(n=20, seed=seed, density=0.4, triangular_bias=1.0))
    U = (synth.data.A[1:] > 0).astype(int)
    assert np.trace(U) == 0
    if U.sum():
        assert linearity(U, synth.hidden_order) == 1.0


def test_shares_are_valid(synth50):
    A, B = synth50.data.A, synth50.data.B
    assert A.min() >= 0 and B.min() >= 0
    assert np.array_equal(A > 0, B > 0)
    assert np.abs(A.sum(axis=0) - 1).max() < 1e-12
    assert np.abs(B.sum(axis=0) - 1).max() < 1e-12


def test_sigma_draws_respect_ranges_and_gap(synth50):
    sig = np.concatenate([t.sigmas for t in synth50.economy.technologies])
    assert np.all(((sig >= -3.0) & (sig <= -0.1)) | ((sig >= 0.1) & (sig <= 4.0)))
    assert not np.any((sig >= 0.95) & (sig <= 1.05))


def test_generated_economy_replicates(synth50):
    rep = verify_replication(synth50.economy, synth50.data)
    assert rep.ok(1e-8)


def test_perturb_zero_is_identity(synth_small):
    d = perturb(synth_small.data, 0.0)
    assert np.array_equal(d.A, synth_small.data.A) and np.array_equal(d.B, synth_small.data.B)
    with pytest.raises(ValueError):
        perturb(synth_small.data, -1.0)


def test_small_noise_moves_calibration_slightly(synth50):
    rank = _hidden_rank(synth50.hidden_order)
    truth = synth50.economy.theta
    res = calibrate_economy(perturb(synth50.data, 1e-6, seed=1), rank)
    assert res.ok
    rel = np.abs(res.economy.theta / truth - 1)
    assert 0 < rel.max() < 1e-4


def test_moderate_noise_mostly_calibrates(synth50):
    rank = _hidden_rank(synth50.hidden_order)
    res = calibrate_economy(perturb(synth50.data, 0.05, seed=2), rank)
    assert res.ok or len(res.failures) <= 0.05 * synth50.data.n
    assert all(type(e).__name__ == "CalibrationError" for e in res.failures.values())


def test_linked_tables_round_trip(synth50, tmp_path):
    tabs = to_linked_tables(synth50.data)
    tabs.validate()
    assert tabs.transactions.min() >= 0 and tabs.deflators.min() > 0
    back = to_two_state(merge_states(tabs), synth50.data.p0)
    assert np.abs(back.A - synth50.data.A).max() < 1e-12
    assert np.abs(back.B - synth50.data.B).max() < 1e-12
    assert np.allclose(back.p, synth50.data.p, rtol=1e-12)


def test_write_synthetic(tmp_path):
    synth = synthetic(3, n=6, density=0.6)
    paths = write_synthetic(synth, tmp_path)
    assert {p.name for p in paths} == {"transactions.csv", "deflators.csv", "config.json", "ground_truth.json"}
    truth = json.loads((tmp_path / "ground_truth.json").read_text())
    assert truth["theta"] == pytest.approx(synth.economy.theta.tolist())
    tabs = load_linked_tables(tmp_path / "transactions.csv", tmp_path / "deflators.csv")
    assert tabs.sector_ids == synth.data.sector_ids


@pytest.mark.parametrize(
    "kw",
    [dict(n=0), dict(density=0.0), dict(density=1.5), dict(triangular_bias=1.2),
     dict(theta_range=(0.0, 1.0)), dict(sigma_ranges=((1.0, 0.5),)), dict(n=4, density=0.1)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GeneratorConfig(**kw)

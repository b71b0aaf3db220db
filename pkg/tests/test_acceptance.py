"""Acceptance criteria AC1-AC9.

Each test records its verdict through the ``acceptance`` fixture before
asserting, so the terminal summary prints one PASS/FAIL line per criterion
even when an assertion fails.
"""

import csv
import itertools
import json
import math
import os
import statistics
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from ccesnet.cces import NestSpec, SectorTechnology, calibrate_theta, cost_shares, unit_cost
from ccesnet.equilibrium import (
    H,
    coefficients,
    current_state,
    reference_state,
    resettle,
    solve_equilibrium,
    unit_costs,
    verify_replication,
)
from ccesnet.netanalysis import (
    SQRT2,
    distance_change_histogram,
    distance_matrix,
    hierarchical_cluster,
    net_multipliers,
)
from ccesnet.pipeline import calibrate_economy
from ccesnet.propagation import (
    CCES,
    LEONTIEF,
    ShockScenario,
    cces_welfare,
    leontief_baseline,
    primary_redistribution_profile,
    run_scenario,
)
from ccesnet.synthetic import GeneratorConfig, generate_economy
from ccesnet.triangulate import brute_force_order, stream_order

from conftest import synthetic


def _rank(order):
    r = np.empty(len(order), dtype=int)
    r[np.asarray(order)] = np.arange(len(order))
    return r


def _random_technology(rng, max_nests=6):
    m = int(rng.integers(1, max_nests + 1))
    nests = []
    for k in range(m):
        sigma = float(rng.choice([rng.uniform(-3.0, -0.1), rng.uniform(0.1, 4.0)]))
        nests.append(NestSpec(k, float(rng.uniform(0.05, 0.95)), sigma))
    return SectorTechnology("t", tuple(nests), float(rng.uniform(0.8, 1.25)))


# --- AC1 ------------------------------------------------------------------------


def test_ac1_sample_reproduction(sample_obs, acceptance):
    cal = calibrate_theta(sample_obs)
    times = []
    for _ in range(7):
        t0 = time.perf_counter()
        calibrate_theta(sample_obs)
        times.append(time.perf_counter() - t0)
    runtime = statistics.median(times)
    w = np.asarray(sample_obs.p[1:])
    c = unit_cost(cal.technology(), w, sample_obs.p0)
    level = math.exp(cal.tornqvist)
    checks = {
        "theta": abs(cal.theta - 0.946) <= 1e-3,
        "sigma1": abs(cal.sigmas[0] - 3.54) <= 1e-2,
        "sigma2": abs(cal.sigmas[1] - 1.88) <= 1e-2,
        "tornqvist": abs(level - 0.947) <= 1e-3,
        "unit_cost": abs(c - 0.8) <= 1e-3,
        "runtime": runtime < 0.010,
    }
    ok = all(checks.values())
    acceptance("AC1", ok, f"theta={cal.theta:.6f} sigma=({cal.sigmas[0]:.4f}, {cal.sigmas[1]:.4f}) "
                          f"tornqvist={level:.5f} c={c:.8f} runtime={runtime * 1e3:.2f}ms")
    assert ok, checks


# --- AC2 ------------------------------------------------------------------------


def test_ac2_round_trip_oracle(acceptance):
    t0 = time.perf_counter()
    worst_theta = worst_sigma = worst_rep = 0.0
    failures = 0
    for seed in range(20):
        synth = generate_economy(GeneratorConfig(n=50, seed=seed))
        res = calibrate_economy(synth.data, _rank(synth.hidden_order))
        if not res.ok:
            failures += len(res.failures)
            continue
        truth, got = synth.economy, res.economy
        worst_theta = max(worst_theta, float(np.abs(got.theta / truth.theta - 1).max()))
        for a, b in zip(got.technologies, truth.technologies):
            if a.nests:
                worst_sigma = max(worst_sigma, float(np.abs(a.sigmas - b.sigmas).max()))
        rep = verify_replication(got, synth.data)
        worst_rep = max(worst_rep, max(rep.residuals.values()))
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and worst_theta < 1e-8 and worst_sigma < 1e-6 and worst_rep < 1e-8 and elapsed < 30
    acceptance("AC2", ok, f"20 seeds: max theta rel err {worst_theta:.1e}, max sigma err {worst_sigma:.1e}, "
                          f"replication {worst_rep:.1e}, failures {failures}, {elapsed:.1f}s")
    assert ok


# --- AC3 ------------------------------------------------------------------------


def test_ac3_shephard_consistency(acceptance):
    rng = np.random.default_rng(3)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        tech = _random_technology(rng)
        m = len(tech.nests)
        w = np.exp(rng.normal(0.0, 0.4, m))
        w0 = float(np.exp(rng.normal(0.0, 0.4)))
        shares = cost_shares(tech, w, w0)
        c = unit_cost(tech, w, w0)
        fd = np.empty(m + 1)
        fd[0] = (unit_cost(tech, w, w0 * (1 + h)) - unit_cost(tech, w, w0 * (1 - h))) / (2 * h * c)
        for i in range(m):
            up, dn = w.copy(), w.copy()
            up[i] *= 1 + h
            dn[i] *= 1 - h
            fd[i + 1] = (unit_cost(tech, up, w0) - unit_cost(tech, dn, w0)) / (2 * h * c)
        worst = max(worst, float(np.abs(shares - fd).max()))
    ok = worst < 1e-6
    acceptance("AC3", ok, f"100 points, max |share - FD| = {worst:.1e}")
    assert ok


# --- AC4 ------------------------------------------------------------------------


def test_ac4_homogeneity_and_stochastic_columns(acceptance):
    rng = np.random.default_rng(4)
    worst_h = 0.0
    for _ in range(100):
        tech = _random_technology(rng)
        w = np.exp(rng.normal(0.0, 0.4, len(tech.nests)))
        w0 = float(np.exp(rng.normal(0.0, 0.4)))
        alpha = float(np.exp(rng.uniform(-3, 3)))
        c1 = unit_cost(tech, alpha * w, alpha * w0)
        worst_h = max(worst_h, abs(c1 / (alpha * unit_cost(tech, w, w0)) - 1))
    econ = synthetic(7).economy
    for alpha in (0.01, 0.5, 7.0, 300.0):
        w = econ.current_prices
        rel = np.abs(unit_costs(econ, alpha * w, alpha * econ.p0) / (alpha * unit_costs(econ, w)) - 1)
        worst_h = max(worst_h, float(rel.max()))

    worst_col = 0.0
    for seed in (7, 1, 2):
        econ = synthetic(seed).economy
        z = np.random.default_rng(seed).uniform(1.0, 1.2, econ.n)
        states = [reference_state(econ), current_state(econ), coefficients(econ, solve_equilibrium(econ, z), z)]
        worst_col = max(worst_col, max(s.column_residual() for s in states))
    ok = worst_h < 1e-10 and worst_col < 1e-8
    acceptance("AC4", ok, f"homogeneity rel err {worst_h:.1e}, max |s0 + 1'S - 1| {worst_col:.1e}")
    assert ok


# --- AC5 ------------------------------------------------------------------------


def _ac5_ensemble():
    """50 n=8 incidence matrices; even draws are triangularizable by construction."""
    rng = np.random.default_rng(2024)
    out = []
    for k in range(50):
        cfg = GeneratorConfig(
            n=8,
            seed=int(rng.integers(2**31)),
            density=float(rng.uniform(0.2, 0.9)),
            triangular_bias=1.0 if k % 2 == 0 else 0.5,
        )
        U = (generate_economy(cfg).data.A[1:] > 0).astype(int)
        if U.sum() - np.trace(U) > 0:
            out.append(U)
    return out


@pytest.fixture(scope="module")
def ac5_results():
    rows = []
    for U in _ac5_ensemble():
        heur = stream_order(U).linearity
        best = brute_force_order(U)[1]
        rows.append((heur, best))
    return rows


def test_ac5_heuristic_never_beats_oracle(ac5_results, acceptance):
    ok = all(h <= b + 1e-15 for h, b in ac5_results)
    acceptance("AC5", ok, f"heuristic <= brute force on {len(ac5_results)}/{len(ac5_results)} instances"
               if ok else "heuristic exceeded the exact optimum")
    assert ok


@pytest.mark.xfail(strict=True, reason="the ratio ordering cannot triangulate every DAG; see README")
def test_ac5_triangular_instances_recovered(ac5_results, acceptance):
    tri = [(h, b) for h, b in ac5_results if b == 1.0]
    hits = sum(h == 1.0 for h, _ in tri)
    ok = hits == len(tri)
    acceptance("AC5", ok, f"l=1 recovered on {hits}/{len(tri)} triangularizable instances")
    assert ok


def test_ac5_curve_shape(tmp_path, acceptance):
    from ccesnet.cli import main

    ws = tmp_path / "tri"
    assert main(["synth", "--n", "8", "--seed", "5", "--density", "0.5", "--out", str(ws)]) == 0
    assert main(["ingest", "--transactions", str(ws / "transactions.csv"), "--deflators", str(ws / "deflators.csv"),
                 "--config", str(ws / "config.json"), "--out", str(ws)]) == 0
    assert main(["triangulate", "--out", str(ws)]) == 0
    with open(ws / "linearity_curve.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    so = json.loads((ws / "stream_order.json").read_text())
    gammas = [float(r["gamma"]) for r in rows]
    lin = [float(r["linearity"]) for r in rows]
    marked = [r for r in rows if r["is_max"] == "1"]
    ok = (
        len(rows) == 301
        and len(set(gammas)) == len(gammas)
        and gammas == sorted(gammas)
        and len(marked) >= 1
        and all(float(r["linearity"]) == max(lin) for r in marked)
        and float(marked[0]["gamma"]) == so["gamma_star"]
        and so["linearity"] == max(lin)
    )
    acceptance("AC5", ok, f"curve: one grid of {len(rows)} gammas, max {max(lin):.4f} marked at {so['gamma_star']}")
    assert ok


# --- AC6 ------------------------------------------------------------------------


def test_ac6_fixed_point_behaviour(acceptance):
    drift = 0.0
    for seed in (7, 1, 2):
        econ, data, _ = synthetic(seed)
        pi = solve_equilibrium(econ, np.ones(econ.n), start=data.p)
        drift = max(drift, float(np.abs(pi - data.p).max()))
    econ = synthetic(7).economy
    rng = np.random.default_rng(6)
    worst_step = -np.inf
    worst_res = 0.0
    most_iter = 0
    for _ in range(20):
        z = rng.uniform(1.0, 1.2, econ.n)
        hist = []
        pi = solve_equilibrium(econ, z, history=hist)
        worst_step = max(worst_step, float(np.diff(np.array(hist), axis=0).max()))
        worst_res = max(worst_res, float(np.abs(pi - H(econ, pi, econ.p0) / (econ.theta * z)).max()))
        most_iter = max(most_iter, len(hist) - 1)
    ok = drift <= 1e-14 and worst_step <= 1e-14 and worst_res < 1e-10 and most_iter < 10_000
    acceptance("AC6", ok, f"z=1 drift {drift:.1e}; 20 shocks: max step {worst_step:.1e}, "
                          f"residual {worst_res:.1e}, iterations <= {most_iter}")
    assert ok


# --- AC7 ------------------------------------------------------------------------


def test_ac7_welfare_identities(acceptance):
    econ, data, hidden = synthetic(7)
    cur = current_state(econ)
    f = data.final_demand
    v_total = float((cur.primary_row * np.linalg.solve(np.eye(econ.n) - cur.coefficients, f)).sum())

    neutral = run_scenario(econ, cur, ShockScenario(np.ones(econ.n)), f)
    n_ok = all(
        abs(r.delta_star - 1) < 1e-12 and abs(r.delta_f) < 1e-9 * f.sum()
        and np.abs(r.delta_v).max() < 1e-9 * v_total
        for r in neutral.values()
    )

    rng = np.random.default_rng(7)
    scenarios = [ShockScenario.single(econ.n, int(k), float(rng.uniform(1.01, 1.3))) for k in rng.choice(econ.n, 8, replace=False)]
    scenarios += [ShockScenario(rng.uniform(1.0, 1.2, econ.n)), ShockScenario(rng.uniform(0.95, 1.1, econ.n))]
    sum_dv = max(abs(r.delta_v.sum()) / v_total for s in scenarios for r in run_scenario(econ, cur, s, f).values())

    econ0 = resettle(econ.with_sigmas(0.0))
    cur0 = current_state(econ0)
    gap = 0.0
    for s in scenarios[:4]:
        a, b = cces_welfare(econ0, cur0, s.z, f), leontief_baseline(econ0, cur0, s.z, f)
        gap = max(gap, abs(a.delta_star - b.delta_star), float(np.abs(a.delta_v - b.delta_v).max()) / v_total)

    # 10% shock to the mid-stream sector
    mid = int(hidden[econ.n // 2])
    reports = run_scenario(econ, cur, ShockScenario.single(econ.n, mid, 1.10), f)
    table = [("current", f.sum(), v_total, reports[CCES].gross_output_current[mid],
              reports[CCES].value_added_current[mid], 1.0, 0.0)]
    for key in (LEONTIEF, CCES):
        r = reports[key]
        table.append((key, f.sum() * r.delta_star, r.value_added_projected.sum(), r.gross_output_shocked_sector,
                      r.value_added_shocked_sector, r.delta_star, r.delta_f))
    table_ok = len(table) == 3 and all(np.isfinite(np.array(row[1:], dtype=float)).all() for row in table)
    series_ok = True
    for r in reports.values():
        prof = primary_redistribution_profile(r, hidden)
        series_ok &= len(prof.log_abs) == econ.n and bool(np.isfinite(prof.log_abs[~prof.is_zero]).all())

    ok = n_ok and sum_dv < 1e-6 and gap < 1e-8 and table_ok and series_ok
    acceptance("AC7", ok, f"neutral ok={n_ok}; max |sum dv|/v {sum_dv:.1e}; sigma=0 vs Leontief {gap:.1e}; "
                          f"mid-stream 10% shock: delta* cces {reports[CCES].delta_star:.6f}, "
                          f"leontief {reports[LEONTIEF].delta_star:.6f}, table/series finite={table_ok and series_ok}")
    assert ok


# --- AC8 ------------------------------------------------------------------------


def test_ac8_network_analysis(acceptance):
    econ = synthetic(7).economy
    mu = net_multipliers(current_state(econ).coefficients)
    D = distance_matrix(mu).d
    n = econ.n
    oracle_gap = 0.0
    for j, k in itertools.combinations(range(n), 2):
        r = statistics.correlation(mu[:, j].tolist(), mu[:, k].tolist())
        oracle_gap = max(oracle_gap, abs(D[j, k] - math.sqrt(max(1.0 - r, 0.0))))
    in_range = bool(D.min() >= 0 and D.max() <= SQRT2)
    runs = [hierarchical_cluster(D.copy()) for _ in range(5)]
    det = all(np.array_equal(r.linkage, runs[0].linkage) and np.array_equal(r.leaf_order, runs[0].leaf_order)
              for r in runs)
    D_ref = distance_matrix(net_multipliers(reference_state(econ).coefficients)).d
    ch = distance_change_histogram(D_ref, D)
    count_ok = ch.n_obs == n * (n - 1) // 2 and int(ch.counts.sum()) == ch.n_obs
    ok = oracle_gap < 1e-12 and in_range and det and count_ok
    acceptance("AC8", ok, f"Pearson oracle gap {oracle_gap:.1e}; d in [0, sqrt2]={in_range}; "
                          f"5 runs identical={det}; histogram n={ch.n_obs}")
    assert ok


# --- AC9 ------------------------------------------------------------------------


def _pipeline(ws: Path, env) -> float:
    steps = [
        ["synth", "--n", "50", "--seed", "7"],
        ["ingest", "--transactions", "transactions.csv", "--deflators", "deflators.csv", "--config", "config.json"],
        ["triangulate"],
        ["calibrate"],
        ["solve"],
        ["shock"],
        ["cluster", "--compare", "cur", "proj"],
        ["report"],
    ]
    t0 = time.perf_counter()
    for step in steps:
        res = subprocess.run([sys.executable, "-m", "ccesnet", *step, "--out", "."], cwd=ws, env=env,
                             capture_output=True, text=True)
        if res.returncode != 0:
            raise AssertionError(f"{step[0]} exited {res.returncode}: {res.stderr}")
    return time.perf_counter() - t0


def _manifest_complete(ws: Path) -> bool:
    m = json.loads((ws / "manifest.json").read_text())
    files = {p.name for p in ws.iterdir() if p.is_file() and p.name != "manifest.json"}
    if set(m["outputs"]) != files:
        return False
    for name, rec in m["outputs"].items():
        data = (ws / name).read_bytes()
        if rec["bytes"] != len(data):
            return False
    subs = [r["subcommand"] for r in m["runs"]]
    need = {"subcommand", "inputs", "config_digest", "config", "outputs", "timestamp"}
    return subs == ["synth", "ingest", "triangulate", "calibrate", "solve", "shock", "cluster", "report"] and all(
        need <= set(r) for r in m["runs"]
    )


def test_ac9_end_to_end(tmp_path, acceptance):
    env = dict(os.environ, SOURCE_DATE_EPOCH="1700000000")
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    a.mkdir()
    b.mkdir()
    ta = _pipeline(a, env)
    tb = _pipeline(b, env)
    names_a = sorted(p.name for p in a.iterdir())
    names_b = sorted(p.name for p in b.iterdir())
    identical = names_a == names_b and all((a / n).read_bytes() == (b / n).read_bytes() for n in names_a)
    complete = _manifest_complete(a)
    ok = max(ta, tb) < 60 and complete and identical
    acceptance("AC9", ok, f"{len(names_a)} files, runs {ta:.1f}s/{tb:.1f}s, manifest complete={complete}, "
                          f"byte-identical={identical}")
    assert ok

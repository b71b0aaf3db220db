"""Command-line front end.

Every subcommand reads and writes a workspace directory (``--out``)::

    ccesnet synth --n 50 --seed 7 --out ws
    ccesnet ingest --transactions ws/transactions.csv --deflators ws/deflators.csv \\
        --config ws/config.json --out ws
    ccesnet triangulate --out ws
    ccesnet calibrate --out ws --threads 4
    ccesnet solve --shock shock.json --out ws
    ccesnet shock --scenario shock.json --baseline both --out ws
    ccesnet cluster --state cur --out ws
    ccesnet report --out ws

Failures print ``{code, module, message, context}`` as JSON on stderr and
exit with a code that identifies the failure class.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__, svg
from .equilibrium import (
    CURRENT,
    PROJECTED,
    REFERENCE,
    Economy,
    coefficients,
    current_state,
    reference_state,
    solve_equilibrium,
)
from .errors import (
    CalibrationError,
    CCESError,
    ConvergenceError,
    DataValidationError,
    DegenerateShareError,
    InfeasibleProductivity,
    LinearityError,
    ProductivityError,
)
from .io_data import TwoStateData, load_config
from .netanalysis import (
    LINKAGES,
    distance_change_histogram,
    distance_matrix,
    hierarchical_cluster,
    net_multipliers,
    tanglegram_pairs,
)
from .pipeline import calibrate_economy, ingest, order_sectors, replication_report
from .propagation import (
    CCES,
    LEONTIEF,
    ShockScenario,
    primary_redistribution_profile,
    run_scenario,
)
from .synthetic import GeneratorConfig, generate_economy, write_synthetic
from .triangulate import StreamOrder, gamma_grid

logger = logging.getLogger("ccesnet")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_DATA = 4
EXIT_CALIBRATION = 5
EXIT_CONVERGENCE = 6
EXIT_PRODUCTIVITY = 7

FIXTURES = ("sample",)
STATES = {"ref": REFERENCE, "cur": CURRENT, "proj": PROJECTED}
MANIFEST = "manifest.json"


class UsageError(Exception):
    code, module = "usage", "cli"


class MissingInputError(FileNotFoundError):
    code, module = "missing_input", "cli"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- workspace ---------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (
        _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
        if epoch
        else _dt.datetime.now(tz=_dt.timezone.utc)
    )
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


class Workspace:
    """Output directory plus the running list of files written by one command."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: list[str] = []
        self.inputs: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.root / name

    def require(self, name: str, hint: str = "") -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingInputError(f"{p} not found{'; ' + hint if hint else ''}")
        return p

    def rel(self, path) -> str:
        return os.path.relpath(Path(path).resolve(), self.root.resolve())

    def note_input(self, key: str, path) -> None:
        if path is not None:
            self.inputs[key] = self.rel(path)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        self.written.append(name)
        return p

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        return self.write_text(name, buf.getvalue())

    def adopt(self, paths) -> None:
        """Register files written by library code."""
        for p in paths:
            self.written.append(self.rel(p))

    def read_json(self, name: str, hint: str = ""):
        with open(self.require(name, hint)) as fh:
            return json.load(fh)


def _versions() -> dict:
    return {
        "ccesnet": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def update_manifest(ws: Workspace, subcommand: str, config: dict) -> Path:
    """Merge this command's outputs into the workspace manifest.

    Paths are workspace-relative and the timestamp honours
    ``SOURCE_DATE_EPOCH``, so identical runs produce identical manifests.
    """
    mpath = ws.path(MANIFEST)
    manifest = {"outputs": {}, "runs": []}
    if mpath.exists():
        with open(mpath) as fh:
            manifest = json.load(fh)
    digest = _sha256(_canonical(config).encode())
    outputs = []
    for name in dict.fromkeys(ws.written):
        data = ws.path(name).read_bytes()
        manifest["outputs"][name] = {"sha256": _sha256(data), "bytes": len(data), "subcommand": subcommand}
        outputs.append(name)
    manifest["runs"].append(
        {
            "subcommand": subcommand,
            "inputs": dict(sorted(ws.inputs.items())),
            "config_digest": digest,
            "config": config,
            "outputs": sorted(outputs),
            "timestamp": _timestamp(),
        }
    )
    manifest["versions"] = _versions()
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return mpath


# --- shared loaders ------------------------------------------------------------


def _fixture_paths(name: str):
    if name != "sample":
        raise UsageError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    root = resources.files("ccesnet") / "data" / "sample_sector"
    return root / "transactions.csv", root / "deflators.csv", root / "config.json"


def _ingest_inputs(args):
    """Return (transactions, deflators, config) paths from flags or a bundled fixture."""
    if getattr(args, "fixture", None):
        t, d, c = _fixture_paths(args.fixture)
        return [Path(str(t))], Path(str(d)), Path(str(args.config or c))
    if not args.transactions or not args.deflators:
        raise UsageError("need --transactions and --deflators (or --fixture)")
    files = [Path(p) for p in args.transactions]
    if len(files) not in (1, 3):
        raise UsageError("--transactions takes one file with a period column or three per-period files")
    for p in [*files, Path(args.deflators)] + ([Path(args.config)] if args.config else []):
        if not p.exists():
            raise MissingInputError(f"{p} not found")
    return files, Path(args.deflators), (Path(args.config) if args.config else None)


def _do_ingest(ws: Workspace, args) -> TwoStateData:
    files, dfl, cfg_path = _ingest_inputs(args)
    for k, f in enumerate(files):
        ws.note_input(f"transactions[{k}]" if len(files) > 1 else "transactions", f)
    ws.note_input("deflators", dfl)
    ws.note_input("config", cfg_path)
    cfg = load_config(cfg_path)
    data = ingest(files[0] if len(files) == 1 else files, dfl, cfg)
    ws.write_json("two_state.json", data.to_json())
    logger.info("ingested %d sectors, p0=%g", data.n, data.p0)
    return data


def _load_data(ws: Workspace) -> TwoStateData:
    return TwoStateData.from_json(ws.read_json("two_state.json", "run 'ingest' first"))


def _load_order(ws: Workspace, data: TwoStateData) -> StreamOrder:
    obj = ws.read_json("stream_order.json", "run 'triangulate' first")
    pos = {s: k for k, s in enumerate(data.sector_ids)}
    phi = np.array([pos[s] for s in obj["order"]], dtype=int)
    return StreamOrder(phi, float(obj["gamma_star"]), float(obj["linearity"]))


def _load_economy(ws: Workspace) -> Economy:
    return Economy.from_json(ws.read_json("economy.json", "run 'calibrate' first"))


def _final_demand(data: TwoStateData) -> np.ndarray:
    if data.final_demand is not None and np.any(np.asarray(data.final_demand) > 0):
        return np.asarray(data.final_demand, dtype=float)
    logger.warning("no final demand in the data; using a unit vector")
    return np.ones(data.n)


def _scenario(ws: Workspace, path, ids, order: StreamOrder | None, magnitude: float) -> ShockScenario:
    """Scenario from a JSON file, else a single shock to the mid-stream sector."""
    if path:
        p = Path(path)
        if not p.exists():
            raise MissingInputError(f"{p} not found")
        ws.note_input("scenario", p)
        with open(p) as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict) or not isinstance(obj.get("z"), dict):
            raise DataValidationError(f"{p}: expected {{\"z\": {{sector_id: value}}}}")
        try:
            return ShockScenario.from_mapping(ids, obj["z"], obj.get("label", p.stem))
        except (KeyError, ValueError) as exc:
            raise DataValidationError(f"{p}: {exc}") from exc
    n = len(ids)
    mid = int(order.phi[n // 2]) if order is not None else n // 2
    return ShockScenario.single(n, mid, magnitude, label=f"{ids[mid]}{round(magnitude * 100)}")


def _matrix_csv(ws, name, M, row_ids, col_ids, corner="sector"):
    ws.write_csv(name, [corner, *col_ids], ([r, *row] for r, row in zip(row_ids, M)))


# --- subcommands ---------------------------------------------------------------


def cmd_synth(ws: Workspace, args) -> dict:
    cfg = GeneratorConfig(
        n=args.n, density=args.density, seed=args.seed, triangular_bias=args.triangular_bias
    )
    synth = generate_economy(cfg)
    ws.adopt(write_synthetic(synth, ws.root))
    return {"n": cfg.n, "seed": cfg.seed, "density": cfg.density, "triangular_bias": cfg.triangular_bias}


def cmd_ingest(ws: Workspace, args) -> dict:
    data = _do_ingest(ws, args)
    return {"n": data.n, "p0": data.p0}


def _do_triangulate(ws: Workspace, data: TwoStateData, grid) -> StreamOrder:
    so = order_sectors(data, grid)
    ids = data.sector_ids
    ws.write_json(
        "stream_order.json",
        {
            "gamma_star": so.gamma_star,
            "linearity": so.linearity,
            "order": [ids[k] for k in so.phi],
        },
    )
    best = int(np.flatnonzero(so.gammas == so.gamma_star)[0])
    ws.write_csv(
        "linearity_curve.csv",
        ["gamma", "linearity", "is_max"],
        ((g, l, int(k == best)) for k, (g, l) in enumerate(zip(so.gammas, so.curve))),
    )
    logger.info("stream order: linearity %.4f at gamma* = %.2f", so.linearity, so.gamma_star)
    return so


def cmd_triangulate(ws: Workspace, args) -> dict:
    data = _load_data(ws)
    grid = gamma_grid(args.gamma_min, args.gamma_max, args.gamma_step)
    so = _do_triangulate(ws, data, grid)
    return {"gamma_min": args.gamma_min, "gamma_max": args.gamma_max, "gamma_step": args.gamma_step,
            "gamma_star": so.gamma_star}


def _do_calibrate(ws: Workspace, data: TwoStateData, order: StreamOrder, threads: int, bins: int) -> Economy:
    ids = data.sector_ids
    result = calibrate_economy(data, order.rank, threads=threads)
    records = []
    for r in result.sectors:
        if isinstance(r, CCESError):
            continue
        rec = r.to_record()
        rec["input_ids"] = [ids[k] for k in rec["inputs"]]
        records.append(rec)
    failures = [
        {"sector_id": sid, "code": e.code, "message": e.message, "context": e.context}
        for sid, e in result.failures.items()
    ]
    ws.write_json(
        "calibration.json",
        {"stream_order": [ids[k] for k in order.phi], "sectors": records, "failures": failures},
    )
    if result.failures:
        first = next(iter(result.failures.values()))
        raise CalibrationError(
            f"{len(failures)} sector(s) failed to calibrate, first: {first.message}",
            sectors=list(result.failures),
        )
    econ = result.economy
    sig = np.concatenate([r.sigmas for r in result.sectors]) if records else np.zeros(0)
    counts, edges = np.histogram(sig, bins=bins)
    ws.write_csv("sigma_histogram.csv", ["bin_left", "bin_right", "count"], zip(edges[:-1], edges[1:], counts))
    # sigma of input i (row) in sector j (column), both in stream order
    n = data.n
    grid = np.full((n, n), np.nan)
    for j, r in enumerate(result.sectors):
        grid[r.input_indices, j] = r.sigmas
    phi = order.phi
    _matrix_csv(
        ws, "sigma_matrix.csv",
        [[None if np.isnan(v) else v for v in row] for row in grid[np.ix_(phi, phi)]],
        [ids[k] for k in phi], [ids[k] for k in phi], corner="input\\sector",
    )
    ws.write_csv(
        "theta_series.csv",
        ["position", "sector_id", "theta", "ln_theta", "tornqvist"],
        (
            (pos, ids[j], result.sectors[j].theta, result.sectors[j].ln_theta, result.sectors[j].tornqvist)
            for pos, j in enumerate(phi)
        ),
    )
    ws.write_json("economy.json", econ.to_json())
    rep = replication_report(econ, data)
    ws.write_json("replication.json", {"ok": rep.ok(), "checks": rep.to_json()})
    if not rep.ok():
        logger.warning("replication check failed: %s", rep.failures())
    logger.info("calibrated %d sectors; %d negative elasticities", n, int((sig < 0).sum()))
    return econ


def cmd_calibrate(ws: Workspace, args) -> dict:
    if args.fixture or args.transactions:
        data = _do_ingest(ws, args)
        order = _do_triangulate(ws, data, None)
    else:
        data = _load_data(ws)
        order = _load_order(ws, data) if ws.path("stream_order.json").exists() else _do_triangulate(ws, data, None)
    _do_calibrate(ws, data, order, args.threads, args.bins)
    return {"bins": args.bins}


def cmd_solve(ws: Workspace, args) -> dict:
    econ = _load_economy(ws)
    ids = econ.sector_ids
    if args.shock:
        scen = _scenario(ws, args.shock, ids, None, 1.0)
    else:
        scen = ShockScenario(np.ones(econ.n), "no shock")
    pi = solve_equilibrium(econ, scen.z)
    state = coefficients(econ, pi, scen.z)
    p = econ.current_prices if econ.current_prices is not None else np.full(econ.n, np.nan)
    ws.write_csv("prices.csv", ["sector_id", "z", "current", "projected"], zip(ids, scen.z, p, pi))
    _matrix_csv(ws, "coefficients.csv", state.coefficients, ids, ids, corner="input\\sector")
    ws.write_csv("primary_row.csv", ["sector_id", "primary_share"], zip(ids, state.primary_row))
    return {"scenario": scen.label}


def _do_shock(ws: Workspace, econ: Economy, data: TwoStateData, order, scen: ShockScenario, baseline: str):
    ids = econ.sector_ids
    cur = current_state(econ)
    f = _final_demand(data)
    reports = run_scenario(econ, cur, scen, f, baseline=baseline)
    any_rep = next(iter(reports.values()))
    s = any_rep.shocked
    v_cur = cur.primary_row * any_rep.gross_output_current
    rows = [[
        "current", "", 1.0, 0.0, float(f.sum()), float(v_cur.sum()),
        None if s is None else any_rep.gross_output_current[s],
        None if s is None else any_rep.value_added_current[s],
    ]]
    for key in (LEONTIEF, CCES):
        if key in reports:
            r = reports[key]
            rows.append([
                "projected", key, r.delta_star, r.delta_f, float(f.sum()) * r.delta_star,
                float(r.value_added_projected.sum()),
                r.gross_output_shocked_sector, r.value_added_shocked_sector,
            ])
    ws.write_csv(
        "welfare_table.csv",
        ["state", "baseline", "delta_star", "delta_f", "final_demand", "primary_input",
         "gross_output_shocked", "value_added_shocked"],
        rows,
    )
    phi = order.phi if order is not None else np.arange(econ.n)
    cols, profiles = [], []
    for key in (CCES, LEONTIEF):
        if key in reports:
            prof = primary_redistribution_profile(reports[key], phi)
            cols += [f"delta_v_{key}", f"log_abs_{key}", f"zero_{key}"]
            profiles.append((reports[key].delta_v[phi], prof))
    body = []
    for k, j in enumerate(phi):
        row = [k, ids[j]]
        for dv, prof in profiles:
            row += [dv[k], None if prof.is_zero[k] else prof.log_abs[k], int(prof.is_zero[k])]
        body.append(row)
    ws.write_csv("dv_profile.csv", ["position", "sector_id", *cols], body)
    ws.write_json(
        "welfare.json",
        {
            "scenario": scen.label,
            "z": {ids[k]: float(v) for k, v in enumerate(scen.z) if v != 1.0},
            "shocked": None if s is None else ids[s],
            "reports": {
                k: {"delta_star": r.delta_star, "delta_f": r.delta_f,
                    "sum_delta_v": float(r.delta_v.sum())}
                for k, r in reports.items()
            },
        },
    )
    return reports


def cmd_shock(ws: Workspace, args) -> dict:
    econ = _load_economy(ws)
    data = _load_data(ws)
    order = _load_order(ws, data) if ws.path("stream_order.json").exists() else None
    scen = _scenario(ws, args.scenario, econ.sector_ids, order, args.magnitude)
    _do_shock(ws, econ, data, order, scen, args.baseline)
    return {"baseline": args.baseline, "magnitude": args.magnitude, "scenario": scen.label}


def _state(econ: Economy, which: str, z=None):
    if which == "ref":
        return reference_state(econ)
    if which == "cur":
        return current_state(econ)
    pi = solve_equilibrium(econ, z)
    return coefficients(econ, pi, z)


def _do_cluster(ws: Workspace, econ: Economy, order, which: str, linkage: str, z=None):
    ids = econ.sector_ids
    state = _state(econ, which, z)
    D = distance_matrix(net_multipliers(state.coefficients))
    dg = hierarchical_cluster(D, linkage)
    _matrix_csv(ws, f"distances_{which}.csv", D.d, ids, ids)
    ws.write_csv(
        f"merges_{which}.csv",
        ["step", "a", "b", "height", "size"],
        ((k, int(a), int(b), h, int(sz)) for k, (a, b, h, sz) in enumerate(dg.linkage)),
    )
    ws.write_csv(f"leaf_order_{which}.csv", ["position", "sector_id"], enumerate(ids[k] for k in dg.leaf_order))
    phi = order.phi if order is not None else np.arange(econ.n)
    for tag, perm in (("original", np.arange(econ.n)), ("stream", phi)):
        lab = [ids[k] for k in perm]
        _matrix_csv(ws, f"heatmap_{which}_{tag}.csv", D.d[np.ix_(perm, perm)], lab, lab)
    return D, dg


def _do_compare(ws: Workspace, before: str, after: str, Db, Da, bins: int):
    ch = distance_change_histogram(Db, Da, bins=bins)
    name = f"distance_change_{before}_{after}"
    ws.write_csv(f"{name}.csv", ["bin_left", "bin_right", "count"], zip(ch.edges[:-1], ch.edges[1:], ch.counts))
    ws.write_json(f"{name}.json", {"mean_shift": ch.mean_shift, "n_obs": ch.n_obs,
                                   "before": STATES[before], "after": STATES[after]})
    return ch


def cmd_cluster(ws: Workspace, args) -> dict:
    econ = _load_economy(ws)
    data = _load_data(ws)
    order = _load_order(ws, data) if ws.path("stream_order.json").exists() else None
    wanted = list(dict.fromkeys(args.compare)) if args.compare else [args.state]
    z = None
    if "proj" in wanted:
        z = _scenario(ws, args.scenario, econ.sector_ids, order, args.magnitude).z
    mats = {w: _do_cluster(ws, econ, order, w, args.linkage, z)[0] for w in wanted}
    if args.compare:
        before, after = args.compare
        _do_compare(ws, before, after, mats[before], mats[after], args.bins)
    return {"linkage": args.linkage, "states": wanted, "compare": args.compare, "bins": args.bins}


def cmd_report(ws: Workspace, args) -> dict:
    if args.fixture or args.transactions:
        data = _do_ingest(ws, args)
    else:
        data = _load_data(ws)
    ids = data.sector_ids
    so = _do_triangulate(ws, data, gamma_grid(args.gamma_min, args.gamma_max, args.gamma_step))
    best = int(np.flatnonzero(so.gammas == so.gamma_star)[0])
    ws.write_text("linearity_curve.svg", svg.line_chart(
        so.gammas, so.curve, "Linearity over gamma", mark=best, xlabel="gamma", ylabel="linearity"))

    econ = _do_calibrate(ws, data, so, args.threads, args.bins)
    calib = json.loads(ws.path("calibration.json").read_text())
    sig = np.array([s for r in calib["sectors"] for s in r["sigmas"]])
    counts, edges = np.histogram(sig, bins=args.bins)
    ws.write_text("sigma_histogram.svg", svg.histogram(counts, edges, "Nest elasticities", "sigma"))

    scen = _scenario(ws, args.scenario, ids, so, args.magnitude)
    reports = _do_shock(ws, econ, data, so, scen, "both")

    dists = {}
    for which in ("ref", "cur", "proj"):
        D, dg = _do_cluster(ws, econ, so, which, args.linkage, scen.z)
        dists[which] = (D, dg)
        ws.write_text(f"dendrogram_{which}.svg", svg.dendrogram(dg.linkage, dg.leaf_order, ids, f"Dendrogram ({STATES[which]})"))
    shifts = {}
    for before, after in (("ref", "cur"), ("cur", "proj")):
        ch = _do_compare(ws, before, after, dists[before][0], dists[after][0], args.bins)
        shifts[f"{before}_{after}"] = ch.mean_shift
        ws.write_text(f"distance_change_{before}_{after}.svg", svg.histogram(
            ch.counts, ch.edges, f"Distance change ({STATES[before]} to {STATES[after]})", "d_after - d_before"))
        pairs = tanglegram_pairs(dists[before][1], dists[after][1])
        ws.write_csv(f"tanglegram_{before}_{after}.csv", ["sector_id", "position_left", "position_right"],
                     ((ids[k], l, r) for k, l, r in pairs))

    rep = json.loads(ws.path("replication.json").read_text())
    ws.write_json("report.json", {
        "n": data.n,
        "stream_order": {"gamma_star": so.gamma_star, "linearity": so.linearity},
        "calibration": {
            "sectors": len(calib["sectors"]),
            "sigma_count": int(sig.size),
            "sigma_negative": int((sig < 0).sum()),
            "sigma_min": float(sig.min()) if sig.size else None,
            "sigma_max": float(sig.max()) if sig.size else None,
            "theta_min": float(econ.theta.min()),
            "theta_max": float(econ.theta.max()),
        },
        "replication": rep,
        "scenario": scen.label,
        "welfare": {k: {"delta_star": r.delta_star, "delta_f": r.delta_f} for k, r in reports.items()},
        "distance_mean_shift": shifts,
        "linkage": args.linkage,
    })
    return {"linkage": args.linkage, "bins": args.bins, "magnitude": args.magnitude,
            "gamma": [args.gamma_min, args.gamma_max, args.gamma_step], "scenario": scen.label}


# --- parser ------------------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    version = f"%(prog)s {__version__}"
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--out", default=argparse.SUPPRESS, help="workspace directory (default: .)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON run config (split, balance_tol, p0)")
    g.add_argument("--threads", type=_positive_int, default=argparse.SUPPRESS, help="worker threads")
    g.add_argument("--log-level", default=argparse.SUPPRESS, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    g.add_argument("--version", action="version", version=version)

    parser = _Parser(prog="ccesnet", description="Cascaded CES production networks.")
    parser.add_argument("--out", default=".", help="workspace directory (default: .)")
    parser.add_argument("--config", default=None, help="JSON run config (split, balance_tol, p0)")
    parser.add_argument("--threads", type=_positive_int, default=1, help="worker threads")
    parser.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--version", action="version", version=version)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    def ingest_flags(p):
        p.add_argument("--transactions", nargs="+", help="one CSV with a period column, or three per-period CSVs")
        p.add_argument("--deflators", help="deflator CSV (sector_id,period,deflator)")
        p.add_argument("--fixture", choices=FIXTURES, help="use a bundled dataset instead of files")

    def gamma_flags(p):
        p.add_argument("--gamma-min", type=float, default=0.0)
        p.add_argument("--gamma-max", type=float, default=3.0)
        p.add_argument("--gamma-step", type=float, default=0.01)

    def scenario_flags(p):
        p.add_argument("--scenario", help='JSON {"z": {sector_id: value}}; default: shock the mid-stream sector')
        p.add_argument("--magnitude", type=float, default=1.10, help="default-scenario shock size")

    p = add("synth", cmd_synth, "write a synthetic economy in the input CSV schema")
    p.add_argument("--n", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--triangular-bias", type=float, default=0.9)

    ingest_flags(add("ingest", cmd_ingest, "read linked tables into two-state shares and prices"))

    gamma_flags(add("triangulate", cmd_triangulate, "find the stream order"))

    p = add("calibrate", cmd_calibrate, "calibrate every sector's cascaded CES technology")
    ingest_flags(p)
    p.add_argument("--bins", type=_positive_int, default=40, help="elasticity histogram bins")

    p = add("solve", cmd_solve, "solve equilibrium prices under a shock")
    p.add_argument("--shock", help='JSON {"z": {sector_id: value}}; default: no shock')

    p = add("shock", cmd_shock, "welfare accounting for a shock scenario")
    scenario_flags(p)
    p.add_argument("--baseline", choices=["both", CCES, LEONTIEF], default="both")

    p = add("cluster", cmd_cluster, "net-multiplier distances and hierarchical clustering")
    p.add_argument("--state", choices=list(STATES), default="cur")
    p.add_argument("--compare", nargs=2, choices=list(STATES), metavar=("BEFORE", "AFTER"))
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    p.add_argument("--bins", type=_positive_int, default=40)
    scenario_flags(p)

    p = add("report", cmd_report, "run the whole pipeline and write every table and figure")
    ingest_flags(p)
    gamma_flags(p)
    scenario_flags(p)
    p.add_argument("--linkage", choices=LINKAGES, default="average")
    p.add_argument("--bins", type=_positive_int, default=40)
    return parser


_EXIT_CODES = [
    (UsageError, EXIT_USAGE),
    (MissingInputError, EXIT_MISSING_INPUT),
    (FileNotFoundError, EXIT_MISSING_INPUT),
    (DataValidationError, EXIT_DATA),
    (LinearityError, EXIT_DATA),
    (DegenerateShareError, EXIT_DATA),
    (CalibrationError, EXIT_CALIBRATION),
    (InfeasibleProductivity, EXIT_CALIBRATION),
    (ConvergenceError, EXIT_CONVERGENCE),
    (ProductivityError, EXIT_PRODUCTIVITY),
]


def exit_code(exc: BaseException) -> int:
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_OTHER


def error_json(exc: BaseException, command: str | None = None) -> dict:
    module = getattr(exc, "module", "cli")
    code = getattr(exc, "code", None) or type(exc).__name__
    context = dict(getattr(exc, "context", {}) or {})
    if command:
        context.setdefault("command", command)
    if isinstance(exc, FileNotFoundError) and not isinstance(exc, MissingInputError):
        code, module = "missing_input", "cli"
    return {"code": code, "module": module, "message": str(exc), "context": context}


def main(argv=None) -> int:
    parser = build_parser()
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        logging.basicConfig(level=getattr(logging, args.log_level), format="%(levelname)s %(name)s: %(message)s")
        ws = Workspace(args.out)
        params = args.func(ws, args)
        config = {"command": command, "params": params, "threads": args.threads}
        if args.config:
            config["config"] = load_config(args.config)
        update_manifest(ws, command, config)
        return EXIT_OK
    except (UsageError, CCESError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps(error_json(exc, command), default=str), file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())

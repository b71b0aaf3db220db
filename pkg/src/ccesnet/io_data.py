"""Linked input-output tables: ingestion, validation and two-state preprocessing.

CSV layout (one file with a ``period`` column, or one file per period)::

    period,sector,<id_1>,...,<id_n>,final_demand
    2000,<id_1>,x_11,...,x_1n,f_1
    ...
    2000,primary,v_1,...,v_n,

Rows are input (selling) sectors, columns are purchasing sectors.  The
deflator file has columns ``sector_id,period,deflator`` and includes a
``primary`` row per period.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataValidationError

PRIMARY = "primary"
FINAL_DEMAND = "final_demand"
DEFAULT_SPLIT = (0.25, 0.75)
DEFAULT_BALANCE_TOL = 1e-6


@dataclass
class LinkedTables:
    """Three periods of nominal transactions plus deflators."""

    sector_ids: list[str]
    transactions: np.ndarray  # (3, n, n)
    primary_input: np.ndarray  # (3, n)
    final_demand: np.ndarray  # (3, n)
    deflators: np.ndarray  # (3, n)
    primary_deflator: np.ndarray  # (3,)
    periods: list[str] = field(default_factory=lambda: ["T0", "T1", "T2"])

    @property
    def n(self) -> int:
        return len(self.sector_ids)

    def validate(self, balance_tol: float = DEFAULT_BALANCE_TOL) -> None:
        n = self.n
        if self.transactions.shape != (3, n, n):
            raise DataValidationError(
                f"transactions have shape {self.transactions.shape}, expected (3, {n}, {n})"
            )
        for name, arr in (("primary_input", self.primary_input), ("final_demand", self.final_demand),
                          ("deflators", self.deflators)):
            if arr.shape != (3, n):
                raise DataValidationError(f"{name} has shape {arr.shape}, expected (3, {n})")
        for t, period in enumerate(self.periods):
            neg = np.argwhere(self.transactions[t] < 0)
            if len(neg):
                i, j = neg[0]
                raise DataValidationError(
                    f"negative transaction in period {period}: row {self.sector_ids[i]}, "
                    f"column {self.sector_ids[j]}",
                    period=period, row=self.sector_ids[i], column=self.sector_ids[j],
                )
            for name, arr in (("primary", self.primary_input), (FINAL_DEMAND, self.final_demand)):
                bad = np.flatnonzero(arr[t] < 0)
                if len(bad):
                    raise DataValidationError(
                        f"negative {name} entry in period {period} for sector "
                        f"{self.sector_ids[bad[0]]}",
                        period=period, sector=self.sector_ids[bad[0]],
                    )
            bad = np.flatnonzero(~(self.deflators[t] > 0))
            if len(bad):
                raise DataValidationError(
                    f"nonpositive deflator in period {period} for sector {self.sector_ids[bad[0]]}",
                    period=period, sector=self.sector_ids[bad[0]],
                )
            if not self.primary_deflator[t] > 0:
                raise DataValidationError(
                    f"nonpositive primary deflator in period {period}", period=period, sector=PRIMARY
                )
            inputs = self.transactions[t].sum(axis=0) + self.primary_input[t]
            outputs = self.transactions[t].sum(axis=1) + self.final_demand[t]
            scale = np.maximum(np.maximum(inputs, outputs), np.finfo(float).tiny)
            gap = np.abs(inputs - outputs) / scale
            if np.any(gap > balance_tol):
                j = int(np.argmax(gap))
                raise DataValidationError(
                    f"column balance violated in period {period} for sector "
                    f"{self.sector_ids[j]}: relative gap {gap[j]:.3e} > {balance_tol:g}",
                    period=period, sector=self.sector_ids[j], gap=float(gap[j]),
                )
        empty = np.flatnonzero(((self.transactions.sum(axis=1) + self.primary_input) <= 0).all(axis=0))
        if len(empty):
            raise DataValidationError(
                f"sector {self.sector_ids[empty[0]]} has no inputs in any period",
                sector=self.sector_ids[empty[0]],
            )


@dataclass
class TwoStateData:
    """Reference/current cost shares and reference-normalized current prices.

    ``A`` and ``B`` are ``(n+1, n)``: row 0 holds primary shares, rows
    ``1..n`` intermediate shares, one column per purchasing sector.
    """

    sector_ids: list[str]
    A: np.ndarray
    B: np.ndarray
    p: np.ndarray
    p0: float
    final_demand: np.ndarray | None = None
    reference_final_demand: np.ndarray | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.B = np.asarray(self.B, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        n = len(self.sector_ids)
        if self.A.shape != (n + 1, n) or self.B.shape != (n + 1, n) or self.p.shape != (n,):
            raise DataValidationError("TwoStateData dimensions do not match the sector list")
        for name, S in (("A", self.A), ("B", self.B)):
            if np.any(S < 0) or np.any(S > 1):
                raise DataValidationError(f"shares in {name} outside [0, 1]")
            dev = np.abs(S.sum(axis=0) - 1.0)
            if np.any(dev > 1e-10):
                j = int(np.argmax(dev))
                raise DataValidationError(
                    f"column {self.sector_ids[j]} of {name} sums to {S[:, j].sum():.12g}",
                    sector=self.sector_ids[j],
                )
        if np.any(self.p <= 0) or not self.p0 > 0:
            raise DataValidationError("prices must be strictly positive")
        mismatch = np.argwhere((self.A > 0) != (self.B > 0))
        if len(mismatch):
            i, j = mismatch[0]
            row = PRIMARY if i == 0 else self.sector_ids[i - 1]
            raise DataValidationError(
                f"incidence differs between states at row {row}, column {self.sector_ids[j]}",
                row=row, column=self.sector_ids[j],
            )

    @property
    def n(self) -> int:
        return len(self.sector_ids)

    def to_json(self) -> dict:
        out = {
            "sector_ids": list(self.sector_ids),
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "p": self.p.tolist(),
            "p0": float(self.p0),
        }
        if self.final_demand is not None:
            out["final_demand"] = np.asarray(self.final_demand, dtype=float).tolist()
        if self.reference_final_demand is not None:
            out["reference_final_demand"] = np.asarray(self.reference_final_demand, dtype=float).tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "TwoStateData":
        fd = obj.get("final_demand")
        rfd = obj.get("reference_final_demand")
        return cls(
            obj["sector_ids"], np.array(obj["A"]), np.array(obj["B"]), np.array(obj["p"]),
            float(obj["p0"]),
            None if fd is None else np.array(fd),
            None if rfd is None else np.array(rfd),
        )


@dataclass
class IncidenceMatrix:
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        if self.u.ndim != 2 or self.u.shape[0] != self.u.shape[1]:
            raise ValueError("incidence matrix must be square")
        if not np.isin(self.u, (0, 1)).all():
            raise ValueError("incidence entries must be 0 or 1")

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def K(self) -> int:
        return int(self.u.sum() - np.trace(self.u))


@dataclass
class MergedTables:
    reference: np.ndarray
    current: np.ndarray
    primary_reference: np.ndarray
    primary_current: np.ndarray
    final_demand_reference: np.ndarray
    final_demand_current: np.ndarray
    deflators_reference: np.ndarray
    deflators_current: np.ndarray
    primary_deflator_reference: float
    primary_deflator_current: float
    sector_ids: list[str]
    n_repaired: int = 0


def incidence(transactions) -> IncidenceMatrix:
    """``u_ij = 1`` iff ``x_ij != 0``."""
    x = np.asarray(transactions)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("transactions must be a square matrix")
    return IncidenceMatrix((x != 0).astype(np.int64))


def _merge_pair(x, split):
    """Average neighbouring periods and repair (0,0,x) / (x,0,0) cells."""
    x0, x1, x2 = x
    ref = 0.5 * (x0 + x1)
    cur = 0.5 * (x1 + x2)
    late = (x0 == 0) & (x1 == 0) & (x2 != 0)
    early = (x0 != 0) & (x1 == 0) & (x2 == 0)
    ref = np.where(late, split[0] * x2, ref)
    cur = np.where(late, split[1] * x2, cur)
    ref = np.where(early, split[1] * x0, ref)
    cur = np.where(early, split[0] * x0, cur)
    return ref, cur, int(late.sum() + early.sum())


def merge_states(tables: LinkedTables, split: Sequence[float] = DEFAULT_SPLIT) -> MergedTables:
    """Average T0,T1 into the reference and T1,T2 into the current state.

    A cell present only in the last period, ``(0, 0, x)``, becomes
    ``(split[0]*x, split[1]*x)``; one present only in the first period,
    ``(x, 0, 0)``, becomes ``(split[1]*x, split[0]*x)``.  Deflators are
    pairwise means.
    """
    split = tuple(float(s) for s in split)
    if len(split) != 2 or min(split) < 0 or abs(sum(split) - 1.0) > 1e-12:
        raise DataValidationError(f"split {split} must be two nonnegative fractions summing to 1")
    ref, cur, k1 = _merge_pair(tables.transactions, split)
    v_ref, v_cur, k2 = _merge_pair(tables.primary_input, split)
    f_ref, f_cur, k3 = _merge_pair(tables.final_demand, split)
    d = tables.deflators
    pd = tables.primary_deflator
    return MergedTables(
        reference=ref, current=cur,
        primary_reference=v_ref, primary_current=v_cur,
        final_demand_reference=f_ref, final_demand_current=f_cur,
        deflators_reference=0.5 * (d[0] + d[1]), deflators_current=0.5 * (d[1] + d[2]),
        primary_deflator_reference=float(0.5 * (pd[0] + pd[1])),
        primary_deflator_current=float(0.5 * (pd[1] + pd[2])),
        sector_ids=list(tables.sector_ids),
        n_repaired=k1 + k2 + k3,
    )


def _shares(primary, transactions, sector_ids, label):
    values = np.vstack((primary[None, :], transactions))
    totals = values.sum(axis=0)
    bad = np.flatnonzero(totals <= 0)
    if len(bad):
        raise DataValidationError(
            f"sector {sector_ids[bad[0]]} has a zero input total in the {label} state",
            sector=sector_ids[bad[0]],
        )
    S = values / totals
    return S / S.sum(axis=0)


def to_two_state(merged: MergedTables, p0: float | None = None) -> TwoStateData:
    """Cost shares per column and current prices relative to the reference.

    ``p_i`` is the ratio of current to reference deflator.  ``p0`` defaults
    to the primary-deflator ratio.
    """
    ids = merged.sector_ids
    A = _shares(merged.primary_reference, merged.reference, ids, "reference")
    B = _shares(merged.primary_current, merged.current, ids, "current")
    p = merged.deflators_current / merged.deflators_reference
    if p0 is None:
        p0 = merged.primary_deflator_current / merged.primary_deflator_reference
    return TwoStateData(
        ids, A, B, p, float(p0),
        final_demand=np.asarray(merged.final_demand_current, dtype=float),
        reference_final_demand=np.asarray(merged.final_demand_reference, dtype=float),
    )


# --- file formats -----------------------------------------------------------


def _read_transactions_rows(path: Path, default_period: str | None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty transactions file") from None
        header = [h.strip() for h in header]
        has_period = header[0] == "period"
        cols = header[1:] if has_period else header
        if not cols or cols[0] != "sector" or cols[-1] != FINAL_DEMAND:
            raise DataValidationError(
                f"{path}: header must be [period,]sector,<ids...>,{FINAL_DEMAND}"
            )
        ids = cols[1:-1]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataValidationError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}"
                )
            period = rec[0].strip() if has_period else default_period
            body = rec[1:] if has_period else rec
            label = body[0].strip()
            try:
                vals = [float(c) if c.strip() else 0.0 for c in body[1:]]
            except ValueError as exc:
                raise DataValidationError(f"{path}:{lineno}: {exc}") from None
            rows.append((period, label, vals))
    return ids, rows


def _tables_from_rows(ids, rows, periods):
    n = len(ids)
    pos = {s: k for k, s in enumerate(ids)}
    X = np.full((3, n, n), np.nan)
    V = np.full((3, n), np.nan)
    F = np.zeros((3, n))
    pidx = {p: k for k, p in enumerate(periods)}
    for period, label, vals in rows:
        if period not in pidx:
            raise DataValidationError(f"unexpected period {period!r}")
        t = pidx[period]
        if label == PRIMARY:
            V[t] = vals[:n]
        elif label in pos:
            X[t, pos[label]] = vals[:n]
            F[t, pos[label]] = vals[n]
        else:
            raise DataValidationError(f"unknown sector label {label!r} in period {period}")
    for t, period in enumerate(periods):
        missing = [ids[i] for i in range(n) if np.isnan(X[t, i]).any()]
        if missing:
            raise DataValidationError(
                f"period {period}: missing rows for sectors {missing[:5]}", period=period
            )
        if np.isnan(V[t]).any():
            raise DataValidationError(f"period {period}: missing primary row", period=period)
    return X, V, F


def _read_deflators(path: Path, ids, periods):
    n = len(ids)
    pos = {s: k for k, s in enumerate(ids)}
    pidx = {p: k for k, p in enumerate(periods)}
    D = np.full((3, n), np.nan)
    D0 = np.full(3, np.nan)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"sector_id", "period", "deflator"}:
            raise DataValidationError(f"{path}: deflator header must be sector_id,period,deflator")
        for rec in reader:
            sid, period = rec["sector_id"].strip(), rec["period"].strip()
            if period not in pidx:
                raise DataValidationError(f"{path}: unknown period {period!r}")
            try:
                val = float(rec["deflator"])
            except ValueError:
                raise DataValidationError(
                    f"{path}: bad deflator for {sid} in period {period}", sector=sid, period=period
                ) from None
            if sid == PRIMARY:
                D0[pidx[period]] = val
            elif sid in pos:
                D[pidx[period], pos[sid]] = val
            else:
                raise DataValidationError(f"{path}: unknown sector {sid!r}")
    if np.isnan(D).any() or np.isnan(D0).any():
        t, i = np.argwhere(np.isnan(D))[0] if np.isnan(D).any() else (int(np.argmax(np.isnan(D0))), None)
        sid = PRIMARY if i is None else ids[i]
        raise DataValidationError(
            f"{path}: missing deflator for {sid} in period {periods[t]}", sector=sid, period=periods[t]
        )
    return D, D0


def load_linked_tables(
    transactions: str | Path | Sequence[str | Path],
    deflators: str | Path,
    balance_tol: float = DEFAULT_BALANCE_TOL,
) -> LinkedTables:
    """Read and validate linked tables.

    ``transactions`` is either one CSV with a ``period`` column holding
    three periods, or a sequence of three per-period CSVs (periods are then
    labelled by the order in which the deflator file mentions them).
    """
    deflators = Path(deflators)
    if isinstance(transactions, (str, Path)):
        ids, rows = _read_transactions_rows(Path(transactions), None)
        periods = list(dict.fromkeys(r[0] for r in rows))
        if None in periods:
            raise DataValidationError(f"{transactions}: single-file input needs a period column")
    else:
        files = [Path(f) for f in transactions]
        if len(files) != 3:
            raise DataValidationError(f"expected three period files, got {len(files)}")
        with open(deflators, newline="") as fh:
            periods = list(dict.fromkeys(r["period"].strip() for r in csv.DictReader(fh)))
        if len(periods) != 3:
            raise DataValidationError(f"{deflators}: expected three periods, found {periods}")
        ids, rows = None, []
        for f, period in zip(files, periods):
            fids, frows = _read_transactions_rows(f, period)
            if ids is not None and fids != ids:
                raise DataValidationError(f"{f}: sector header differs from the first file")
            ids = fids
            rows.extend(frows)
    if len(periods) != 3:
        raise DataValidationError(f"expected three periods, found {periods}")
    if len(set(ids)) != len(ids) or PRIMARY in ids:
        raise DataValidationError("sector labels must be unique and must not be 'primary'")
    X, V, F = _tables_from_rows(ids, rows, periods)
    D, D0 = _read_deflators(deflators, ids, periods)
    tables = LinkedTables(list(ids), X, V, F, D, D0, [str(p) for p in periods])
    tables.validate(balance_tol)
    return tables


def _fmt(x: float) -> str:
    return repr(float(x))


def write_linked_tables(tables: LinkedTables, directory: str | Path) -> tuple[Path, Path]:
    """Write the single-file transactions CSV and the deflator CSV."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tpath = directory / "transactions.csv"
    dpath = directory / "deflators.csv"
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "sector", *tables.sector_ids, FINAL_DEMAND])
        for t, period in enumerate(tables.periods):
            for i, sid in enumerate(tables.sector_ids):
                w.writerow([period, sid, *map(_fmt, tables.transactions[t, i]), _fmt(tables.final_demand[t, i])])
            w.writerow([period, PRIMARY, *map(_fmt, tables.primary_input[t]), ""])
    with open(dpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sector_id", "period", "deflator"])
        for t, period in enumerate(tables.periods):
            for i, sid in enumerate(tables.sector_ids):
                w.writerow([sid, period, _fmt(tables.deflators[t, i])])
            w.writerow([PRIMARY, period, _fmt(tables.primary_deflator[t])])
    return tpath, dpath


def load_config(path: str | Path | None) -> dict:
    """Read the JSON run config, filling defaults."""
    cfg = {"split": list(DEFAULT_SPLIT), "balance_tol": DEFAULT_BALANCE_TOL, "p0": None}
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise DataValidationError(f"{path}: config must be a JSON object")
        cfg.update(user)
    return cfg

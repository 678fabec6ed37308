"""Capacity and support size across log-spaced amplitudes."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from .bounds import support_lower_bound, support_upper_bound
from .channel import ChannelParams
from .solver import SolverConfig, solve

WORKERS_ENV = "POISSON_CAPACITY_WORKERS"


@dataclass(frozen=True)
class SweepRecord:
    amplitude: float
    dark_current: float
    capacity_nats: float
    capacity_bits: float
    support_size: int
    kkt_gap: float
    lower_bound_N: int
    upper_bound_N: int | None
    runtime_seconds: float
    status: str

    @property
    def converged(self) -> bool:
        return self.status == "converged"


COLUMNS = tuple(f.name for f in fields(SweepRecord))


def solve_record(amplitude: float, dark_current: float = 0.0, config: SolverConfig | None = None) -> SweepRecord:
    params = ChannelParams(amplitude, dark_current)
    sol = solve(params, config)
    return SweepRecord(
        amplitude=amplitude,
        dark_current=dark_current,
        capacity_nats=sol.capacity_nats,
        capacity_bits=sol.capacity_bits,
        support_size=sol.support_size,
        kkt_gap=sol.kkt_gap,
        lower_bound_N=support_lower_bound(params, sol.capacity_nats),
        upper_bound_N=support_upper_bound(params),
        runtime_seconds=sol.runtime_seconds,
        status="converged" if sol.converged else "not_converged",
    )


def _worker(args):
    return solve_record(*args)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_sweep(amin: float, amax: float, count: int, dark_current: float = 0.0,
              config: SolverConfig | None = None, workers: int | None = None) -> list[SweepRecord]:
    """One solve per log-spaced amplitude, rows sorted by amplitude.

    Rows run in separate processes when ``workers`` (default: the
    ``POISSON_CAPACITY_WORKERS`` environment variable) exceeds one.
    """
    if not 0 < amin < amax:
        raise ValueError("need 0 < amin < amax")
    if count < 2:
        raise ValueError("count must be at least 2")
    amps = [float(a) for a in np.geomspace(amin, amax, count)]
    jobs = [(a, dark_current, config) for a in amps]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, jobs))
    else:
        rows = [_worker(j) for j in jobs]
    return sorted(rows, key=lambda r: r.amplitude)


def _cell(v) -> str:
    if v is None:
        return ""
    return repr(float(v)) if isinstance(v, float) else str(v)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow([_cell(v) for v in astuple(r)])
    return buf.getvalue()


def write_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def read_csv(path) -> list[SweepRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames!r}")
        out = []
        for row in reader:
            out.append(SweepRecord(
                amplitude=float(row["amplitude"]),
                dark_current=float(row["dark_current"]),
                capacity_nats=float(row["capacity_nats"]),
                capacity_bits=float(row["capacity_bits"]),
                support_size=int(row["support_size"]),
                kkt_gap=float(row["kkt_gap"]),
                lower_bound_N=int(row["lower_bound_N"]),
                upper_bound_N=int(row["upper_bound_N"]) if row["upper_bound_N"] else None,
                runtime_seconds=float(row["runtime_seconds"]),
                status=row["status"],
            ))
    return out


def support_nondecreasing(records) -> bool:
    sizes = [r.support_size for r in records]
    return all(b >= a for a, b in zip(sizes, sizes[1:]))


def transition_rows(records) -> list[SweepRecord]:
    """Last row before each increase of the support size."""
    return [r for r, nxt in zip(records, records[1:]) if nxt.support_size > r.support_size]


def trend_slope(records) -> float:
    """Least-squares slope of ``capacity_bits`` against ``log2(support_size)`` over transition rows."""
    rows = transition_rows(records)
    if len({r.support_size for r in rows}) < 2:
        return math.nan
    x = np.log2([r.support_size for r in rows])
    y = np.array([r.capacity_bits for r in rows])
    return float(np.polyfit(x, y, 1)[0])

"""Return-file loading and the rolling-window empirical pipeline.

The input format is a wide CSV: a date column followed by one column per
ticker, ISO-8601 dates, decimal per-period returns. The rolling analysis
slides a window of ``n = round(p / c)`` observations one period at a time,
re-estimates everything from scratch inside each window and records the
estimated shrinkage intensity, its confidence interval against the target
portfolio, the resulting test decision and the diagnostic frontier
statistics.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from joblib import Parallel, delayed

from .errors import (
    HDPortfolioError,
    InsufficientAssets,
    MissingDataError,
    ParseError,
)
from .hdtest import normal_quantile
from .portfolio import PortfolioWeights, estimated_stats
from .shrinkage import OmegaVariant, estimated_intensity, omega_alpha, sensitivity_vectors
from .statcore import sample_moments

logger = logging.getLogger(__name__)

__all__ = [
    "ReturnDataset",
    "WindowRecord",
    "RollingResult",
    "load_returns",
    "select_universe",
    "rolling_analysis",
    "write_returns_csv",
    "dataset_from_panel",
]

SCHEMA_VERSION = "1"

ROLLING_COLUMNS = ("window_end", "alpha_hat", "ci_lo", "ci_hi", "reject",
                   "r_gmv_hat", "r_b_hat", "v_c_hat", "v_b_hat")


@dataclass(frozen=True)
class ReturnDataset:
    """Per-period returns for a universe of tickers over ordered dates."""

    tickers: tuple[str, ...]
    dates: tuple[str, ...]
    returns: np.ndarray  # T x p_total
    excluded_tickers: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        returns = np.asarray(self.returns, dtype=np.float64)
        t, p = returns.shape if returns.ndim == 2 else (0, 0)
        if returns.ndim != 2 or t < 1 or p < 1:
            raise ValueError("returns must be a T x p matrix with at least one cell")
        if len(self.tickers) != p:
            raise ValueError("ticker count does not match the return columns")
        if len(set(self.tickers)) != p:
            raise ValueError("tickers must be unique")
        if len(self.dates) != t:
            raise ValueError("date count does not match the return rows")
        parsed = [dt.date.fromisoformat(d) for d in self.dates]
        if any(b <= a for a, b in zip(parsed, parsed[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "returns", returns)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "dates", tuple(self.dates))

    @property
    def t_periods(self) -> int:
        return self.returns.shape[0]

    @property
    def p_total(self) -> int:
        return self.returns.shape[1]


def load_returns(path, fmt: str = "csv-wide", allow_missing: bool = False) -> ReturnDataset:
    """Parse a wide returns CSV into a dataset.

    Empty cells are treated as missing; unless ``allow_missing`` is set any
    missing cell aborts the load with a report of the offending locations.
    Returns are taken as given, with no price-to-return conversion.
    """
    if fmt != "csv-wide":
        raise ValueError(f"unsupported format {fmt!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        if len(header) < 2:
            raise ParseError(f"{path}: header needs a date column and at least one ticker")
        tickers = [name.strip() for name in header[1:]]
        dates: list[str] = []
        rows: list[list[float]] = []
        missing: list[tuple[int, str]] = []
        prev: dt.date | None = None
        for i, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {i}: expected {len(header)} cells, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise ParseError(f"{path}: row {i}, column {header[0]}: bad date "
                                 f"{row[0]!r}") from exc
            if prev is not None and date <= prev:
                raise ParseError(f"{path}: row {i}: dates must be strictly increasing "
                                 f"({date.isoformat()} after {prev.isoformat()})")
            prev = date
            values = []
            for ticker, cell in zip(tickers, row[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() == "nan":
                    missing.append((i, ticker))
                    values.append(math.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError as exc:
                    raise ParseError(f"{path}: row {i}, column {ticker}: bad value "
                                     f"{cell!r}") from exc
            dates.append(date.isoformat())
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    if missing and not allow_missing:
        preview = ", ".join(f"(row {r}, {t})" for r, t in missing[:8])
        raise MissingDataError(
            f"{path}: {len(missing)} missing cell(s): {preview}", cells=missing)
    return ReturnDataset(tickers=tuple(tickers), dates=tuple(dates),
                         returns=np.array(rows, dtype=np.float64))


def select_universe(dataset: ReturnDataset, p: int, rule: str = "alphabetic") -> ReturnDataset:
    """Keep the first ``p`` complete tickers in alphabetic order.

    Columns containing missing values are excluded first and reported on the
    returned dataset.
    """
    if rule != "alphabetic":
        raise ValueError(f"unsupported selection rule {rule!r}")
    complete = [t for j, t in enumerate(dataset.tickers)
                if np.isfinite(dataset.returns[:, j]).all()]
    excluded = tuple(t for t in dataset.tickers if t not in complete)
    ordered = sorted(complete)
    if p > len(ordered):
        raise InsufficientAssets(
            f"requested {p} assets but only {len(ordered)} complete columns exist")
    chosen = ordered[:p]
    idx = [dataset.tickers.index(t) for t in chosen]
    if excluded:
        logger.info("excluded %d incomplete tickers: %s", len(excluded),
                    ", ".join(excluded[:10]))
    return ReturnDataset(tickers=tuple(chosen), dates=dataset.dates,
                         returns=dataset.returns[:, idx], excluded_tickers=excluded)


@dataclass(frozen=True)
class WindowRecord:
    window_end: str
    alpha_hat: float
    ci_lo: float
    ci_hi: float
    reject: bool
    r_gmv_hat: float
    r_b_hat: float
    v_c_hat: float
    v_b_hat: float
    valid: bool = True
    error: str | None = None


@dataclass
class RollingResult:
    """Per-window shrinkage intensities, intervals, decisions and diagnostics."""

    records: list[WindowRecord]
    p: int
    n: int
    c: float
    gamma: float
    level: float
    target: str
    schema_version: str = SCHEMA_VERSION
    excluded_tickers: tuple[str, ...] = ()

    @property
    def valid_count(self) -> int:
        return sum(1 for r in self.records if r.valid)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "p": self.p, "n": self.n, "c": self.c, "gamma": self.gamma,
            "level": self.level, "target": self.target,
            "excluded_tickers": list(self.excluded_tickers),
            "records": [asdict(r) for r in self.records],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        def cell(value) -> str:
            if isinstance(value, bool):
                return str(int(value))
            if isinstance(value, float):
                return format(value, ".17g")
            return str(value)

        lines = ["schema_version," + ",".join(ROLLING_COLUMNS)]
        for rec in self.records:
            row = [self.schema_version] + [cell(getattr(rec, col)) for col in ROLLING_COLUMNS]
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def _window_record(block: np.ndarray, end_date: str, target: PortfolioWeights,
                   gamma: float, z: float) -> WindowRecord:
    """Evaluate one window; failures are recorded in place, never raised."""
    try:
        moments = sample_moments(block.T)
        est = estimated_stats(moments, target)
        c_n = moments.c_n
        decomp = estimated_intensity(est, gamma, c_n)
        sens = sensitivity_vectors(decomp, gamma, c_n)
        om = omega_alpha(est, c_n, OmegaVariant.TILDE, gamma=gamma)
        quad = float(sens.d0 @ om.omega @ sens.d0)
        if quad <= 0.0:
            raise HDPortfolioError(f"null variance quadratic form is {quad!r}")
        half = z * math.sqrt(quad) / (math.sqrt(moments.n) * abs(decomp.b_den))
        alpha = decomp.alpha
        lo, hi = alpha - half, alpha + half
        return WindowRecord(
            window_end=end_date, alpha_hat=alpha, ci_lo=lo, ci_hi=hi,
            reject=not (lo <= 0.0 <= hi),
            r_gmv_hat=est.r_gmv_hat, r_b_hat=est.r_b_hat,
            v_c_hat=est.v_c_hat, v_b_hat=est.v_b_hat)
    except HDPortfolioError as exc:
        nan = math.nan
        return WindowRecord(window_end=end_date, alpha_hat=nan, ci_lo=nan, ci_hi=nan,
                            reject=False, r_gmv_hat=nan, r_b_hat=nan, v_c_hat=nan,
                            v_b_hat=nan, valid=False, error=str(exc))


def rolling_analysis(dataset: ReturnDataset, p: int, c: float, gamma: float,
                     target: str | np.ndarray = "equally_weighted",
                     level: float = 0.95, workers: int = 1) -> RollingResult:
    """Rolling shrinkage-intensity analysis over windows of n = round(p/c).

    Each window is recomputed from scratch (no incremental updates), the
    decision flag equals the interval-excludes-zero test exactly, and windows
    failing numerically are kept in the output marked invalid.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"coverage level must lie in (0, 1), got {level!r}")
    if not 0.0 < c < 1.0:
        raise ValueError(f"concentration ratio must lie in (0, 1), got {c!r}")
    data = select_universe(dataset, p)
    n = round(p / c)
    logger.info("window length n=%d from p=%d, c=%g (nearest rounding)", n, p, c)
    if n <= p:
        raise ValueError(f"window length n={n} must exceed p={p}; lower c")
    t_total = data.t_periods
    if t_total < n:
        raise ValueError(f"need at least n={n} observations, got T={t_total}")
    if isinstance(target, str):
        if target != "equally_weighted":
            raise ValueError(f"unknown target {target!r}")
        tgt = PortfolioWeights.equally_weighted(p)
        target_desc = "equally_weighted"
    else:
        tgt = PortfolioWeights(np.asarray(target, dtype=np.float64))
        if tgt.p != p:
            raise ValueError("custom target length does not match p")
        target_desc = "custom"
    if not np.isfinite(data.returns).all():
        bad = [(int(i), data.tickers[j]) for i, j in zip(*np.where(~np.isfinite(data.returns)))]
        raise MissingDataError(f"selected block has {len(bad)} missing cells", cells=bad)

    z = normal_quantile(1.0 - (1.0 - level) / 2.0)
    ends = range(n - 1, t_total)

    def one(end: int) -> WindowRecord:
        block = data.returns[end - n + 1:end + 1, :]
        return _window_record(block, data.dates[end], tgt, gamma, z)

    if workers > 1:
        records = Parallel(n_jobs=workers)(delayed(one)(end) for end in ends)
    else:
        records = [one(end) for end in ends]
    return RollingResult(records=list(records), p=p, n=n, c=c, gamma=gamma,
                         level=level, target=target_desc,
                         excluded_tickers=data.excluded_tickers)


def dataset_from_panel(panel: np.ndarray, tickers: list[str] | None = None,
                       start: str = "2000-01-03") -> ReturnDataset:
    """Wrap a T x p return matrix with synthetic tickers and business dates."""
    panel = np.asarray(panel, dtype=np.float64)
    t, p = panel.shape
    if tickers is None:
        width = max(3, len(str(p - 1)))
        tickers = [f"A{i:0{width}d}" for i in range(p)]
    day = dt.date.fromisoformat(start)
    dates = []
    while len(dates) < t:
        if day.weekday() < 5:
            dates.append(day.isoformat())
        day += dt.timedelta(days=1)
    return ReturnDataset(tickers=tuple(tickers), dates=tuple(dates), returns=panel)


def write_returns_csv(dataset: ReturnDataset, path) -> None:
    """Write a dataset back to the wide CSV format with full float precision."""
    lines = ["date," + ",".join(dataset.tickers)]
    for i, date in enumerate(dataset.dates):
        cells = (format(x, ".17g") for x in dataset.returns[i])
        lines.append(date + "," + ",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

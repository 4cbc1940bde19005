"""Drive-cycle telemetry ingestion and feature engineering.

Pipeline: CSV telemetry -> Coulomb-counted SOC ground truth -> 4-feature
design matrix (instantaneous voltage plus moving-averaged voltage, current
and temperature) -> z-score normalization fit on training rows only.

Sign convention: positive current = discharge, so integrating current
lowers SOC. Datasets using the opposite convention are flipped at
ingestion with ``invert_current=True``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DataError, IngestionError, InputError

CSV_HEADER = ["time_s", "voltage_v", "current_a", "temperature_c"]
CAPACITY_COLUMN = "capacity_ah"

VOLTAGE_BOUNDS = (0.0, 6.0)
TEMPERATURE_BOUNDS = (-40.0, 80.0)

DEFAULT_WINDOW = 400
FEATURE_NAMES = ("v", "v_avg", "i_avg", "t_avg")


@dataclass(frozen=True)
class DriveCycleRecord:
    """One telemetry sample."""

    time_s: float
    voltage_v: float
    current_a: float
    temperature_c: float


@dataclass
class DriveCycle:
    """An ingested drive cycle: time-ordered records plus file metadata."""

    name: str
    records: list[DriveCycleRecord]
    capacity_ah: float | None = None  # from the optional capacity_ah column


@dataclass
class SocSeries:
    """Coulomb-counted SOC aligned with the records it came from."""

    soc_percent: np.ndarray
    soc0_percent: float
    capacity_ah: float
    clamp_count: int = 0


class FeatureRow(NamedTuple):
    """One training row: x1=V, x2=avg V, x3=avg I, x4=avg T, target=SOC %."""

    x1: float
    x2: float
    x3: float
    x4: float
    target: float


@dataclass
class DesignMatrix:
    """Feature matrix (n, 4) with aligned SOC targets (n,)."""

    features: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]

    def row(self, i: int) -> FeatureRow:
        return FeatureRow(*self.features[i], self.targets[i])

    def rows(self) -> Iterator[FeatureRow]:
        for i in range(len(self)):
            yield self.row(i)

    def subset(self, indices) -> "DesignMatrix":
        idx = np.asarray(indices, dtype=np.intp)
        return DesignMatrix(self.features[idx].copy(), self.targets[idx].copy())


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature population mean and standard deviation."""

    means: np.ndarray
    stds: np.ndarray


def ingest_csv(path: str | Path, invert_current: bool = False) -> DriveCycle:
    """Parse a telemetry CSV into a time-sorted DriveCycle.

    Required header: time_s,voltage_v,current_a,temperature_c. An optional
    capacity_ah column overrides the configured nominal capacity. Rows out
    of time order are sorted; exact duplicate rows are dropped; rows
    violating sanity bounds or duplicate timestamps with conflicting values
    are rejected with their line numbers.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"data file not found: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[: len(CSV_HEADER)] != CSV_HEADER:
            raise IngestionError(
                f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        capacity_col = None
        if CAPACITY_COLUMN in header:
            capacity_col = header.index(CAPACITY_COLUMN)

        rows: list[tuple[int, DriveCycleRecord]] = []
        capacity_ah = None
        bad_lines: list[str] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw or (len(raw) == 1 and not raw[0].strip()):
                continue
            if len(raw) < len(CSV_HEADER):
                bad_lines.append(f"line {line_no}: expected {len(header)} fields")
                continue
            try:
                t, v, i, temp = (float(raw[k]) for k in range(4))
            except ValueError:
                bad_lines.append(f"line {line_no}: non-numeric field")
                continue
            if not all(np.isfinite([t, v, i, temp])):
                bad_lines.append(f"line {line_no}: non-finite value")
                continue
            if not VOLTAGE_BOUNDS[0] < v < VOLTAGE_BOUNDS[1]:
                bad_lines.append(f"line {line_no}: voltage {v} outside (0, 6) V")
                continue
            if not TEMPERATURE_BOUNDS[0] < temp < TEMPERATURE_BOUNDS[1]:
                bad_lines.append(
                    f"line {line_no}: temperature {temp} outside (-40, 80) C"
                )
                continue
            if capacity_col is not None and len(raw) > capacity_col:
                cell = raw[capacity_col].strip()
                if cell:
                    try:
                        capacity_ah = float(cell)
                    except ValueError:
                        bad_lines.append(f"line {line_no}: bad capacity_ah {cell!r}")
                        continue
            if invert_current:
                i = -i
            rows.append((line_no, DriveCycleRecord(t, v, i, temp)))

    if bad_lines:
        raise IngestionError(f"{path}: rejected rows: " + "; ".join(bad_lines))
    if not rows:
        raise IngestionError(f"{path}: no data rows")

    rows.sort(key=lambda lr: lr[1].time_s)

    deduped: list[tuple[int, DriveCycleRecord]] = []
    dup_conflicts: list[str] = []
    for line_no, rec in rows:
        if deduped and rec.time_s == deduped[-1][1].time_s:
            if rec == deduped[-1][1]:
                continue  # exact duplicate row
            dup_conflicts.append(
                f"lines {deduped[-1][0]} and {line_no} share time {rec.time_s}"
            )
            continue
        deduped.append((line_no, rec))
    if dup_conflicts:
        raise IngestionError(
            f"{path}: duplicate timestamps with conflicting values: "
            + "; ".join(dup_conflicts)
        )

    return DriveCycle(
        name=path.stem,
        records=[rec for _, rec in deduped],
        capacity_ah=capacity_ah,
    )


def coulomb_count(
    records: list[DriveCycleRecord], soc0_percent: float, capacity_ah: float
) -> SocSeries:
    """SOC(t) = SOC_0 - 100 * (integral of I dt, in Ah) / capacity.

    Trapezoidal integration over possibly non-uniform timestamps; exact for
    piecewise-linear current. Results are clamped to [0, 100] and the clamp
    count reported.
    """
    if capacity_ah <= 0:
        raise InputError(f"capacity must be > 0 Ah, got {capacity_ah}")
    if not 0.0 <= soc0_percent <= 100.0:
        raise InputError(f"initial SOC must be in [0, 100], got {soc0_percent}")
    if len(records) < 2:
        raise InputError("coulomb counting needs at least 2 records")

    t = np.array([r.time_s for r in records])
    i = np.array([r.current_a for r in records])
    dt_h = np.diff(t) / 3600.0
    discharged_ah = np.concatenate(
        ([0.0], np.cumsum(0.5 * (i[:-1] + i[1:]) * dt_h))
    )
    soc = soc0_percent - 100.0 * discharged_ah / capacity_ah
    clamp_count = int(np.count_nonzero((soc < 0.0) | (soc > 100.0)))
    return SocSeries(
        soc_percent=np.clip(soc, 0.0, 100.0),
        soc0_percent=soc0_percent,
        capacity_ah=capacity_ah,
        clamp_count=clamp_count,
    )


def moving_average(series: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Trailing mean over ``window`` samples including the current one.

    During warm-up (i < window-1) the mean runs over the available prefix,
    so output length always equals input length.
    """
    if window < 1:
        raise InputError(f"window must be >= 1, got {window}")
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise InputError("series must be non-empty")
    if window == 1:
        return x.copy()
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    start = np.maximum(idx - window, 0)
    return (csum[idx] - csum[start]) / (idx - start)


def build_design_matrix(
    records: list[DriveCycleRecord], soc: SocSeries, window: int = DEFAULT_WINDOW
) -> DesignMatrix:
    """Rows of (V, avg V, avg I, avg T) with the Coulomb-counted SOC target."""
    if len(records) != soc.soc_percent.shape[0]:
        raise InputError(
            f"{len(records)} records but {soc.soc_percent.shape[0]} SOC values"
        )
    v = np.array([r.voltage_v for r in records])
    i = np.array([r.current_a for r in records])
    temp = np.array([r.temperature_c for r in records])
    features = np.column_stack(
        (
            v,
            moving_average(v, window),
            moving_average(i, window),
            moving_average(temp, window),
        )
    )
    return DesignMatrix(features=features, targets=soc.soc_percent.copy())


def fit_normalization(dm: DesignMatrix, min_std: float = 1e-12) -> NormalizationStats:
    """Per-feature population mean/std over the given (training) rows.

    Targets are never normalized. A feature with std <= min_std is
    rejected by name.
    """
    if len(dm) < 2:
        raise InputError("normalization needs at least 2 rows")
    means = dm.features.mean(axis=0)
    stds = dm.features.std(axis=0)  # population (divide-by-N)
    degenerate = [
        FEATURE_NAMES[j] for j in range(len(FEATURE_NAMES)) if stds[j] <= min_std
    ]
    if degenerate:
        raise DataError(f"degenerate feature(s) with ~zero variance: {degenerate}")
    return NormalizationStats(means=means, stds=stds)


def apply_normalization(dm: DesignMatrix, stats: NormalizationStats) -> DesignMatrix:
    if dm.features.shape[1] != stats.means.shape[0]:
        raise InputError(
            f"{dm.features.shape[1]} features but stats cover {stats.means.shape[0]}"
        )
    return DesignMatrix(
        features=(dm.features - stats.means) / stats.stds,
        targets=dm.targets.copy(),
    )


def write_design_matrix_csv(dm: DesignMatrix, path: str | Path) -> None:
    """Export as ``x1,x2,x3,x4,soc`` with full float precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x1", "x2", "x3", "x4", "soc"])
        for i in range(len(dm)):
            writer.writerow(
                [repr(float(x)) for x in dm.features[i]]
                + [repr(float(dm.targets[i]))]
            )

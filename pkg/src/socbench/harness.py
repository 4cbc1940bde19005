"""Training loop, K-fold cross-validation, and the optimizer comparison.

The comparison experiment mirrors the evaluation protocol end to end:
chronological 80/20 train/test split per cycle, K-fold cross-validation on
the training portion (normalization re-fit per fold to avoid leakage),
then a final fit on the full training portion and metrics on the held-out
test rows.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .data import (
    DesignMatrix,
    apply_normalization,
    build_design_matrix,
    coulomb_count,
    fit_normalization,
    ingest_csv,
)
from .errors import InputError, SocBenchError, TrainingDivergedError
from .network import (
    DEFAULT_HIDDEN,
    LayerSpec,
    NetworkParameters,
    backward,
    forward,
    init_network,
    loss_mae,
    loss_mse,
    mlp_specs,
)
from .optimizers import Algorithm, Hyperparameters, OptimizerState, optimizer_step

RESULT_COLUMNS = ["cycle", "optimizer", "mae", "mse", "rmse", "seconds", "seed"]
LOG_COLUMNS = ["epoch", "train_loss", "val_mae", "val_mse"]


class FoldMode(Enum):
    SHUFFLED = "shuffled"
    CONTIGUOUS = "contiguous"


@dataclass
class FoldSplit:
    """Disjoint validation folds covering every row; train = the rest."""

    k: int
    assignments: list[tuple[np.ndarray, np.ndarray]]  # (train_idx, val_idx) per fold


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_mae: float  # nan when no validation rows
    val_mse: float


@dataclass
class TrainingLog:
    entries: list[EpochStats]
    best_epoch: int  # lowest validation MAE; lowest train loss if no val


@dataclass
class ExperimentResult:
    cycle: str
    optimizer: Algorithm
    mae: float
    mse: float
    rmse: float
    seconds: float
    seed: int


@dataclass
class ComparisonReport:
    results: list[ExperimentResult]
    failures: list[tuple[str, str]]  # (cycle name, reason)
    logs: dict[tuple[str, str, str], TrainingLog]  # (cycle, optimizer, run) -> log


def make_folds(
    n_rows: int, k: int = 4, seed: int = 0, mode: FoldMode = FoldMode.SHUFFLED
) -> FoldSplit:
    """Partition row indices into k validation folds of near-equal size.

    Shuffled mode permutes indices with a seeded generator first;
    contiguous mode keeps time order.
    """
    if k < 2:
        raise InputError(f"need k >= 2 folds, got {k}")
    if n_rows < k:
        raise InputError(f"cannot split {n_rows} rows into {k} folds")
    indices = np.arange(n_rows)
    if mode is FoldMode.SHUFFLED:
        indices = np.random.default_rng(seed).permutation(n_rows)
    blocks = np.array_split(indices, k)
    assignments = []
    for fold, val_idx in enumerate(blocks):
        train_idx = np.concatenate([b for j, b in enumerate(blocks) if j != fold])
        assignments.append((train_idx, val_idx))
    return FoldSplit(k=k, assignments=assignments)


def train(
    layer_specs: list[LayerSpec],
    train_dm: DesignMatrix,
    h: Hyperparameters,
    algorithm: Algorithm,
    val_dm: DesignMatrix | None = None,
) -> tuple[NetworkParameters, TrainingLog]:
    """Mini-batch training on already-normalized rows.

    Each epoch visits a fresh seeded shuffle of the rows in batches of
    h.batch_size (last batch may be short), one optimizer step per batch.
    Per-epoch stats are measured after the epoch: MSE over the full
    training set, MAE/MSE over the validation set when one is given.
    """
    if len(train_dm) == 0:
        raise InputError("training set is empty")
    params = init_network(layer_specs, h.seed)
    state = OptimizerState.initial(algorithm, params)
    shuffle_rng = np.random.default_rng([h.seed, 0x5F])

    x, y = train_dm.features, train_dm.targets
    n = len(train_dm)
    entries: list[EpochStats] = []
    for epoch in range(1, h.epochs + 1):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, h.batch_size):
            batch = order[start : start + h.batch_size]
            predictions, cache = forward(params, x[batch])
            with np.errstate(over="ignore"):  # overflow IS the divergence signal
                batch_loss = np.mean((predictions - y[batch]) ** 2)
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(epoch, start // h.batch_size)
            grads = backward(params, cache, y[batch])
            optimizer_step(params, grads, h, state)

        train_preds, _ = forward(params, x)
        train_loss = loss_mse(train_preds, y)
        if not np.isfinite(train_loss):
            raise TrainingDivergedError(epoch, -1)
        if val_dm is not None:
            val_preds, _ = forward(params, val_dm.features)
            val_mae = loss_mae(val_preds, val_dm.targets)
            val_mse = loss_mse(val_preds, val_dm.targets)
        else:
            val_mae = val_mse = float("nan")
        entries.append(EpochStats(epoch, train_loss, val_mae, val_mse))

    if val_dm is not None:
        best = min(range(len(entries)), key=lambda i: entries[i].val_mae)
    else:
        best = min(range(len(entries)), key=lambda i: entries[i].train_loss)
    return params, TrainingLog(entries=entries, best_epoch=entries[best].epoch)


@dataclass
class CrossValidationResult:
    fold_mae: list[float]
    fold_mse: list[float]
    mean_mae: float
    mean_mse: float
    logs: list[TrainingLog]


def cross_validate(
    layer_specs: list[LayerSpec],
    raw_dm: DesignMatrix,
    h: Hyperparameters,
    algorithm: Algorithm,
    folds: FoldSplit,
) -> CrossValidationResult:
    """One fresh model per fold on unnormalized rows.

    Normalization is re-fit on each fold's training partition, so no
    validation row ever influences the statistics it is scored under.
    """
    fold_mae, fold_mse, logs = [], [], []
    for fold, (train_idx, val_idx) in enumerate(folds.assignments):
        if train_idx.max(initial=-1) >= len(raw_dm) or val_idx.max(initial=-1) >= len(
            raw_dm
        ):
            raise InputError(f"fold {fold} indexes beyond the {len(raw_dm)} rows")
        train_part = raw_dm.subset(train_idx)
        val_part = raw_dm.subset(val_idx)
        stats = fit_normalization(train_part)
        fold_h = replace(h, seed=h.seed + fold)
        try:
            params, log = train(
                layer_specs,
                apply_normalization(train_part, stats),
                fold_h,
                algorithm,
                val_dm=apply_normalization(val_part, stats),
            )
        except SocBenchError as exc:
            exc.args = (f"fold {fold}: {exc}",)
            raise
        preds, _ = forward(params, apply_normalization(val_part, stats).features)
        fold_mae.append(loss_mae(preds, val_part.targets))
        fold_mse.append(loss_mse(preds, val_part.targets))
        logs.append(log)
    return CrossValidationResult(
        fold_mae=fold_mae,
        fold_mse=fold_mse,
        mean_mae=float(np.mean(fold_mae)),
        mean_mse=float(np.mean(fold_mse)),
        logs=logs,
    )


def chronological_split(dm: DesignMatrix, train_fraction: float = 0.8):
    """First train_fraction of rows for training, the rest held out."""
    n_train = int(round(len(dm) * train_fraction))
    n_train = min(max(n_train, 1), len(dm) - 1)
    return dm.subset(np.arange(n_train)), dm.subset(np.arange(n_train, len(dm)))


def prepare_cycle(
    path: str | Path,
    soc0_percent: float = 100.0,
    capacity_ah: float = 2.9,
    window: int = 400,
    invert_current: bool = False,
) -> tuple[str, DesignMatrix]:
    """Ingest one cycle CSV and build its (unnormalized) design matrix."""
    cycle = ingest_csv(path, invert_current=invert_current)
    capacity = cycle.capacity_ah if cycle.capacity_ah is not None else capacity_ah
    soc = coulomb_count(cycle.records, soc0_percent, capacity)
    return cycle.name, build_design_matrix(cycle.records, soc, window)


def run_single_experiment(
    cycle_name: str,
    raw_dm: DesignMatrix,
    layer_specs: list[LayerSpec],
    h: Hyperparameters,
    algorithm: Algorithm,
    k: int = 4,
    fold_mode: FoldMode = FoldMode.SHUFFLED,
) -> tuple[ExperimentResult, dict[str, TrainingLog]]:
    """The full protocol for one (cycle, optimizer) pair."""
    started = time.perf_counter()
    train_raw, test_raw = chronological_split(raw_dm)

    logs: dict[str, TrainingLog] = {}
    folds = make_folds(len(train_raw), k=k, seed=h.seed, mode=fold_mode)
    cv = cross_validate(layer_specs, train_raw, h, algorithm, folds)
    for fold, log in enumerate(cv.logs):
        logs[f"fold{fold}"] = log

    stats = fit_normalization(train_raw)
    params, final_log = train(
        layer_specs, apply_normalization(train_raw, stats), h, algorithm
    )
    logs["final"] = final_log

    test_preds, _ = forward(params, apply_normalization(test_raw, stats).features)
    mae = loss_mae(test_preds, test_raw.targets)
    mse = loss_mse(test_preds, test_raw.targets)
    result = ExperimentResult(
        cycle=cycle_name,
        optimizer=algorithm,
        mae=mae,
        mse=mse,
        rmse=float(np.sqrt(mse)),
        seconds=time.perf_counter() - started,
        seed=h.seed,
    )
    return result, logs


def run_comparison(
    cycle_paths: list[str | Path],
    optimizers: list[Algorithm],
    h: Hyperparameters,
    k: int = 4,
    learning_rates: dict[Algorithm, float] | None = None,
    layer_specs: list[LayerSpec] | None = None,
    fold_mode: FoldMode = FoldMode.SHUFFLED,
    soc0_percent: float = 100.0,
    capacity_ah: float = 2.9,
    window: int = 400,
    invert_current: bool = False,
    jobs: int = 1,
) -> ComparisonReport:
    """Evaluate every optimizer on every cycle.

    A cycle that fails ingestion is skipped and recorded in the report;
    results come back sorted by (cycle, optimizer) regardless of
    scheduling, and are bit-identical for a fixed seed.
    """
    if not cycle_paths:
        raise InputError("need at least one cycle")
    if not optimizers:
        raise InputError("need at least one optimizer")
    if layer_specs is None:
        layer_specs = mlp_specs(4, DEFAULT_HIDDEN)

    cycles: list[tuple[str, DesignMatrix]] = []
    failures: list[tuple[str, str]] = []
    for path in cycle_paths:
        try:
            cycles.append(
                prepare_cycle(
                    path,
                    soc0_percent=soc0_percent,
                    capacity_ah=capacity_ah,
                    window=window,
                    invert_current=invert_current,
                )
            )
        except SocBenchError as exc:
            failures.append((Path(path).stem, str(exc)))

    def run_pair(pair):
        name, raw_dm, algorithm = pair
        eta = None if learning_rates is None else learning_rates.get(algorithm)
        pair_h = h if eta is None else replace(h, eta=eta)
        return run_single_experiment(
            name, raw_dm, layer_specs, pair_h, algorithm, k=k, fold_mode=fold_mode
        )

    pairs = [(name, dm, alg) for name, dm in cycles for alg in optimizers]
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_pair, pairs))
    else:
        outcomes = [run_pair(p) for p in pairs]

    results = []
    logs: dict[tuple[str, str, str], TrainingLog] = {}
    for (name, _, algorithm), (result, pair_logs) in zip(pairs, outcomes):
        results.append(result)
        for run, log in pair_logs.items():
            logs[(name, algorithm.value, run)] = log
    results.sort(key=lambda r: (r.cycle, r.optimizer.value))
    return ComparisonReport(results=results, failures=failures, logs=logs)


# --- output formats --------------------------------------------------------


def write_results_csv(
    results: list[ExperimentResult], path: str | Path, omit_timing: bool = False
) -> None:
    """``cycle,optimizer,mae,mse,rmse,seconds,seed``, full float precision.

    ``omit_timing`` zeroes the wall-time column so that re-runs with the
    same seed produce byte-identical files.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for r in results:
            seconds = 0.0 if omit_timing else r.seconds
            writer.writerow(
                [
                    r.cycle,
                    r.optimizer.value,
                    repr(r.mae),
                    repr(r.mse),
                    repr(r.rmse),
                    f"{seconds:.3f}",
                    r.seed,
                ]
            )


def write_training_log_csv(log: TrainingLog, path: str | Path) -> None:
    """``epoch,train_loss,val_mae,val_mse`` per completed epoch."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for e in log.entries:
            writer.writerow(
                [e.epoch, repr(e.train_loss), repr(e.val_mae), repr(e.val_mse)]
            )


def format_results_table(report: ComparisonReport) -> str:
    """Fixed-layout text table: one row per cycle, MAE/MSE per optimizer."""
    optimizers = sorted({r.optimizer for r in report.results}, key=lambda a: a.value)
    cycles = sorted({r.cycle for r in report.results})
    by_key = {(r.cycle, r.optimizer): r for r in report.results}

    name_width = max([len("Drive Cycle")] + [len(c) for c in cycles])
    col_width = 12
    header_cells = [f"{'Drive Cycle':<{name_width}}"]
    for alg in optimizers:
        header_cells.append(f"{alg.value + ' MAE':>{col_width}}")
        header_cells.append(f"{alg.value + ' MSE':>{col_width}}")
    lines = ["  ".join(header_cells)]
    lines.append("-" * len(lines[0]))
    for cycle in cycles:
        cells = [f"{cycle:<{name_width}}"]
        for alg in optimizers:
            r = by_key.get((cycle, alg))
            if r is None:
                cells.extend([f"{'-':>{col_width}}"] * 2)
            else:
                cells.append(f"{r.mae:>{col_width}.4f}")
                cells.append(f"{r.mse:>{col_width}.4f}")
        lines.append("  ".join(cells))
    for name, reason in report.failures:
        lines.append(f"[skipped] {name}: {reason}")
    return "\n".join(lines) + "\n"

"""Average ranks and the Nemenyi critical difference for multi-task comparisons."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

# studentized-range quantile / sqrt(2) at alpha=0.05 for twelve methods
Q_ALPHA_005_M12 = 3.268


@dataclass(frozen=True)
class ResultsTable:
    methods: list
    tasks: list
    accuracy: np.ndarray  # methods x tasks
    unit: str = "fraction"

    def __post_init__(self):
        acc = np.asarray(self.accuracy, dtype=float)
        if acc.shape != (len(self.methods), len(self.tasks)):
            raise ValueError(f"accuracy shape {acc.shape} does not match "
                             f"{len(self.methods)} methods x {len(self.tasks)} tasks")
        if not np.all(np.isfinite(acc)):
            raise ValueError("results table has missing or non-finite cells")
        object.__setattr__(self, "accuracy", acc)
        object.__setattr__(self, "methods", list(self.methods))
        object.__setattr__(self, "tasks", list(self.tasks))


def average_ranks(rt: ResultsTable) -> np.ndarray:
    """Rank 1 is the most accurate method on a task; ties share the mean position."""
    if len(rt.methods) < 2:
        raise ValueError("m >= 2 required")
    if len(rt.tasks) < 1:
        raise ValueError("results table has no tasks")
    ranks = np.column_stack([rankdata(-rt.accuracy[:, t], method="average") for t in range(len(rt.tasks))])
    return ranks.mean(axis=1)


def nemenyi_cd(q_alpha: float, m: int, num_tasks: int) -> float:
    if m < 2:
        raise ValueError("m >= 2 required")
    if num_tasks < 1:
        raise ValueError("num_tasks must be >= 1")
    if q_alpha <= 0:
        raise ValueError("q_alpha must be positive")
    return q_alpha * math.sqrt(m * (m + 1) / (6.0 * num_tasks))


def read_results_csv(path) -> ResultsTable:
    """Long-format CSV with columns ``method,task,accuracy``."""
    cells: dict = {}
    methods, tasks = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"method", "task", "accuracy"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"results CSV lacks columns {sorted(missing)}")
        for rowno, row in enumerate(reader, start=2):
            m, t = row["method"].strip(), row["task"].strip()
            try:
                acc = float(row["accuracy"])
            except (TypeError, ValueError):
                raise ValueError(f"row {rowno}: bad accuracy {row['accuracy']!r}") from None
            if (m, t) in cells:
                raise ValueError(f"row {rowno}: duplicate entry for method {m!r}, task {t!r}")
            cells[m, t] = acc
            if m not in methods:
                methods.append(m)
            if t not in tasks:
                tasks.append(t)
    if not cells:
        raise ValueError("results CSV has no rows")
    try:
        acc = np.array([[cells[m, t] for t in tasks] for m in methods])
    except KeyError as exc:
        raise ValueError(f"missing cell for method/task {exc.args[0]}") from None
    return ResultsTable(methods, tasks, acc)


def stats_report(rt: ResultsTable, q_alpha: float = Q_ALPHA_005_M12) -> dict:
    ranks = average_ranks(rt)
    return {
        "methods": rt.methods,
        "tasks": rt.tasks,
        "average_ranks": {m: float(r) for m, r in zip(rt.methods, ranks)},
        "q_alpha": q_alpha,
        "m": len(rt.methods),
        "num_tasks": len(rt.tasks),
        "cd": nemenyi_cd(q_alpha, len(rt.methods), len(rt.tasks)),
    }

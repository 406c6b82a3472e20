"""Finite-n convergence and normality experiments."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .oracles import max_ir_size, min_code_size, min_resolvability_size
from .rates import PROBLEMS, finite_n_rate, solve, tail_target
from .sources import Source, component_statistics
from .spectrum import exact_classes, gaussian_tail_prediction, spectrum_from_classes, tail_F_a

CSV_HEADER = ("n", "a_nats", "oracle_logM_nats", "predicted_Rn", "statistic",
              "theory_b", "gap", "case_label")
HEURISTIC_NOTE = ("# intrinsic sizes come from a greedy heuristic: they are lower bounds "
                  "on the optimum, not the optimum")
DEFAULT_GRID = (64, 256, 1024, 4096)


@dataclass(frozen=True)
class StudyRow:
    n: int
    a: float
    oracle_log_M: float
    predicted_R_n: float
    statistic: float
    theory_b: float
    gap: float
    case_label: str

    def as_csv(self) -> list:
        return [str(self.n)] + [_fmt(v) for v in (self.a, self.oracle_log_M, self.predicted_R_n,
                                                  self.statistic, self.theory_b, self.gap)] + [
            self.case_label]


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def default_workers() -> int:
    raw = os.environ.get("MIXEDRATES_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def oracle_size(classes, problem: str, budget: float, mode: str = "heuristic") -> int:
    if problem == "coding":
        return min_code_size(classes, budget)
    if problem == "resolvability":
        return min_resolvability_size(classes, budget)
    if problem == "intrinsic":
        return max_ir_size(classes, budget, mode)
    raise ValueError(f"unknown problem {problem!r}")


def _row(source, problem, budget, n, mode) -> StudyRow:
    solution = solve(source, problem, budget)
    classes = exact_classes(source, n)
    log_m = math.log(oracle_size(classes, problem, budget, mode))
    tail = tail_target(problem, budget)
    if 0.0 < tail < 1.0:
        predicted = finite_n_rate(source, n, tail, upper=problem != "intrinsic")
    else:
        predicted = math.nan
    root_n = math.sqrt(n)
    statistic = (log_m - n * solution.a) / root_n
    b = solution.b_as_float()
    gap = statistic - b if solution.finite else math.nan
    return StudyRow(n, solution.a, log_m, predicted, statistic, b, gap, solution.case_label)


def convergence_study(source: Source, problem: str, budget: float,
                      n_grid: Sequence[int] = DEFAULT_GRID, mode: str = "heuristic",
                      workers: int | None = None) -> list:
    """One :class:`StudyRow` per blocklength, in grid order.

    ``budget`` is ``delta`` for resolvability and intrinsic randomness and
    ``epsilon`` for coding.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}")
    grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_row, source, problem, budget, n, mode) for n in grid]
            return [f.result() for f in futures]
    return [_row(source, problem, budget, n, mode) for n in grid]


@dataclass(frozen=True)
class NormalityRow:
    n: int
    sup_distance: float
    worst_R: float


def r_grid(stats) -> np.ndarray:
    sigma = max(math.sqrt(s.varsigma) for _, s in stats)
    if sigma == 0.0:
        return np.array([0.0])
    return np.linspace(-6.0 * sigma, 6.0 * sigma, 1201)


def normality_study(source: Source, a: float, n_grid: Iterable[int] = DEFAULT_GRID,
                    grid: np.ndarray | None = None) -> list:
    """Sup distance between the exact upper tail and the (multi-peak) normal prediction.

    The sup runs over ``R`` in ``[-6 sigma_max, 6 sigma_max]`` in steps of
    ``sigma_max / 100`` unless ``grid`` is given.
    """
    stats = component_statistics(source)
    rs = r_grid(stats) if grid is None else np.asarray(grid, dtype=float)
    rows = []
    for n in n_grid:
        spec = spectrum_from_classes(exact_classes(source, n))
        diff = np.abs(tail_F_a(spec, n, a, rs) - gaussian_tail_prediction(stats, n, a, rs))
        k = int(np.argmax(diff))
        rows.append(NormalityRow(int(n), float(diff[k]), float(rs[k])))
    return rows


def emit_csv(rows: Iterable[StudyRow], path, comment: str | None = None) -> None:
    """Header plus one line per row; 17 significant digits throughout."""
    try:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(comment.rstrip("\n") + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(row.as_csv())
    except OSError as exc:
        raise OSError(f"cannot write study CSV to {path}: {exc}") from exc

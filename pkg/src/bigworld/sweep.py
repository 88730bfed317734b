"""Grid sweeps over policy width, depth, activation and seed."""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .loop import ExperimentConfig, final_window_mean, records_to_csv, run_experiment

SUMMARY_COLUMNS = ["width", "depth", "activation", "n_seeds", "n_failed", "mean_final", "per_seed"]


@dataclass(frozen=True)
class SweepGrid:
    widths: tuple = (64,)
    depths: tuple = (2,)
    activations: tuple = ("linear",)
    seeds: tuple = (0,)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepGrid":
        unknown = set(data) - {"widths", "depths", "activations", "seeds"}
        if unknown:
            raise ValueError(f"unknown grid keys {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in data.items()})

    def cells(self):
        return list(itertools.product(self.widths, self.depths, self.activations, self.seeds))


@dataclass
class CellResult:
    width: int
    depth: int
    activation: str
    seed: int
    final: float
    diverged: bool
    error: Optional[str]
    csv_text: str

    @property
    def failed(self) -> bool:
        return self.diverged or self.error is not None


def cell_config(base: ExperimentConfig, width, depth, activation, seed) -> ExperimentConfig:
    policy = replace(base.policy, width=width, depth=depth, activation=activation)
    return replace(base, policy=policy, seed=seed)


def run_cell(args) -> CellResult:
    base, (width, depth, activation, seed), fraction = args
    cfg = cell_config(base, width, depth, activation, seed)
    try:
        res = run_experiment(cfg)
    except Exception as exc:  # a broken cell must not stop the sweep
        return CellResult(width, depth, activation, seed, float("nan"), False, f"{type(exc).__name__}: {exc}", "")
    final = float("nan") if res.diverged else final_window_mean(res.records, fraction)
    return CellResult(width, depth, activation, seed, final, res.diverged, res.error, records_to_csv(res.records))


def run_sweep(base: ExperimentConfig, grid: SweepGrid, workers: int = 1, out_dir=None,
              final_fraction: float = 0.2) -> tuple[list, list]:
    """Run every grid cell; returns ``(cell results, summary rows)``.

    Results come back in grid order whatever the worker count, and every cell
    is an independent seeded run, so outputs do not depend on ``workers``.
    """
    jobs = [(base, cell, final_fraction) for cell in grid.cells()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, jobs))
    else:
        results = [run_cell(j) for j in jobs]
    summary = summarize(results)
    if out_dir is not None:
        write_sweep(out_dir, results, summary)
    return results, summary


def summarize(results: Sequence[CellResult]) -> list[dict]:
    groups = {}
    for r in results:
        groups.setdefault((r.width, r.depth, r.activation), []).append(r)
    rows = []
    for (w, dpt, act), rs in groups.items():
        finals = [r.final for r in rs if np.isfinite(r.final)]
        rows.append({
            "width": w,
            "depth": dpt,
            "activation": act,
            "n_seeds": len(rs),
            "n_failed": sum(1 for r in rs if not np.isfinite(r.final)),
            "mean_final": float(np.mean(finals)) if finals else float("nan"),
            "per_seed": ";".join(repr(float(r.final)) for r in rs),
        })
    return rows


def cell_name(r: CellResult) -> str:
    return f"w{r.width}_d{r.depth}_{r.activation}_s{r.seed}"


def write_sweep(out_dir, results, summary):
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    for r in results:
        (out / "cells" / f"{cell_name(r)}.csv").write_text(r.csv_text)
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in summary:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    with open(out / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["width", "depth", "activation", "seed", "final", "diverged", "error"])
        for r in results:
            writer.writerow([r.width, r.depth, r.activation, r.seed, repr(r.final), int(r.diverged), r.error or ""])

"""Scaling benchmark: line search cost per gradient step versus data size."""
from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from typing import NamedTuple

from .descent import TrainConfig, train
from .error_model import binary_breakpoints
from .synth import binary_unbalanced

BENCH_COLUMNS = ("n", "seed", "variant", "mean_events_per_step",
                 "gradient_steps", "elapsed_ns", "max_events_bound")


class BenchRow(NamedTuple):
    n: int
    seed: int
    variant: str
    mean_events_per_step: float
    gradient_steps: int
    elapsed_ns: int
    max_events_bound: int


def run_cell(n, seed, variant, p=10, imbalance=0.1, max_steps=1000,
             aum_tolerance=1e-3, record_time=True) -> BenchRow:
    X, y = binary_unbalanced(n, p, imbalance, seed=seed)
    model = binary_breakpoints(y)
    config = TrainConfig(variant=variant, aum_tolerance=aum_tolerance,
                         max_steps=max_steps, seed=seed, record_time=record_time)
    start = time.perf_counter_ns()
    _, log = train(X, model, config=config)
    elapsed = time.perf_counter_ns() - start if record_time else 0
    return BenchRow(n, seed, variant, log.mean_events(), log.n_steps, elapsed,
                    n * (n - 1) // 2)


def _cell(args):
    return run_cell(*args[0], **args[1])


def bench(sizes, seeds, variants, jobs=1, **kwargs) -> list[BenchRow]:
    """Run every ``(n, seed, variant)`` cell; rows sorted by n, seed, variant."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    cells = [((n, s, v), kwargs) for n in sizes for s in seeds for v in variants]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]
    return sorted(rows, key=lambda r: (r.n, r.seed, r.variant))


def write_bench(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in rows:
        writer.writerow([r.n, r.seed, r.variant, repr(r.mean_events_per_step),
                         r.gradient_steps, r.elapsed_ns, r.max_events_bound])

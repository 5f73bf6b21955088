"""Gamma grid search on the validation partition.

The grid is 0.00 to 1.00 in steps of 0.01 plus the integers 2 through 100:
exactly 200 strictly increasing values. Distances are gamma-independent, so
per-sample normalized distances and weights are computed once and the sweep
only redoes the cheap inject-and-rank step.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import DataError
from .ground import inject, rank
from .harness import DEFAULT_KS, Pipeline, aggregate


def gamma_grid():
    fine = [round(i / 100.0, 2) for i in range(101)]
    coarse = [float(g) for g in range(2, 101)]
    return fine + coarse


@dataclass
class SweepRow:
    gamma: float
    metrics: dict[str, float]  # metric name -> value, e.g. "ndcg@20"


def tune_gamma(samples, pipeline: Pipeline, metric="ndcg@20", ks=DEFAULT_KS,
               grid=None, threads=1):
    """Returns (best gamma, sweep table). Ties pick the smallest gamma."""
    if not samples:
        raise DataError("validation set is empty; cannot tune gamma")
    grid = gamma_grid() if grid is None else list(grid)

    def prepare(sample):
        if sample.target in sample.known_items:
            return None
        norm = pipeline.normalized_distances(sample)
        weights = pipeline.weights(sample)
        target = pipeline.catalog.index_of.get(sample.target)
        if target is None:
            raise DataError(f"sample target {sample.target!r} not in catalog")
        return norm, weights, pipeline.exclusions(sample), target

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            prepared = list(pool.map(prepare, samples))
    else:
        prepared = [prepare(s) for s in samples]

    def sweep_point(gamma):
        positions = []
        for entry in prepared:
            if entry is None:
                positions.append(None)
                continue
            norm, weights, exclusions, target = entry
            if weights is not None and gamma > 0:
                adjusted = inject(norm, weights, gamma)
            else:
                adjusted = norm
            positions.append(rank(adjusted, exclusions).position(target))
        report = aggregate(positions, ks)
        metrics = {f"hr@{k}": report.hr[k] for k in ks}
        metrics.update({f"ndcg@{k}": report.ndcg[k] for k in ks})
        return SweepRow(gamma=gamma, metrics=metrics)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            table = list(pool.map(sweep_point, grid))
    else:
        table = [sweep_point(g) for g in grid]

    best = max(table, key=lambda row: (row.metrics[metric], -row.gamma))
    return best.gamma, table


def write_sweep(path, table, ks=DEFAULT_KS):
    names = [f"hr@{k}" for k in ks] + [f"ndcg@{k}" for k in ks]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("gamma\t" + "\t".join(names) + "\n")
        for row in table:
            vals = "\t".join(f"{row.metrics[n]:.10g}" for n in names)
            fh.write(f"{row.gamma:.10g}\t{vals}\n")

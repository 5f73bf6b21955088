"""Per-item popularity factors and the decile interaction-share analysis.

C_i is each item's share of training interactions; P_i is its min-max
normalization over the catalog. When all counts are equal (including all-zero)
P is defined as 0 everywhere, which makes popularity injection a no-op.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .ingest import InteractionLog, ItemCatalog


@dataclass
class PopularityTable:
    counts: np.ndarray  # int, per canonical index
    factor: np.ndarray  # C_i
    normalized: np.ndarray  # P_i
    rejected: int = 0  # train interactions referencing unknown items


@dataclass
class DecileReport:
    groups: list[list[int]]  # 10 buckets of canonical indices, popularity desc
    share: list[float]
    small_catalog: bool = False


def minmax(values: np.ndarray) -> np.ndarray:
    """Min-max to [0,1]; all-equal input maps to all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def compute_popularity(train: InteractionLog, catalog: ItemCatalog) -> PopularityTable:
    if len(catalog) == 0:
        raise DataError("cannot compute popularity over an empty catalog")
    counts = np.zeros(len(catalog), dtype=np.int64)
    rejected = 0
    for rec in train.records:
        idx = catalog.index_of.get(rec.item_id)
        if idx is None:
            rejected += 1
        else:
            counts[idx] += 1
    total = counts.sum()
    if total > 0:
        factor = counts / total
    else:
        factor = np.zeros(len(catalog), dtype=np.float64)
    return PopularityTable(
        counts=counts, factor=factor, normalized=minmax(factor), rejected=rejected
    )


def decile_report(table: PopularityTable, num_buckets: int = 10) -> DecileReport:
    n = len(table.counts)
    order = np.lexsort((np.arange(n), -table.counts))  # count desc, index asc
    base, rem = divmod(n, num_buckets)
    sizes = [base + 1 if k < rem else base for k in range(num_buckets)]
    groups = []
    acc = 0
    for s in sizes:
        groups.append([int(i) for i in order[acc : acc + s]])
        acc += s
    total = table.counts.sum()
    if total > 0:
        share = [float(table.counts[g].sum() / total) for g in groups]
    else:
        share = [0.0] * num_buckets
    return DecileReport(groups=groups, share=share, small_catalog=n < num_buckets)

"""All-ranking evaluation: run generator -> embedder -> grounding over samples
and aggregate HR@K / NDCG@K, plus the Most-Pop baseline and the relative
improvement of a combined model over the better of its two parts.

Every item the user has not interacted with is a candidate; there is no
negative sampling. NDCG uses the single-relevant-item convention (IDCG = 1),
so per sample it is 1/log2(rank+1) when the target lands within K, else 0.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import collab as collab_mod
from .errors import DataError
from .ground import RankedList, inject, l2_distances, normalize_distances, rank
from .ingest import ItemCatalog, SequenceSample

DEFAULT_KS = (1, 3, 5, 10, 20)


@dataclass
class MetricsReport:
    hr: dict[int, float]
    ndcg: dict[int, float]
    n_samples: int
    skipped: int = 0
    fingerprint: dict[str, str] = field(default_factory=dict)

    @property
    def ks(self):
        return tuple(sorted(self.hr))

    def metric(self, name):
        """Look up 'hr@K' or 'ndcg@K'."""
        kind, _, k = name.partition("@")
        table = {"hr": self.hr, "ndcg": self.ndcg}.get(kind)
        if table is None or int(k) not in table:
            raise KeyError(name)
        return table[int(k)]


def hr_from_rank(position, k):
    return 1.0 if position <= k else 0.0


def ndcg_from_rank(position, k):
    return 1.0 / math.log2(position + 1) if position <= k else 0.0


def hr_at_k(ranked: RankedList, target, k):
    return hr_from_rank(ranked.position(target), k)


def ndcg_at_k(ranked: RankedList, target, k):
    return ndcg_from_rank(ranked.position(target), k)


class Pipeline:
    """Bundles generator, embedding provider, item matrix, and injection source."""

    def __init__(self, generator, provider, matrix, catalog: ItemCatalog,
                 injection="none", gamma=0.0, pop_table=None, scorer=None):
        if injection == "popularity" and pop_table is None:
            raise DataError("popularity injection needs a popularity table")
        if injection == "collaborative" and scorer is None:
            raise DataError("collaborative injection needs a co-occurrence scorer")
        self.generator = generator
        self.provider = provider
        self.matrix = matrix
        self.catalog = catalog
        self.injection = injection
        self.gamma = gamma
        self.pop_table = pop_table
        self.scorer = scorer

    def normalized_distances(self, sample: SequenceSample) -> np.ndarray:
        gen = self.generator.generate(sample)
        oracle = self.provider.embed(gen.text())
        return normalize_distances(l2_distances(self.matrix, oracle))

    def weights(self, sample: SequenceSample):
        if self.injection == "popularity":
            return self.pop_table.normalized
        if self.injection == "collaborative":
            raw = collab_mod.score(self.scorer, sample, self.catalog)
            return collab_mod.normalize_scores(raw)
        return None

    def exclusions(self, sample: SequenceSample):
        return frozenset(
            self.catalog.index_of[i]
            for i in sample.known_items
            if i in self.catalog.index_of
        )

    def rank_sample(self, sample: SequenceSample, gamma=None) -> RankedList:
        gamma = self.gamma if gamma is None else gamma
        norm = self.normalized_distances(sample)
        w = self.weights(sample)
        adjusted = inject(norm, w, gamma) if (w is not None and gamma > 0) else norm
        return rank(adjusted, self.exclusions(sample))


def _target_position(pipeline, sample):
    """1-based rank of the target, or None when the sample is skipped."""
    if sample.target in sample.known_items:
        return None  # repeat consumption: target would be its own exclusion
    idx = pipeline.catalog.index_of.get(sample.target)
    if idx is None:
        raise DataError(f"sample target {sample.target!r} not in catalog")
    ranked = pipeline.rank_sample(sample)
    return ranked.position(idx)


def evaluate(samples, pipeline: Pipeline, ks=DEFAULT_KS, threads=1,
             fingerprint=None, collect_positions=False):
    """Mean HR@K / NDCG@K over samples; order- and thread-count-independent."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            positions = list(pool.map(lambda s: _target_position(pipeline, s), samples))
    else:
        positions = [_target_position(pipeline, s) for s in samples]
    report = aggregate(positions, ks, fingerprint)
    if collect_positions:
        return report, positions
    return report


def aggregate(positions, ks=DEFAULT_KS, fingerprint=None) -> MetricsReport:
    kept = [p for p in positions if p is not None]
    skipped = len(positions) - len(kept)
    hr = {}
    ndcg = {}
    for k in ks:
        if kept:
            hr[k] = sum(hr_from_rank(p, k) for p in kept) / len(kept)
            ndcg[k] = sum(ndcg_from_rank(p, k) for p in kept) / len(kept)
        else:
            hr[k] = 0.0
            ndcg[k] = 0.0
    return MetricsReport(
        hr=hr, ndcg=ndcg, n_samples=len(kept), skipped=skipped,
        fingerprint=dict(fingerprint or {}),
    )


def most_pop_baseline(table, samples, catalog: ItemCatalog, ks=DEFAULT_KS,
                      fingerprint=None) -> MetricsReport:
    """Rank by global training popularity (count desc, index asc), minus exclusions."""
    n = len(catalog)
    order = np.lexsort((np.arange(n), -table.counts))
    pos_in_order = np.empty(n, dtype=np.int64)
    pos_in_order[order] = np.arange(n)
    positions = []
    for sample in samples:
        if sample.target in sample.known_items:
            positions.append(None)
            continue
        idx = catalog.index_of.get(sample.target)
        if idx is None:
            raise DataError(f"sample target {sample.target!r} not in catalog")
        excluded = [
            catalog.index_of[i]
            for i in sample.known_items
            if i in catalog.index_of
        ]
        before = sum(1 for e in excluded if pos_in_order[e] < pos_in_order[idx])
        positions.append(int(pos_in_order[idx]) + 1 - before)
    return aggregate(positions, ks, fingerprint)


def improve2lv(report_a: MetricsReport, report_b: MetricsReport,
               report_combined: MetricsReport):
    """(combined - max(a, b)) / max(a, b) per metric; None where max is 0."""
    if not (report_a.ks == report_b.ks == report_combined.ks):
        raise DataError("reports have mismatched K sets")
    out = {}
    for kind in ("hr", "ndcg"):
        for k in report_a.ks:
            a = getattr(report_a, kind)[k]
            b = getattr(report_b, kind)[k]
            c = getattr(report_combined, kind)[k]
            best = max(a, b)
            out[f"{kind}@{k}"] = None if best == 0 else (c - best) / best
    return out


def write_report(path, report: MetricsReport, as_json=False):
    if as_json:
        payload = {
            "fingerprint": report.fingerprint,
            "hr": {str(k): v for k, v in report.hr.items()},
            "ndcg": {str(k): v for k, v in report.ndcg.items()},
            "n_samples": report.n_samples,
            "skipped": report.skipped,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(report.fingerprint):
            fh.write(f"# fingerprint: {key}={report.fingerprint[key]}\n")
        for k in report.ks:
            fh.write(f"hr@{k}\t{report.hr[k]:.10g}\n")
        for k in report.ks:
            fh.write(f"ndcg@{k}\t{report.ndcg[k]:.10g}\n")
        fh.write(f"n_samples\t{report.n_samples}\n")
        fh.write(f"skipped\t{report.skipped}\n")


def read_report(path) -> MetricsReport:
    with open(path, encoding="utf-8") as fh:
        content = fh.read()
    if content.lstrip().startswith("{"):
        payload = json.loads(content)
        return MetricsReport(
            hr={int(k): v for k, v in payload["hr"].items()},
            ndcg={int(k): v for k, v in payload["ndcg"].items()},
            n_samples=payload["n_samples"],
            skipped=payload.get("skipped", 0),
            fingerprint=payload.get("fingerprint", {}),
        )
    hr = {}
    ndcg = {}
    fingerprint = {}
    n_samples = 0
    skipped = 0
    for line in content.splitlines():
        if line.startswith("# fingerprint: "):
            key, _, val = line[len("# fingerprint: "):].partition("=")
            fingerprint[key] = val
            continue
        if not line or line.startswith("#"):
            continue
        name, _, val = line.partition("\t")
        if name == "n_samples":
            n_samples = int(val)
        elif name == "skipped":
            skipped = int(val)
        elif name.startswith("hr@"):
            hr[int(name[3:])] = float(val)
        elif name.startswith("ndcg@"):
            ndcg[int(name[5:])] = float(val)
        else:
            raise DataError(f"unrecognized report line {line!r} in {path}")
    return MetricsReport(hr=hr, ndcg=ndcg, n_samples=n_samples, skipped=skipped,
                         fingerprint=fingerprint)

"""Command-line surface wiring the modules into the experiment flow:
split -> popularity -> embed -> generate -> ground -> eval -> tune-gamma.

Exit codes: 0 success, 1 usage error, 2 data error. All randomness flows
through explicit --seed flags; --threads (default from GROUNDREC_THREADS)
never changes output bytes.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import collab as collab_mod
from . import harness, manifest, tune
from .embed import (
    HashEmbedder,
    embed_catalog,
    load_embeddings,
    save_embeddings_bin,
    save_embeddings_tsv,
)
from .errors import DataError, UsageError
from .generate import (
    NGramGenerator,
    OracleEchoGenerator,
    PopTitleGenerator,
    train_ngram,
)
from .ground import BM25Index, bm25_rank, inject, l2_distances, normalize_distances, rank
from .ingest import (
    build_samples,
    parse_catalog,
    parse_interactions,
    read_samples,
    sample_eval,
    temporal_split,
    write_interactions,
    write_samples,
)
from .pop import PopularityTable, compute_popularity, decile_report

INJECT_MODES = {"none": "none", "pop": "popularity", "collab": "collaborative"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _default_threads():
    try:
        return max(1, int(os.environ.get("GROUNDREC_THREADS", "1")))
    except ValueError:
        return 1


def _read_popularity_tsv(path, catalog) -> PopularityTable:
    counts = np.zeros(len(catalog), dtype=np.int64)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"malformed popularity line in {path}")
            idx = catalog.index_of.get(parts[0])
            if idx is None:
                raise DataError(f"popularity item {parts[0]!r} not in catalog")
            counts[idx] = int(parts[1])
    total = counts.sum()
    factor = counts / total if total > 0 else np.zeros(len(catalog))
    from .pop import minmax

    return PopularityTable(counts=counts, factor=factor, normalized=minmax(factor))


def _make_generator(name, catalog, train_log, seed, ngram_order):
    if name == "oracle":
        return OracleEchoGenerator(catalog)
    if name == "pop":
        if train_log is None:
            raise UsageError("--generator pop requires --train")
        return PopTitleGenerator(catalog, compute_popularity(train_log, catalog))
    if name == "ngram":
        model = train_ngram(catalog.titles(), order=ngram_order, corpus_id="catalog")
        return NGramGenerator(catalog, model, seed=seed)
    raise UsageError(f"unknown generator {name!r}")


def _pipeline_from_args(args, catalog, samples_for_fit=None):
    train_log = parse_interactions(args.train) if getattr(args, "train", None) else None
    if getattr(args, "emb", None):
        mat = load_embeddings(args.emb, catalog)
        provider = HashEmbedder(dim=mat.dim, seed=args.seed)
    else:
        provider = HashEmbedder(dim=args.dim, seed=args.seed)
        mat = embed_catalog(catalog, provider, normalize=args.normalize)
    generator = _make_generator(args.generator, catalog, train_log, args.seed,
                                getattr(args, "ngram_order", 1))
    injection = INJECT_MODES[args.inject]
    pop_table = None
    scorer = None
    if injection == "popularity":
        if train_log is None:
            raise UsageError("--inject pop requires --train")
        pop_table = compute_popularity(train_log, catalog)
    elif injection == "collaborative":
        if train_log is None:
            raise UsageError("--inject collab requires --train")
        scorer = collab_mod.fit_cooccurrence(train_log, catalog, alpha=args.alpha)
    return harness.Pipeline(
        generator, provider, mat, catalog,
        injection=injection, gamma=args.gamma,
        pop_table=pop_table, scorer=scorer,
    ), train_log


def _fingerprint(args, inputs):
    fp = {
        "generator": args.generator,
        "inject": args.inject,
        "gamma": f"{args.gamma:.10g}",
        "seed": str(args.seed),
        "strategy": "l2",
        "sampler": "python-random-mt19937",
    }
    for name, path in inputs.items():
        fp[f"sha256.{name}"] = manifest.sha256_file(path)
    return fp


def cmd_split(args):
    log = parse_interactions(args.interactions)
    split = temporal_split(log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_interactions(out / "train.tsv", split.train)
    write_interactions(out / "valid.tsv", split.valid)
    write_interactions(out / "test.tsv", split.test)
    for part in ("train", "valid", "test"):
        write_samples(out / f"samples_{part}.tsv", build_samples(split, part))
    with open(out / "split.meta", "w", encoding="utf-8") as fh:
        fh.write(f"n_total={len(log)}\n")
        fh.write(f"n_train={len(split.train)}\n")
        fh.write(f"n_valid={len(split.valid)}\n")
        fh.write(f"n_test={len(split.test)}\n")
        fh.write(f"rejected_lines={log.rejected}\n")
        for i, b in enumerate(split.boundaries):
            fh.write(f"boundary_{i + 1}={b}\n")
        for i, b in enumerate(split.boundaries):
            fh.write(f"boundary_ts_{i + 1}={log.records[b].timestamp}\n")
    manifest.write_manifest(
        out / "run.manifest", "split",
        {"interactions": args.interactions, "out": args.out},
        {"interactions": args.interactions},
    )
    print(f"split: {len(split.train)} train / {len(split.valid)} valid / "
          f"{len(split.test)} test -> {out}")
    return 0


def cmd_popularity(args):
    catalog = parse_catalog(args.catalog)
    train = parse_interactions(args.train)
    table = compute_popularity(train, catalog)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("# item_id\tcount\tC\tP\n")
        for i, item_id in enumerate(catalog.ids):
            fh.write(f"{item_id}\t{table.counts[i]}\t{table.factor[i]:.10g}"
                     f"\t{table.normalized[i]:.10g}\n")
    if args.deciles:
        report = decile_report(table)
        with open(args.deciles, "w", encoding="utf-8") as fh:
            fh.write("# bucket\tn_items\tshare\n")
            if report.small_catalog:
                fh.write("# small-catalog mode: fewer items than buckets\n")
            for k, (group, share) in enumerate(zip(report.groups, report.share)):
                fh.write(f"{k}\t{len(group)}\t{share:.10g}\n")
    manifest.write_manifest(
        str(args.out) + ".manifest", "popularity",
        {"train": args.train, "catalog": args.catalog, "out": args.out,
         "deciles": args.deciles or ""},
        {"train": args.train, "catalog": args.catalog},
    )
    print(f"popularity: {len(catalog)} items, {table.rejected} unknown-item "
          f"interactions ignored -> {args.out}")
    return 0


def cmd_embed(args):
    catalog = parse_catalog(args.catalog)
    if args.provider != "hash":
        raise UsageError(f"unknown provider {args.provider!r}")
    provider = HashEmbedder(dim=args.dim, seed=args.seed)
    mat = embed_catalog(catalog, provider, normalize=args.normalize)
    if str(args.out).endswith(".tsv"):
        save_embeddings_tsv(args.out, mat, catalog)
    else:
        save_embeddings_bin(args.out, mat)
    manifest.write_manifest(
        str(args.out) + ".manifest", "embed",
        {"catalog": args.catalog, "provider": args.provider, "dim": args.dim,
         "seed": args.seed, "normalize": args.normalize, "out": args.out},
        {"catalog": args.catalog},
    )
    print(f"embed: {len(catalog)} items x dim {mat.dim} -> {args.out}")
    return 0


def cmd_generate(args):
    catalog = parse_catalog(args.catalog)
    samples = read_samples(args.samples)
    train_log = parse_interactions(args.train) if args.train else None
    generator = _make_generator(args.generator, catalog, train_log, args.seed,
                                args.ngram_order)
    with open(args.out, "w", encoding="utf-8") as fh:
        for i, sample in enumerate(samples):
            gen = generator.generate(sample)
            fh.write(f"{i}\t{gen.text()}\t{gen.source}\n")
    inputs = {"samples": args.samples, "catalog": args.catalog}
    if args.train:
        inputs["train"] = args.train
    manifest.write_manifest(
        str(args.out) + ".manifest", "generate",
        {"samples": args.samples, "catalog": args.catalog,
         "generator": args.generator, "seed": args.seed,
         "ngram-order": args.ngram_order, "train": args.train or "",
         "out": args.out},
        inputs,
    )
    print(f"generate: {len(samples)} samples via {args.generator} -> {args.out}")
    return 0


def cmd_collab_fit(args):
    catalog = parse_catalog(args.catalog)
    train = parse_interactions(args.train)
    scorer = collab_mod.fit_cooccurrence(train, catalog, alpha=args.alpha)
    collab_mod.save_scorer(args.out, scorer)
    manifest.write_manifest(
        str(args.out) + ".manifest", "collab-fit",
        {"train": args.train, "catalog": args.catalog, "alpha": args.alpha,
         "out": args.out},
        {"train": args.train, "catalog": args.catalog},
    )
    print(f"collab-fit: {len(scorer.counts)} transition pairs -> {args.out}")
    return 0


def _read_generated(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise DataError(f"malformed generated-text line in {path}")
            rows.append((int(parts[0]), parts[1]))
    return rows


def cmd_ground(args):
    catalog = parse_catalog(args.catalog)
    mat = load_embeddings(args.emb, catalog)
    provider = HashEmbedder(dim=mat.dim, seed=args.seed)
    rows = _read_generated(args.gen)
    samples = read_samples(args.samples) if args.samples else None
    injection = INJECT_MODES[args.inject]
    pop_weights = None
    scorer = None
    if injection == "popularity":
        if not args.popularity:
            raise UsageError("--inject pop requires --popularity")
        pop_weights = _read_popularity_tsv(args.popularity, catalog).normalized
    elif injection == "collaborative":
        if not (args.scorer and args.samples):
            raise UsageError("--inject collab requires --scorer and --samples")
        scorer = collab_mod.load_scorer(args.scorer, len(catalog), alpha=args.alpha)
    bm25 = BM25Index(catalog, k1=args.bm25_k1, b=args.bm25_b) \
        if args.strategy == "bm25" else None

    with open(args.out, "w", encoding="utf-8") as fh:
        for sample_idx, text in rows:
            sample = None
            if samples is not None:
                if not 0 <= sample_idx < len(samples):
                    raise DataError(f"sample index {sample_idx} out of range")
                sample = samples[sample_idx]
            exclusions = frozenset(
                catalog.index_of[i] for i in sample.known_items
                if i in catalog.index_of
            ) if sample is not None else frozenset()
            if bm25 is not None:
                ranked = bm25_rank(text, bm25, exclusions)
            else:
                norm = normalize_distances(l2_distances(mat, provider.embed(text)))
                if injection == "popularity" and args.gamma > 0:
                    adjusted = inject(norm, pop_weights, args.gamma)
                elif injection == "collaborative" and args.gamma > 0:
                    raw = collab_mod.score(scorer, sample, catalog)
                    adjusted = inject(norm, collab_mod.normalize_scores(raw),
                                      args.gamma)
                else:
                    adjusted = norm
                ranked = rank(adjusted, exclusions)
            for pos in range(min(args.topk, len(ranked.indices))):
                idx = int(ranked.indices[pos])
                fh.write(f"{sample_idx}\t{pos + 1}\t{catalog.ids[idx]}"
                         f"\t{ranked.values[pos]:.10g}\n")
    inputs = {"emb": args.emb, "gen": args.gen, "catalog": args.catalog}
    for name in ("samples", "popularity", "scorer"):
        if getattr(args, name):
            inputs[name] = getattr(args, name)
    manifest.write_manifest(
        str(args.out) + ".manifest", "ground",
        {"emb": args.emb, "gen": args.gen, "catalog": args.catalog,
         "inject": args.inject, "gamma": args.gamma, "topk": args.topk,
         "strategy": args.strategy, "seed": args.seed,
         "samples": args.samples or "", "popularity": args.popularity or "",
         "scorer": args.scorer or "", "alpha": args.alpha, "out": args.out},
        inputs,
    )
    print(f"ground: {len(rows)} queries, top-{args.topk} -> {args.out}")
    return 0


def cmd_eval(args):
    catalog = parse_catalog(args.catalog)
    samples = read_samples(args.test)
    if args.sample_n:
        samples = sample_eval(samples, args.sample_n, args.seed)
    inputs = {"test": args.test, "catalog": args.catalog}
    if args.train:
        inputs["train"] = args.train
    if args.emb:
        inputs["emb"] = args.emb
    fp = _fingerprint(args, inputs)
    if args.generator == "most-pop":
        if not args.train:
            raise UsageError("--generator most-pop requires --train")
        train_log = parse_interactions(args.train)
        table = compute_popularity(train_log, catalog)
        report = harness.most_pop_baseline(table, samples, catalog, fingerprint=fp)
    else:
        pipeline, _ = _pipeline_from_args(args, catalog)
        if args.dump_ranks:
            report, positions = harness.evaluate(
                samples, pipeline, threads=args.threads, fingerprint=fp,
                collect_positions=True,
            )
            with open(args.dump_ranks, "w", encoding="utf-8") as fh:
                for i, pos in enumerate(positions):
                    fh.write(f"{i}\t{'skipped' if pos is None else pos}\n")
        else:
            report = harness.evaluate(samples, pipeline, threads=args.threads,
                                      fingerprint=fp)
    harness.write_report(args.out, report, as_json=args.json)
    manifest.write_manifest(
        str(args.out) + ".manifest", "eval",
        {"test": args.test, "catalog": args.catalog, "emb": args.emb or "",
         "train": args.train or "", "generator": args.generator,
         "inject": args.inject, "gamma": args.gamma, "seed": args.seed,
         "dim": args.dim, "normalize": args.normalize, "alpha": args.alpha,
         "sample-n": args.sample_n or "", "json": args.json,
         "ngram-order": args.ngram_order, "out": args.out},
        inputs,
    )
    for k in report.ks:
        print(f"hr@{k}={report.hr[k]:.4f} ndcg@{k}={report.ndcg[k]:.4f}")
    print(f"eval: {report.n_samples} samples ({report.skipped} skipped) "
          f"-> {args.out}")
    return 0


def cmd_tune_gamma(args):
    catalog = parse_catalog(args.catalog)
    samples = read_samples(args.valid)
    if args.sample_n:
        samples = sample_eval(samples, args.sample_n, args.seed)
    pipeline, _ = _pipeline_from_args(args, catalog)
    best, table = tune.tune_gamma(samples, pipeline, metric=args.metric,
                                  threads=args.threads)
    tune.write_sweep(args.out, table)
    inputs = {"valid": args.valid, "catalog": args.catalog}
    if args.train:
        inputs["train"] = args.train
    if args.emb:
        inputs["emb"] = args.emb
    manifest.write_manifest(
        str(args.out) + ".manifest", "tune-gamma",
        {"valid": args.valid, "catalog": args.catalog, "emb": args.emb or "",
         "train": args.train or "", "generator": args.generator,
         "inject": args.inject, "metric": args.metric, "seed": args.seed,
         "dim": args.dim, "normalize": args.normalize, "alpha": args.alpha,
         "sample-n": args.sample_n or "", "ngram-order": args.ngram_order,
         "out": args.out},
        inputs,
    )
    print(f"best_gamma={best:.10g} metric={args.metric}")
    return 0


def cmd_report(args):
    reports = [harness.read_report(p) for p in args.reports]
    ks = reports[0].ks
    for r in reports[1:]:
        if r.ks != ks:
            raise DataError("reports have mismatched K sets")
    sample_keys = {r.fingerprint.get("sha256.test", "") for r in reports}
    if len(sample_keys) > 1 and not args.force:
        raise DataError(
            "reports were computed on different sample sets; pass --force to compare"
        )
    names = [f"hr@{k}" for k in ks] + [f"ndcg@{k}" for k in ks]
    lines = []
    if args.mode == "compare":
        header = ["metric"] + [Path(p).name for p in args.reports]
        lines.append("\t".join(header))
        for name in names:
            vals = [f"{r.metric(name):.6g}" for r in reports]
            lines.append("\t".join([name] + vals))
    else:  # improve2lv
        if len(reports) != 3:
            raise UsageError("improve2lv mode needs exactly 3 reports: a b combined")
        imp = harness.improve2lv(reports[0], reports[1], reports[2])
        lines.append("metric\ta\tb\tcombined\timprove2lv")
        for name in names:
            val = imp[name]
            shown = "null" if val is None else f"{val:+.6g}"
            lines.append(
                f"{name}\t{reports[0].metric(name):.6g}"
                f"\t{reports[1].metric(name):.6g}"
                f"\t{reports[2].metric(name):.6g}\t{shown}"
            )
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def _add_pipeline_flags(p, require_samples_flag):
    p.add_argument(require_samples_flag, required=True,
                   help="samples TSV emitted by the split command")
    p.add_argument("--catalog", required=True)
    p.add_argument("--emb", default=None,
                   help="embedding file (TSV or GREC binary); omit to hash-embed")
    p.add_argument("--train", default=None,
                   help="training interactions (for pop/collab injection)")
    p.add_argument("--generator", default="oracle",
                   choices=["oracle", "pop", "ngram", "most-pop"])
    p.add_argument("--inject", default="none", choices=sorted(INJECT_MODES))
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--ngram-order", type=int, default=1)
    p.add_argument("--sample-n", type=int, default=None)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.add_argument("--out", required=True)


def build_parser():
    parser = _Parser(prog="groundrec",
                     description="grounding and evaluation for generative recommendation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="temporal 10-period 8:1:1 split")
    p.add_argument("--interactions", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("popularity", help="per-item popularity factors")
    p.add_argument("--train", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--deciles", default=None)
    p.set_defaults(func=cmd_popularity)

    p = sub.add_parser("embed", help="embed catalog titles")
    p.add_argument("--catalog", required=True)
    p.add_argument("--provider", default="hash")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("generate", help="generate item descriptions from histories")
    p.add_argument("--samples", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--generator", default="oracle", choices=["oracle", "pop", "ngram"])
    p.add_argument("--train", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ngram-order", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("collab-fit", help="fit the co-occurrence scorer")
    p.add_argument("--train", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collab_fit)

    p = sub.add_parser("ground", help="rank the catalog against generated text")
    p.add_argument("--emb", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--catalog", required=True)
    p.add_argument("--samples", default=None)
    p.add_argument("--inject", default="none", choices=sorted(INJECT_MODES))
    p.add_argument("--popularity", default=None)
    p.add_argument("--scorer", default=None)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--topk", type=int, default=20)
    p.add_argument("--strategy", default="l2", choices=["l2", "bm25"])
    p.add_argument("--bm25-k1", type=float, default=1.5)
    p.add_argument("--bm25-b", type=float, default=0.75)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("eval", help="all-ranking HR/NDCG evaluation")
    _add_pipeline_flags(p, "--test")
    p.add_argument("--dump-ranks", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune-gamma", help="gamma grid search on validation")
    _add_pipeline_flags(p, "--valid")
    p.add_argument("--metric", default="ndcg@20")
    p.set_defaults(func=cmd_tune_gamma)

    p = sub.add_parser("report", help="compare metric reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--mode", default="compare", choices=["compare", "improve2lv"])
    p.add_argument("--force", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def main(argv=None):
    try:
        return run(argv)
    except UsageError as e:
        print(f"groundrec: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"groundrec: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Interaction-log parsing, temporal splitting, and sliding-window sample construction.

The split cuts the temporally sorted log into 10 contiguous equal-count periods
(remainder records go one-per-period starting from the earliest): periods 1-8
train, 9 valid, 10 test. Samples use a fixed history window of 10 items,
left-padded with the reserved PAD token; histories may cross partition
boundaries, so a test sample can see valid-period interactions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import DataError

PAD = "<PAD>"
HISTORY_LEN = 10
NUM_PERIODS = 10


@dataclass(frozen=True)
class Interaction:
    user_id: str
    item_id: str
    timestamp: int
    domain_tag: str | None = None
    pos: int = 0  # input-file position, breaks timestamp ties


@dataclass
class InteractionLog:
    """Interactions stably sorted by (timestamp, input-file position)."""

    records: list[Interaction]
    rejected: int = 0

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (r.timestamp, r.pos))

    def __len__(self):
        return len(self.records)

    def users(self):
        return {r.user_id for r in self.records}

    def items(self):
        return {r.item_id for r in self.records}


@dataclass
class ItemCatalog:
    """item_id -> title, with a canonical index from sorted item_id order."""

    entries: dict[str, str]
    domain_tag: str | None = None
    index_of: dict[str, int] = field(init=False)
    ids: list[str] = field(init=False)

    def __post_init__(self):
        if not self.entries:
            raise DataError("catalog is empty")
        for item_id, title in self.entries.items():
            if not item_id:
                raise DataError("catalog contains an empty item_id")
            if not title:
                raise DataError(f"catalog item {item_id!r} has an empty title")
        if PAD in self.entries:
            raise DataError(f"catalog item_id collides with the PAD token {PAD!r}")
        self.ids = sorted(self.entries)
        self.index_of = {item_id: i for i, item_id in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def title(self, item_id):
        return self.entries[item_id]

    def titles(self):
        return [self.entries[i] for i in self.ids]


@dataclass
class SplitLog:
    full: InteractionLog
    boundaries: list[int]  # 9 cut indices into the sorted full log
    train: InteractionLog = field(init=False)
    valid: InteractionLog = field(init=False)
    test: InteractionLog = field(init=False)

    def __post_init__(self):
        recs = self.full.records
        b = self.boundaries
        self.train = InteractionLog(list(recs[: b[7]]))
        self.valid = InteractionLog(list(recs[b[7] : b[8]]))
        self.test = InteractionLog(list(recs[b[8] :]))

    def partition_range(self, name):
        b = self.boundaries
        n = len(self.full)
        if name == "train":
            return 0, b[7]
        if name == "valid":
            return b[7], b[8]
        if name == "test":
            return b[8], n
        raise ValueError(f"unknown partition {name!r}")


@dataclass(frozen=True)
class SequenceSample:
    history: tuple[str, ...]  # exactly HISTORY_LEN, PAD-prefixed
    target: str
    user_id: str
    target_timestamp: int
    known_items: frozenset[str]


def parse_interactions(path, catalog=None) -> InteractionLog:
    """Parse a TSV of user_id, item_id, timestamp[, domain_tag].

    Malformed lines are counted and skipped; more than 10% rejects is fatal.
    """
    records = []
    rejected = 0
    total = 0
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read interactions file {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            total += 1
            parts = line.split("\t")
            if len(parts) < 3 or not parts[0] or not parts[1]:
                rejected += 1
                continue
            try:
                ts = int(parts[2])
            except ValueError:
                rejected += 1
                continue
            if parts[1] == PAD:
                raise DataError(f"item_id collides with PAD token at line {lineno + 1}")
            tag = parts[3] if len(parts) > 3 and parts[3] else None
            records.append(Interaction(parts[0], parts[1], ts, tag, pos=lineno))
    if total and rejected / total > 0.10:
        raise DataError(
            f"{rejected}/{total} lines rejected in {path} (>10%); "
            "check the file format (user \\t item \\t integer timestamp)"
        )
    return InteractionLog(records, rejected=rejected)


def parse_catalog(path) -> ItemCatalog:
    """Parse a TSV of item_id, title[, domain_tag]."""
    entries = {}
    tag = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read catalog file {path}: {e}") from e
    with fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) < 2 or not parts[0] or not parts[1]:
                raise DataError(f"malformed catalog line {lineno + 1} in {path}")
            if parts[0] in entries:
                raise DataError(f"duplicate catalog item_id {parts[0]!r}")
            entries[parts[0]] = parts[1]
            if len(parts) > 2 and parts[2]:
                tag = parts[2]
    return ItemCatalog(entries, domain_tag=tag)


def period_sizes(n, periods=NUM_PERIODS):
    """Equal-count period sizes; remainder assigned one-per-period from the earliest."""
    base, rem = divmod(n, periods)
    return [base + 1 if k < rem else base for k in range(periods)]


def temporal_split(log: InteractionLog) -> SplitLog:
    n = len(log)
    if n < NUM_PERIODS:
        raise DataError(
            f"temporal split needs at least {NUM_PERIODS} interactions, got {n}"
        )
    sizes = period_sizes(n)
    boundaries = []
    acc = 0
    for s in sizes[:-1]:
        acc += s
        boundaries.append(acc)
    return SplitLog(log, boundaries)


def build_samples(split: SplitLog, partition: str) -> list[SequenceSample]:
    """One sample per interaction in the partition that has >=1 predecessor.

    History is the 10 immediately preceding interactions from the user's full
    timeline (crossing partition boundaries), left-padded with PAD. known_items
    holds everything the user touched strictly before the target timestamp.
    """
    lo, hi = split.partition_range(partition)
    by_user: dict[str, list[tuple[int, Interaction]]] = {}
    for gidx, rec in enumerate(split.full.records):
        by_user.setdefault(rec.user_id, []).append((gidx, rec))

    samples = []
    for user in sorted(by_user):
        timeline = by_user[user]  # already in global (timestamp, pos) order
        items = [rec.item_id for _, rec in timeline]
        for t, (gidx, rec) in enumerate(timeline):
            if t == 0 or not (lo <= gidx < hi):
                continue
            window = items[max(0, t - HISTORY_LEN) : t]
            history = tuple([PAD] * (HISTORY_LEN - len(window)) + window)
            known = frozenset(
                r.item_id for _, r in timeline if r.timestamp < rec.timestamp
            )
            samples.append(
                SequenceSample(
                    history=history,
                    target=rec.item_id,
                    user_id=user,
                    target_timestamp=rec.timestamp,
                    known_items=known,
                )
            )
    samples.sort(key=lambda s: (s.target_timestamp, s.user_id))
    return samples


def write_interactions(path, log: InteractionLog):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in log.records:
            fields = [rec.user_id, rec.item_id, str(rec.timestamp)]
            if rec.domain_tag:
                fields.append(rec.domain_tag)
            fh.write("\t".join(fields) + "\n")


def write_samples(path, samples):
    """TSV: user, comma-joined history, target, timestamp, comma-joined known set.

    Item ids must not contain commas or tabs (enforced at write time).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            for item in (*s.history, s.target, *s.known_items):
                if "," in item or "\t" in item:
                    raise DataError(
                        f"item_id {item!r} contains a separator; "
                        "cannot serialize samples"
                    )
            fh.write(
                "\t".join(
                    [
                        s.user_id,
                        ",".join(s.history),
                        s.target,
                        str(s.target_timestamp),
                        ",".join(sorted(s.known_items)),
                    ]
                )
                + "\n"
            )


def read_samples(path) -> list[SequenceSample]:
    samples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"malformed sample line {lineno + 1} in {path}")
            user, hist, target, ts, known = parts
            history = tuple(hist.split(","))
            if len(history) != HISTORY_LEN:
                raise DataError(
                    f"sample line {lineno + 1}: history length "
                    f"{len(history)} != {HISTORY_LEN}"
                )
            samples.append(
                SequenceSample(
                    history=history,
                    target=target,
                    user_id=user,
                    target_timestamp=int(ts),
                    known_items=frozenset(known.split(",")) if known else frozenset(),
                )
            )
    return samples


def sample_eval(samples, n, seed) -> list[SequenceSample]:
    """Seeded uniform draw without replacement (Mersenne Twister via random.Random)."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    if n >= len(samples):
        return list(samples)
    rng = random.Random(seed)
    idx = rng.sample(range(len(samples)), n)
    return [samples[i] for i in idx]

"""Rating ingest: parse, threshold to signs, iterative core filter, split."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import write_edge_list


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class RatingRecord:
    user_key: str
    item_key: str
    rating: float
    timestamp: int | None = None


@dataclass(frozen=True)
class SignedRecord:
    user_key: str
    item_key: str
    sign: int
    rating: float


@dataclass
class IngestConfig:
    neg_threshold: float = 3.0
    pos_threshold: float = 3.0
    min_interactions: int = 5
    train_frac: float = 0.7
    valid_frac: float = 0.1
    test_frac: float = 0.2
    seed: int = 0
    # column positions of user, item, rating, timestamp (-1: absent)
    columns: tuple = (0, 1, 2, 3)
    delimiter: str | None = None

    def validate(self):
        if self.neg_threshold > self.pos_threshold:
            raise IngestError("neg_threshold must not exceed pos_threshold")
        if abs(self.train_frac + self.valid_frac + self.test_frac - 1.0) > 1e-9:
            raise IngestError("split fractions must sum to 1")
        if min(self.train_frac, self.valid_frac, self.test_frac) < 0:
            raise IngestError("split fractions must be nonnegative")
        if self.min_interactions < 0:
            raise IngestError("min_interactions must be nonnegative")


@dataclass
class DatasetSplit:
    """Train/validation/test edges over dense indices, plus the key maps.

    Edge arrays have shape (m, 3): (user, item, sign).
    """

    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    user_map: dict
    item_map: dict
    seed: int
    ratings: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_users(self):
        return len(self.user_map)

    @property
    def num_items(self):
        return len(self.item_map)

    def all_edges(self):
        return np.vstack([self.train, self.valid, self.test])


def parse_ratings(source, fmt: str = "csv", columns=(0, 1, 2, 3),
                  delimiter: str | None = None) -> list[RatingRecord]:
    """Parse a CSV/TSV byte or text stream into rating records.

    ``columns`` gives the positions of user, item, rating and timestamp; a
    timestamp position of -1 (or a missing column) means no timestamp. Lines
    starting with '#' are ignored, and a first line whose rating field is not
    numeric is treated as a header.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))
    elif isinstance(source, str):
        source = io.StringIO(source)
    elif hasattr(source, "mode") and "b" in getattr(source, "mode", ""):
        source = io.TextIOWrapper(source, encoding="utf-8")
    if delimiter is None:
        if fmt not in ("csv", "tsv"):
            raise IngestError(f"unknown format {fmt!r}")
        delimiter = "," if fmt == "csv" else "\t"
    ucol, icol, rcol = columns[0], columns[1], columns[2]
    tcol = columns[3] if len(columns) > 3 else -1
    records = []
    if len(delimiter) == 1:
        rows = csv.reader(source, delimiter=delimiter)
    else:  # multi-character separators such as '::'
        rows = (line.rstrip("\r\n").split(delimiter) for line in source)
    first = True
    for lineno, row in enumerate(rows, 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        header_allowed, first = first, False
        need = max(ucol, icol, rcol)
        if len(row) <= need:
            raise IngestError(f"line {lineno}: expected at least {need + 1} columns, got {len(row)}")
        user, item = row[ucol].strip(), row[icol].strip()
        try:
            rating = float(row[rcol])
        except ValueError:
            if header_allowed:
                continue
            raise IngestError(f"line {lineno}: rating {row[rcol]!r} is not a number") from None
        if not user or not item:
            raise IngestError(f"line {lineno}: empty user or item key")
        if not 1.0 <= rating <= 5.0:
            raise IngestError(f"line {lineno}: rating {rating} outside [1, 5]")
        ts = None
        if 0 <= tcol < len(row) and row[tcol].strip():
            try:
                ts = int(row[tcol])
            except ValueError:
                raise IngestError(f"line {lineno}: timestamp {row[tcol]!r} is not an integer") from None
        records.append(RatingRecord(user, item, rating, ts))
    return records


def deduplicate(records):
    """Keep one rating per (user, item): the latest timestamp, else the last seen."""
    best = {}
    for pos, r in enumerate(records):
        key = (r.user_key, r.item_key)
        rank = (r.timestamp if r.timestamp is not None else float("-inf"), pos)
        if key not in best or rank >= best[key][0]:
            best[key] = (rank, r)
    return [r for _, r in sorted(best.values(), key=lambda t: t[0][1])]


def sign_threshold(r: RatingRecord, cfg: IngestConfig | None = None):
    """+1 above ``pos_threshold``, -1 below ``neg_threshold``, else None (drop)."""
    cfg = cfg or IngestConfig()
    if r.rating > cfg.pos_threshold:
        return 1
    if r.rating < cfg.neg_threshold:
        return -1
    return None


def iterative_core_filter(records, min_interactions: int = 5):
    """Drop users and items with fewer than ``min_interactions`` until stable.

    Both signs count toward the minimum.
    """
    records = list(records)
    while True:
        ucount, icount = {}, {}
        for r in records:
            ucount[r.user_key] = ucount.get(r.user_key, 0) + 1
            icount[r.item_key] = icount.get(r.item_key, 0) + 1
        kept = [r for r in records
                if ucount[r.user_key] >= min_interactions and icount[r.item_key] >= min_interactions]
        if len(kept) == len(records):
            return kept
        records = kept


def split_dataset(records, cfg: IngestConfig | None = None) -> DatasetSplit:
    """Seeded random 70/10/20 split over instances with dense index maps.

    Maps are built from the whole filtered set (sorted keys), so nodes seen
    only in validation or test still get indices.
    """
    cfg = cfg or IngestConfig()
    n = len(records)
    if n < 10:
        raise IngestError(f"need at least 10 records to split, got {n}")
    users = sorted({r.user_key for r in records})
    items = sorted({r.item_key for r in records})
    user_map = {k: i for i, k in enumerate(users)}
    item_map = {k: i for i, k in enumerate(items)}
    edges = np.array([(user_map[r.user_key], item_map[r.item_key], r.sign) for r in records],
                     dtype=np.int64)
    ratings = np.array([r.rating for r in records], dtype=np.float64)
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_train = int(round(cfg.train_frac * n))
    n_valid = int(round(cfg.valid_frac * n))
    parts = np.split(perm, [n_train, n_train + n_valid])
    return DatasetSplit(edges[parts[0]], edges[parts[1]], edges[parts[2]],
                        user_map, item_map, cfg.seed,
                        ratings=np.column_stack([edges[:, :2], ratings]))


def dataset_stats(split: DatasetSplit) -> dict:
    e = split.all_edges()
    n = len(e)
    neg = int(np.sum(e[:, 2] < 0))
    return {
        "num_users": split.num_users,
        "num_items": split.num_items,
        "num_instances": n,
        "negative_rate": neg / n if n else 0.0,
    }


def sample_ranking_negatives(user: int, k: int, exclusion, num_items: int, seed) -> list[int]:
    """``k`` distinct items drawn uniformly from outside ``exclusion``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    excl = np.zeros(num_items, dtype=bool)
    ex = np.fromiter((int(i) for i in exclusion), dtype=np.int64)
    excl[ex[(ex >= 0) & (ex < num_items)]] = True
    candidates = np.flatnonzero(~excl)
    if k > candidates.shape[0]:
        raise IngestError(f"user {user}: cannot sample {k} negatives from "
                          f"{candidates.shape[0]} candidate items")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [int(i) for i in rng.choice(candidates, size=k, replace=False)]


def ingest(records, cfg: IngestConfig) -> DatasetSplit:
    """Full pipeline over parsed records: dedup, threshold, filter, split."""
    cfg.validate()
    signed = []
    for r in deduplicate(records):
        s = sign_threshold(r, cfg)
        if s is not None:
            signed.append(SignedRecord(r.user_key, r.item_key, s, r.rating))
    return split_dataset(iterative_core_filter(signed, cfg.min_interactions), cfg)


def write_split(split: DatasetSplit, out_dir, extra: dict | None = None):
    """Write train/valid/test edge lists, key maps, ratings and stats.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("train", "valid", "test"):
        write_edge_list(out / f"{name}.tsv", getattr(split, name))
    for name, mapping in (("user_map", split.user_map), ("item_map", split.item_map)):
        with open(out / f"{name}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for key, idx in sorted(mapping.items(), key=lambda kv: kv[1]):
                fh.write(f"{key}\t{idx}\n")
    if split.ratings is not None:
        with open(out / "ratings.tsv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("user_id\titem_id\trating\n")
            for u, i, r in split.ratings:
                fh.write(f"{int(u)}\t{int(i)}\t{float(r)!r}\n")
    stats = dataset_stats(split)
    stats["seed"] = split.seed
    if extra:
        stats.update(extra)
    with open(out / "stats.json", "w", encoding="utf-8") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return stats


def _read_map(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            key, idx = line.rstrip("\n").split("\t")
            out[key] = int(idx)
    return out


def load_split(in_dir) -> DatasetSplit:
    """Inverse of :func:`write_split`."""
    from .graph import read_edge_list

    d = Path(in_dir)
    missing = [f for f in ("train.tsv", "valid.tsv", "test.tsv", "user_map.tsv",
                           "item_map.tsv", "stats.json") if not (d / f).exists()]
    if missing:
        raise IngestError(f"{d}: missing {', '.join(missing)}")
    stats = json.loads((d / "stats.json").read_text(encoding="utf-8"))
    ratings = None
    if (d / "ratings.tsv").exists():
        ratings = np.loadtxt(d / "ratings.tsv", delimiter="\t", skiprows=1, ndmin=2)
    return DatasetSplit(read_edge_list(d / "train.tsv"), read_edge_list(d / "valid.tsv"),
                        read_edge_list(d / "test.tsv"), _read_map(d / "user_map.tsv"),
                        _read_map(d / "item_map.tsv"), int(stats.get("seed", 0)),
                        ratings=ratings)


def config_dict(cfg: IngestConfig) -> dict:
    d = asdict(cfg)
    d["columns"] = list(cfg.columns)
    return d

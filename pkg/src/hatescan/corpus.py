"""Comment corpora, label files, and deterministic train/test/fold partitioning."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParameterError, StratificationError
from .seeding import substream

log = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "video_id", "source", "published_at", "raw_text")


class Source(str, enum.Enum):
    PUBLIC = "public"
    PRIVATE = "private"


class HateLabel(str, enum.Enum):
    HATE = "hate"
    NO_HATE = "no_hate"


class SentimentLabel(str, enum.Enum):
    NEUTRAL = "neutral"
    PRO_ISRAEL = "pro_israel"
    PRO_PALESTINE = "pro_palestine"


class Origin(str, enum.Enum):
    SCRAPED = "scraped"
    BACK_TRANSLATED = "back_translated"
    GENERATED = "generated"


# Fixed class orders; the sentiment order doubles as the OvR tie-break.
HATE_ORDER = (HateLabel.NO_HATE, HateLabel.HATE)
SENTIMENT_ORDER = (SentimentLabel.NEUTRAL, SentimentLabel.PRO_ISRAEL, SentimentLabel.PRO_PALESTINE)

# label-file encodings
_HATE_CODES = {"1": HateLabel.HATE, "0": HateLabel.NO_HATE}
_SENTIMENT_CODES = {
    "neutral": SentimentLabel.NEUTRAL,
    "israel": SentimentLabel.PRO_ISRAEL,
    "palestine": SentimentLabel.PRO_PALESTINE,
}
HATE_TO_CODE = {v: k for k, v in _HATE_CODES.items()}
SENTIMENT_TO_CODE = {v: k for k, v in _SENTIMENT_CODES.items()}


@dataclass(frozen=True)
class Comment:
    id: str
    video_id: str | None
    source: Source | None
    published_at: dt.date | None
    raw_text: str

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "video_id": self.video_id,
            "source": self.source.value if self.source else None,
            "published_at": self.published_at.isoformat() if self.published_at else None,
            "raw_text": self.raw_text,
        }


@dataclass(frozen=True)
class LabeledComment:
    comment: Comment
    hate: HateLabel | None = None
    sentiment: SentimentLabel | None = None
    origin: Origin = Origin.SCRAPED

    def __post_init__(self):
        if self.hate is None and self.sentiment is None:
            raise DataError(f"labeled comment {self.comment.id} carries no label")
        if self.origin is Origin.SCRAPED and (
            self.comment.video_id is None or self.comment.published_at is None
        ):
            raise DataError(f"scraped comment {self.comment.id} lacks video_id or published_at")

    @property
    def id(self) -> str:
        return self.comment.id

    def label(self, key: str):
        if key == "hate":
            return self.hate
        if key == "sentiment":
            return self.sentiment
        raise ParameterError(f"unknown strata key {key!r}")

    def to_record(self) -> dict:
        rec = self.comment.to_record()
        rec["hate"] = HATE_TO_CODE[self.hate] if self.hate else None
        rec["sentiment"] = SENTIMENT_TO_CODE[self.sentiment] if self.sentiment else None
        rec["origin"] = self.origin.value
        return rec


def _parse_date(value, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(str(value)[:10])
    except ValueError:
        raise DataError(f"{where}: malformed published_at {value!r}") from None


def _parse_source(value, where: str) -> Source:
    try:
        return Source(value)
    except ValueError:
        raise DataError(f"{where}: invalid source {value!r} (expected public|private)") from None


def _comment_from_record(rec: dict, where: str) -> Comment:
    missing = [k for k in REQUIRED_FIELDS if rec.get(k) in (None, "") and k != "raw_text"]
    if missing or "raw_text" not in rec:
        raise DataError(f"{where}: missing field(s) {', '.join(missing or ['raw_text'])}")
    return Comment(
        id=str(rec["id"]),
        video_id=str(rec["video_id"]),
        source=_parse_source(rec["source"], where),
        published_at=_parse_date(rec["published_at"], where),
        raw_text=str(rec["raw_text"] or ""),
    )


def _iter_records(path: Path, fmt: str):
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            # header is line 1
            for lineno, row in enumerate(reader, 2):
                yield lineno, row
    else:
        raise ParameterError(f"unknown comment format {fmt!r}")


def load_comments(path, format: str | None = None) -> list[Comment]:
    """Read a comment dump (JSONL or CSV), preserving file order."""
    path = Path(path)
    fmt = format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
    comments: list[Comment] = []
    seen: set[str] = set()
    for lineno, rec in _iter_records(path, fmt):
        c = _comment_from_record(rec, f"{path}:{lineno}")
        if c.id in seen:
            raise DataError(f"{path}:{lineno}: duplicate comment id {c.id!r}")
        seen.add(c.id)
        comments.append(c)
    log.info("loaded %d comments from %s", len(comments), path)
    return comments


def write_comments(comments: Iterable[Comment], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(json.dumps(c.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def load_labels(path, corpus: Sequence[Comment]) -> list[LabeledComment]:
    """Join a ``id,hate,sentiment`` label CSV onto ``corpus``.

    Empty cells mean "not annotated for this task". Comments without any label
    row are left out of the result; result order follows the label file.
    """
    path = Path(path)
    by_id = {c.id: c for c in corpus}
    labeled: list[LabeledComment] = []
    orphans: list[str] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"id", "hate", "sentiment"} <= set(reader.fieldnames):
            raise DataError(f"{path}: label file needs header id,hate,sentiment")
        for lineno, row in enumerate(reader, 2):
            cid = (row["id"] or "").strip()
            hate_raw = (row["hate"] or "").strip()
            sent_raw = (row["sentiment"] or "").strip().lower()
            if not hate_raw and not sent_raw:
                raise DataError(f"{path}:{lineno}: row for {cid!r} has both label columns empty")
            if hate_raw and hate_raw not in _HATE_CODES:
                raise DataError(f"{path}:{lineno}: invalid hate value {hate_raw!r}")
            if sent_raw and sent_raw not in _SENTIMENT_CODES:
                raise DataError(f"{path}:{lineno}: invalid sentiment value {sent_raw!r}")
            if cid in seen:
                raise DataError(f"{path}:{lineno}: duplicate label row for {cid!r}")
            seen.add(cid)
            if cid not in by_id:
                orphans.append(cid)
                continue
            labeled.append(
                LabeledComment(
                    comment=by_id[cid],
                    hate=_HATE_CODES.get(hate_raw),
                    sentiment=_SENTIMENT_CODES.get(sent_raw),
                )
            )
    if orphans:
        raise DataError(f"{path}: label ids not in corpus: {', '.join(orphans)}")
    summary = label_summary(labeled)
    log.info("labeled set: %d items; hate %s; sentiment %s", len(labeled),
             summary["hate"]["counts"], summary["sentiment"]["counts"])
    return labeled


def load_labeled_jsonl(path) -> list[LabeledComment]:
    """Read label-joined comments (the augmentation output schema)."""
    path = Path(path)
    out = []
    for lineno, rec in _iter_records(path, "jsonl"):
        where = f"{path}:{lineno}"
        try:
            origin = Origin(rec.get("origin", "scraped"))
        except ValueError:
            raise DataError(f"{where}: invalid origin {rec.get('origin')!r}") from None
        src = rec.get("source")
        date = rec.get("published_at")
        comment = Comment(
            id=str(rec["id"]),
            video_id=rec.get("video_id"),
            source=_parse_source(src, where) if src else None,
            published_at=_parse_date(date, where) if date else None,
            raw_text=str(rec.get("raw_text") or ""),
        )
        hate = rec.get("hate")
        sent = rec.get("sentiment")
        try:
            out.append(LabeledComment(
                comment,
                hate=_HATE_CODES[str(hate)] if hate not in (None, "") else None,
                sentiment=_SENTIMENT_CODES[sent] if sent else None,
                origin=origin,
            ))
        except KeyError as exc:
            raise DataError(f"{where}: invalid label value {exc.args[0]!r}") from None
    return out


def write_labeled_jsonl(items: Iterable[LabeledComment], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            fh.write(json.dumps(item.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def label_summary(labeled: Sequence[LabeledComment]) -> dict:
    """Per-task label counts and percentages (two decimals), as in the annotation table."""
    out = {}
    for key, order in (("hate", HATE_ORDER), ("sentiment", SENTIMENT_ORDER)):
        counts = Counter(item.label(key) for item in labeled if item.label(key) is not None)
        total = sum(counts.values())
        out[key] = {
            "n": total,
            "counts": {lab.value: counts.get(lab, 0) for lab in order},
            "percent": {
                lab.value: (round(100.0 * counts.get(lab, 0) / total, 2) if total else 0.0)
                for lab in order
            },
        }
    return out


def source_summary(comments: Sequence[Comment]) -> dict:
    counts = Counter(c.source.value for c in comments if c.source is not None)
    total = sum(counts.values())
    return {
        s.value: {"n": counts.get(s.value, 0),
                  "percent": round(100.0 * counts.get(s.value, 0) / total, 2) if total else 0.0}
        for s in Source
    }


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    ratio: float
    seed: int
    strata_key: str
    augmented_in_test: bool = False

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
            "ratio": self.ratio,
            "seed": self.seed,
            "strata_key": self.strata_key,
            "augmented_in_test": self.augmented_in_test,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        d = json.loads(text)
        return cls(tuple(d["train_ids"]), tuple(d["test_ids"]), d["ratio"], d["seed"],
                   d["strata_key"], d.get("augmented_in_test", False))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    fold_assignments: dict = field(hash=False)
    seed: int = 0
    strata_key: str = "hate"

    def fold_ids(self, fold: int) -> list[str]:
        return [cid for cid, f in self.fold_assignments.items() if f == fold]

    def to_json(self) -> str:
        return json.dumps({
            "format_version": 1,
            "k": self.k,
            "fold_assignments": self.fold_assignments,
            "seed": self.seed,
            "strata_key": self.strata_key,
        }, indent=2, sort_keys=True)


def _class_members(items: Sequence[LabeledComment], key: str) -> dict:
    groups: dict = {}
    for item in items:
        lab = item.label(key)
        if lab is None:
            raise DataError(f"item {item.id} has no {key} label")
        groups.setdefault(lab, []).append(item.id)
    order = HATE_ORDER if key == "hate" else SENTIMENT_ORDER
    return {lab: groups[lab] for lab in order if lab in groups}


def apportion(sizes: Sequence[int], total: int, rng: np.random.Generator) -> list[int]:
    """Largest-remainder apportionment of ``total`` seats over classes of ``sizes``.

    Equal remainders are ordered by a seeded shuffle.
    """
    n = sum(sizes)
    quotas = [s * total / n for s in sizes]
    seats = [int(np.floor(q)) for q in quotas]
    left = total - sum(seats)
    tiebreak = rng.permutation(len(sizes))
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - seats[i]), tiebreak[i]))
    for i in order[:left]:
        seats[i] += 1
    return seats


def stratified_split(labeled: Sequence[LabeledComment], ratio: float, strata_key: str,
                     seed: int, include_augmented_in_test: bool = False) -> SplitPlan:
    """Seeded stratified train/test partition.

    Augmented items always go to the training side unless
    ``include_augmented_in_test`` is set; stratification is computed over the
    items eligible for testing.
    """
    if not 0.0 < ratio < 1.0:
        raise ParameterError(f"split ratio must lie in (0, 1), got {ratio}")
    eligible = [x for x in labeled if include_augmented_in_test or x.origin is Origin.SCRAPED]
    forced_train = [x.id for x in labeled if not (include_augmented_in_test or x.origin is Origin.SCRAPED)]
    groups = _class_members(eligible, strata_key)
    for lab, ids in groups.items():
        if len(ids) < 2:
            raise StratificationError(f"class {lab.value} has {len(ids)} member(s); need at least 2")
    rng = substream(seed, "split")
    n = len(eligible)
    n_train = int(np.floor(n * ratio + 0.5))
    seats = apportion([len(ids) for ids in groups.values()], n_train, rng)
    train, test = set(forced_train), set()
    for (lab, ids), n_c in zip(groups.items(), seats):
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        train.update(shuffled[:n_c])
        test.update(shuffled[n_c:])
    order = [x.id for x in labeled]
    return SplitPlan(
        train_ids=tuple(i for i in order if i in train),
        test_ids=tuple(i for i in order if i in test),
        ratio=ratio,
        seed=seed,
        strata_key=strata_key,
        augmented_in_test=include_augmented_in_test,
    )


def make_folds(train: Sequence[LabeledComment], k: int, strata_key: str, seed: int) -> FoldPlan:
    """Stratified k-fold assignment.

    Each class is shuffled and the classes are concatenated; position ``p`` goes
    to fold ``p % k``. Fold sizes therefore differ by at most one, and so do the
    per-class counts within each fold.
    """
    if not 2 <= k <= len(train):
        raise ParameterError(f"need 2 <= k <= {len(train)}, got k={k}")
    groups = _class_members(train, strata_key)
    rng = substream(seed, "folds")
    assignments: dict[str, int] = {}
    pos = 0
    for ids in groups.values():
        for i in rng.permutation(len(ids)):
            assignments[ids[i]] = pos % k
            pos += 1
    ordered = {x.id: assignments[x.id] for x in train}
    return FoldPlan(k=k, fold_assignments=ordered, seed=seed, strata_key=strata_key)


def select(items: Sequence[LabeledComment], ids: Iterable[str]) -> list[LabeledComment]:
    wanted = set(ids)
    return [x for x in items if x.id in wanted]


def dump_csv(rows: Sequence[dict], header: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()

"""Scoring unlabeled corpora and aggregating predictions by source and week."""

from __future__ import annotations

import datetime as dt
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import SENTIMENT_ORDER, Comment, HateLabel, SentimentLabel, Source, dump_csv
from .errors import ConfigError, HatescanError, ParameterError
from .linmodels.model import LinearModel, OvrModel, decision_score, featurize, ovr_scores, predict, sigmoid
from .textprep import Drop, PipelineConfig, clean_corpus, preprocess

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
WEEKLY_HEADER = ["week_start", "week_end", "source", "n", "hate_rate",
                 "neutral_share", "israel_share", "palestine_share"]
TERM_HEADER = ["term", "doc_fraction", "rank"]


@dataclass(frozen=True)
class Prediction:
    comment_id: str
    source: Source
    published_at: dt.date
    hate_prob: float | None  # None for SVM hate models
    hate_label: HateLabel
    sentiment_scores: dict
    sentiment_label: SentimentLabel


def check_compatible(model, cfg: PipelineConfig, feature_mode: str | None = None,
                     vocab_fingerprint: str | None = None) -> None:
    """Refuse to score with a model trained under a different pipeline or featurization."""
    name = f"{model.task} model"
    if model.pipeline_fingerprint and model.pipeline_fingerprint != cfg.fingerprint():
        raise ConfigError(f"{name} was trained with pipeline {model.pipeline_fingerprint}, "
                          f"current pipeline is {cfg.fingerprint()}")
    if feature_mode is not None and model.feature_mode != feature_mode:
        raise ConfigError(f"{name} uses feature mode {model.feature_mode}, expected {feature_mode}")
    if model.vocabulary is None:
        raise ConfigError(f"{name} carries no vocabulary")
    if vocab_fingerprint is not None and model.vocabulary.fingerprint() != vocab_fingerprint:
        raise ConfigError(f"{name} vocabulary {model.vocabulary.fingerprint()} != expected {vocab_fingerprint}")


def apply_models(corpus: Sequence[Comment], hate_model: LinearModel, sent_model: OvrModel,
                 cfg: PipelineConfig, threshold: float = 0.5, feature_mode: str | None = None,
                 expected_vocab: dict | None = None) -> tuple[list[Prediction], list[Drop]]:
    """Clean ``corpus`` and score every surviving comment with both models.

    ``expected_vocab`` optionally maps ``"hate"``/``"sentiment"`` to vocabulary
    fingerprints that the models must carry.
    """
    expected_vocab = expected_vocab or {}
    check_compatible(hate_model, cfg, feature_mode, expected_vocab.get("hate"))
    check_compatible(sent_model, cfg, feature_mode, expected_vocab.get("sentiment"))
    kept, drops = clean_corpus(corpus, cfg)
    for d in drops:
        log.debug("dropped %s: %s", d.comment_id, d.reason)
    preds = []
    for c in kept:
        doc = preprocess(c.raw_text, cfg, c.id)
        xh = featurize(hate_model, doc)
        xs = featurize(sent_model, doc)
        prob = float(sigmoid(decision_score(hate_model, xh))) if hate_model.algo == "lr" else None
        scores = ovr_scores(sent_model, xs)
        preds.append(Prediction(
            comment_id=c.id,
            source=c.source,
            published_at=c.published_at,
            hate_prob=prob,
            hate_label=predict(hate_model, xh, threshold),
            sentiment_scores={lab.value: s for lab, s in scores.items()},
            sentiment_label=predict(sent_model, xs),
        ))
    return preds, drops


@dataclass
class SourceStats:
    n: int
    hate_count: int
    sentiment_counts: dict

    @property
    def hate_rate(self) -> float:
        return self.hate_count / self.n

    @property
    def no_hate_rate(self) -> float:
        return (self.n - self.hate_count) / self.n

    @property
    def sentiment_shares(self) -> dict:
        return {lab.value: self.sentiment_counts.get(lab.value, 0) / self.n for lab in SENTIMENT_ORDER}

    def to_dict(self) -> dict:
        return {"n": self.n, "hate_rate": self.hate_rate, "no_hate_rate": self.no_hate_rate,
                "sentiment_shares": self.sentiment_shares}


def _stats(preds: Sequence[Prediction]) -> SourceStats:
    hate = sum(p.hate_label is HateLabel.HATE for p in preds)
    sent = Counter(p.sentiment_label.value for p in preds)
    return SourceStats(len(preds), hate, dict(sent))


@dataclass
class SourceBreakdown:
    per_source: dict  # source value -> SourceStats
    notices: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"per_source": {s: st.to_dict() for s, st in self.per_source.items()},
                "notices": list(self.notices)}


def aggregate_by_source(preds: Sequence[Prediction]) -> SourceBreakdown:
    by_source: dict = {}
    for p in preds:
        by_source.setdefault(p.source.value, []).append(p)
    per_source, notices = {}, []
    for src in Source:
        if src.value in by_source:
            per_source[src.value] = _stats(by_source[src.value])
        else:
            notices.append(f"no predictions for source {src.value}; omitted")
    for msg in notices:
        log.info(msg)
    return SourceBreakdown(per_source, notices)


@dataclass
class WeekBucket:
    start: dt.date
    end: dt.date  # inclusive
    cells: dict  # source value -> SourceStats; empty cells absent


@dataclass
class WeeklySeries:
    buckets: list
    range_start: dt.date
    range_end: dt.date
    out_of_range: list = field(default_factory=list)


def week_bounds(range_start: dt.date, range_end: dt.date, days: int = 7) -> list[tuple[dt.date, dt.date]]:
    """Consecutive ``days``-long spans anchored on ``range_start``; the last span
    absorbs the remainder so that it ends exactly on ``range_end``."""
    if range_start > range_end:
        raise ParameterError(f"range start {range_start} is after range end {range_end}")
    total = (range_end - range_start).days + 1
    n = max(1, total // days)
    bounds = []
    for k in range(n):
        start = range_start + dt.timedelta(days=k * days)
        end = range_end if k == n - 1 else start + dt.timedelta(days=days - 1)
        bounds.append((start, end))
    return bounds


def aggregate_weekly(preds: Sequence[Prediction], range_start: dt.date, range_end: dt.date,
                     days: int = 7) -> WeeklySeries:
    bounds = week_bounds(range_start, range_end, days)
    members: list[list] = [[] for _ in bounds]
    outside = []
    for p in preds:
        if not range_start <= p.published_at <= range_end:
            outside.append(p.comment_id)
            continue
        k = min((p.published_at - range_start).days // days, len(bounds) - 1)
        members[k].append(p)
    buckets = []
    for (start, end), group in zip(bounds, members):
        by_source: dict = {}
        for p in group:
            by_source.setdefault(p.source.value, []).append(p)
        cells = {s.value: _stats(by_source[s.value]) for s in Source if s.value in by_source}
        buckets.append(WeekBucket(start, end, cells))
    if outside:
        log.info("%d prediction(s) outside %s..%s excluded", len(outside), range_start, range_end)
    return WeeklySeries(buckets, range_start, range_end, outside)


@dataclass
class TermFreqTable:
    rows: list  # (term, fraction), descending fraction then term
    n_docs: int
    top_n: int


def term_frequencies(corpus: Sequence[Comment], cfg: PipelineConfig, top_n: int) -> TermFreqTable:
    """Share of cleaned comments containing each term (document frequency ratio)."""
    if top_n < 1:
        raise ParameterError("top_n must be >= 1")
    kept, _ = clean_corpus(corpus, cfg)
    df = Counter()
    for c in kept:
        df.update(set(preprocess(c.raw_text, cfg).tokens))
    n = len(kept)
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]
    return TermFreqTable([(t, k / n) for t, k in ranked], n, top_n)


def weekly_rows(series: WeeklySeries) -> list[dict]:
    rows = []
    for b in series.buckets:
        for src, st in b.cells.items():
            shares = st.sentiment_shares
            rows.append({
                "week_start": b.start.isoformat(),
                "week_end": b.end.isoformat(),
                "source": src,
                "n": st.n,
                "hate_rate": repr(st.hate_rate),
                "neutral_share": repr(shares["neutral"]),
                "israel_share": repr(shares["pro_israel"]),
                "palestine_share": repr(shares["pro_palestine"]),
            })
    return rows


def emit_reports(breakdown: SourceBreakdown, series: WeeklySeries, freqs: TermFreqTable, out_dir,
                 seed: int = 0, extra: dict | None = None) -> list[Path]:
    """Write the three report files plus ``field_manifest.json`` (version, seed, counts)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / "source_breakdown.json", out / "weekly_series.csv", out / "term_freq.csv",
                 out / "field_manifest.json"]
        doc = dict(breakdown.to_dict(), format_version=FORMAT_VERSION, seed=seed)
        paths[0].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        paths[1].write_text(dump_csv(weekly_rows(series), WEEKLY_HEADER), encoding="utf-8")
        term_rows = [{"term": t, "doc_fraction": repr(f), "rank": i}
                     for i, (t, f) in enumerate(freqs.rows, 1)]
        paths[2].write_text(dump_csv(term_rows, TERM_HEADER), encoding="utf-8")
        manifest = {
            "format_version": FORMAT_VERSION,
            "seed": seed,
            "range": [series.range_start.isoformat(), series.range_end.isoformat()],
            "buckets": len(series.buckets),
            "out_of_range": len(series.out_of_range),
            "term_docs": freqs.n_docs,
            **(extra or {}),
        }
        paths[3].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise HatescanError(f"cannot write reports to {exc.filename or out}: {exc.strerror}") from None
    return paths

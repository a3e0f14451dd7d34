"""Synthetic corpora with known generating distributions.

Used by the test-suite and for offline demos of the CLI: the labeled
research corpus is not bundled, so these generators stand in for it.
"""

from __future__ import annotations

import datetime as dt
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Comment, HateLabel, LabeledComment, SentimentLabel, Source, write_comments

# content words outside the bundled stopword list and lemma table
UNIGRAM_WORDS = ("frieden", "hass", "raus", "waffe", "volk", "nachricht", "heute", "gewalt")


@dataclass(frozen=True)
class UnigramModel:
    """Two class-conditional unigram distributions over ``words`` with fixed document length."""

    words: tuple
    p_neg: tuple
    p_pos: tuple
    length: int

    def count_vectors(self):
        """Every count vector of ``length`` tokens over the vocabulary."""
        v = len(self.words)
        for cut in itertools.combinations(range(self.length + v - 1), v - 1):
            bounds = (-1,) + cut + (self.length + v - 1,)
            yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(v))

    def log_prob(self, counts, positive: bool) -> float:
        p = self.p_pos if positive else self.p_neg
        out = math.lgamma(self.length + 1)
        for c, pi in zip(counts, p):
            out += c * math.log(pi) - math.lgamma(c + 1)
        return out

    def population(self):
        """``(counts, P(counts | neg), P(counts | pos))`` for all count vectors."""
        vecs = list(self.count_vectors())
        neg = np.array([math.exp(self.log_prob(c, False)) for c in vecs])
        pos = np.array([math.exp(self.log_prob(c, True)) for c in vecs])
        return np.array(vecs, dtype=np.float64), neg, pos

    def sample(self, n: int, rng: np.random.Generator, positive_share: float = 0.5):
        """``n`` documents as token lists with 0/1 labels."""
        labels = (rng.random(n) < positive_share).astype(int)
        docs = []
        for y in labels:
            p = self.p_pos if y else self.p_neg
            docs.append(list(rng.choice(self.words, size=self.length, p=p)))
        return docs, labels


def population_auroc(scores, weight_neg, weight_pos) -> float:
    """P(score_pos > score_neg) + 1/2 P(equal) for discrete score distributions.

    Brute force over the (finite) support: exact up to floating point.
    """
    scores = np.asarray(scores, dtype=np.float64)
    # equal counts give equal scores only up to summation order
    keys = np.round(scores, 10)
    order = np.argsort(keys, kind="mergesort")
    keys, wn, wp = keys[order], np.asarray(weight_neg)[order], np.asarray(weight_pos)[order]
    total_neg = wn.sum()
    auc = 0.0
    below = 0.0
    i = 0
    while i < keys.size:
        j = i
        while j < keys.size and keys[j] == keys[i]:
            j += 1
        grp_neg = wn[i:j].sum()
        auc += wp[i:j].sum() * (below + 0.5 * grp_neg)
        below += grp_neg
        i = j
    return auc / (total_neg * np.asarray(weight_pos).sum())


def bayes_auroc(model: UnigramModel) -> float:
    """AUROC of the likelihood-ratio score, the best achievable by any scorer."""
    counts, neg, pos = model.population()
    llr = counts @ (np.log(model.p_pos) - np.log(model.p_neg))
    return population_auroc(llr, neg, pos)


DEFAULT_UNIGRAM = UnigramModel(
    words=UNIGRAM_WORDS,
    p_neg=(0.22, 0.06, 0.06, 0.10, 0.12, 0.20, 0.16, 0.08),
    p_pos=(0.08, 0.20, 0.16, 0.12, 0.14, 0.10, 0.12, 0.08),
    length=6,
)


# ---------------------------------------------------------------- demo corpus

_FILLERS = ("das ist", "und", "die", "nicht", "ich", "wir", "es", "auch")
_HATE_WORDS = ("raus", "hass", "verbrecher", "abschaum", "dreck", "luegner")
_CALM_WORDS = ("frieden", "nachricht", "bericht", "heute", "hoffnung", "gespraech")
_NOISE_WORDS = tuple(a + b for a in ("ka", "lo", "mi", "ne", "ru") for b in ("bel", "dor", "fin", "sat"))
_SENTIMENT_WORDS = {
    SentimentLabel.NEUTRAL: ("bericht", "nachricht", "heute", "lage", "video"),
    SentimentLabel.PRO_ISRAEL: ("israel", "geiseln", "verteidigung", "solidaritaet", "sicherheit"),
    SentimentLabel.PRO_PALESTINE: ("gaza", "palaestina", "zivilisten", "freiheit", "blockade"),
}


def demo_corpus(n: int = 240, seed: int = 0, start: dt.date = dt.date(2023, 10, 2),
                days: int = 56, noise: float = 0.3):
    """Comments plus labels with a clear word/label association.

    Returns ``(comments, labeled)``. A few exact duplicates and an emoji-only
    comment are mixed in so that cleaning has something to drop.
    """
    rng = np.random.default_rng(seed)
    comments, labeled = [], []
    sentiments = list(_SENTIMENT_WORDS)
    for i in range(n):
        hate = bool(rng.random() < 0.45)
        sent = sentiments[int(rng.integers(3))]
        # every signal word comes from the wrong pool with probability `noise`
        words = list(rng.choice(_FILLERS, size=2))
        for _ in range(2):
            flip = rng.random() < noise
            words.append(str(rng.choice(_HATE_WORDS if hate != flip else _CALM_WORDS)))
        for _ in range(2):
            pool = sentiments[int(rng.integers(3))] if rng.random() < noise else sent
            words.append(str(rng.choice(_SENTIMENT_WORDS[pool])))
        words.append(_NOISE_WORDS[int(rng.integers(len(_NOISE_WORDS)))])
        rng.shuffle(words)
        text = " ".join(words).capitalize() + ("!!" if hate else ".")
        c = Comment(
            id=f"c{i:04d}",
            video_id=f"v{int(rng.integers(12)):02d}",
            source=Source.PUBLIC if rng.random() < 0.55 else Source.PRIVATE,
            published_at=start + dt.timedelta(days=int(rng.integers(days))),
            raw_text=text,
        )
        comments.append(c)
        labeled.append(LabeledComment(c, HateLabel.HATE if hate else HateLabel.NO_HATE, sent))
    # cleaning fodder: duplicates of the first two texts and one emoji-only comment
    for k, src in enumerate(comments[:2]):
        comments.append(Comment(f"d{k:04d}", src.video_id, src.source, src.published_at, src.raw_text))
    comments.append(Comment("e0000", "v00", Source.PUBLIC, start, "😀😀😀 !!!"))
    return comments, labeled


def write_demo(out_dir, n: int = 240, seed: int = 0) -> dict:
    """Write ``comments.jsonl`` and ``labels.csv`` for a demo run; returns the paths."""
    from .corpus import HATE_TO_CODE, SENTIMENT_TO_CODE

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    comments, labeled = demo_corpus(n, seed)
    write_comments(comments, out / "comments.jsonl")
    lines = ["id,hate,sentiment"]
    for item in labeled:
        lines.append(f"{item.id},{HATE_TO_CODE[item.hate]},{SENTIMENT_TO_CODE[item.sentiment]}")
    (out / "labels.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {"comments": out / "comments.jsonl", "labels": out / "labels.csv"}

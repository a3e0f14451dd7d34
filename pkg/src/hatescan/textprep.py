"""Comment cleaning: normalization, tokenization, stopwords, lemmas, corpus filtering."""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Comment
from .errors import ConfigError

DEFAULT_UMLAUTS = (("ä", "ae"), ("ö", "oe"), ("ü", "ue"), ("ß", "ss"))

_NOT_KEPT = re.compile(r"[^a-z]+")
_TOKEN = re.compile(r"[a-z]+")


def _fold(text: str, umlaut_map) -> str:
    text = unicodedata.normalize("NFC", text).lower()
    for src, dst in umlaut_map:
        text = text.replace(src, dst)
    # remaining accents (é, ç, ...) lose their combining marks
    text = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in text if not unicodedata.combining(ch))


def normalize_text(raw: str, cfg: "PipelineConfig | None" = None) -> str:
    """Lowercase, fold umlauts and accents, keep only ``a-z`` and single spaces."""
    umlauts = cfg.umlaut_map if cfg is not None else DEFAULT_UMLAUTS
    return _NOT_KEPT.sub(" ", _fold(raw, umlauts)).strip()


def _normalize_term(term: str, umlaut_map=DEFAULT_UMLAUTS) -> str:
    return _NOT_KEPT.sub("", _fold(term.strip(), umlaut_map))


def read_term_list(path) -> frozenset[str]:
    """One term per line, ``#`` starts a comment; terms are normalized on load."""
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            term = _normalize_term(line)
            if term:
                terms.add(term)
    return frozenset(terms)


def read_lemma_table(path) -> dict[str, str]:
    table = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ConfigError(f"{path}:{lineno}: expected 'inflected<TAB>lemma'")
        table[parts[0].strip()] = parts[1].strip()
    return table


@dataclass(frozen=True)
class LanguageFilter:
    stopword_hit_threshold: float = 0.05
    min_tokens: int = 3


@dataclass(frozen=True)
class PipelineConfig:
    stopwords: frozenset = frozenset()
    negation_whitelist: frozenset = frozenset()
    lemma_dict: dict = field(default_factory=dict, hash=False)
    umlaut_map: tuple = DEFAULT_UMLAUTS
    language_filter: LanguageFilter = LanguageFilter()

    def __post_init__(self):
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        object.__setattr__(self, "negation_whitelist", frozenset(self.negation_whitelist))
        removed = self.removed_stopwords
        for key, lemma in self.lemma_dict.items():
            if not _TOKEN.fullmatch(key) or not _TOKEN.fullmatch(lemma):
                raise ConfigError(f"lemma entry {key!r} -> {lemma!r} is not in normalized form")
            if self.lemma_dict.get(lemma, lemma) != lemma:
                raise ConfigError(f"lemma {lemma!r} is itself mapped to {self.lemma_dict[lemma]!r}")
            if lemma in removed:
                raise ConfigError(f"lemma {lemma!r} would be removed as a stopword")

    @property
    def removed_stopwords(self) -> frozenset:
        return self.stopwords - self.negation_whitelist

    @property
    def language_markers(self) -> frozenset:
        return self.stopwords | self.negation_whitelist

    @classmethod
    def from_files(cls, stopwords=None, negations=None, lemmas=None,
                   language_filter: LanguageFilter | None = None) -> "PipelineConfig":
        """Build a config from data files; missing paths fall back to the bundled lists."""
        data = resources.files("hatescan") / "data"
        paths = {
            "stopwords": stopwords or data / "stopwords_de.txt",
            "negations": negations or data / "negations_de.txt",
            "lemmas": lemmas or data / "lemmas_de.tsv",
        }
        for name, p in paths.items():
            if not Path(p).is_file():
                raise ConfigError(f"{name} file not found: {p}")
        return cls(
            stopwords=read_term_list(paths["stopwords"]),
            negation_whitelist=read_term_list(paths["negations"]),
            lemma_dict=read_lemma_table(paths["lemmas"]),
            language_filter=language_filter or LanguageFilter(),
        )

    @classmethod
    def default(cls) -> "PipelineConfig":
        return cls.from_files()

    def fingerprint(self) -> str:
        payload = json.dumps({
            "stopwords": sorted(self.stopwords),
            "negations": sorted(self.negation_whitelist),
            "lemmas": sorted(self.lemma_dict.items()),
            "umlauts": list(self.umlaut_map),
            "language_filter": [self.language_filter.stopword_hit_threshold,
                                self.language_filter.min_tokens],
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class TokenDoc:
    comment_id: str
    tokens: tuple[str, ...]

    def render(self) -> str:
        return " ".join(self.tokens)


def tokenize(normalized: str) -> list[str]:
    return [t for t in normalized.split(" ") if t]


def filter_stopwords(tokens: Sequence[str], cfg: PipelineConfig) -> list[str]:
    removed = cfg.removed_stopwords
    return [t for t in tokens if t not in removed]


def lemmatize(tokens: Sequence[str], cfg: PipelineConfig) -> list[str]:
    lemmas = cfg.lemma_dict
    return [lemmas.get(t, t) for t in tokens]


def preprocess(raw: str, cfg: PipelineConfig, comment_id: str = "") -> TokenDoc:
    tokens = lemmatize(filter_stopwords(tokenize(normalize_text(raw, cfg)), cfg), cfg)
    return TokenDoc(comment_id, tuple(tokens))


def stopword_hit_rate(tokens: Sequence[str], cfg: PipelineConfig) -> float:
    if not tokens:
        return 0.0
    markers = cfg.language_markers
    return sum(t in markers for t in tokens) / len(tokens)


def passes_language_filter(tokens: Sequence[str], cfg: PipelineConfig) -> bool:
    lf = cfg.language_filter
    return len(tokens) < lf.min_tokens or stopword_hit_rate(tokens, cfg) >= lf.stopword_hit_threshold


@dataclass(frozen=True)
class Drop:
    comment_id: str
    reason: str  # duplicate | empty_after_cleaning | language
    detail: str = ""


def clean_corpus(corpus: Iterable[Comment], cfg: PipelineConfig) -> tuple[list[Comment], list[Drop]]:
    """Drop duplicate, empty and non-German comments; report every removal."""
    kept: list[Comment] = []
    drops: list[Drop] = []
    first_seen: dict[str, str] = {}
    for c in corpus:
        if c.raw_text in first_seen:
            drops.append(Drop(c.id, "duplicate", first_seen[c.raw_text]))
            continue
        first_seen[c.raw_text] = c.id
        raw_tokens = tokenize(normalize_text(c.raw_text, cfg))
        if not preprocess(c.raw_text, cfg).tokens:
            drops.append(Drop(c.id, "empty_after_cleaning"))
        elif not passes_language_filter(raw_tokens, cfg):
            rate = stopword_hit_rate(raw_tokens, cfg)
            drops.append(Drop(c.id, "language", f"stopword_hit_rate={rate:.4f}"))
        else:
            kept.append(c)
    return kept, drops

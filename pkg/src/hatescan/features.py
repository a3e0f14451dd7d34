"""Vocabulary fitting, bag-of-words counts and TF-IDF weighting."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError, ParameterError
from .textprep import TokenDoc

FEATURE_MODES = ("bow", "tfidf")


@dataclass(frozen=True)
class FeatureConfig:
    mode: str = "bow"
    min_df: int = 1
    sublinear_tf: bool = False

    def __post_init__(self):
        if self.mode not in FEATURE_MODES:
            raise ParameterError(f"feature mode must be one of {FEATURE_MODES}, got {self.mode!r}")
        if self.min_df < 1:
            raise ParameterError("min_df must be >= 1")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "min_df": self.min_df, "sublinear_tf": self.sublinear_tf}


class SparseVector:
    """Sparse real vector with strictly ascending indices and no stored zeros."""

    __slots__ = ("indices", "values", "dimension")

    def __init__(self, indices, values, dimension: int):
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size and (idx[0] < 0 or idx[-1] >= dimension or np.any(np.diff(idx) == 0)):
            raise ValueError("indices out of range or repeated")
        keep = val != 0.0
        self.indices = idx[keep]
        self.values = val[keep]
        self.dimension = int(dimension)

    @classmethod
    def from_dict(cls, entries: dict, dimension: int) -> "SparseVector":
        keys = sorted(entries)
        return cls(keys, [entries[k] for k in keys], dimension)

    @classmethod
    def from_dense(cls, dense) -> "SparseVector":
        dense = np.asarray(dense, dtype=np.float64)
        idx = np.flatnonzero(dense)
        return cls(idx, dense[idx], dense.size)

    def to_dict(self) -> dict:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[self.indices] = self.values
        return out

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def dot(self, dense) -> float:
        """Inner product with a dense array, summed in ascending index order."""
        total = 0.0
        for i, v in zip(self.indices.tolist(), self.values.tolist()):
            total += v * float(dense[i])
        return total

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values.tolist()))

    def __add__(self, other: "SparseVector") -> "SparseVector":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        acc = Counter(self.to_dict())
        for i, v in other.to_dict().items():
            acc[i] = acc.get(i, 0.0) + v
        return SparseVector.from_dict(dict(acc), self.dimension)

    def scale(self, factor: float) -> "SparseVector":
        return SparseVector(self.indices, self.values * factor, self.dimension)

    def __eq__(self, other):
        return (isinstance(other, SparseVector) and self.dimension == other.dimension
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"SparseVector({self.to_dict()}, dimension={self.dimension})"


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    n_docs: int
    min_df: int = 1

    def __post_init__(self):
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    @property
    def term_index(self) -> dict[str, int]:
        return self._index

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term) -> bool:
        return term in self._index

    def index(self, term: str) -> int:
        return self._index[term]

    def to_dict(self, feature_mode: str) -> dict:
        return {"terms": list(self.terms), "doc_freq": list(self.doc_freq),
                "n_docs": self.n_docs, "min_df": self.min_df, "feature_mode": feature_mode}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(tuple(d["terms"]), tuple(int(x) for x in d["doc_freq"]),
                   int(d["n_docs"]), int(d.get("min_df", 1)))

    def fingerprint(self) -> str:
        blob = json.dumps([self.terms, self.doc_freq, self.n_docs], separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def fit_vocabulary(docs: Sequence[TokenDoc], cfg: FeatureConfig = FeatureConfig()) -> Vocabulary:
    """Index every term reaching ``min_df`` documents, in lexicographic order."""
    if not docs:
        raise DataError("cannot fit a vocabulary on an empty corpus")
    df = Counter()
    for doc in docs:
        df.update(set(doc.tokens))
    terms = sorted(t for t, n in df.items() if n >= cfg.min_df)
    if not terms:
        raise DataError(f"no term occurs in at least {cfg.min_df} document(s); vocabulary is empty")
    return Vocabulary(tuple(terms), tuple(df[t] for t in terms), len(docs), cfg.min_df)


def _counts(doc: TokenDoc, vocab: Vocabulary) -> dict[int, int]:
    index = vocab.term_index
    counts: dict[int, int] = {}
    for t in doc.tokens:
        i = index.get(t)
        if i is not None:
            counts[i] = counts.get(i, 0) + 1
    return counts


def vectorize_bow(doc: TokenDoc, vocab: Vocabulary) -> SparseVector:
    return SparseVector.from_dict(_counts(doc, vocab), len(vocab))


def idf(vocab: Vocabulary) -> np.ndarray:
    """Smoothed inverse document frequency ``ln((1 + N) / (1 + df)) + 1``."""
    df = np.asarray(vocab.doc_freq, dtype=np.float64)
    return np.log((1.0 + vocab.n_docs) / (1.0 + df)) + 1.0


def vectorize_tfidf(doc: TokenDoc, vocab: Vocabulary, cfg: FeatureConfig,
                    idf_weights: np.ndarray | None = None) -> SparseVector:
    weights = idf(vocab) if idf_weights is None else idf_weights
    entries = {}
    for i, count in _counts(doc, vocab).items():
        tf = 1.0 + math.log(count) if cfg.sublinear_tf else float(count)
        entries[i] = tf * float(weights[i])
    vec = SparseVector.from_dict(entries, len(vocab))
    norm = vec.norm()
    return vec.scale(1.0 / norm) if norm > 0 else vec


def vectorize(doc: TokenDoc, vocab: Vocabulary, cfg: FeatureConfig,
              idf_weights: np.ndarray | None = None) -> SparseVector:
    if cfg.mode == "bow":
        return vectorize_bow(doc, vocab)
    return vectorize_tfidf(doc, vocab, cfg, idf_weights)


def vectorize_all(docs: Iterable[TokenDoc], vocab: Vocabulary, cfg: FeatureConfig) -> list[SparseVector]:
    weights = idf(vocab) if cfg.mode == "tfidf" else None
    return [vectorize(d, vocab, cfg, weights) for d in docs]


def to_csr(vectors: Sequence[SparseVector], dimension: int | None = None) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR design matrix (one row per vector)."""
    if dimension is None:
        if not vectors:
            raise DataError("no vectors to stack")
        dimension = vectors[0].dimension
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for r, v in enumerate(vectors):
        if v.dimension != dimension:
            raise DataError(f"row {r} has dimension {v.dimension}, expected {dimension}")
        indptr[r + 1] = indptr[r] + v.nnz
    indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, np.int64)
    data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dimension))

"""Word embedding storage, word2vec text I/O, vocabulary normalization and
exact nearest-neighbour search.

A lemma may own several vectors (for instance one per part of speech once
POS suffixes are stripped), so the vocabulary maps each lemma to a tuple of
row indices into a single dense matrix.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, FormatError, ShapeError

log = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.9g}"


@dataclass(frozen=True, eq=False)
class WordEmbeddings:
    language: str
    dim: int
    entries: Mapping[str, tuple[int, ...]]
    matrix: np.ndarray
    frequency_rank: Mapping[str, int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, copy=True)
        if matrix.ndim != 2:
            raise ShapeError("embedding matrix must be two-dimensional")
        if self.dim <= 0 or matrix.shape[1] != self.dim:
            raise ShapeError(f"matrix has {matrix.shape[1]} columns, expected dim={self.dim}")
        if not self.entries:
            raise ValueError("embeddings need at least one lemma")
        entries = {}
        for lemma, idx in self.entries.items():
            idx = tuple(int(i) for i in idx)
            if not idx:
                raise ValueError(f"lemma {lemma!r} has no vectors")
            if min(idx) < 0 or max(idx) >= matrix.shape[0]:
                raise ValueError(f"lemma {lemma!r} points outside the matrix")
            entries[lemma] = idx
        if self.frequency_rank is None:
            rank = {lemma: i for i, lemma in enumerate(entries)}
        else:
            rank = dict(self.frequency_rank)
            if set(rank) != set(entries) or sorted(rank.values()) != list(range(len(entries))):
                raise ValueError("frequency_rank must be a bijection onto 0..n-1")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "frequency_rank", rank)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, lemma):
        return lemma in self.entries

    def __eq__(self, other):
        if not isinstance(other, WordEmbeddings):
            return NotImplemented
        if (self.language, self.dim) != (other.language, other.dim):
            return False
        if list(self.entries) != list(other.entries) or self.frequency_rank != other.frequency_rank:
            return False
        return all(
            np.array_equal(self.matrix[list(idx)], other.matrix[list(other.entries[lemma])])
            for lemma, idx in self.entries.items()
        )

    def __repr__(self):
        return (f"<WordEmbeddings {self.language}: {len(self.entries)} lemmas, "
                f"{self.matrix.shape[0]} vectors, dim {self.dim}>")

    @property
    def n_vectors(self) -> int:
        return self.matrix.shape[0]

    def lemmas_by_rank(self) -> list[str]:
        return sorted(self.entries, key=self.frequency_rank.__getitem__)

    def mean_vector(self, lemma: str) -> np.ndarray | None:
        """Mean of all vectors registered for ``lemma`` (None when OOV)."""
        idx = self.entries.get(lemma)
        if idx is None:
            return None
        if len(idx) == 1:
            return self.matrix[idx[0]].copy()
        return self.matrix[list(idx)].mean(axis=0)

    def collapsed(self) -> tuple[list[str], np.ndarray]:
        """Lemmas in rank order and one (mean) vector per lemma."""
        lemmas = self.lemmas_by_rank()
        return lemmas, np.stack([self.mean_vector(w) for w in lemmas])

    def row_owner(self) -> np.ndarray:
        """Map from matrix row to the rank of the lemma owning it."""
        owner = np.empty(self.n_vectors, dtype=np.int64)
        for lemma, idx in self.entries.items():
            owner[list(idx)] = self.frequency_rank[lemma]
        return owner

    def with_matrix(self, matrix: np.ndarray) -> "WordEmbeddings":
        """Same vocabulary over a new matrix with the same number of rows."""
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape[0] != self.n_vectors:
            raise ShapeError("replacement matrix must keep the row count")
        return WordEmbeddings(self.language, matrix.shape[1], self.entries, matrix,
                              self.frequency_rank)


def from_vectors(language: str, items: Iterable[tuple[str, Sequence[float]]]) -> WordEmbeddings:
    """Build embeddings from ``(lemma, vector)`` pairs, in frequency order.

    Repeated lemmas gain additional vectors, as when loading a file.
    """
    entries: dict[str, list[int]] = {}
    rows = []
    for lemma, vec in items:
        entries.setdefault(lemma, []).append(len(rows))
        rows.append(np.asarray(vec, dtype=np.float64))
    if not rows:
        raise ValueError("no vectors given")
    matrix = np.stack(rows)
    return WordEmbeddings(language, matrix.shape[1], {k: tuple(v) for k, v in entries.items()}, matrix)


# --------------------------------------------------------------------------
# word2vec text format

def load_word2vec_text(path, language: str) -> WordEmbeddings:
    """Read a word2vec text file (``<count> <dim>`` header, one vector per line)."""
    with open(path, encoding="utf-8", newline=None) as f:
        header = f.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: line 1: header must be '<count> <dim>'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}: line 1: header must hold two integers") from None
        if count < 1 or dim < 1:
            raise FormatError(f"{path}: line 1: count and dim must be positive")

        entries: dict[str, list[int]] = {}
        rows = []
        for lineno, line in enumerate(f, start=2):
            line = line.rstrip("\r\n").rstrip(" ")
            if not line:
                raise FormatError(f"{path}: line {lineno}: empty line")
            fields = line.split(" ")
            if len(fields) != dim + 1:
                raise FormatError(
                    f"{path}: line {lineno}: expected {dim} floats, found {len(fields) - 1}")
            try:
                rows.append([float(x) for x in fields[1:]])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-numeric vector component") from None
            entries.setdefault(fields[0], []).append(len(rows) - 1)

    # the count may announce vector lines (word2vec) or distinct tokens
    if count not in (len(rows), len(entries)):
        raise FormatError(f"{path}: header announces {count} vectors, file holds {len(rows)} "
                          f"lines for {len(entries)} tokens")
    matrix = np.array(rows, dtype=np.float64)
    return WordEmbeddings(language, dim, {k: tuple(v) for k, v in entries.items()}, matrix)


def save_word2vec_text(embeddings: WordEmbeddings, path) -> None:
    """Write embeddings as word2vec text, 9 significant digits per float.

    Lemmas are written in frequency-rank order; a lemma with several vectors
    is written once per vector.
    """
    if not embeddings.entries:
        raise ValueError("refusing to write empty embeddings")
    fmt = FLOAT_FORMAT.format
    lines = [f"{embeddings.n_vectors} {embeddings.dim}\n"]
    for lemma in embeddings.lemmas_by_rank():
        for i in embeddings.entries[lemma]:
            lines.append(lemma + " " + " ".join(fmt(x) for x in embeddings.matrix[i]) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(lines)


# --------------------------------------------------------------------------
# vocabulary normalization

_POS_TAG = re.compile(r"[A-Z]+")


@dataclass(frozen=True)
class NormalizationPolicy:
    """String-level vocabulary cleanup applied before alignment.

    ``strip_pos_suffix`` removes trailing ``<sep>TAG`` segments where TAG is
    an upper-case tag such as ``NOUN`` or ``PROPN``; lemmas that merely
    contain the separator (``new_york``) are left alone.
    """

    strip_compound_marker: bool = False
    marker: str = "#"
    strip_pos_suffix: bool = False
    separator: str = "_"
    lowercase: bool = False

    def __post_init__(self):
        if len(self.marker) != 1 or len(self.separator) != 1:
            raise ValueError("marker and separator must be single characters")

    def apply(self, lemma: str) -> str:
        if self.strip_compound_marker:
            lemma = lemma.replace(self.marker, "")
        if self.strip_pos_suffix:
            while True:
                head, sep, tag = lemma.rpartition(self.separator)
                if not sep or not head or not _POS_TAG.fullmatch(tag):
                    break
                lemma = head
        if self.lowercase:
            lemma = lemma.lower()
        return lemma

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalizationPolicy":
        return cls(**dict(d))


IDENTITY_POLICY = NormalizationPolicy()


def normalize_vocab(embeddings: WordEmbeddings, policy: NormalizationPolicy) -> WordEmbeddings:
    """Apply ``policy`` to every lemma, merging lemmas that collide.

    Rows of the matrix are untouched; a merged lemma owns the union of its
    sources' rows and inherits their best frequency rank.
    """
    merged: dict[str, list[int]] = {}
    for lemma in embeddings.lemmas_by_rank():
        merged.setdefault(policy.apply(lemma), []).extend(embeddings.entries[lemma])
    if "" in merged:
        raise ValueError("normalization produced an empty lemma")
    n_merged = len(embeddings.entries) - len(merged)
    if n_merged:
        log.info("%s: normalization merged %d lemmas", embeddings.language, n_merged)
    return WordEmbeddings(embeddings.language, embeddings.dim,
                          {k: tuple(v) for k, v in merged.items()}, embeddings.matrix)


# --------------------------------------------------------------------------
# similarity

def lookup(embeddings: WordEmbeddings, lemma: str) -> list[np.ndarray]:
    return [embeddings.matrix[i] for i in embeddings.entries.get(lemma, ())]


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DegenerateInputError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateInputError("zero vector in embedding matrix")
    return matrix / norms


def lemma_scores(embeddings: WordEmbeddings, row_scores: np.ndarray) -> np.ndarray:
    """Reduce per-row scores to per-lemma scores (max over a lemma's rows).

    The result is indexed by frequency rank.
    """
    out = np.full(len(embeddings.entries), -np.inf)
    np.maximum.at(out, embeddings.row_owner(), row_scores)
    return out


def top_k(embeddings: WordEmbeddings, scores_by_rank: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Best ``k`` lemmas; ties go to the more frequent, then lexicographically smaller lemma."""
    lemmas = embeddings.lemmas_by_rank()
    order = sorted(range(len(lemmas)), key=lambda r: (-scores_by_rank[r], r, lemmas[r]))
    return [(lemmas[r], float(scores_by_rank[r])) for r in order[:k]]


def nearest_neighbors(embeddings: WordEmbeddings, query, k: int, metric: str = "cosine",
                      csls_k: int = 10, source: WordEmbeddings | None = None) -> list[tuple[str, float]]:
    """Exact top-``k`` lemmas for ``query`` under cosine or CSLS.

    For CSLS the source-side hub penalty of each candidate is measured
    against ``source`` (the mapped space the query comes from); without a
    source the searched space itself is used.
    """
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (embeddings.dim,):
        raise ShapeError(f"query has shape {query.shape}, expected ({embeddings.dim},)")
    if k < 1:
        raise ValueError("k must be positive")
    qn = np.linalg.norm(query)
    if qn == 0:
        raise DegenerateInputError("zero query vector")
    target = unit_rows(embeddings.matrix)
    cos = target @ (query / qn)
    if metric == "cosine":
        row_scores = cos
    elif metric == "csls":
        from .align import csls_scores
        src = embeddings if source is None else source
        row_scores = csls_scores((query / qn)[None, :], target, unit_rows(src.matrix), csls_k)[0]
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return top_k(embeddings, lemma_scores(embeddings, row_scores), k)

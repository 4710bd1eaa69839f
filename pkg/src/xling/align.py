"""Supervised orthogonal alignment with CSLS refinement.

Mappings use the row-vector convention of most embedding code: a source
matrix ``X`` is carried into target coordinates as ``X @ W``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .embed_store import WordEmbeddings, unit_rows
from .errors import AlignmentError, FormatError, NumericalError, ShapeError

log = logging.getLogger(__name__)

ORTHOGONALITY_TOL = 1e-6
RESOURCE_RICH_ITERATIONS = 20
REALIGN_ITERATIONS = 5
_CHUNK = 512


@dataclass(frozen=True)
class SeedLexicon:
    pairs: tuple[tuple[str, str], ...]
    source_language: str = ""
    target_language: str = ""

    def __post_init__(self):
        seen = set()
        unique = []
        for s, t in self.pairs:
            if (s, t) not in seen:
                seen.add((s, t))
                unique.append((s, t))
        object.__setattr__(self, "pairs", tuple(unique))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def load_seed_lexicon(path, source_language="", target_language="") -> SeedLexicon:
    """Read a MUSE-style dictionary: ``source target`` per line, ``#`` comments."""
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 'source target'")
            pairs.append((fields[0], fields[1]))
    return SeedLexicon(tuple(pairs), source_language, target_language)


@dataclass(frozen=True)
class RefinementConfig:
    iterations: int = RESOURCE_RICH_ITERATIONS
    csls_k: int = 10
    induction_vocab_limit: int = 20000

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.csls_k < 1:
            raise ValueError("csls_k must be at least 1")
        if self.induction_vocab_limit < 1:
            raise ValueError("induction_vocab_limit must be positive")


@dataclass(frozen=True)
class AlignmentResult:
    mapping: np.ndarray
    iterations_run: int = 0
    induced_lexicon_size_per_iteration: list[int] = field(default_factory=list)
    seed_pairs_used: int = 0

    def __post_init__(self):
        check_orthogonal(self.mapping)


def check_orthogonal(w: np.ndarray) -> None:
    d = w.shape[0]
    if w.shape != (d, d):
        raise ShapeError(f"mapping must be square, got {w.shape}")
    err = np.max(np.abs(w.T @ w - np.eye(d)))
    if not err < ORTHOGONALITY_TOL:
        raise NumericalError(f"mapping is not orthogonal (max deviation {err:.3g})")


def procrustes(source_vectors, target_vectors) -> np.ndarray:
    """Orthogonal ``W`` minimising ``||X W - Y||_F`` for paired rows of X and Y."""
    x = np.asarray(source_vectors, dtype=np.float64)
    y = np.asarray(target_vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape != y.shape:
        raise ShapeError(f"paired matrices must share a 2-d shape: {x.shape} vs {y.shape}")
    if x.shape[0] < 1:
        raise ShapeError("need at least one pair")
    u, _, vt = np.linalg.svd(x.T @ y)
    w = u @ vt
    check_orthogonal(w)
    return w


def apply_alignment(embeddings: WordEmbeddings, result: AlignmentResult | np.ndarray) -> WordEmbeddings:
    w = result.mapping if isinstance(result, AlignmentResult) else np.asarray(result)
    if w.shape != (embeddings.dim, embeddings.dim):
        raise ShapeError(f"mapping {w.shape} does not fit dim {embeddings.dim}")
    return embeddings.with_matrix(embeddings.matrix @ w)


# --------------------------------------------------------------------------
# CSLS

def hub_penalty(queries: np.ndarray, pool: np.ndarray, k: int) -> np.ndarray:
    """Mean cosine of each (unit) query row to its ``k`` nearest (unit) pool rows.

    ``k`` is clipped to the pool size.
    """
    k = min(k, pool.shape[0])
    out = np.empty(queries.shape[0])
    for lo in range(0, queries.shape[0], _CHUNK):
        sim = queries[lo:lo + _CHUNK] @ pool.T
        out[lo:lo + _CHUNK] = np.partition(sim, -k, axis=1)[:, -k:].mean(axis=1)
    return out


def csls_scores(queries: np.ndarray, target: np.ndarray, source: np.ndarray, k: int) -> np.ndarray:
    """CSLS between unit query rows and unit target rows.

    ``source`` is the (mapped, unit) space the queries come from; it supplies
    the target-side hub penalty.
    """
    r_t = hub_penalty(queries, target, k)
    r_s = hub_penalty(target, source, k)
    return 2 * (queries @ target.T) - r_t[:, None] - r_s[None, :]


def csls(source_vec, target_embeddings: WordEmbeddings, k: int,
         mapped_source: WordEmbeddings) -> dict[str, float]:
    """CSLS score of one mapped source vector against every target lemma."""
    from .embed_store import lemma_scores

    q = np.asarray(source_vec, dtype=np.float64)
    if q.shape != (target_embeddings.dim,):
        raise ShapeError("query vector does not match the target dimension")
    q = unit_rows(q[None, :])
    rows = csls_scores(q, unit_rows(target_embeddings.matrix), unit_rows(mapped_source.matrix), k)[0]
    by_rank = lemma_scores(target_embeddings, rows)
    return {w: float(by_rank[r]) for w, r in target_embeddings.frequency_rank.items()}


def _frequent_rows(emb: WordEmbeddings, limit: int):
    """Rows of the ``limit`` most frequent lemmas grouped by lemma, in rank order.

    Returns (lemmas, row indices, group start offsets).
    """
    lemmas = emb.lemmas_by_rank()[:limit]
    rows, starts = [], []
    for w in lemmas:
        starts.append(len(rows))
        rows.extend(emb.entries[w])
    return lemmas, np.array(rows), np.array(starts)


def induce_lexicon(mapped_source: WordEmbeddings, target: WordEmbeddings,
                   config: RefinementConfig) -> SeedLexicon:
    """Mutual CSLS nearest neighbours among the most frequent lemmas.

    Hub penalties are measured inside the restricted vocabularies. A lemma's
    score against another is the max over both lemmas' vectors; ties go to the
    more frequent lemma.
    """
    if mapped_source.dim != target.dim:
        raise ShapeError("spaces must share a dimension")
    limit = config.induction_vocab_limit
    s_lemmas, s_rows, s_starts = _frequent_rows(mapped_source, limit)
    t_lemmas, t_rows, t_starts = _frequent_rows(target, limit)
    src = unit_rows(mapped_source.matrix[s_rows])
    trg = unit_rows(target.matrix[t_rows])
    r_t = hub_penalty(src, trg, config.csls_k)
    r_s = hub_penalty(trg, src, config.csls_k)

    n_s, n_t = len(s_lemmas), len(t_lemmas)
    forward = np.empty(n_s, dtype=np.int64)
    col_best = np.full(n_t, -np.inf)
    col_arg = np.zeros(n_t, dtype=np.int64)
    s_ends = np.append(s_starts[1:], len(s_rows))
    lemma_lo = 0
    while lemma_lo < n_s:
        # chunk boundaries fall on lemma boundaries
        row_lo = s_starts[lemma_lo]
        lemma_hi = int(np.searchsorted(s_starts, row_lo + _CHUNK, side="left"))
        lemma_hi = max(lemma_hi, lemma_lo + 1)
        row_hi = s_ends[lemma_hi - 1]
        block = 2 * (src[row_lo:row_hi] @ trg.T) - r_t[row_lo:row_hi, None] - r_s[None, :]
        block = np.maximum.reduceat(block, t_starts, axis=1)
        block = np.maximum.reduceat(block, s_starts[lemma_lo:lemma_hi] - row_lo, axis=0)
        forward[lemma_lo:lemma_hi] = np.argmax(block, axis=1)
        cmax = block.max(axis=0)
        better = cmax > col_best
        col_best[better] = cmax[better]
        col_arg[better] = np.argmax(block, axis=0)[better] + lemma_lo
        lemma_lo = lemma_hi

    pairs = tuple((s_lemmas[i], t_lemmas[forward[i]])
                  for i in range(n_s) if col_arg[forward[i]] == i)
    return SeedLexicon(pairs, mapped_source.language, target.language)


# --------------------------------------------------------------------------
# alignment driver

def _pair_rows(source: WordEmbeddings, target: WordEmbeddings, pairs, all_combinations: bool):
    xs, ys = [], []
    for s, t in pairs:
        s_idx = source.entries[s]
        t_idx = target.entries[t]
        if not all_combinations:
            s_idx, t_idx = s_idx[:1], t_idx[:1]
        for i in s_idx:
            for j in t_idx:
                xs.append(i)
                ys.append(j)
    return source.matrix[xs], target.matrix[ys]


def align_supervised(source: WordEmbeddings, target: WordEmbeddings, seed: SeedLexicon,
                     config: RefinementConfig = RefinementConfig()) -> AlignmentResult:
    """Procrustes on the seed lexicon, then ``config.iterations`` rounds of
    CSLS lexicon induction and re-solving."""
    if source.dim != target.dim:
        raise ShapeError(f"dimensions differ: {source.dim} vs {target.dim}")
    resolved = [(s, t) for s, t in seed if s in source.entries and t in target.entries]
    dropped = len(seed) - len(resolved)
    if dropped:
        log.info("%s->%s: dropped %d of %d seed pairs missing from a vocabulary",
                 source.language, target.language, dropped, len(seed))
    if not resolved:
        raise AlignmentError(f"no seed pair resolves in both {source.language} and {target.language}")

    w = procrustes(*_pair_rows(source, target, resolved, all_combinations=False))
    sizes = []
    for it in range(config.iterations):
        lexicon = induce_lexicon(apply_alignment(source, w), target, config)
        sizes.append(len(lexicon))
        log.debug("refinement %d: %d induced pairs", it + 1, len(lexicon))
        if not lexicon.pairs:
            log.warning("refinement %d induced no pairs; keeping the previous mapping", it + 1)
            continue
        w = procrustes(*_pair_rows(source, target, lexicon.pairs, all_combinations=True))
    return AlignmentResult(w, config.iterations, sizes, len(resolved))


# --------------------------------------------------------------------------
# matrix files

def save_matrix(w: np.ndarray, path) -> None:
    """Text matrix: the dimension on the first line, then one row per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{w.shape[0]}\n")
        for row in w:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    try:
        d = int(lines[0])
        w = np.array([[float(x) for x in ln.split()] for ln in lines[1:]])
    except (ValueError, IndexError):
        raise FormatError(f"{path}: not a matrix file") from None
    if w.shape != (d, d):
        raise FormatError(f"{path}: expected a {d}x{d} matrix")
    return w

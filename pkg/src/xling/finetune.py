"""CoNLL-U ingestion and skip-gram negative-sampling fine-tuning."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .embed_store import WordEmbeddings
from .errors import FormatError, TrainingError

log = logging.getLogger(__name__)

LABELS = ("negative", "positive")
_TEXT_LANG = re.compile(r"text(?:\[([^\]]+)\]|_(\w+))")


@dataclass
class LemmaSentence:
    lemmas: list[str]
    sentence_id: str
    translation_comments: dict[str, str] = field(default_factory=dict)
    sentiment_label: str | None = None


def load_sentiment_labels(path) -> dict[str, str]:
    """Sidecar annotations: ``<sentence_id>\\t<positive|negative>`` per line."""
    labels = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in LABELS:
                raise FormatError(f"{path}: line {lineno}: expected '<id>\\t<positive|negative>'")
            labels[parts[0]] = parts[1]
    return labels


def parse_conllu(path, sentiment_labels: dict[str, str] | None = None) -> list[LemmaSentence]:
    """Lemma sequences from a CoNLL-U file.

    Multiword-token ranges and empty nodes are skipped; a ``_`` lemma falls
    back to the lower-cased form. ``# text_xx = ...`` and ``# text[xx] = ...``
    comments are kept as translations keyed by ``xx``.
    """
    sentences = []
    lemmas: list[str] = []
    comments: dict[str, str] = {}
    sent_id = None

    def flush():
        nonlocal lemmas, comments, sent_id
        if lemmas:
            sid = sent_id if sent_id is not None else str(len(sentences) + 1)
            label = sentiment_labels.get(sid) if sentiment_labels else None
            sentences.append(LemmaSentence(lemmas, sid, comments, label))
        lemmas, comments, sent_id = [], {}, None

    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                key, eq, value = line[1:].partition("=")
                if not eq:
                    continue
                key, value = key.strip(), value.strip()
                if key == "sent_id":
                    sent_id = value
                else:
                    m = _TEXT_LANG.fullmatch(key)
                    if m:
                        comments[m.group(1) or m.group(2)] = value
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise FormatError(f"{path}: line {lineno}: expected 10 tab-separated fields, "
                                  f"found {len(cols)}")
            tid = cols[0]
            if "-" in tid or "." in tid:
                continue
            lemma = cols[2]
            if lemma == "_":
                lemma = cols[1].lower()
            lemmas.append(lemma)
    flush()
    return sentences


# --------------------------------------------------------------------------
# skip-gram with negative sampling

@dataclass(frozen=True)
class SkipGramConfig:
    window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    min_count: int = 1
    unigram_power: float = 0.75
    rng_seed: int = 0
    admit_oov: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.negative_samples < 0 or self.epochs < 0 or self.min_count < 0:
            raise ValueError("negative_samples, epochs and min_count must be non-negative")
        if self.initial_learning_rate < 0:
            raise ValueError("learning rate must be non-negative")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sgns_loss(center, context, negatives) -> float:
    """Negative-sampling loss for one (center, context, negatives) tuple."""
    loss = -np.log(_sigmoid(context @ center))
    for u in negatives:
        loss -= np.log(_sigmoid(-(u @ center)))
    return float(loss)


def sgns_gradients(center, context, negatives):
    """Analytic gradients of :func:`sgns_loss` w.r.t. center, context, negatives."""
    g_pos = _sigmoid(context @ center) - 1.0
    d_center = g_pos * context
    d_context = g_pos * center
    d_negs = []
    for u in negatives:
        g = _sigmoid(u @ center)
        d_center = d_center + g * u
        d_negs.append(g * center)
    return d_center, d_context, d_negs


def _negative_table(counts: np.ndarray, power: float) -> np.ndarray:
    p = counts.astype(np.float64) ** power
    cdf = np.cumsum(p)
    return cdf / cdf[-1]


def train_skipgram(embeddings: WordEmbeddings, corpus: list[LemmaSentence],
                   config: SkipGramConfig = SkipGramConfig()):
    """Fine-tune ``embeddings`` on ``corpus``; returns ``(embeddings, epoch_losses)``.

    Multi-vector lemmas are collapsed to their mean first. Context vectors
    start at zero. Updates follow word2vec's sequential SGD: each output
    vector is updated as soon as its gradient is known, the center vector
    once per (center, context) pair.
    """
    if not corpus:
        raise TrainingError("empty corpus")
    dim = embeddings.dim
    if dim < 1:
        raise TrainingError("dimension must be positive")
    rng = np.random.default_rng(config.rng_seed)

    vocab, table = embeddings.collapsed()
    index = {w: i for i, w in enumerate(vocab)}
    counts: dict[str, int] = {}
    for sent in corpus:
        for w in sent.lemmas:
            counts[w] = counts.get(w, 0) + 1

    admitted = []
    if config.admit_oov:
        admitted = [w for w in counts if w not in index and counts[w] >= config.min_count]
    for w in admitted:
        index[w] = len(vocab)
        vocab.append(w)
    if admitted:
        extra = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(admitted), dim))
        table = np.vstack([table, extra])
    w_in = np.array(table, dtype=np.float64)
    w_out = np.zeros_like(w_in)

    def keep(w):
        return w in index and counts[w] >= config.min_count

    sentences = [[index[w] for w in s.lemmas if keep(w)] for s in corpus]
    train_ids = sorted({i for s in sentences for i in s})
    neg_ids = np.array(train_ids, dtype=np.int64)
    neg_cdf = (_negative_table(np.array([counts[vocab[i]] for i in train_ids]), config.unigram_power)
               if train_ids else None)

    total_words = sum(len(s) for s in sentences) * config.epochs
    lr0 = config.initial_learning_rate
    lr_end = min(config.min_learning_rate, lr0)
    done = 0
    epoch_losses = []
    for _ in range(config.epochs):
        loss_sum, n_pairs = 0.0, 0
        for si in rng.permutation(len(sentences)):
            sent = sentences[si]
            for pos, center in enumerate(sent):
                lr = lr0 - (lr0 - lr_end) * (done / total_words)
                done += 1
                lo, hi = max(0, pos - config.window), min(len(sent), pos + config.window + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    context = sent[cpos]
                    draws = neg_ids[np.searchsorted(neg_cdf, rng.random(config.negative_samples),
                                                    side="right")]
                    v = w_in[center]
                    grad_v = np.zeros(dim)
                    targets = [(context, 1.0)] + [(int(n), 0.0) for n in draws if n != context]
                    for t, label in targets:
                        score = _sigmoid(w_out[t] @ v)
                        loss_sum -= np.log(score if label else 1.0 - score)
                        if lr == 0:
                            continue
                        g = lr * (label - score)
                        grad_v += g * w_out[t]
                        w_out[t] += g * v
                    if lr:
                        w_in[center] += grad_v
                    n_pairs += 1
        epoch_losses.append(loss_sum / n_pairs if n_pairs else 0.0)

    ranks = dict(embeddings.frequency_rank)
    for w in admitted:
        ranks[w] = len(ranks)
    out = WordEmbeddings(embeddings.language, dim, {w: (i,) for i, w in enumerate(vocab)},
                         w_in, ranks)
    return out, epoch_losses


def skipgram_finetune(embeddings: WordEmbeddings, corpus: list[LemmaSentence],
                      config: SkipGramConfig = SkipGramConfig()) -> WordEmbeddings:
    return train_skipgram(embeddings, corpus, config)[0]

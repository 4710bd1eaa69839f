"""Linear sentiment classifier over frozen word vectors plus hashed bigrams.

A sentence is represented by the mean of its word vectors and its learned
bigram-bucket vectors; a two-way softmax sits on top. Word vectors are never
trained, so a model fitted on one language applies to any language aligned
with it.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dict_project import TranslationDictionary
from .embed_store import WordEmbeddings, unit_rows
from .errors import ConfigError, FormatError, ShapeError, TrainingError

log = logging.getLogger(__name__)

LABELS = ("negative", "positive")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}
DEFAULT_BUCKETS = 2 ** 20
MODES = ("direct", "substitute", "boost")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def bigram_bucket(first: str, second: str, buckets: int) -> int:
    return fnv1a_64((first + "\x01" + second).encode("utf-8")) & (buckets - 1)


@dataclass
class SentimentModel:
    """Two-class linear model. ``bigrams`` holds only buckets that were ever
    trained; every other bucket is a zero row."""

    dim: int
    buckets: int = DEFAULT_BUCKETS
    weights: np.ndarray = None  # (2, dim)
    bias: np.ndarray = None  # (2,)
    bigrams: dict[int, np.ndarray] = field(default_factory=dict)
    trained_epochs: int = 0
    accuracy_trace: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.buckets < 1 or self.buckets & (self.buckets - 1):
            raise ValueError("bucket count must be a power of two")
        if self.weights is None:
            self.weights = np.zeros((2, self.dim))
        if self.bias is None:
            self.bias = np.zeros(2)
        if self.weights.shape != (2, self.dim) or self.bias.shape != (2,):
            raise ShapeError("weight shapes do not match dim")

    def bigram_row(self, bucket: int) -> np.ndarray:
        row = self.bigrams.get(bucket)
        return np.zeros(self.dim) if row is None else row

    def logits(self, feature: np.ndarray) -> np.ndarray:
        return self.weights @ feature + self.bias


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def sentence_buckets(lemmas: Sequence[str], buckets: int) -> list[int]:
    return [bigram_bucket(a, b, buckets) for a, b in zip(lemmas, lemmas[1:])]


def _feature(word_vectors, bucket_ids, model: SentimentModel) -> np.ndarray:
    """Mean over word units (None entries skipped) and bigram units."""
    units = [v for v in word_vectors if v is not None]
    units += [model.bigram_row(b) for b in bucket_ids]
    if not units:
        return np.zeros(model.dim)
    return np.sum(units, axis=0) / len(units)


def featurize(lemmas: Sequence[str], embeddings: WordEmbeddings, model: SentimentModel) -> np.ndarray:
    if not lemmas:
        raise ValueError("empty lemma list")
    return _feature([embeddings.mean_vector(w) for w in lemmas],
                    sentence_buckets(lemmas, model.buckets), model)


def example_loss(model: SentimentModel, word_vectors, bucket_ids, label: int):
    """Cross-entropy of one example and its gradients.

    Returns ``(loss, d_weights, d_bias, d_bigrams)`` where ``d_bigrams`` maps
    bucket -> gradient of that bigram row.
    """
    n_units = sum(v is not None for v in word_vectors) + len(bucket_ids)
    f = _feature(word_vectors, bucket_ids, model)
    p = softmax(model.logits(f))
    loss = -np.log(p[label])
    g = p.copy()
    g[label] -= 1.0
    # explicit two-term sum: commutative, so relabelling the classes is exact
    d_f = g[0] * model.weights[0] + g[1] * model.weights[1]
    d_bigrams: dict[int, np.ndarray] = {}
    for b in bucket_ids:
        d_bigrams[b] = d_bigrams.get(b, 0.0) + d_f / n_units
    return float(loss), np.outer(g, f), g, d_bigrams


def _encode(corpus, embeddings, buckets):
    encoded = []
    for lemmas, label in corpus:
        if label not in LABEL_INDEX:
            raise ValueError(f"unknown label {label!r}")
        encoded.append(([embeddings.mean_vector(w) for w in lemmas],
                        sentence_buckets(lemmas, buckets), LABEL_INDEX[label]))
    return encoded


def _predict_index(model, word_vectors, bucket_ids) -> tuple[int, np.ndarray]:
    p = softmax(model.logits(_feature(word_vectors, bucket_ids, model)))
    return int(p[1] > p[0]), p


def train(corpus: Sequence[tuple[Sequence[str], str]], embeddings: WordEmbeddings,
          epochs: int = 30, learning_rate: float = 0.1, rng_seed: int = 0,
          buckets: int = DEFAULT_BUCKETS) -> SentimentModel:
    """SGD on softmax cross-entropy with a linearly decaying learning rate.

    Only the weights, bias and bigram rows are updated. Examples are visited
    in a fresh seeded permutation every epoch; training accuracy is recorded
    after each epoch in ``model.accuracy_trace``.
    """
    labels = {label for _, label in corpus}
    if labels != set(LABELS):
        raise TrainingError(f"training corpus needs both labels, found {sorted(labels)}")
    rng = np.random.default_rng(rng_seed)
    model = SentimentModel(embeddings.dim, buckets)
    data = _encode(corpus, embeddings, buckets)
    total = epochs * len(data)
    step = 0
    for _ in range(epochs):
        for i in rng.permutation(len(data)):
            vecs, bids, y = data[i]
            lr = learning_rate * (1.0 - step / total)
            step += 1
            _, d_w, d_b, d_bi = example_loss(model, vecs, bids, y)
            model.weights -= lr * d_w
            model.bias -= lr * d_b
            for b, grad in d_bi.items():
                model.bigrams[b] = model.bigram_row(b) - lr * grad
        model.trained_epochs += 1
        correct = sum(_predict_index(model, v, b)[0] == y for v, b, y in data)
        model.accuracy_trace.append(correct / len(data))
    return model


# --------------------------------------------------------------------------
# cross-lingual prediction

class VectorResolver:
    """Maps source lemmas to the vectors a model should see, per transfer mode.

    ``substitute`` swaps each source lemma's vector for the vector of the
    cosine-nearest anchor lemma; ``boost`` averages that with the centroid of
    the lemma's dictionary translations found in ``resource_spaces``.
    """

    def __init__(self, source: WordEmbeddings, mode: str = "direct",
                 anchor: WordEmbeddings | None = None,
                 dictionary: TranslationDictionary | None = None,
                 resource_spaces: Mapping[str, WordEmbeddings] | None = None):
        if mode not in MODES:
            raise ConfigError(f"unknown transfer mode {mode!r}")
        if mode in ("substitute", "boost") and anchor is None:
            raise ConfigError(f"mode {mode!r} needs anchor embeddings")
        if mode == "boost" and dictionary is None:
            raise ConfigError("mode 'boost' needs a translation dictionary")
        if anchor is not None and anchor.dim != source.dim:
            raise ShapeError("anchor and source dimensions differ")
        self.source, self.mode, self.anchor = source, mode, anchor
        self.resource_spaces = dict(resource_spaces or {})
        if mode == "boost" and anchor is not None:
            self.resource_spaces.setdefault(anchor.language, anchor)
        self.translations = dictionary.by_lemma() if dictionary is not None else {}
        self._cache: dict[str, tuple[np.ndarray | None, str | None]] = {}
        if anchor is not None:
            self._anchor_lemmas, vecs = anchor.collapsed()
            self._anchor_vecs = vecs
            self._anchor_unit = unit_rows(vecs)

    def nearest_anchor(self, vec: np.ndarray) -> int:
        scores = self._anchor_unit @ (vec / np.linalg.norm(vec))
        # argmax returns the first maximum, i.e. the most frequent lemma
        return int(np.argmax(scores))

    def resolve(self, lemma: str) -> tuple[np.ndarray | None, str | None]:
        """(vector, anchor lemma it came from) for one source lemma."""
        if lemma in self._cache:
            return self._cache[lemma]
        vec = self.source.mean_vector(lemma)
        anchor_lemma = None
        if self.mode != "direct" and vec is not None and np.any(vec):
            j = self.nearest_anchor(vec)
            vec, anchor_lemma = self._anchor_vecs[j], self._anchor_lemmas[j]
        if self.mode == "boost":
            centroid = self._translation_centroid(lemma)
            if centroid is not None:
                vec = centroid if vec is None else (vec + centroid) / 2.0
        self._cache[lemma] = (vec, anchor_lemma)
        return vec, anchor_lemma

    def _translation_centroid(self, lemma):
        found = []
        for lx in self.translations.get(lemma, ()):
            for lang, t in lx.translations():
                emb = self.resource_spaces.get(lang)
                if emb is not None:
                    found.extend(emb.matrix[i] for i in emb.entries.get(t, ()))
        return np.mean(np.stack(found), axis=0) if found else None

    def encode(self, lemmas: Sequence[str], buckets: int, bigram_keys: str = "source"):
        resolved = [self.resolve(w) for w in lemmas]
        vecs = [v for v, _ in resolved]
        if bigram_keys == "source":
            keys = list(lemmas)
        elif bigram_keys == "anchor":
            keys = [a if a is not None else w for w, (_, a) in zip(lemmas, resolved)]
        else:
            raise ConfigError(f"unknown bigram key mode {bigram_keys!r}")
        return vecs, sentence_buckets(keys, buckets)


def predict(lemmas: Sequence[str], model: SentimentModel, source_embeddings: WordEmbeddings,
            anchor_embeddings: WordEmbeddings | None = None, mode: str = "direct",
            dictionary: TranslationDictionary | None = None,
            resource_spaces: Mapping[str, WordEmbeddings] | None = None,
            bigram_keys: str = "source", resolver: VectorResolver | None = None):
    """Label and probability of that label for one sentence."""
    if not lemmas:
        raise ValueError("empty lemma list")
    if resolver is None:
        resolver = VectorResolver(source_embeddings, mode, anchor_embeddings, dictionary,
                                  resource_spaces)
    idx, p = _predict_index(model, *resolver.encode(lemmas, model.buckets, bigram_keys))
    return LABELS[idx], float(p[idx])


def predict_proba(lemmas, model, resolver: VectorResolver, bigram_keys="source") -> np.ndarray:
    return softmax(model.logits(_feature(*resolver.encode(lemmas, model.buckets, bigram_keys), model)))


@dataclass
class EvaluationReport:
    accuracy: float
    correct: int
    total: int
    confusion: dict[str, dict[str, int]]  # gold -> predicted -> count

    def to_text(self) -> str:
        lines = [f"accuracy: {self.accuracy:.4f} ({self.correct}/{self.total})",
                 "gold\\pred negative positive"]
        for g in LABELS:
            lines.append(f"{g} {self.confusion[g]['negative']} {self.confusion[g]['positive']}")
        return "\n".join(lines) + "\n"


def evaluate(test: Sequence[tuple[Sequence[str], str]], model: SentimentModel,
             source_embeddings: WordEmbeddings, anchor_embeddings: WordEmbeddings | None = None,
             mode: str = "direct", dictionary: TranslationDictionary | None = None,
             resource_spaces: Mapping[str, WordEmbeddings] | None = None,
             bigram_keys: str = "source") -> EvaluationReport:
    if not test:
        raise ValueError("empty test set")
    resolver = VectorResolver(source_embeddings, mode, anchor_embeddings, dictionary, resource_spaces)
    confusion = {g: {p: 0 for p in LABELS} for g in LABELS}
    correct = 0
    for lemmas, gold in test:
        pred, _ = predict(lemmas, model, source_embeddings, bigram_keys=bigram_keys,
                          resolver=resolver)
        confusion[gold][pred] += 1
        correct += pred == gold
    return EvaluationReport(correct / len(test), correct, len(test), confusion)


# --------------------------------------------------------------------------
# corpora and persistence

def load_corpus(path) -> list[tuple[list[str], str]]:
    """``<label>\\t<lemma lemma ...>`` per line; labels other than
    positive/negative (e.g. neutral) are dropped."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            label, tab, text = line.partition("\t")
            lemmas = text.split()
            if not tab or not lemmas:
                raise FormatError(f"{path}: line {lineno}: expected '<label>\\t<lemmas>'")
            if label in LABEL_INDEX:
                out.append((lemmas, label))
    return out


MAGIC = b"XLSM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, dim, buckets, epochs, stored bigram rows


def save_model(model: SentimentModel, path) -> None:
    """Binary layout (little-endian): header, weights (2*dim f32), bias (2 f32),
    then per stored bigram row its bucket (u32) and dim f32 values, ascending
    by bucket."""
    rows = sorted(model.bigrams.items())
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, model.dim, model.buckets,
                             model.trained_epochs, len(rows)))
        f.write(np.asarray(model.weights, dtype="<f4").tobytes())
        f.write(np.asarray(model.bias, dtype="<f4").tobytes())
        for bucket, row in rows:
            f.write(struct.pack("<I", bucket))
            f.write(np.asarray(row, dtype="<f4").tobytes())


def load_model(path) -> SentimentModel:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated model file")
    magic, version, dim, buckets, epochs, n_rows = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: not a sentiment model file")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported model format version {version}")
    expected = _HEADER.size + 4 * (2 * dim + 2) + n_rows * (4 + 4 * dim)
    if len(data) != expected:
        raise FormatError(f"{path}: size {len(data)} does not match header (expected {expected})")
    off = _HEADER.size
    weights = np.frombuffer(data, "<f4", 2 * dim, off).astype(np.float64).reshape(2, dim)
    off += 8 * dim
    bias = np.frombuffer(data, "<f4", 2, off).astype(np.float64)
    off += 8
    bigrams = {}
    for _ in range(n_rows):
        (bucket,) = struct.unpack_from("<I", data, off)
        bigrams[bucket] = np.frombuffer(data, "<f4", dim, off + 4).astype(np.float64)
        off += 4 + 4 * dim
    return SentimentModel(dim, buckets, weights, bias, bigrams, epochs)

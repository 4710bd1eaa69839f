"""
Zero-shot sentiment through an aligned space
============================================

A linear classifier with hashed bigram features is trained on labelled
sentences of the anchor language only. Sentences of a second language are
then classified by swapping each lemma for its nearest anchor lemma
("substitute"), optionally averaged with dictionary translations ("boost").
"""

import numpy as np

from xling.align import RefinementConfig, SeedLexicon, align_supervised, apply_alignment
from xling.dict_project import Lexeme, MeaningGroup, TranslationDictionary
from xling.embed_store import from_vectors
from xling.sentiment import evaluate, train

rng = np.random.default_rng(4)
n_words, dim = 200, 16
cls = np.arange(n_words) % 2
base = rng.standard_normal((2, dim))[cls] + 2.0 * rng.standard_normal((n_words, dim))
q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))

english = from_vectors("eng", [(f"en{i}", base[i]) for i in range(n_words)])
other = from_vectors("myv", [(f"my{i}", base[i] @ q.T + 1.0 * rng.standard_normal(dim))
                             for i in range(n_words)])


def sentences(prefix, count):
    out = []
    for s in range(count):
        y = s % 2
        ids = rng.choice(np.flatnonzero(cls == y), size=4, replace=False)
        ids[0] = rng.integers(n_words)
        out.append(([f"{prefix}{i}" for i in ids], ("negative", "positive")[y]))
    return out


model = train(sentences("en", 300), english, epochs=30)
print(f"training accuracy after 30 epochs: {model.accuracy_trace[-1]:.3f}")

seed = SeedLexicon(tuple((f"my{i}", f"en{i}") for i in range(0, n_words, 4)))
aligned = apply_alignment(other, align_supervised(other, english, seed, RefinementConfig(iterations=5)))

test = sentences("my", 200)
dictionary = TranslationDictionary("myv", tuple(
    Lexeme(f"my{i}", None, (MeaningGroup((("eng", f"en{i}"),)),)) for i in range(n_words)))
for mode in ("direct", "substitute", "boost"):
    rep = evaluate(test, model, aligned, english, mode, dictionary, {"eng": english})
    print(f"{mode:10s} accuracy {rep.accuracy:.3f}")

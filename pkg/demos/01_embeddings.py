"""
Word vectors on disk and in memory
==================================

Builds a tiny space, writes it in word2vec text format, reads it back and
asks for nearest neighbours. Lemmas may own several vectors; lookups
average them.
"""

import tempfile
from pathlib import Path

import numpy as np

from xling.embed_store import (NormalizationPolicy, from_vectors, load_word2vec_text,
                               nearest_neighbors, normalize_vocab, save_word2vec_text)

rng = np.random.default_rng(0)

# A handful of lemmas; "bank" appears twice, so it gets two vectors.
words = ["river", "bank", "money", "water", "bank", "loan"]
emb = from_vectors("eng", [(w, rng.standard_normal(4)) for w in words])
print(f"{len(emb)} lemmas, {emb.n_vectors} vectors, dim {emb.dim}")
print("bank ->", emb.entries["bank"])

# Round trip through the text format (9 significant digits per float).
path = Path(tempfile.mkdtemp()) / "toy.vec"
save_word2vec_text(emb, path)
print(path.read_text(encoding="utf-8").splitlines()[0], "(header: vectors, dim)")
again = load_word2vec_text(path, "eng")
# Rows come back grouped by lemma, so compare lemma by lemma.
err = max(np.max(np.abs(again.matrix[list(again.entries[w])] - emb.matrix[list(emb.entries[w])]))
          for w in emb.entries)
print("max round-trip error:", err)

# Cosine neighbours of the averaged "bank" vector.
for lemma, score in nearest_neighbors(again, again.mean_vector("bank"), k=3):
    print(f"  {lemma:8s} {score:.4f}")

# Tagged vocabularies (e.g. "talo_NOUN", "#compound") can be normalized;
# colliding keys merge into multi-vector lemmas.
tagged = from_vectors("fin", [("talo_NOUN", [1.0, 0.0]), ("talo_VERB", [0.0, 1.0]),
                              ("#kylä", [1.0, 1.0])])
policy = NormalizationPolicy(strip_compound_marker=True, strip_pos_suffix=True)
print({k: v for k, v in normalize_vocab(tagged, policy).entries.items()})

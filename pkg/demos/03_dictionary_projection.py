"""
Embeddings for a language that has only a dictionary
=====================================================

Every lexeme of the bundled toy Erzya dictionary is placed at the centroid
of its translations' vectors in already aligned Finnish, Russian and
English spaces. Lexemes with no translation in any space are skipped and
reported.
"""

import numpy as np

from xling import toy_data_path
from xling.dict_project import build_endangered_embeddings, dictionary_stats, parse_dictionary_xml
from xling.embed_store import from_vectors, nearest_neighbors

dictionary = parse_dictionary_xml(toy_data_path("toy_myv.xml"))
print(dictionary_stats(dictionary).format_table())

# Stand-in aligned spaces: translations of one lexeme share a concept
# vector plus noise, as they would after a good alignment. One Finnish word
# is left out on purpose.
rng = np.random.default_rng(2)
items = {}
for lexeme in dictionary.lexemes:
    concept = rng.standard_normal(8)
    for lang, lemma in lexeme.translations():
        if lemma not in dict(items.get(lang, [])):
            items.setdefault(lang, []).append((lemma, concept + 0.3 * rng.standard_normal(8)))
items["fin"] = [(w, v) for w, v in items["fin"] if w != "kalastaa"]
spaces = {lang: from_vectors(lang, pairs) for lang, pairs in items.items()}

emb, report = build_endangered_embeddings(dictionary, spaces)
print()
print(report.to_text())

# The projected vector of a lexeme lands among its own translations.
lemma = emb.lemmas_by_rank()[0]
print(f"neighbours of {lemma!r} in the Finnish space:")
for word, score in nearest_neighbors(spaces["fin"], emb.mean_vector(lemma), 3):
    print(f"  {word:10s} {score:.4f}")

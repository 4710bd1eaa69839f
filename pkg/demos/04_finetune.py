"""
Fine-tuning projected vectors on a treebank
===========================================

A small CoNLL-U file is read into lemma sequences (multiword ranges and
empty nodes are skipped) and used for a few epochs of skip-gram with
negative sampling. Lemmas absent from the space are admitted with a
small random initialisation.
"""

import tempfile
from pathlib import Path

import numpy as np

from xling.embed_store import from_vectors
from xling.finetune import SkipGramConfig, parse_conllu, train_skipgram

conllu = """\
# sent_id = 1
# text = Кудонть ваныця кискась
# text_en = The dog guarding the house
1\tКудонть\tкудо\tNOUN\t_\t_\t3\tnmod\t_\t_
2\tваныця\tваныця\tVERB\t_\t_\t3\tamod\t_\t_
3\tкискась\tкиска\tNOUN\t_\t_\t0\troot\t_\t_

# sent_id = 2
1-2\tвирезэ\t_\t_\t_\t_\t_\t_\t_\t_
1\tвирь\tвирь\tNOUN\t_\t_\t0\troot\t_\t_
2\tэзэ\tэзэ\tADP\t_\t_\t1\tcase\t_\t_
3\tкиска\t_\tNOUN\t_\t_\t1\tnmod\t_\t_
"""
path = Path(tempfile.mkdtemp()) / "toy.conllu"
path.write_text(conllu, encoding="utf-8")
corpus = parse_conllu(path) * 20
print(corpus[0].lemmas, corpus[0].translation_comments)
print(corpus[1].lemmas)

rng = np.random.default_rng(3)
emb = from_vectors("myv", [(w, rng.standard_normal(10)) for w in ("кудо", "киска", "вирь")])

cfg = SkipGramConfig(window=2, epochs=10, rng_seed=0)
tuned, losses = train_skipgram(emb, corpus, cfg)
print("mean loss per epoch:", " ".join(f"{x:.3f}" for x in losses))
print("vocabulary after fine-tuning:", tuned.lemmas_by_rank())
for w in emb.entries:
    print(f"  {w}: moved {np.linalg.norm(tuned.mean_vector(w) - emb.mean_vector(w)):.3f}")

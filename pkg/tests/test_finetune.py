import math

import numpy as np
import pytest

from xling.embed_store import from_vectors
from xling.errors import FormatError, TrainingError
from xling.finetune import (LemmaSentence, SkipGramConfig, load_sentiment_labels, parse_conllu,
                            sgns_gradients, sgns_loss, skipgram_finetune, train_skipgram)

from conftest import write

CONLLU = """# sent_id = s1
# text = Кудо ули.
# text_en = There is a house.
# text[fi] = On talo.
1\tКудо\tkudo\tNOUN\t_\t_\t2\tnsubj\t_\t_
2\tули\tulems\tVERB\t_\t_\t0\troot\t_\t_

# sent_id = s2
1-2\tвайгелензэ\t_\t_\t_\t_\t_\t_\t_\t_
1\tвайгель\tvajgel\tNOUN\t_\t_\t0\troot\t_\t_
2\tензэ\tenze\tPRON\t_\t_\t1\tnmod\t_\t_
2.1\tx\tghost\tX\t_\t_\t_\t_\t_\t_
3\tПаро\t_\tADJ\t_\t_\t1\tamod\t_\t_
"""


class TestParseConllu:
    def test_sentences(self, tmp_path):
        sents = parse_conllu(write(tmp_path / "t.conllu", CONLLU))
        assert [s.lemmas for s in sents] == [["kudo", "ulems"], ["vajgel", "enze", "паро"]]
        assert sents[0].sentence_id == "s1"
        assert sents[0].translation_comments == {"en": "There is a house.", "fi": "On talo."}
        assert sents[0].sentiment_label is None

    def test_labels_from_sidecar(self, tmp_path):
        labels = load_sentiment_labels(write(tmp_path / "l.tsv", "s2\tpositive\n"))
        sents = parse_conllu(write(tmp_path / "t.conllu", CONLLU), labels)
        assert [s.sentiment_label for s in sents] == [None, "positive"]

    def test_bad_sidecar(self, tmp_path):
        with pytest.raises(FormatError):
            load_sentiment_labels(write(tmp_path / "l.tsv", "s2\tneutral\n"))

    def test_wrong_field_count(self, tmp_path):
        with pytest.raises(FormatError, match="line 2"):
            parse_conllu(write(tmp_path / "t.conllu", "# sent_id = a\n1\tx\tx\n"))

    def test_ids_default_to_position(self, tmp_path):
        text = "1\ta\ta\tX\t_\t_\t0\troot\t_\t_\n\n1\tb\tb\tX\t_\t_\t0\troot\t_\t_"
        assert [s.sentence_id for s in parse_conllu(write(tmp_path / "t.conllu", text))] == ["1", "2"]


# ------------------------------------------------------------------- SGNS

def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)


class TestGradients:
    @pytest.mark.parametrize("seed", range(10))
    def test_finite_differences(self, seed):
        r = np.random.default_rng(seed)
        d, k = 8, 4
        v, u = r.normal(0, 0.5, d), r.normal(0, 0.5, d)
        negs = [r.normal(0, 0.5, d) for _ in range(k)]
        dv, du, dn = sgns_gradients(v, u, negs)
        assert rel_err(dv, numeric_grad(lambda x: sgns_loss(x, u, negs), v)) < 1e-5
        assert rel_err(du, numeric_grad(lambda x: sgns_loss(v, x, negs), u)) < 1e-5
        for j in range(k):
            def f(x, j=j):
                return sgns_loss(v, u, negs[:j] + [x] + negs[j + 1:])
            assert rel_err(dn[j], numeric_grad(f, negs[j])) < 1e-5


def reference_sgns(vocab, vectors, sentence, cfg):
    """Scalar replay of one-sentence training (no OOV words)."""
    rng = np.random.default_rng(cfg.rng_seed)
    idx = {w: i for i, w in enumerate(vocab)}
    w_in = [list(map(float, v)) for v in vectors]
    w_out = [[0.0] * len(vectors[0]) for _ in vocab]
    sent = [idx[w] for w in sentence]
    counts = {}
    for i in sent:
        counts[i] = counts.get(i, 0) + 1
    ids = sorted(counts)
    weights = [counts[i] ** cfg.unigram_power for i in ids]
    total_w = sum(weights)
    cum, acc = [], 0.0
    for wgt in weights:
        acc += wgt
        cum.append(acc / total_w)

    def draw(u):
        for i, c in zip(ids, cum):
            if u < c:
                return i
        return ids[-1]

    sig = lambda x: 1.0 / (1.0 + math.exp(-x))
    total = len(sent) * cfg.epochs
    lr0, lr_end = cfg.initial_learning_rate, min(cfg.min_learning_rate, cfg.initial_learning_rate)
    done = 0
    for _ in range(cfg.epochs):
        rng.permutation(1)
        for pos, c in enumerate(sent):
            lr = lr0 - (lr0 - lr_end) * done / total
            done += 1
            for cpos in range(max(0, pos - cfg.window), min(len(sent), pos + cfg.window + 1)):
                if cpos == pos:
                    continue
                ctx = sent[cpos]
                negs = [draw(u) for u in rng.random(cfg.negative_samples)]
                grad = [0.0] * len(w_in[c])
                for t, label in [(ctx, 1.0)] + [(n, 0.0) for n in negs if n != ctx]:
                    s = sig(sum(a * b for a, b in zip(w_out[t], w_in[c])))
                    g = lr * (label - s)
                    for j in range(len(grad)):
                        grad[j] += g * w_out[t][j]
                    for j in range(len(grad)):
                        w_out[t][j] += g * w_in[c][j]
                for j in range(len(grad)):
                    w_in[c][j] += grad[j]
    return np.array(w_in)


class TestSkipGram:
    def setup_method(self):
        r = np.random.default_rng(5)
        self.vocab = ["a", "b", "c", "d"]
        self.emb = from_vectors("myv", [(w, r.normal(0, 0.3, 5)) for w in self.vocab])

    def test_matches_scalar_reference(self):
        cfg = SkipGramConfig(window=1, negative_samples=3, epochs=1, initial_learning_rate=0.5,
                             rng_seed=11)
        sentence = ["a", "b", "c", "a", "d"]
        out = skipgram_finetune(self.emb, [LemmaSentence(sentence, "1")], cfg)
        want = reference_sgns(self.vocab, list(self.emb.matrix), sentence, cfg)
        got = np.stack([out.matrix[out.entries[w][0]] for w in self.vocab])
        assert not np.allclose(got, self.emb.matrix)
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_zero_epochs_returns_collapsed_input(self):
        emb = from_vectors("myv", [("a", [1.0, 2.0]), ("b", [0.5, 0.5]), ("a", [3.0, 0.0])])
        out = skipgram_finetune(emb, [LemmaSentence(["a", "b"], "1")],
                                SkipGramConfig(epochs=0, admit_oov=False))
        assert list(out.entries) == ["a", "b"]
        np.testing.assert_array_equal(out.matrix, [[2.0, 1.0], [0.5, 0.5]])

    def test_zero_learning_rate_is_bit_identical(self):
        corpus = [LemmaSentence(["a", "b", "c", "zz"], "1"), LemmaSentence(["d", "a"], "2")]
        out = skipgram_finetune(self.emb, corpus, SkipGramConfig(initial_learning_rate=0.0))
        for w in self.vocab:
            assert out.matrix[out.entries[w][0]].tobytes() == self.emb.matrix[self.emb.entries[w][0]].tobytes()

    def test_oov_admission(self):
        corpus = [LemmaSentence(["a", "new", "b", "rare"], "1"), LemmaSentence(["new", "c"], "2")]
        out = skipgram_finetune(self.emb, corpus, SkipGramConfig(min_count=2, epochs=1))
        assert set(out.entries) == set(self.vocab) | {"new"}
        assert out.frequency_rank["new"] == len(self.vocab)
        everything = skipgram_finetune(self.emb, corpus, SkipGramConfig(epochs=1))
        assert len(everything) == len(self.vocab) + 2
        closed = skipgram_finetune(self.emb, corpus, SkipGramConfig(epochs=1, admit_oov=False))
        assert set(closed.entries) == set(self.vocab)

    def test_oov_initial_range(self):
        out = skipgram_finetune(self.emb, [LemmaSentence(["q"], "1")], SkipGramConfig(epochs=0))
        v = out.matrix[out.entries["q"][0]]
        assert np.all(np.abs(v) <= 0.5 / 5)

    def test_deterministic(self):
        corpus = [LemmaSentence(list("abcdab"), "1"), LemmaSentence(list("dcba"), "2"),
                  LemmaSentence(list("xyab"), "3")]
        cfg = SkipGramConfig(epochs=3, rng_seed=3)
        a, b = skipgram_finetune(self.emb, corpus, cfg), skipgram_finetune(self.emb, corpus, cfg)
        assert a.matrix.tobytes() == b.matrix.tobytes()

    def test_losses_finite(self):
        r = np.random.default_rng(0)
        corpus = [LemmaSentence([str(x) for x in r.integers(0, 12, 8)], str(i)) for i in range(30)]
        _, losses = train_skipgram(self.emb, corpus, SkipGramConfig(epochs=4))
        assert len(losses) == 4 and np.all(np.isfinite(losses))

    def test_empty_corpus(self):
        with pytest.raises(TrainingError):
            skipgram_finetune(self.emb, [], SkipGramConfig())

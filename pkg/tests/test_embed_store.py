import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xling.embed_store import (NormalizationPolicy, WordEmbeddings, cosine, from_vectors,
                               load_word2vec_text, lookup, nearest_neighbors, normalize_vocab,
                               save_word2vec_text)
from xling.errors import DegenerateInputError, FormatError

from conftest import make_space, write


class TestLoad:
    def test_minimal_file(self, tmp_path):
        emb = load_word2vec_text(write(tmp_path / "a.vec", "2 3\na 1 0 0\nb 0 1 0\n"), "eng")
        assert len(emb) == 2 and emb.dim == 3
        assert emb.frequency_rank == {"a": 0, "b": 1}
        np.testing.assert_array_equal(lookup(emb, "b")[0], [0, 1, 0])

    def test_duplicate_tokens_share_an_entry(self, tmp_path):
        emb = load_word2vec_text(write(tmp_path / "a.vec", "1 2\na 1 0\na 0 1"), "eng")
        assert list(emb.entries) == ["a"]
        assert [v.tolist() for v in lookup(emb, "a")] == [[1, 0], [0, 1]]

    def test_crlf_and_trailing_space(self, tmp_path):
        path = tmp_path / "a.vec"
        path.write_bytes(b"2 2\r\na 1 2 \r\nb 3 4\r\n")
        emb = load_word2vec_text(path, "eng")
        np.testing.assert_array_equal(emb.matrix, [[1, 2], [3, 4]])

    @pytest.mark.parametrize("text, fragment", [
        ("x 3\na 1 0 0\n", "line 1"),
        ("2\na 1 0 0\n", "line 1"),
        ("2 3\na 1 0 0\nb 0 1\n", "line 3"),
        ("1 3\na 1 0 0\nb 0 1 0\n", "header announces 1"),
        ("2 3\na 1 0 0\n\nb 0 1 0\n", "line 3"),
        ("3 3\na 1 0 0\nb 0 1 0\n", "header announces 3"),
        ("1 2\na 1 zz\n", "line 2"),
    ])
    def test_malformed(self, tmp_path, text, fragment):
        with pytest.raises(FormatError, match=fragment):
            load_word2vec_text(write(tmp_path / "bad.vec", text), "eng")


class TestSave:
    def test_round_trip_structure(self, tmp_path):
        emb = from_vectors("rus", [("кот", [0.5, -1.25]), ("пёс", [3.0, 1e-7]), ("кот", [1, 2])])
        save_word2vec_text(emb, tmp_path / "out.vec")
        assert load_word2vec_text(tmp_path / "out.vec", "rus") == emb

    def test_multi_vector_lemma_written_per_vector(self, tmp_path):
        emb = from_vectors("rus", [("a", [1, 0]), ("b", [0, 1]), ("a", [1, 1])])
        save_word2vec_text(emb, tmp_path / "out.vec")
        lines = (tmp_path / "out.vec").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "3 2"
        assert sum(line.startswith("a ") for line in lines) == 2

    def test_empty_embeddings_cannot_exist(self, tmp_path):
        with pytest.raises(ValueError):
            WordEmbeddings("eng", 2, {}, np.zeros((0, 2)))
        assert not (tmp_path / "out.vec").exists()

    def test_large_file_is_byte_stable(self, tmp_path, rng):
        # oracle: byte comparison after one load/save cycle
        n, d = 50_000, 8
        emb = make_space(rng.standard_normal((n, d)), "eng")
        first, second = tmp_path / "first.vec", tmp_path / "second.vec"
        save_word2vec_text(emb, first)
        save_word2vec_text(load_word2vec_text(first, "eng"), second)
        assert first.read_bytes() == second.read_bytes()
        back = load_word2vec_text(first, "eng")
        assert list(back.entries) == list(emb.entries)
        np.testing.assert_allclose(back.matrix, emb.matrix, rtol=1e-8, atol=0)


class TestNormalize:
    def test_compound_marker(self):
        emb = from_vectors("fin", [("kerros#talo", [1.0, 2.0])])
        out = normalize_vocab(emb, NormalizationPolicy(strip_compound_marker=True))
        assert list(out.entries) == ["kerrostalo"]
        np.testing.assert_array_equal(lookup(out, "kerrostalo")[0], [1.0, 2.0])

    def test_leading_marker_removed(self):
        emb = from_vectors("fin", [("#talo", [1.0])])
        out = normalize_vocab(emb, NormalizationPolicy(strip_compound_marker=True))
        assert list(out.entries) == ["talo"]

    def test_pos_suffixes_merge(self):
        emb = from_vectors("rus", [("кошка_NOUN", [0, 0]), ("собака_NOUN", [1, 0]),
                                   ("собака_VERB", [0, 1])])
        out = normalize_vocab(emb, NormalizationPolicy(strip_pos_suffix=True))
        assert list(out.entries) == ["кошка", "собака"]
        assert len(lookup(out, "собака")) == 2
        assert out.frequency_rank == {"кошка": 0, "собака": 1}

    def test_merged_lemma_takes_best_rank(self):
        emb = from_vectors("rus", [("a_X", [0]), ("b_NOUN", [1]), ("c", [2]), ("b_VERB", [3])])
        out = normalize_vocab(emb, NormalizationPolicy(strip_pos_suffix=True))
        assert out.frequency_rank == {"a": 0, "b": 1, "c": 2}

    def test_separator_inside_lemma_kept(self):
        emb = from_vectors("eng", [("new_york_PROPN", [1.0])])
        out = normalize_vocab(emb, NormalizationPolicy(strip_pos_suffix=True))
        assert list(out.entries) == ["new_york"]

    def test_identity_policy(self):
        emb = from_vectors("rus", [("a#b_NOUN", [1, 2]), ("C", [3, 4])])
        assert normalize_vocab(emb, NormalizationPolicy()) == emb

    @given(st.lists(st.text(alphabet="ab#_NOUVERBxyz", min_size=1, max_size=8), min_size=1,
                    max_size=12),
           st.booleans(), st.booleans(), st.booleans())
    def test_idempotent_and_row_preserving(self, words, marker, pos, lower):
        words = [w for w in words if w.strip("#")]
        if not words:
            return
        emb = from_vectors("xx", [(w, [float(i)]) for i, w in enumerate(words)])
        policy = NormalizationPolicy(marker, "#", pos, "_", lower)
        try:
            once = normalize_vocab(emb, policy)
        except ValueError:
            return  # every character was a marker
        assert normalize_vocab(once, policy) == once
        assert once.n_vectors == emb.n_vectors
        assert sorted(i for idx in once.entries.values() for i in idx) == list(range(emb.n_vectors))


class TestCosine:
    def test_examples(self):
        v = np.array([0.3, -2.0, 5.0])
        assert cosine(v, v) == pytest.approx(1.0)
        assert cosine([1, 0], [0, 1]) == 0.0
        assert cosine([1, 0], [1, 1]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_zero_vector(self):
        with pytest.raises(DegenerateInputError):
            cosine([0, 0], [1, 0])

    @given(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
           st.lists(st.floats(-100, 100), min_size=3, max_size=3))
    def test_symmetric_and_scale_invariant(self, a, b):
        a, b = np.array(a), np.array(b)
        if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
            return
        c = cosine(a, b)
        assert -1.0 <= c <= 1.0
        assert abs(c - cosine(b, a)) < 1e-12
        assert abs(c - cosine(2 * a, b)) < 1e-12


def brute_force_neighbors(emb, query, k):
    scored = []
    for lemma, idx in emb.entries.items():
        best = max(sum(x * y for x, y in zip(emb.matrix[i], query))
                   / (math.sqrt(sum(x * x for x in emb.matrix[i])) * math.sqrt(sum(y * y for y in query)))
                   for i in idx)
        scored.append((-best, emb.frequency_rank[lemma], lemma))
    scored.sort()
    return [(lemma, -s) for s, _, lemma in scored[:k]]


class TestNearestNeighbors:
    def test_self_query(self, rng):
        emb = make_space(rng.standard_normal((6, 4)))
        (lemma, score), = nearest_neighbors(emb, emb.matrix[3], 1)
        assert lemma == "w3" and score == pytest.approx(1.0)

    def test_toy_space_matches_brute_force(self):
        emb = make_space([[1, 0], [0.9, 0.1], [0, 1], [-1, 0], [0.5, 0.5]])
        got = nearest_neighbors(emb, [1.0, 0.2], 3)
        want = brute_force_neighbors(emb, [1.0, 0.2], 3)
        assert [w for w, _ in got] == [w for w, _ in want]
        np.testing.assert_allclose([s for _, s in got], [s for _, s in want], atol=1e-12)

    def test_ties_by_rank_then_lemma(self):
        emb = from_vectors("xx", [("zeta", [1, 0]), ("alpha", [2, 0]), ("beta", [0, 1])])
        assert [w for w, _ in nearest_neighbors(emb, [1, 0], 2)] == ["zeta", "alpha"]

    def test_multi_vector_scores_by_best_vector(self):
        emb = from_vectors("xx", [("a", [0, 1]), ("b", [0.7, 0.7]), ("a", [1, 0])])
        assert nearest_neighbors(emb, [1, 0], 1)[0] == ("a", pytest.approx(1.0))

    def test_zero_query(self, rng):
        with pytest.raises(DegenerateInputError):
            nearest_neighbors(make_space(rng.standard_normal((3, 2))), [0, 0], 1)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 100), st.integers(1, 8), st.integers(1, 10), st.integers(0, 2**31))
    def test_agrees_with_brute_force(self, n, d, k, seed):
        r = np.random.default_rng(seed)
        emb = make_space(r.standard_normal((n, d)))
        q = r.standard_normal(d)
        got = nearest_neighbors(emb, q, k)
        want = brute_force_neighbors(emb, q, k)
        assert [w for w, _ in got] == [w for w, _ in want]
        np.testing.assert_allclose([s for _, s in got], [s for _, s in want], atol=1e-12)

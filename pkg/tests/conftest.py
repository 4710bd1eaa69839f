import numpy as np
import pytest

from xling.embed_store import WordEmbeddings


def make_space(matrix, language="xx", prefix="w"):
    """One single-vector lemma per row, ranked by row order."""
    matrix = np.asarray(matrix, dtype=float)
    return WordEmbeddings(language, matrix.shape[1],
                          {f"{prefix}{i}": (i,) for i in range(matrix.shape[0])}, matrix)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TOY_VOCAB = {
    "fin": ["talo", "tie", "kylä", "vesi", "tuli", "hyvä", "kaunis", "huono", "ilo", "koira",
            "kala", "lämmin"],
    "rus": ["дом", "деревня", "вода", "огонь", "плохой", "собака", "тёплый", "народ", "хороший",
            "рыба", "дорога", "солнце", "печь"],
    "eng": ["home", "road", "water", "good", "bad", "joy", "dog", "fish", "evil"],
}


def toy_spaces(seed=7, dim=6):
    """Small spaces holding most translations of the bundled toy dictionaries.

    ``собака`` carries two vectors; ``село``, ``kalastaa`` and ``delight`` are
    deliberately missing.
    """
    r = np.random.default_rng(seed)
    spaces = {}
    for lang, words in TOY_VOCAB.items():
        items = [(w, r.standard_normal(dim)) for w in words]
        if lang == "rus":
            items.append(("собака", r.standard_normal(dim)))
        from xling.embed_store import from_vectors
        spaces[lang] = from_vectors(lang, items)
    return spaces


def separable_corpus(seed=0, n=200, dim=100, noise=0.5, words_per_sentence=1):
    """Two Gaussian class prototypes; each sentence uses fresh words drawn
    around its class prototype. Returns (embeddings, corpus)."""
    from xling.embed_store import from_vectors

    r = np.random.default_rng(seed)
    protos = r.standard_normal((2, dim))
    items, corpus = [], []
    for i in range(n):
        y = i % 2
        words = []
        for j in range(words_per_sentence):
            w = f"w{i}_{j}"
            items.append((w, protos[y] + noise * r.standard_normal(dim)))
            words.append(w)
        corpus.append((words, ("negative", "positive")[y]))
    return from_vectors("eng", items), corpus


# acceptance lines are echoed again at the end of the run so they survive
# output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

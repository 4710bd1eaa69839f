"""Cross-lingual word embeddings for languages that only have translation
dictionaries: reduce and align resource-rich spaces, project dictionary
lexemes into them, fine-tune on treebank text, and transfer a sentiment
classifier across languages."""

from importlib import resources

__version__ = "0.1.0"

from .align import (AlignmentResult, RefinementConfig, SeedLexicon, align_supervised,  # noqa: E402
                    apply_alignment, csls, induce_lexicon, load_seed_lexicon, procrustes)
from .dict_project import (TranslationDictionary, build_endangered_embeddings,  # noqa: E402
                           dictionary_stats, parse_dictionary_xml, project_lexeme)
from .dim_reduce import ReductionConfig, post_process, reduce  # noqa: E402
from .embed_store import (NormalizationPolicy, WordEmbeddings, cosine, load_word2vec_text,  # noqa: E402
                          lookup, nearest_neighbors, normalize_vocab, save_word2vec_text)
from .finetune import LemmaSentence, SkipGramConfig, parse_conllu, skipgram_finetune  # noqa: E402
from .sentiment import SentimentModel, evaluate, featurize, predict, train  # noqa: E402


def toy_data_path(name: str):
    """Path of a bundled toy file, e.g. ``toy_data_path("toy_myv.xml")``."""
    return resources.files(__name__).joinpath("data", name)

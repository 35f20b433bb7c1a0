"""Constrained word ordering toolkit (Python bindings)."""

from ._wordorder import *  # noqa: F401,F403
from ._wordorder import (
    BpeMerges,
    ConstraintTree,
    DecodeConfig,
    NgramModel,
    PyScorer,
    Vocabulary,
    beam_search,
    corpus_bleu,
    order_sentence,
    parse_conll,
    serialize_penman,
)

__version__ = "0.1.0"


def train_ngram(sentences, order=3, smoothing="kneser_ney"):
    """Trains an n-gram scorer on subword sentences (lists of strings)."""
    tokens = sorted({t for s in sentences for t in s})
    vocab = Vocabulary.with_reserved(tokens)
    corpus = [[vocab.id_or_unk(t) for t in s] for s in sentences]
    return NgramModel.train(vocab, corpus, order, smoothing)

"""Glue between corpus preparation, the model and the analysis report."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .classifier import HDSF, History, ModelConfig, evaluate, train
from .config import Config
from .corpus import (Document, RawDocument, Vocabulary, load_embeddings, load_jsonl,
                     load_wordlist, split_corpus, tokenize_corpus)
from .numerics import gradient_check

log = logging.getLogger(__name__)

SPLITS = ("all", "train", "dev", "test")


@dataclass
class PreparedCorpus:
    train: list
    dev: list
    test: list
    skipped: list

    def split(self, name: str) -> list:
        if name == "all":
            return self.train + self.dev + self.test
        return getattr(self, name)


def tokenize_with(config: Config, raws: list[RawDocument]):
    stop = load_wordlist(config.stopwords, "stopwords.txt")
    abbrev = load_wordlist(config.abbreviations, "abbreviations.txt")
    return tokenize_corpus(raws, stop, abbrev, config.max_sentences)


def prepare(config: Config, raws: list[RawDocument] | None = None) -> PreparedCorpus:
    """Tokenize and split; splits hold tokenized (string) documents."""
    if raws is None:
        raws = load_jsonl(config.corpus)
    docs, skipped = tokenize_with(config, raws)
    train_docs, dev, test = split_corpus(docs, config.dev_per_class, config.test_per_class, config.seed)
    return PreparedCorpus(train_docs, dev, test, skipped)


def build_model(config: Config, vocab: Vocabulary) -> HDSF:
    model = HDSF(config.model_config(len(vocab)), seed=config.seed)
    if config.embeddings:
        table, found = load_embeddings(config.embeddings, vocab, model.encoder.embedding.data)
        model.encoder.embedding.data[...] = table
        log.info("loaded %d/%d pretrained word vectors", found, len(vocab) - 2)
    return model


@dataclass
class TrainResult:
    model: HDSF
    vocab: Vocabulary
    history: History
    dev_accuracy: float | None
    test_accuracy: float | None


def run_training(config: Config, corpus: PreparedCorpus, callback=None) -> TrainResult:
    vocab = Vocabulary.build(corpus.train, config.min_count)
    encode = lambda docs: [vocab.encode(d) for d in docs]  # noqa: E731
    train_docs, dev, test = encode(corpus.train), encode(corpus.dev), encode(corpus.test)
    model = build_model(config, vocab)
    history = train(model, train_docs, dev, config.train_config(), callback)
    return TrainResult(model, vocab, history,
                       evaluate(model, dev) if dev else None,
                       evaluate(model, test) if test else None)


def parse_documents(model: HDSF, vocab: Vocabulary, docs) -> list[tuple[object, object, np.ndarray]]:
    """``(tokenized_doc, tree, r)`` for each document."""
    out = []
    for d in docs:
        tree, _, r = model.parse(vocab.encode(d))
        out.append((d, tree, r))
    return out


GRADCHECK_TOLERANCE = 1e-4
# Toy setup whose coordinates all carry gradients well above the float64
# central-difference noise floor (|g| >> 1e-6 at epsilon 1e-5).
GRADCHECK_SEED = 21
GRADCHECK_SCALE = 1.0


def toy_batch():
    return [Document("toy-fake", ((2, 3, 4), (5, 6), (7, 2, 3, 4)), "fake"),
            Document("toy-real", ((3,), (4, 5, 6, 7)), "real")]


def toy_model(child_context: str = "printed", leaky_slope: float = 0.01) -> HDSF:
    cfg = ModelConfig(vocab_size=8, embedding_dim=3, hidden_size=4, leaky_slope=leaky_slope,
                      init_scale=GRADCHECK_SCALE, child_context=child_context)
    return HDSF(cfg, seed=GRADCHECK_SEED)


def gradcheck_toy(child_context: str = "printed", leaky_slope: float = 0.01,
                  epsilon: float = 1e-5) -> dict[str, float]:
    """Worst relative error per parameter of the full loss on the 2-document toy batch."""
    model = toy_model(child_context, leaky_slope)
    docs = toy_batch()
    return gradient_check(lambda: model.loss(docs), model.parameters(), epsilon)

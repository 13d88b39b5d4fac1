"""Corpus ingestion: JSON-lines loading, cleaning, sentence splitting, vocabulary and splits."""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

LABELS = ("fake", "real")  # index 0 is fake: y=1 pairs with p_fake
SENTENCE_END = ".!?"
DEFAULT_MAX_SENTENCES = 60

_TOKEN_RE = re.compile(r"[^\W\d_]+|\d+|[.!?]")
_ASCII_WORD_RE = re.compile(r"[a-z]+")
_TRAILING_CLOSERS = "\"')]}”’"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    label: str


@dataclass(frozen=True)
class TokenizedDocument:
    id: str
    sentences: tuple[tuple[str, ...], ...]
    label: str


@dataclass(frozen=True)
class Document:
    id: str
    sentences: tuple[tuple[int, ...], ...]
    label: str

    def __post_init__(self):
        if not self.sentences or any(len(s) == 0 for s in self.sentences):
            raise CorpusError(f"document {self.id!r} needs at least one nonempty sentence")
        if self.label not in LABELS:
            raise CorpusError(f"unknown label {self.label!r}")

    @property
    def k(self) -> int:
        return len(self.sentences)

    @property
    def target(self) -> int:
        return LABELS.index(self.label)


@dataclass(frozen=True)
class SkipRecord:
    id: str
    reason: str


def _read_list(path) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines()
                     if line.strip() and not line.startswith("#"))


def load_wordlist(path=None, default: str = "stopwords.txt") -> frozenset[str]:
    """Read a one-entry-per-line list, falling back to the bundled file."""
    if path is None:
        return _read_list(resources.files("hdsf") / "data" / default)
    return _read_list(path)


def default_stopwords() -> frozenset[str]:
    return load_wordlist(None, "stopwords.txt")


def default_abbreviations() -> frozenset[str]:
    return load_wordlist(None, "abbreviations.txt")


def tokenize(text: str, stopwords: Iterable[str] = ()) -> list[str]:
    """Lowercase and split into cleaned tokens.

    Keeps plain a-z words and sentence punctuation; drops numbers, words with
    any non-English letter, other symbols and stop-words.
    """
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if tok in SENTENCE_END:
            out.append(tok)
        elif _ASCII_WORD_RE.fullmatch(tok) and tok not in stop:
            out.append(tok)
    return out


def preprocess(text: str, stopwords: Iterable[str] | None = None) -> str:
    if stopwords is None:
        stopwords = default_stopwords()
    return " ".join(tokenize(text, stopwords))


def segment_sentences(text: str, abbreviations: Iterable[str] | None = None) -> list[str]:
    """Split raw text after '.', '!' or '?' unless the word is a known abbreviation."""
    abbrev = default_abbreviations() if abbreviations is None else frozenset(a.lower() for a in abbreviations)
    sentences: list[str] = []
    current: list[str] = []
    for word in text.split():
        current.append(word)
        core = word.rstrip(_TRAILING_CLOSERS)
        if not core or core[-1] not in SENTENCE_END:
            continue
        if core.lower().lstrip("\"'([{“‘") in abbrev:
            continue
        sentences.append(" ".join(current))
        current = []
    if current:
        sentences.append(" ".join(current))
    return [s for s in sentences if s.strip()]


def tokenize_document(raw: RawDocument, stopwords=None, abbreviations=None,
                      max_sentences: int = DEFAULT_MAX_SENTENCES) -> TokenizedDocument | SkipRecord:
    """Segment the raw text, then clean each sentence.

    Sentences left without any word token are dropped; documents left with
    no sentences come back as a :class:`SkipRecord`.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    sentences = []
    for sent in segment_sentences(raw.text, abbreviations):
        toks = tokenize(sent, stopwords)
        if any(t not in SENTENCE_END for t in toks):
            sentences.append(tuple(toks))
    if not sentences:
        return SkipRecord(raw.id, "no sentences left after preprocessing")
    if max_sentences and len(sentences) > max_sentences:
        sentences = sentences[:max_sentences]
    return TokenizedDocument(raw.id, tuple(sentences), raw.label)


def tokenize_corpus(raws: Iterable[RawDocument], stopwords=None, abbreviations=None,
                    max_sentences: int = DEFAULT_MAX_SENTENCES):
    """Tokenize every document; returns ``(documents, skipped)``."""
    if stopwords is None:
        stopwords = default_stopwords()
    if abbreviations is None:
        abbreviations = default_abbreviations()
    docs, skipped = [], []
    for raw in raws:
        result = tokenize_document(raw, stopwords, abbreviations, max_sentences)
        if isinstance(result, SkipRecord):
            log.warning("skipping document %s: %s", result.id, result.reason)
            skipped.append(result)
        else:
            docs.append(result)
    return docs, skipped


def load_jsonl(path) -> list[RawDocument]:
    path = Path(path)
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("id", "text", "label") if k not in obj]
            if missing:
                raise CorpusError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}")
            doc_id, text, label = obj["id"], obj["text"], obj["label"]
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise CorpusError(f"{path}:{lineno}: id and text must be strings")
            if label not in LABELS:
                raise CorpusError(f"{path}:{lineno}: unknown label {label!r}")
            if not text.strip():
                raise CorpusError(f"{path}:{lineno}: empty text")
            if doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append(RawDocument(doc_id, text, label))
    if not docs:
        log.warning("corpus %s is empty", path)
    return docs


def write_jsonl(path, docs: Iterable[RawDocument]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.text, "label": d.label}) + "\n")


def split_corpus(docs: Sequence, dev_per_class: int, test_per_class: int, seed: int):
    """Class-balanced dev/test sampling; everything else is train, in input order."""
    rng = random.Random(seed)
    dev_idx: list[int] = []
    test_idx: list[int] = []
    for label in LABELS:
        idx = [i for i, d in enumerate(docs) if d.label == label]
        need = dev_per_class + test_per_class
        if len(idx) < need:
            raise CorpusError(f"class {label!r} has {len(idx)} documents, need {need}")
        rng.shuffle(idx)
        dev_idx += idx[:dev_per_class]
        test_idx += idx[dev_per_class:need]
    taken = set(dev_idx) | set(test_idx)
    train = [d for i, d in enumerate(docs) if i not in taken]
    dev = [docs[i] for i in sorted(dev_idx)]
    test = [docs[i] for i in sorted(test_idx)]
    return train, dev, test


@dataclass
class Vocabulary:
    tokens: list[str] = field(default_factory=lambda: ["<pad>", "<unk>"])

    PAD = 0
    UNK = 1

    def __post_init__(self):
        if self.tokens[:2] != ["<pad>", "<unk>"]:
            raise CorpusError("vocabulary must start with <pad>, <unk>")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise CorpusError("duplicate vocabulary entry")

    @classmethod
    def build(cls, docs: Iterable[TokenizedDocument], min_count: int = 1) -> "Vocabulary":
        counts: dict[str, int] = {}
        for d in docs:
            for sent in d.sentences:
                for tok in sent:
                    counts[tok] = counts.get(tok, 0) + 1
        kept = sorted(t for t, c in counts.items() if c >= min_count)
        return cls(["<pad>", "<unk>"] + kept)

    def __len__(self):
        return len(self.tokens)

    def id(self, token: str) -> int:
        return self.index.get(token, self.UNK)

    def encode(self, doc: TokenizedDocument) -> Document:
        return Document(doc.id, tuple(tuple(self.id(t) for t in s) for s in doc.sentences), doc.label)


def load_embeddings(path, vocab: Vocabulary, base: np.ndarray) -> tuple[np.ndarray, int]:
    """Overwrite rows of ``base`` for words found in a text embedding file.

    Returns the new matrix and the number of rows replaced.  ``path=None``
    leaves the random initialization untouched.  A leading word2vec-style
    "count dim" header line is tolerated.
    """
    table = np.array(base, dtype=np.float64)
    if path is None:
        return table, 0
    width = None
    found = 0
    with Path(path).open(encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            vec = parts[1:]
            if width is None:
                width = len(vec)
                if width != table.shape[1]:
                    raise CorpusError(f"{path}: embedding dim {width} != configured {table.shape[1]}")
            elif len(vec) != width:
                raise CorpusError(f"{path}:{lineno}: dimension {len(vec)} differs from {width}")
            idx = vocab.index.get(parts[0])
            if idx is None or idx < 2:
                continue
            table[idx] = np.array(vec, dtype=np.float64)
            found += 1
    return table, found

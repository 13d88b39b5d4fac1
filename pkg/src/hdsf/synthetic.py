"""Small synthetic corpora for smoke runs and tests.

Documents share a pool of filler words; every sentence also carries one word
from a class-specific keyword pool, so the classes are separable by content.
All words are made-up lowercase ASCII and survive preprocessing.

    python -m hdsf.synthetic corpus.jsonl --per-class 100 --seed 0
"""

from __future__ import annotations

import argparse
import random

from .corpus import LABELS, RawDocument, default_stopwords, write_jsonl

_ONSETS = "b c d f g k l m n p r s t v z".split()
_VOWELS = "a e i o u".split()


def _word_pool(rng: random.Random, n: int, taken: set[str]) -> list[str]:
    stop = default_stopwords()
    pool: list[str] = []
    while len(pool) < n:
        w = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(rng.randint(2, 3)))
        if w not in taken and w not in stop:
            taken.add(w)
            pool.append(w)
    return pool


def make_corpus(per_class: int, seed: int = 0, n_filler: int = 60, n_keywords: int = 8,
                sentences: tuple[int, int] = (2, 6), words: tuple[int, int] = (3, 7)) -> list[RawDocument]:
    rng = random.Random(seed)
    taken: set[str] = set()
    filler = _word_pool(rng, n_filler, taken)
    keywords = {label: _word_pool(rng, n_keywords, taken) for label in LABELS}
    docs = []
    for i in range(per_class * len(LABELS)):
        label = LABELS[i % len(LABELS)]
        sents = []
        for _ in range(rng.randint(*sentences)):
            toks = [rng.choice(filler) for _ in range(rng.randint(*words))]
            toks.insert(rng.randrange(len(toks) + 1), rng.choice(keywords[label]))
            sents.append(" ".join(toks).capitalize() + rng.choice(".!?"))
        docs.append(RawDocument(f"syn-{i:04d}", " ".join(sents), label))
    return docs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="write a synthetic fake/real corpus as JSON lines")
    ap.add_argument("path")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    write_jsonl(args.path, make_corpus(args.per_class, args.seed))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

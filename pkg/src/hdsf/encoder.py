"""Sentence encoder: word embeddings fed to a bidirectional LSTM.

A sentence vector is the mean of the final forward state and the final
backward state, where the backward cell reads the tokens in reverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import (ContractViolation, Parameter, ShapeError, Tensor, sigmoid, take_rows,
                       tanh)


def uniform_init(rng: np.random.Generator, shape, scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=shape)


@dataclass
class LSTMCell:
    """Gate weights stacked column-wise in the order input, forget, output, candidate."""

    W_x: Parameter
    W_h: Parameter
    b: Parameter

    @classmethod
    def init(cls, rng, input_size: int, hidden_size: int, scale: float = 0.1, name: str = "lstm"):
        return cls(Parameter(uniform_init(rng, (input_size, 4 * hidden_size), scale), f"{name}.W_x"),
                   Parameter(uniform_init(rng, (hidden_size, 4 * hidden_size), scale), f"{name}.W_h"),
                   Parameter(uniform_init(rng, (4 * hidden_size,), scale), f"{name}.b"))

    @property
    def input_size(self) -> int:
        return self.W_x.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.W_x, self.W_h, self.b]


def lstm_step(cell: LSTMCell, h_prev, c_prev, w_t):
    """One LSTM recurrence step; works on single vectors or row batches."""
    H = cell.hidden_size
    if w_t.shape[-1] != cell.input_size:
        raise ShapeError(f"input width {w_t.shape[-1]} != cell input size {cell.input_size}")
    if h_prev.shape[-1] != H or c_prev.shape != h_prev.shape:
        raise ShapeError("hidden/cell state shape does not match the cell")
    z = w_t @ cell.W_x + h_prev @ cell.W_h + cell.b
    gates = sigmoid(z[..., :3 * H])
    i, f, o = gates[..., :H], gates[..., H:2 * H], gates[..., 2 * H:]
    g = tanh(z[..., 3 * H:])
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c


@dataclass
class SentenceEncoder:
    embedding: Parameter
    forward_cell: LSTMCell
    backward_cell: LSTMCell

    @classmethod
    def init(cls, rng, vocab_size: int, embedding_dim: int, hidden_size: int, scale: float = 0.1):
        emb = Parameter(uniform_init(rng, (vocab_size, embedding_dim), scale), "embedding")
        return cls(emb,
                   LSTMCell.init(rng, embedding_dim, hidden_size, scale, "lstm_fwd"),
                   LSTMCell.init(rng, embedding_dim, hidden_size, scale, "lstm_bwd"))

    @property
    def hidden_size(self) -> int:
        return self.forward_cell.hidden_size

    def parameters(self) -> list[Parameter]:
        return [self.embedding, *self.forward_cell.parameters(), *self.backward_cell.parameters()]

    def encode(self, sentences: Sequence[Sequence[int]]) -> Tensor:
        return encode_sentences(self.embedding, self.forward_cell, self.backward_cell, sentences)


def _run_direction(embedding, cell: LSTMCell, ids: np.ndarray, mask: np.ndarray) -> Tensor:
    n, steps = ids.shape
    zeros = np.zeros((n, cell.hidden_size))
    h, c = Tensor(zeros), Tensor(zeros)
    for t in range(steps):
        x = take_rows(embedding, ids[:, t])
        h_new, c_new = lstm_step(cell, h, c, x)
        live = mask[:, t]
        if live.all():
            h, c = h_new, c_new
        else:
            # finished rows keep their last state
            keep = live[:, None].astype(np.float64)
            h = h_new * keep + h * (1.0 - keep)
            c = c_new * keep + c * (1.0 - keep)
    return h


def encode_sentences(embedding, forward_cell: LSTMCell, backward_cell: LSTMCell,
                     sentences: Sequence[Sequence[int]]) -> Tensor:
    """Encode a batch of sentences to an (N, H) tensor of sentence vectors."""
    if not sentences:
        raise ContractViolation("no sentences to encode")
    lengths = np.array([len(s) for s in sentences])
    if lengths.min() < 1:
        raise ContractViolation("cannot encode an empty sentence")
    steps = int(lengths.max())
    fwd = np.zeros((len(sentences), steps), dtype=np.intp)
    bwd = np.zeros_like(fwd)
    for row, sent in enumerate(sentences):
        fwd[row, :len(sent)] = sent
        bwd[row, :len(sent)] = sent[::-1]
    mask = np.arange(steps)[None, :] < lengths[:, None]
    h_fwd = _run_direction(embedding, forward_cell, fwd, mask)
    h_bwd = _run_direction(embedding, backward_cell, bwd, mask)
    return (h_fwd + h_bwd) * 0.5


def encode_sentence(encoder: SentenceEncoder, tokens: Sequence[int]) -> Tensor:
    return encoder.encode([tokens])[0]


def encode_document(encoder: SentenceEncoder, doc) -> list[Tensor]:
    F = encoder.encode(doc.sentences)
    return [F[j] for j in range(doc.k)]

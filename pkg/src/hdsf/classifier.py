"""The full model, the cross-entropy objective and the training schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .encoder import SentenceEncoder, uniform_init
from .numerics import (DEFAULT_SLOPE, NumericError, Parameter, Tensor, adam_step, global_norm,
                       no_grad, softmax_cross_entropy, softmax_np, stack)
from .representation import CHILD_CONTEXT_MODES, structural_representation
from .structure import DependencyTree, attention_matrix, build_tree, project, root_probs

log = logging.getLogger(__name__)

FAKE, REAL = 0, 1
PROB_CLAMP = 1e-12


@dataclass
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 50
    hidden_size: int = 100
    leaky_slope: float = DEFAULT_SLOPE
    init_scale: float = 0.1
    child_context: str = "printed"

    def __post_init__(self):
        if self.child_context not in CHILD_CONTEXT_MODES:
            raise ValueError(f"child_context must be one of {CHILD_CONTEXT_MODES}")
        if min(self.vocab_size, self.embedding_dim, self.hidden_size) < 1:
            raise ValueError("model sizes must be positive")


@dataclass
class TrainConfig:
    steps: int = 200
    batch_size: int = 40
    lr0: float = 0.01
    decay: float = 0.9
    decay_every: int = 50
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_every: int = 10

    def __post_init__(self):
        if min(self.steps, self.batch_size, self.decay_every, self.eval_every) < 1 or self.lr0 <= 0:
            raise ValueError("steps, batch_size, decay_every, eval_every and lr0 must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")

    def learning_rate(self, step: int) -> float:
        """Rate for 1-based ``step``: lr0 for the first decay_every steps, then decayed."""
        return self.lr0 * self.decay ** ((step - 1) // self.decay_every)


@dataclass
class DocumentOutput:
    F: Tensor
    U: Tensor
    A: Tensor
    r: Tensor
    G: Tensor
    x: Tensor


class HDSF:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        s = config.init_scale
        H = config.hidden_size
        self.encoder = SentenceEncoder.init(rng, config.vocab_size, config.embedding_dim, H, s)
        self.W_u = Parameter(uniform_init(rng, (H, H), s), "W_u")
        self.b_u = Parameter(uniform_init(rng, (H,), s), "b_u")
        self.e_root = Parameter(uniform_init(rng, (H,), s), "e_root")
        self.W_g = Parameter(uniform_init(rng, (3 * H, H), s), "W_g")
        self.b_g = Parameter(uniform_init(rng, (H,), s), "b_g")
        self.W_c = Parameter(uniform_init(rng, (H, 2), s), "W_c")
        self.b_c = Parameter(uniform_init(rng, (2,), s), "b_c")

    def parameters(self) -> dict[str, Parameter]:
        params = self.encoder.parameters() + [self.W_u, self.b_u, self.e_root, self.W_g,
                                              self.b_g, self.W_c, self.b_c]
        return {p.name: p for p in params}

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def forward(self, docs: Sequence) -> list[DocumentOutput]:
        cfg = self.config
        sentences = [s for d in docs for s in d.sentences]
        F_all = self.encoder.encode(sentences)
        U_all = project(F_all, self.W_u, self.b_u, cfg.leaky_slope)
        outputs = []
        start = 0
        for d in docs:
            F = F_all[start:start + d.k]
            U = U_all[start:start + d.k]
            start += d.k
            A = attention_matrix(U)
            r = root_probs(U)
            G, x = structural_representation(F, A, r, self.e_root, self.W_g, self.b_g,
                                             cfg.child_context, cfg.leaky_slope)
            outputs.append(DocumentOutput(F, U, A, r, G, x))
        return outputs

    def logits(self, docs: Sequence) -> Tensor:
        X = stack([out.x for out in self.forward(docs)])
        return X @ self.W_c + self.b_c

    def loss(self, docs: Sequence) -> Tensor:
        return batch_loss(self.logits(docs), [d.target for d in docs])

    def predict_proba(self, docs: Sequence, chunk: int = 64) -> np.ndarray:
        """(n, 2) array of (p_fake, p_real)."""
        out = []
        with no_grad():
            for i in range(0, len(docs), chunk):
                out.append(softmax_np(self.logits(docs[i:i + chunk]).data, axis=1))
        return np.concatenate(out) if out else np.zeros((0, 2))

    def parse(self, doc) -> tuple[DependencyTree, np.ndarray, np.ndarray]:
        """Decode the tree for one document; returns ``(tree, A, r)``."""
        with no_grad():
            out = self.forward([doc])[0]
        return build_tree(out.A.data, out.r.data), out.A.data, out.r.data


def predict(x, W_c, b_c) -> tuple[float, float]:
    """(p_fake, p_real) for a single document vector."""
    logits = np.asarray(x.data if isinstance(x, Tensor) else x) @ np.asarray(
        W_c.data if isinstance(W_c, Tensor) else W_c) + np.asarray(b_c.data if isinstance(b_c, Tensor) else b_c)
    p = softmax_np(logits)
    return float(p[FAKE]), float(p[REAL])


def batch_loss(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Summed cross-entropy; ``targets`` are class indices (0 = fake)."""
    return softmax_cross_entropy(logits, np.asarray(targets), PROB_CLAMP)


def evaluate(model: HDSF, docs: Sequence) -> float:
    if not docs:
        raise ValueError("cannot evaluate on an empty split")
    pred = model.predict_proba(docs).argmax(axis=1)
    return float(np.mean(pred == np.array([d.target for d in docs])))


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int, norms: dict[str, float], cause: str):
        self.step = step
        self.norms = norms
        worst = ", ".join(f"{k}={v:.3g}" for k, v in sorted(norms.items()))
        super().__init__(f"training diverged at step {step} ({cause}); parameter norms: {worst}")


@dataclass
class HistoryRow:
    step: int
    loss: float
    dev_accuracy: float | None = None


@dataclass
class History:
    rows: list[HistoryRow] = field(default_factory=list)

    def losses(self) -> list[float]:
        return [row.loss for row in self.rows]

    def dev_curve(self) -> list[tuple[int, float]]:
        return [(row.step, row.dev_accuracy) for row in self.rows if row.dev_accuracy is not None]

    def to_csv(self, header: str | None = None) -> str:
        lines = [f"# {header}"] if header else []
        lines.append("step,loss,dev_accuracy")
        for row in self.rows:
            dev = "" if row.dev_accuracy is None else repr(row.dev_accuracy)
            lines.append(f"{row.step},{row.loss!r},{dev}")
        return "\n".join(lines) + "\n"


def train(model: HDSF, train_docs: Sequence, dev_docs: Sequence, config: TrainConfig,
          callback: Callable[[HistoryRow], None] | None = None) -> History:
    """Mini-batch ADAM on the summed cross-entropy with step-wise lr decay.

    Each step samples a batch without replacement from the training split;
    batches are drawn independently across steps (no epochs).
    """
    if not train_docs:
        raise ValueError("training split is empty")
    rng = np.random.default_rng([config.seed, 1])
    params = list(model.parameters().values())
    history = History()
    n = len(train_docs)
    size = min(config.batch_size, n)
    # overflow surfaces as NumericError from the finiteness checks
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for step in range(1, config.steps + 1):
            idx = rng.choice(n, size=size, replace=False)
            batch = [train_docs[i] for i in idx]
            model.zero_grad()
            try:
                loss = model.loss(batch)
                loss.backward()
                lr = config.learning_rate(step)
                for p in params:
                    adam_step(p, lr, config.beta1, config.beta2, config.eps)
            except NumericError as exc:
                raise TrainingDiverged(step, {p.name: global_norm([p]) for p in params}, str(exc)) from exc
            row = HistoryRow(step, loss.item())
            if dev_docs and (step % config.eval_every == 0 or step == config.steps):
                row.dev_accuracy = evaluate(model, dev_docs)
            history.rows.append(row)
            if callback is not None:
                callback(row)
    model.zero_grad()
    return history

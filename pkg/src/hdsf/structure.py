"""Inter-sentence attention, root scores and greedy dependency-tree decoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .numerics import DEFAULT_SLOPE, Tensor, leaky_relu, softmax

ROOT = -1


def project(f, W, b, slope: float = DEFAULT_SLOPE) -> Tensor:
    """``LeakyReLU(f W + b)`` for a single vector or a (k, H) stack of them."""
    return leaky_relu(f @ W + b, slope)


def attention_matrix(U: Tensor) -> Tensor:
    """Column-normalized parent probabilities; ``A[m, n] = P(m is parent of n)``.

    Scores are dot products ``u_m . u_n``.  The diagonal is excluded from each
    column's softmax, so a single-sentence document gives a 1x1 zero matrix.
    """
    k = U.shape[0]
    scores = U @ U.T
    return softmax(scores, axis=0, mask=~np.eye(k, dtype=bool))


def root_probs(U: Tensor) -> Tensor:
    return softmax(U.sum(axis=1))


@dataclass
class DependencyTree:
    """Rooted tree over sentences 0..k-1 (0-based internally).

    ``children[i]`` lists i's children in the order they were attached, which
    fixes the preorder traversal.
    """

    root: int
    parent: list[int]
    children: list[list[int]]
    attach_prob: list[float] = field(default_factory=list)
    order: list[int] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.parent)

    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs in attachment order when known."""
        nodes = self.order[1:] if self.order else [i for i in range(self.k) if i != self.root]
        return [(self.parent[c], c) for c in nodes]

    def leaves(self) -> list[int]:
        return [i for i, ch in enumerate(self.children) if not ch]


def build_tree(A, r) -> DependencyTree:
    """Greedy decoding: root = argmax r, then repeatedly attach the best
    (tree node, outside node) entry of A.

    Ties go to the lowest root index and to the lexicographically smallest
    (parent, child) pair.
    """
    A = np.asarray(A.data if isinstance(A, Tensor) else A, dtype=np.float64)
    r = np.asarray(r.data if isinstance(r, Tensor) else r, dtype=np.float64)
    k = len(r)
    if A.shape != (k, k):
        raise ValueError(f"attention matrix shape {A.shape} does not match k={k}")
    root = int(np.argmax(r))
    parent = [ROOT] * k
    children: list[list[int]] = [[] for _ in range(k)]
    attach = [1.0] * k
    in_tree = np.zeros(k, dtype=bool)
    in_tree[root] = True
    order = [root]
    while len(order) < k:
        rows = np.flatnonzero(in_tree)
        cols = np.flatnonzero(~in_tree)
        block = A[np.ix_(rows, cols)]
        flat = int(np.argmax(block))  # first max in row-major order
        p, c = int(rows[flat // len(cols)]), int(cols[flat % len(cols)])
        parent[c] = p
        children[p].append(c)
        attach[c] = float(A[p, c])
        in_tree[c] = True
        order.append(c)
    return DependencyTree(root, parent, children, attach, order)


def preorder(tree: DependencyTree) -> list[int]:
    out = []
    stack = [tree.root]
    while stack:
        node = stack.pop()
        out.append(node)
        stack.extend(reversed(tree.children[node]))
    return out


def validate_tree(tree: DependencyTree) -> None:
    """Raise ``ValueError`` unless the tree is a spanning arborescence."""
    k = tree.k
    roots = [i for i, p in enumerate(tree.parent) if p == ROOT]
    if roots != [tree.root]:
        raise ValueError(f"expected exactly one root at {tree.root}, found {roots}")
    n_edges = sum(len(ch) for ch in tree.children)
    if n_edges != k - 1:
        raise ValueError(f"{n_edges} edges for {k} nodes")
    for p, ch in enumerate(tree.children):
        for c in ch:
            if tree.parent[c] != p:
                raise ValueError(f"child list of {p} disagrees with parent of {c}")
    seen = preorder(tree)
    if sorted(seen) != list(range(k)) or len(seen) != k:
        raise ValueError("tree is not connected or contains a cycle")


def tree_from_parents(parent: Sequence[int], child_order: Sequence[int] | None = None) -> DependencyTree:
    """Build a tree from a 0-based parent array (ROOT for the root).

    Children are attached in ``child_order`` (defaults to index order).
    """
    parent = list(parent)
    k = len(parent)
    roots = [i for i, p in enumerate(parent) if p == ROOT]
    if len(roots) != 1:
        raise ValueError(f"expected one root, found {len(roots)}")
    children: list[list[int]] = [[] for _ in range(k)]
    for c in (child_order if child_order is not None else range(k)):
        if parent[c] != ROOT:
            children[parent[c]].append(c)
    tree = DependencyTree(roots[0], parent, children, [1.0] * k, [])
    validate_tree(tree)
    return tree


TREE_COLUMNS = ("sentence_index", "parent_index", "root_prob", "attach_prob", "preorder_rank")


def format_tree_table(tree: DependencyTree, r, header: str | None = None) -> str:
    """Tab-separated rows, 1-based indices, parent 0 for the root."""
    r = np.asarray(r.data if isinstance(r, Tensor) else r)
    rank = {node: i + 1 for i, node in enumerate(preorder(tree))}
    lines = []
    if header:
        lines.append(f"# {header}")
    lines.append("\t".join(TREE_COLUMNS))
    for j in range(tree.k):
        par = 0 if tree.parent[j] == ROOT else tree.parent[j] + 1
        attach = 1.0 if j == tree.root else tree.attach_prob[j]
        lines.append(f"{j + 1}\t{par}\t{r[j]:.6f}\t{attach:.6f}\t{rank[j]}")
    return "\n".join(lines) + "\n"


def parse_tree_table(text: str) -> tuple[DependencyTree, dict[str, str]]:
    """Inverse of :func:`format_tree_table`.

    Returns the tree and the ``key=value`` fields found in comment lines.
    Sibling order is recovered from the preorder ranks.
    """
    meta: dict[str, str] = {}
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            for part in line[1:].split():
                if "=" in part:
                    key, _, val = part.partition("=")
                    meta[key] = val
            continue
        cells = line.split("\t")
        if tuple(cells) == TREE_COLUMNS:
            continue
        if len(cells) != len(TREE_COLUMNS):
            raise ValueError(f"bad tree row: {line!r}")
        rows.append((int(cells[0]), int(cells[1]), float(cells[2]), float(cells[3]), int(cells[4])))
    if not rows:
        raise ValueError("empty tree table")
    rows.sort()
    if [row[0] for row in rows] != list(range(1, len(rows) + 1)):
        raise ValueError("sentence indices must run 1..k")
    parent = [row[1] - 1 if row[1] else ROOT for row in rows]
    by_rank = sorted(range(len(rows)), key=lambda j: rows[j][4])
    tree = tree_from_parents(parent, by_rank)
    tree.attach_prob = [row[3] for row in rows]
    if [i + 1 for i in preorder(tree)] != [rows[j][0] for j in by_rank]:
        raise ValueError("preorder ranks are inconsistent with the parent array")
    return tree, meta


def read_tree_file(path) -> tuple[DependencyTree, dict[str, str]]:
    return parse_tree_table(Path(path).read_text(encoding="utf-8"))

"""Tree statistics used to compare the coherence of fake and real documents.

All three are divided by log10(k) and are undefined for single-sentence
documents; the property functions return ``None`` in that case.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable

from .corpus import LABELS
from .structure import DependencyTree, preorder


@dataclass(frozen=True)
class StructuralProperties:
    k: int
    p_leaf: float | None
    p_preorder: float | None
    p_distance: float | None

    @property
    def defined(self) -> bool:
        return self.k >= 2


def _norm(k: int) -> float | None:
    return math.log10(k) if k >= 2 else None


def leaf_count(tree: DependencyTree) -> int:
    return len(tree.leaves())


def preorder_displacement(tree: DependencyTree) -> int:
    """Sum over sentences of |preorder position - sequential position|."""
    return sum(abs(pos - node) for pos, node in enumerate(preorder(tree)))


def edge_distance_sum(tree: DependencyTree) -> int:
    return sum(abs(c - p) for p, c in tree.edges())


def leaf_property(tree: DependencyTree) -> float | None:
    z = _norm(tree.k)
    return None if z is None else leaf_count(tree) / z


def preorder_property(tree: DependencyTree) -> float | None:
    z = _norm(tree.k)
    return None if z is None else preorder_displacement(tree) / z


def distance_property(tree: DependencyTree) -> float | None:
    z = _norm(tree.k)
    return None if z is None else edge_distance_sum(tree) / z


def tree_properties(tree: DependencyTree) -> StructuralProperties:
    return StructuralProperties(tree.k, leaf_property(tree), preorder_property(tree),
                                distance_property(tree))


@dataclass(frozen=True)
class ClassSummary:
    label: str
    n_docs: int
    n_skipped: int
    mean_p_leaf: float
    mean_p_preorder: float
    mean_p_distance: float


class AggregationError(ValueError):
    pass


def aggregate(items: Iterable[tuple[DependencyTree, str]]) -> dict[str, ClassSummary]:
    """Per-class means over documents with k >= 2; k = 1 documents are counted as skipped."""
    sums = {label: [0.0, 0.0, 0.0] for label in LABELS}
    total = dict.fromkeys(LABELS, 0)
    skipped = dict.fromkeys(LABELS, 0)
    for tree, label in items:
        if label not in sums:
            raise AggregationError(f"unknown label {label!r}")
        total[label] += 1
        props = tree_properties(tree)
        if not props.defined:
            skipped[label] += 1
            continue
        acc = sums[label]
        acc[0] += props.p_leaf
        acc[1] += props.p_preorder
        acc[2] += props.p_distance
    out = {}
    for label in LABELS:
        used = total[label] - skipped[label]
        if used == 0:
            why = (f"all {total[label]} document(s) have a single sentence"
                   if total[label] else "no documents")
            raise AggregationError(f"class {label!r} has no usable trees: {why}")
        s = sums[label]
        out[label] = ClassSummary(label, total[label], skipped[label], s[0] / used, s[1] / used, s[2] / used)
    return out


REPORT_COLUMNS = "label,n_docs,n_skipped,mean_P_l,mean_P_t,mean_P_c"


def format_report(summary: dict[str, ClassSummary], header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    lines.append(REPORT_COLUMNS)
    for label in LABELS:
        s = summary[label]
        lines.append(f"{s.label},{s.n_docs},{s.n_skipped},{s.mean_p_leaf:.6f},"
                     f"{s.mean_p_preorder:.6f},{s.mean_p_distance:.6f}")
    return "\n".join(lines) + "\n"


def format_document_table(rows: Iterable[tuple[str, str, StructuralProperties]], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["doc_id", "label", "k", "P_l", "P_t", "P_c"])

    def fmt(v):
        return "" if v is None else f"{v:.6f}"

    for doc_id, label, p in rows:
        writer.writerow([doc_id, label, p.k, fmt(p.p_leaf), fmt(p.p_preorder), fmt(p.p_distance)])
    return buf.getvalue()

"""Structure-aware sentence vectors and the pooled document vector.

For sentence j the parent context mixes the root embedding (weighted by the
root probability) with every candidate parent's encoding (weighted by
``A[z, j]``).  The child context, as the model is defined, rescales the
sentence's own encoding by its outgoing attention mass ``sum_z A[j, z]``;
``mode="cited-work"`` instead mixes the children's encodings.
"""

from __future__ import annotations

from .numerics import DEFAULT_SLOPE, Tensor, concat, leaky_relu, reshape

CHILD_CONTEXT_MODES = ("printed", "cited-work")


def parent_context(j: int, r: Tensor, A: Tensor, F: Tensor, e_root: Tensor) -> Tensor:
    return r[j] * e_root + A[:, j] @ F


def child_context(j: int, A: Tensor, F: Tensor, mode: str = "printed") -> Tensor:
    if mode == "printed":
        return A[j, :].sum() * F[j]
    if mode == "cited-work":
        return A[j, :] @ F
    raise ValueError(f"unknown child-context mode {mode!r}")


def sentence_struct_rep(p: Tensor, c: Tensor, f: Tensor, W_g, b_g, slope: float = DEFAULT_SLOPE) -> Tensor:
    return leaky_relu(concat([p, c, f], axis=-1) @ W_g + b_g, slope)


def document_rep(G: Tensor) -> Tensor:
    return G.mean(axis=0)


def parent_contexts(r: Tensor, A: Tensor, F: Tensor, e_root: Tensor) -> Tensor:
    """All p_j at once as a (k, H) matrix."""
    k = F.shape[0]
    return reshape(r, (k, 1)) * reshape(e_root, (1, -1)) + A.T @ F


def child_contexts(A: Tensor, F: Tensor, mode: str = "printed") -> Tensor:
    if mode == "printed":
        return A.sum(axis=1, keepdims=True) * F
    if mode == "cited-work":
        return A @ F
    raise ValueError(f"unknown child-context mode {mode!r}")


def structural_representation(F: Tensor, A: Tensor, r: Tensor, e_root, W_g, b_g,
                              mode: str = "printed", slope: float = DEFAULT_SLOPE):
    """Return ``(G, x)``: per-sentence fused vectors and their mean."""
    P = parent_contexts(r, A, F, e_root)
    C = child_contexts(A, F, mode)
    G = sentence_struct_rep(P, C, F, W_g, b_g, slope)
    return G, document_rep(G)

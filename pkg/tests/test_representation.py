import numpy as np
import pytest

from hdsf.numerics import Parameter, Tensor, finite_difference_check, softmax_np
from hdsf.representation import (child_context, child_contexts, document_rep, parent_context,
                                 parent_contexts, sentence_struct_rep, structural_representation)


def soft_state(rng, k, H):
    F = rng.normal(size=(k, H))
    A = softmax_np(rng.normal(size=(k, k)), axis=0, mask=~np.eye(k, dtype=bool))
    r = softmax_np(rng.normal(size=k))
    return F, A, r


class TestParentContext:
    def test_single_sentence(self):
        e = np.array([0.3, -0.1])
        p = parent_context(0, Tensor([1.0]), Tensor(np.zeros((1, 1))), Tensor([[5.0, 6.0]]), Tensor(e))
        np.testing.assert_array_equal(p.data, e)

    def test_two_sentences(self):
        e = np.array([2.0, 4.0])
        F = np.array([[1.0, 1.0], [3.0, -1.0]])
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        p = parent_context(0, Tensor([0.5, 0.5]), Tensor(A), Tensor(F), Tensor(e))
        np.testing.assert_allclose(p.data, 0.5 * e + F[1])

    def test_dense_oracle(self):
        rng = np.random.default_rng(0)
        F, A, r = soft_state(rng, 3, 4)
        e = rng.normal(size=4)
        P = parent_contexts(Tensor(r), Tensor(A), Tensor(F), Tensor(e)).data
        for j in range(3):
            expected = r[j] * e + sum(A[z, j] * F[z] for z in range(3))
            np.testing.assert_allclose(P[j], expected, atol=1e-14)
            np.testing.assert_allclose(parent_context(j, Tensor(r), Tensor(A), Tensor(F), Tensor(e)).data,
                                       expected, atol=1e-14)


class TestChildContext:
    def test_zero_row(self):
        A = np.array([[0.0, 0.0], [1.0, 0.0]])
        F = np.array([[2.0, 3.0], [1.0, 1.0]])
        assert np.all(child_context(0, Tensor(A), Tensor(F)).data == 0)

    def test_unit_row_sum(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        F = np.array([[2.0, 3.0], [1.0, 1.0]])
        np.testing.assert_array_equal(child_context(0, Tensor(A), Tensor(F)).data, F[0])

    def test_row_sum_oracle(self):
        F, A, _ = soft_state(np.random.default_rng(1), 5, 3)
        C = child_contexts(Tensor(A), Tensor(F)).data
        for j in range(5):
            np.testing.assert_allclose(C[j], A[j].sum() * F[j], atol=1e-14)

    def test_cited_work_mode(self):
        F, A, _ = soft_state(np.random.default_rng(2), 4, 3)
        C = child_contexts(Tensor(A), Tensor(F), mode="cited-work").data
        for j in range(4):
            np.testing.assert_allclose(C[j], sum(A[j, z] * F[z] for z in range(4)), atol=1e-14)
            np.testing.assert_allclose(child_context(j, Tensor(A), Tensor(F), "cited-work").data,
                                       C[j], atol=1e-14)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            child_contexts(Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 2))), mode="other")


class TestLocality:
    def test_parent_context_reads_only_its_column(self):
        rng = np.random.default_rng(3)
        F, A, r = soft_state(rng, 5, 3)
        e = rng.normal(size=3)
        j = 2
        A2, r2 = A.copy(), r.copy()
        A2[:, [0, 1, 3, 4]] = rng.uniform(size=(5, 4))
        r2[[0, 1, 3, 4]] = rng.uniform(size=4)
        base = parent_context(j, Tensor(r), Tensor(A), Tensor(F), Tensor(e)).data
        moved = parent_context(j, Tensor(r2), Tensor(A2), Tensor(F), Tensor(e)).data
        np.testing.assert_array_equal(base, moved)

    def test_child_context_reads_only_its_row(self):
        rng = np.random.default_rng(4)
        F, A, _ = soft_state(rng, 5, 3)
        A2 = A.copy()
        A2[[0, 2, 3, 4]] = rng.uniform(size=(4, 5))
        for mode in ("printed", "cited-work"):
            np.testing.assert_array_equal(child_context(1, Tensor(A), Tensor(F), mode).data,
                                          child_context(1, Tensor(A2), Tensor(F), mode).data)


class TestFusion:
    def test_zero_weights(self):
        g = sentence_struct_rep(Tensor(np.ones(2)), Tensor(np.ones(2)), Tensor(np.ones(2)),
                                Tensor(np.zeros((6, 2))), Tensor(np.zeros(2)))
        assert np.all(g.data == 0)

    def test_block_permutation_identity(self):
        rng = np.random.default_rng(5)
        p, c, f = (rng.normal(size=3) for _ in range(3))
        W = rng.normal(size=(9, 3))
        b = rng.normal(size=3)
        g = sentence_struct_rep(Tensor(p), Tensor(c), Tensor(f), Tensor(W), Tensor(b)).data
        # feed (f, p, c) with the weight rows rearranged to match
        W_perm = np.concatenate([W[6:], W[:3], W[3:6]])
        g_perm = sentence_struct_rep(Tensor(f), Tensor(p), Tensor(c), Tensor(W_perm), Tensor(b)).data
        np.testing.assert_allclose(g, g_perm, atol=1e-14)

    def test_gradcheck(self):
        rng = np.random.default_rng(6)
        p, c, f = (Parameter(rng.normal(size=(3, 4)), n) for n in "pcf")
        W = Parameter(rng.normal(size=(12, 4)), "W_g")
        b = Parameter(rng.normal(size=4), "b_g")
        w = rng.normal(size=(3, 4))
        loss = lambda: (sentence_struct_rep(p, c, f, W, b) * w).sum()  # noqa: E731
        assert finite_difference_check(loss, [p, c, f, W, b]) <= 1e-5


class TestDocumentRep:
    def test_single(self):
        g = np.array([[1.0, -2.0]])
        np.testing.assert_array_equal(document_rep(Tensor(g)).data, g[0])

    def test_identical_rows(self):
        g = np.tile([0.25, 4.0], (5, 1))
        np.testing.assert_allclose(document_rep(Tensor(g)).data, g[0])

    def test_permutation(self):
        G = np.random.default_rng(7).normal(size=(6, 3))
        np.testing.assert_allclose(document_rep(Tensor(G[::-1])).data, document_rep(Tensor(G)).data,
                                   atol=1e-15)


class TestEndToEnd:
    @pytest.mark.parametrize("mode", ["printed", "cited-work"])
    def test_gradients_reach_every_input(self, mode):
        rng = np.random.default_rng(8)
        F0, A0, r0 = soft_state(rng, 4, 3)
        F, A, r = Parameter(F0, "F"), Parameter(A0, "A"), Parameter(r0, "r")
        e = Parameter(rng.normal(size=3), "e_root")
        W = Parameter(rng.normal(size=(9, 3)), "W_g")
        b = Parameter(rng.normal(size=3), "b_g")
        w = rng.normal(size=3)
        loss = lambda: (structural_representation(F, A, r, e, W, b, mode)[1] * w).sum()  # noqa: E731
        assert finite_difference_check(loss, [F, A, r, e, W, b]) <= 1e-5
        for p in (F, A, r, e, W, b):
            p.zero_grad()
        loss().backward()
        assert np.abs(e.grad).max() > 0

    def test_output_size_independent_of_k(self):
        rng = np.random.default_rng(9)
        W, b, e = Tensor(rng.normal(size=(6, 2))), Tensor(np.zeros(2)), Tensor(np.zeros(2))
        for k in (1, 3, 7):
            F, A, r = soft_state(rng, k, 2)
            if k == 1:
                A = np.zeros((1, 1))
            G, x = structural_representation(Tensor(F), Tensor(A), Tensor(r), e, W, b)
            assert G.shape == (k, 2) and x.shape == (2,)

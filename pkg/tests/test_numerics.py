import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdsf.numerics import (ContractViolation, NumericError, Parameter, ShapeError, Tensor, adam_step,
                           concat, finite_difference_check, gradient_check, inject_fault,
                           leaky_relu, matmul, no_grad, sigmoid, softmax, softmax_cross_entropy,
                           softmax_np, softmax_stable, stack, take_rows, tanh)

# softmax([1, 2, 3]) evaluated with mpmath at 40 digits
SOFTMAX_123 = [0.090030573170380457998, 0.24472847105479765247, 0.66524095577482188953]


def central_jacobian(fn, x, eps=1e-6):
    x = np.array(x, dtype=float)
    cols = []
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up.flat[i] += eps
        dn.flat[i] -= eps
        cols.append((fn(up) - fn(dn)).ravel() / (2 * eps))
    return np.stack(cols, axis=1)


def analytic_jacobian(op, x):
    rows = []
    out_size = op(Tensor(x)).data.size
    for j in range(out_size):
        p = Parameter(x)
        y = op(p)
        sel = np.zeros(out_size)
        sel[j] = 1.0
        (Tensor(sel.reshape(y.shape)) * y).sum().backward()
        rows.append(p.grad.ravel().copy())
    return np.stack(rows)


class TestLeakyRelu:
    def test_zero_is_fixed(self):
        assert leaky_relu(Tensor([0.0])).data.tolist() == [0.0]

    def test_definition(self):
        np.testing.assert_allclose(leaky_relu(Tensor([2.0, -2.0]), 0.01).data, [2.0, -0.02])

    def test_jacobian_matches_finite_differences(self):
        x = np.random.default_rng(0).normal(size=5)
        num = central_jacobian(lambda v: np.maximum(v, 0.01 * v), x)
        ana = analytic_jacobian(lambda t: leaky_relu(t, 0.01), x)
        np.testing.assert_allclose(ana, num, rtol=1e-6, atol=1e-12)

    def test_rejects_bad_slope(self):
        with pytest.raises(ContractViolation):
            leaky_relu(Tensor([1.0]), 1.5)

    def test_non_finite_input(self):
        with pytest.raises(NumericError):
            leaky_relu(Tensor([np.nan]))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax_stable(Tensor([0.0, 0.0, 0.0])).data, [1 / 3] * 3, atol=1e-15)

    def test_overflow_guard(self):
        np.testing.assert_allclose(softmax_stable(Tensor([1000.0, 1000.0])).data, [0.5, 0.5])

    def test_extended_precision_reference(self):
        np.testing.assert_allclose(softmax_stable(Tensor([1.0, 2.0, 3.0])).data, SOFTMAX_123, rtol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            softmax_stable(Tensor(np.zeros(0)))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-500, 500)),
           st.floats(-1e3, 1e3))
    def test_sums_to_one_and_shift_invariant(self, x, c):
        y = softmax_stable(Tensor(x)).data
        assert abs(y.sum() - 1.0) <= 1e-12
        assert np.all((y >= 0) & (y <= 1))
        np.testing.assert_allclose(softmax_stable(Tensor(x + c)).data, y, atol=1e-12)

    def test_mask_excludes_entries_and_empty_columns_are_zero(self):
        x = np.array([[1.0, 5.0], [2.0, 7.0]])
        mask = np.array([[True, False], [True, False]])
        y = softmax_np(x, axis=0, mask=mask)
        np.testing.assert_allclose(y[:, 0], softmax_np(np.array([1.0, 2.0])))
        assert y[:, 1].tolist() == [0.0, 0.0]

    def test_masked_softmax_gradient(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 4))
        w = rng.normal(size=(4, 4))
        mask = ~np.eye(4, dtype=bool)
        p = Parameter(x, "x")
        err = finite_difference_check(lambda: (softmax(p, axis=0, mask=mask) * w).sum(), [p])
        assert err <= 1e-6


class TestAdam:
    def test_zero_gradient_leaves_value(self):
        p = Parameter([1.5, -2.0])
        adam_step(p, 0.01)
        assert p.data.tolist() == [1.5, -2.0]
        assert p.step_count == 1

    def test_first_step_moves_by_lr(self):
        p = Parameter([0.0])
        p.grad[:] = 1.0
        adam_step(p, 0.01, 0.9, 0.999, 1e-8)
        # hand-computed: lr * m_hat / (sqrt(v_hat) + eps) with m_hat = v_hat = 1
        assert p.data[0] == pytest.approx(-0.0099999999000000076613, rel=1e-12)
        assert p.grad[0] == 1.0

    def test_quadratic_descent(self):
        p = Parameter([1.0])
        for _ in range(100):
            p.zero_grad()
            (p * p).sum().backward()
            adam_step(p, 0.01)
        assert abs(p.data[0]) < 0.5


class TestGradients:
    def test_linear_loss_exact(self):
        x = np.array([0.5, -1.0, 2.0])
        w = Parameter([0.1, 0.2, 0.3], "w")
        assert finite_difference_check(lambda: (w * x).sum(), [w]) <= 1e-9

    def test_softmax_cross_entropy_layer(self):
        rng = np.random.default_rng(2)
        logits = Parameter(rng.normal(size=(5, 2)), "logits")
        targets = rng.integers(0, 2, size=5)
        assert finite_difference_check(lambda: softmax_cross_entropy(logits, targets), [logits]) <= 1e-6

    def test_cross_entropy_gradient_is_softmax_minus_onehot(self):
        logits = Parameter([[0.3, -1.2], [2.0, 0.5]])
        softmax_cross_entropy(logits, [1, 0]).backward()
        expected = softmax_np(logits.data, axis=1) - np.eye(2)[[1, 0]]
        np.testing.assert_allclose(logits.grad, expected, atol=1e-15)

    @pytest.mark.parametrize("op", ["matmul", "sigmoid", "tanh", "concat", "stack", "take_rows"])
    def test_composites(self, op):
        rng = np.random.default_rng(3)
        a = Parameter(rng.normal(size=(3, 4)), "a")
        b = Parameter(rng.normal(size=(4, 2)), "b")
        w = rng.normal(size=(3, 2))
        fns = {
            "matmul": lambda: (matmul(a, b) * w).sum(),
            "sigmoid": lambda: (sigmoid(a) @ b * w).sum(),
            "tanh": lambda: (tanh(a @ b) * w).sum(),
            "concat": lambda: (concat([a, a * 2.0], axis=1) @ concat([b, b], axis=0) * w).sum(),
            "stack": lambda: (stack([a[0], a[2]]) @ b).sum(),
            "take_rows": lambda: (take_rows(a, [0, 2, 2]) @ b).sum(),
        }
        assert finite_difference_check(fns[op], [a, b]) <= 1e-6

    def test_report_names_every_group(self):
        a = Parameter([1.0, 2.0], "alpha")
        b = Parameter([3.0], "beta")
        report = gradient_check(lambda: (a * a).sum() + (b * a[0]).sum(), {"alpha": a, "beta": b})
        assert set(report) == {"alpha", "beta"}

    def test_injected_fault_is_detected(self):
        p = Parameter([0.7, -0.4], "p")
        with inject_fault("leaky_relu"):
            err = finite_difference_check(lambda: (leaky_relu(p) * 3.0).sum(), [p])
        assert err > 1e-2

    def test_no_grad_builds_no_graph(self):
        p = Parameter([1.0])
        with no_grad():
            y = p * 2.0
        assert not y.requires_grad


class TestShapes:
    def test_matmul_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_add_mismatch(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones(3)) + Tensor(np.ones(4))

    def test_concat_mismatch(self):
        with pytest.raises(ShapeError):
            concat([Tensor(np.ones((2, 2))), Tensor(np.ones((3, 3)))], axis=1)

    def test_row_out_of_range(self):
        with pytest.raises(ContractViolation):
            take_rows(Tensor(np.ones((2, 2))), [2])

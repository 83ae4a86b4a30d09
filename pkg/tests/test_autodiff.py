import math

import numpy as np
import pytest

from sdpkit import autodiff as ad
from sdpkit.errors import AutodiffError


def check_op(build, params, tol=1e-7):
    report = ad.gradient_check(build, params, epsilon=1e-5, tolerance=tol)
    assert report.passed, str(report)
    return report


def param(rng, *shape, name=""):
    return ad.Parameter(rng.standard_normal(shape), name=name)


class TestForwardValues:
    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(ad.constant([0.0])).data[0] == 0.5

    def test_softmax_uniform(self):
        p = ad.softmax_rows(ad.constant([[0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(p.data, [[1 / 3, 1 / 3, 1 / 3]], atol=1e-15)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        p = ad.softmax_rows(ad.constant(rng.standard_normal((5, 7)) * 30))
        np.testing.assert_allclose(p.data.sum(axis=1), np.ones(5), atol=1e-12)

    def test_sigmoid_output_range(self):
        # strictly inside (0,1) for inputs below the float64 saturation point
        rng = np.random.default_rng(1)
        s = ad.sigmoid(ad.constant(rng.standard_normal(100) * 8)).data
        assert np.all(s > 0) and np.all(s < 1)

    def test_bilinear_hand_expansion(self):
        # x=[1,0], y=[0,1]: x^T W y picks out W[0,1]
        x = ad.constant([[1.0, 0.0]])
        y = ad.constant([[0.0, 1.0]])
        w = ad.constant([[3.0, 5.0], [7.0, 11.0]])
        assert ad.bilinear(x, w, y).data[0, 0] == 5.0

    def test_bilinear_multi_slice_permutation(self):
        rng = np.random.default_rng(2)
        x = ad.constant(rng.standard_normal((3, 4)))
        y = ad.constant(rng.standard_normal((5, 4)))
        w = rng.standard_normal((6, 4, 4))
        perm = rng.permutation(6)
        s = ad.bilinear(x, ad.constant(w), y).data
        s_perm = ad.bilinear(x, ad.constant(w[perm]), y).data
        np.testing.assert_array_equal(s[perm], s_perm)

    def test_no_nan_inf_on_extreme_inputs(self):
        big = ad.constant(np.array([[-1e9, 0.0, 1e9], [300.0, -300.0, 50.0]]))
        for out in (ad.sigmoid(big), ad.tanh(big), ad.softmax_rows(big),
                    ad.sigmoid_cross_entropy(big, np.ones(big.shape)),
                    ad.softmax_cross_entropy(big, [1, 0])):
            assert np.all(np.isfinite(out.data))

    def test_sigmoid_xent_value_at_zero(self):
        loss = ad.sigmoid_cross_entropy(ad.constant([[0.0]]), [[1.0]])
        assert loss.data[0, 0] == pytest.approx(math.log(2.0), abs=1e-15)

    def test_softmax_xent_uniform_is_log_k(self):
        for k in (2, 3, 7):
            loss = ad.softmax_cross_entropy(ad.constant([[1.5] * k]), [0])
            assert loss.data[0] == pytest.approx(math.log(k), abs=1e-12)

    def test_matmul_shape_error_names_op(self):
        with pytest.raises(AutodiffError, match="matmul"):
            ad.matmul(ad.constant(np.ones((2, 3))), ad.constant(np.ones((2, 3))))


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = ad.Parameter(np.arange(6.0).reshape(2, 3))
        ad.sum_all(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_sigmoid_xent_gradient_at_zero(self):
        # d/ds of -log sigmoid(s) at s=0 with target 1 is sigma(0)-1 = -0.5
        s = ad.Parameter([[0.0]])
        ad.sum_all(ad.sigmoid_cross_entropy(s, [[1.0]])).backward()
        assert s.grad[0, 0] == -0.5

    def test_fully_masked_loss_gives_exact_zero_grads(self):
        rng = np.random.default_rng(3)
        w = param(rng, 4, 4, name="w")
        x = param(rng, 2, 4, name="x")
        logits = ad.matmul(x, w)
        loss = ad.sum_all(ad.mul(ad.sigmoid_cross_entropy(logits, np.ones((2, 4))),
                                 ad.constant(np.zeros((2, 4)))))
        loss.backward()
        assert float(loss.data) == 0.0
        np.testing.assert_array_equal(w.grad, np.zeros((4, 4)))
        np.testing.assert_array_equal(x.grad, np.zeros((2, 4)))

    def test_backward_on_detached_tensor(self):
        with pytest.raises(AutodiffError, match="detached"):
            ad.sum_all(ad.constant([1.0, 2.0])).backward()

    def test_backward_requires_scalar(self):
        x = ad.Parameter([1.0, 2.0])
        with pytest.raises(AutodiffError, match="scalar"):
            ad.scale(x, 2.0).backward()

    def test_backward_is_linear(self):
        rng = np.random.default_rng(4)
        base = rng.standard_normal((3, 3))

        def grad_of(a, b):
            x = ad.Parameter(base, name="x")
            loss1 = ad.sum_all(ad.sigmoid(x))
            loss2 = ad.sum_all(ad.mul(x, x))
            (a * loss1 + b * loss2).backward()
            return x.grad

        g1 = grad_of(1.0, 0.0)
        g2 = grad_of(0.0, 1.0)
        combined = grad_of(2.5, -1.5)
        np.testing.assert_allclose(combined, 2.5 * g1 - 1.5 * g2, rtol=1e-12)

    def test_fanout_accumulates_once(self):
        x = ad.Parameter([2.0])
        y = ad.mul(x, x)  # x used twice
        ad.sum_all(y).backward()
        assert x.grad[0] == 4.0


class TestPerPrimitiveGradients:
    """Central-difference checks, dims <= 6, 64-bit floats, rel err < 1e-7."""

    def test_add_broadcast(self):
        rng = np.random.default_rng(10)
        a, b = param(rng, 3, 4, name="a"), param(rng, 4, name="b")
        check_op(lambda: ad.sum_all(ad.sigmoid(ad.add(a, b))), [a, b])

    def test_mul_broadcast(self):
        rng = np.random.default_rng(11)
        a, b = param(rng, 3, 4, name="a"), param(rng, 3, 1, name="b")
        check_op(lambda: ad.sum_all(ad.tanh(ad.mul(a, b))), [a, b])

    def test_matmul(self):
        rng = np.random.default_rng(12)
        a, b = param(rng, 3, 4, name="a"), param(rng, 4, 2, name="b")
        check_op(lambda: ad.sum_all(ad.tanh(ad.matmul(a, b))), [a, b])

    def test_transpose_axes(self):
        rng = np.random.default_rng(13)
        a = param(rng, 2, 3, 4, name="a")
        check_op(lambda: ad.sum_all(ad.mul(ad.transpose(a, (2, 0, 1)),
                                           ad.transpose(a, (2, 0, 1)))), [a])

    def test_concat_and_slice(self):
        rng = np.random.default_rng(14)
        a, b = param(rng, 2, 3, name="a"), param(rng, 3, 3, name="b")

        def build():
            joined = ad.concat([a, b], axis=0)
            return ad.sum_all(ad.sigmoid(ad.slice_rows(joined, 1, 4)))

        check_op(build, [a, b])

    def test_flip_rows(self):
        rng = np.random.default_rng(15)
        a = param(rng, 4, 2, name="a")
        check_op(lambda: ad.sum_all(ad.mul(ad.flip_rows(a), ad.constant(
            np.arange(8.0).reshape(4, 2)))), [a])

    def test_sigmoid_tanh_softmax(self):
        rng = np.random.default_rng(16)
        a = param(rng, 4, 5, name="a")
        check_op(lambda: ad.sum_all(ad.sigmoid(a)), [a])
        check_op(lambda: ad.sum_all(ad.tanh(a)), [a])
        weights = ad.constant(np.linspace(0.5, 1.5, 20).reshape(4, 5))
        check_op(lambda: ad.sum_all(ad.mul(ad.softmax_rows(a), weights)), [a])

    def test_mean_all(self):
        rng = np.random.default_rng(17)
        a = param(rng, 3, 3, name="a")
        check_op(lambda: ad.mean_all(ad.mul(a, a)), [a])

    def test_lookup(self):
        rng = np.random.default_rng(18)
        table = param(rng, 5, 3, name="table")
        ids = np.array([0, 2, 2, 4])
        check_op(lambda: ad.sum_all(ad.tanh(ad.lookup(table, ids))), [table])

    def test_pick_cells_2d(self):
        rng = np.random.default_rng(19)
        a = param(rng, 4, 5, name="a")
        rows, cols = np.array([0, 3, 2]), np.array([1, 4, 2])
        check_op(lambda: ad.sum_all(ad.sigmoid(ad.pick_cells(a, rows, cols))), [a])

    def test_pick_cells_3d(self):
        rng = np.random.default_rng(20)
        a = param(rng, 3, 4, 5, name="a")
        rows, cols = np.array([1, 0]), np.array([2, 4])
        check_op(lambda: ad.sum_all(ad.softmax_cross_entropy(
            ad.pick_cells(a, rows, cols), [0, 2])), [a])

    def test_bilinear_2d(self):
        rng = np.random.default_rng(21)
        x, w, y = param(rng, 3, 4, name="x"), param(rng, 4, 5, name="w"), param(rng, 2, 5, name="y")
        check_op(lambda: ad.sum_all(ad.tanh(ad.bilinear(x, w, y))), [x, w, y])

    def test_bilinear_3d(self):
        rng = np.random.default_rng(22)
        x, w, y = param(rng, 3, 4, name="x"), param(rng, 2, 4, 4, name="w"), param(rng, 3, 4, name="y")
        check_op(lambda: ad.sum_all(ad.sigmoid(ad.bilinear(x, w, y))), [x, w, y])

    def test_sigmoid_cross_entropy(self):
        rng = np.random.default_rng(23)
        a = param(rng, 4, 4, name="a")
        targets = (rng.random((4, 4)) < 0.5).astype(float)
        check_op(lambda: ad.sum_all(ad.sigmoid_cross_entropy(a, targets)), [a])

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(24)
        a = param(rng, 5, 4, name="a")
        ids = np.array([0, 3, 1, 1, 2])
        check_op(lambda: ad.sum_all(ad.softmax_cross_entropy(a, ids)), [a])

    def test_dropout_frozen_mask(self):
        rng = np.random.default_rng(25)
        a = param(rng, 4, 4, name="a")

        def build():
            # same seed every call keeps the mask frozen, as the checker requires
            return ad.sum_all(ad.dropout(a, 0.5, np.random.default_rng(99)))

        check_op(build, [a])

    def test_lstm_seq(self):
        rng = np.random.default_rng(26)
        t, d_in, h = 4, 3, 2
        x = param(rng, t, d_in, name="x")
        w = param(rng, d_in, 4 * h, name="w")
        u = param(rng, h, 4 * h, name="u")
        b = param(rng, 4 * h, name="b")
        weights = ad.constant(np.linspace(-1, 1, t * h).reshape(t, h))
        check_op(lambda: ad.sum_all(ad.mul(ad.lstm_seq(x, w, u, b), weights)),
                 [x, w, u, b])

    def test_quadratic_loss_matches_2x(self):
        rng = np.random.default_rng(27)
        x = param(rng, 6, name="x")
        report = check_op(lambda: ad.sum_all(ad.mul(x, x)), [x], tol=1e-9)
        x.grad = None
        loss = ad.sum_all(ad.mul(x, x))
        loss.backward()
        np.testing.assert_allclose(x.grad, 2 * x.data, rtol=1e-12)
        assert report.max_rel_error < 1e-9


class TestAdam:
    def test_zero_gradient_leaves_parameter_unchanged(self):
        p = ad.Parameter([1.0, -2.0], name="p")
        p.grad = np.zeros(2)
        ad.adam_step([p])
        np.testing.assert_array_equal(p.data, [1.0, -2.0])
        assert p.grad is None

    def test_lr_zero_is_identity(self):
        p = ad.Parameter([1.0, -2.0], name="p")
        p.grad = np.array([0.3, -0.7])
        ad.adam_step([p], lr=0.0)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])

    def test_constant_gradient_update_approaches_lr_sign(self):
        # with a constant gradient g, bias-corrected Adam steps converge to
        # lr * g / (|g| + eps) ~= lr * sign(g)
        p = ad.Parameter([0.0], name="p")
        lr = 0.01
        g = np.array([3.7])
        prev = p.data.copy()
        for _ in range(5000):
            p.grad = g.copy()
            prev = p.data.copy()
            ad.adam_step([p], lr=lr)
        last_update = prev - p.data
        np.testing.assert_allclose(last_update, [lr], rtol=1e-4)

    def test_unpopulated_grad_skips_parameter(self):
        p = ad.Parameter([1.0], name="p")
        q = ad.Parameter([1.0], name="q")
        q.grad = np.array([1.0])
        ad.adam_step([p, q], lr=0.1)
        assert p.step == 0 and q.step == 1
        np.testing.assert_array_equal(p.data, [1.0])
        assert q.data[0] != 1.0


class TestGradientCheckMachinery:
    def test_nondeterministic_closure_detected(self):
        p = ad.Parameter([1.0], name="p")
        state = {"k": 0.0}

        def closure():
            state["k"] += 1.0
            return ad.sum_all(ad.scale(p, state["k"]))

        with pytest.raises(AutodiffError, match="deterministic"):
            ad.gradient_check(closure, [p])

    def test_frozen_dropout_forward_is_repeatable(self):
        p = ad.Parameter(np.arange(4.0), name="p")

        def closure():
            return ad.sum_all(ad.dropout(p, 0.5, np.random.default_rng(7)))

        with ad.no_grad():
            assert float(closure().data) == float(closure().data)


class TestCheckpoints:
    def test_roundtrip_name_keyed(self, tmp_path):
        path = tmp_path / "params.npz"
        arrays = {"b/two": np.arange(6.0).reshape(2, 3), "a/one": np.ones(4)}
        ad.save_arrays(path, arrays, meta={"kind": "test"})
        loaded, meta = ad.load_arrays(path)
        assert set(loaded) == {"a/one", "b/two"}
        np.testing.assert_array_equal(loaded["b/two"], arrays["b/two"])
        assert meta["kind"] == "test"
        assert meta["checkpoint_version"] == ad.CHECKPOINT_VERSION

    def test_reserved_name_rejected(self, tmp_path):
        from sdpkit.errors import CheckpointError
        with pytest.raises(CheckpointError):
            ad.save_arrays(tmp_path / "x.npz", {"__meta__": np.ones(1)})

import math

import numpy as np
import pytest

from signpose.ndcore import (
    AdamState,
    EncoderLayerParams,
    LSTMWeights,
    Parameter,
    Tensor,
    adam_step,
    bilstm,
    concat,
    dropout,
    encoder_layer,
    finite_difference_check,
    linear,
    lstm_sequence,
    lstm_step,
    masked_mean_pool,
    positional_encoding,
    softmax,
    softmax_cross_entropy,
    stack,
    tanh,
    zero_grads,
)
from signpose.ndcore.tensor import sin

SEEDS = range(5)


def rand_lstm_weights(rng, d, h, scale=0.5):
    return LSTMWeights(
        Tensor(rng.normal(size=(d, 4 * h)) * scale, requires_grad=True),
        Tensor(rng.normal(size=(h, 4 * h)) * scale, requires_grad=True),
        Tensor(rng.normal(size=4 * h) * scale, requires_grad=True),
        Tensor(rng.normal(size=4 * h) * scale, requires_grad=True),
    )


def rand_encoder_params(rng, d, d_ff=None, scale=0.4):
    d_ff = d_ff or 2 * d
    def w(*s):
        return rng.normal(size=s) * scale
    return [
        w(d, d), w(d), w(d, d), w(d), w(d, d), w(d), w(d, d), w(d),
        1.0 + w(d), w(d), w(d, d_ff), w(d_ff), w(d_ff, d), w(d), 1.0 + w(d), w(d),
    ]


class TestLinear:
    def test_identity_weight(self):
        x = np.arange(12, dtype=float).reshape(3, 4)
        y = linear(Tensor(x), Tensor(np.eye(4)), Tensor(np.zeros(4)))
        assert np.array_equal(y.data, x)

    def test_zero_input_broadcasts_bias(self):
        b = np.array([1.0, -2.0])
        y = linear(Tensor(np.zeros((3, 4))), Tensor(np.zeros((4, 2))), Tensor(b))
        assert np.array_equal(y.data, np.tile(b, (3, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))), Tensor(np.zeros(2)))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        x, w, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 4)), rng.normal(size=4)
        rep = finite_difference_check(
            lambda xt, wt, bt: (linear(xt, wt, bt) ** 2).sum(), [x, w, b]
        )
        assert rep.max_rel_err < 1e-6


class TestLSTMStep:
    def test_zero_weights_zero_state(self):
        w = LSTMWeights(*(Tensor(np.zeros(s)) for s in [(3, 16), (4, 16), (16,), (16,)]))
        h, c = lstm_step(Tensor(np.ones(3)), Tensor(np.zeros(4)), Tensor(np.zeros(4)), w)
        assert np.array_equal(h.data, np.zeros(4))
        assert np.array_equal(c.data, np.zeros(4))

    def test_saturated_forget_gate_drops_c_prev(self):
        rng = np.random.default_rng(0)
        w = rand_lstm_weights(rng, 3, 4)
        # Push the forget gate to ~0 with a large negative bias on its block.
        b = w.b_ih.data.copy()
        b[4:8] = -50.0
        w = LSTMWeights(w.w_ih, w.w_hh, Tensor(b), Tensor(np.zeros(16)))
        x = Tensor(rng.normal(size=(1, 3)))
        h1, c1 = lstm_step(x, Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), w)
        h2, c2 = lstm_step(x, Tensor(np.zeros((1, 4))), Tensor(100 * np.ones((1, 4))), w)
        assert np.abs(c1.data - c2.data).max() < 1e-12

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        d, h = 3, 4
        w = rand_lstm_weights(rng, d, h)
        point = [rng.normal(size=(2, d)), rng.normal(size=(2, h)), rng.normal(size=(2, h))] + [
            t.data for t in w.tensors()
        ]

        def f(x, hp, cp, wi, wh, bi, bh):
            ht, ct = lstm_step(x, hp, cp, LSTMWeights(wi, wh, bi, bh))
            return (ht * ht).sum() + (ct * tanh(ct)).sum()

        assert finite_difference_check(f, point).max_rel_err < 1e-5

    def test_single_vector_input(self):
        rng = np.random.default_rng(1)
        w = rand_lstm_weights(rng, 3, 4)
        h, c = lstm_step(Tensor(rng.normal(size=3)), Tensor(np.zeros(4)), Tensor(np.zeros(4)), w)
        assert h.shape == (4,) and c.shape == (4,)


class TestBiLSTM:
    def test_t1_concat_of_single_steps(self):
        rng = np.random.default_rng(2)
        wf = rand_lstm_weights(rng, 3, 4)
        wb = rand_lstm_weights(rng, 3, 4)
        x = rng.normal(size=(1, 1, 3))
        out = bilstm(Tensor(x), wf, wb)
        hf, _ = lstm_step(Tensor(x[:, 0]), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), wf)
        hb, _ = lstm_step(Tensor(x[:, 0]), Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 4))), wb)
        assert np.allclose(out.data[0, 0], np.concatenate([hf.data[0], hb.data[0]]))

    def test_time_reversal_symmetry(self):
        rng = np.random.default_rng(3)
        wf = rand_lstm_weights(rng, 3, 4)
        wb = rand_lstm_weights(rng, 3, 4)
        x = rng.normal(size=(2, 5, 3))
        y = bilstm(Tensor(x), wf, wb).data
        y_rev = bilstm(Tensor(x[:, ::-1].copy()), wb, wf).data
        # Reversing time and swapping directions swaps the two halves.
        swapped = np.concatenate([y_rev[:, ::-1, 4:], y_rev[:, ::-1, :4]], axis=-1)
        assert np.abs(y - swapped).max() < 1e-12

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        d, h, t = 3, 4, 5
        wf = rand_lstm_weights(rng, d, h)
        wb = rand_lstm_weights(rng, d, h)
        point = [rng.normal(size=(1, t, d))] + [w.data for w in wf.tensors() + wb.tensors()]

        def f(x, *flat):
            y = bilstm(x, LSTMWeights(*flat[:4]), LSTMWeights(*flat[4:]))
            return (y * y).mean()

        assert finite_difference_check(f, point).max_rel_err < 1e-5

    def test_2d_input(self):
        rng = np.random.default_rng(4)
        wf = rand_lstm_weights(rng, 3, 4)
        wb = rand_lstm_weights(rng, 3, 4)
        out = bilstm(Tensor(rng.normal(size=(5, 3))), wf, wb)
        assert out.shape == (5, 8)


class TestEncoderLayer:
    def test_singleton_softmax_weight(self):
        # With T=1 attention can only attend to itself; the layer must equal
        # the same computation with the attention context forced to v @ w_o.
        rng = np.random.default_rng(5)
        d, heads = 8, 2
        params = EncoderLayerParams(*map(Tensor, rand_encoder_params(rng, d)))
        x = rng.normal(size=(1, 1, d))
        out = encoder_layer(Tensor(x), params, heads, np.array([[True]]))
        v = x @ params.w_v.data + params.b_v.data
        ctx = v @ params.w_o.data + params.b_o.data

        def ln(a, g, b):
            mu = a.mean(-1, keepdims=True)
            var = ((a - mu) ** 2).mean(-1, keepdims=True)
            return (a - mu) / np.sqrt(var + 1e-5) * g + b

        h = ln(x + ctx, params.ln1_gamma.data, params.ln1_beta.data)
        ff = np.maximum(h @ params.w_ff1.data + params.b_ff1.data, 0.0)
        ff = ff @ params.w_ff2.data + params.b_ff2.data
        expected = ln(h + ff, params.ln2_gamma.data, params.ln2_beta.data)
        assert np.abs(out.data - expected).max() < 1e-12

    def test_identical_rows_stay_identical(self):
        rng = np.random.default_rng(6)
        d, heads, t = 8, 2, 4
        params = EncoderLayerParams(*map(Tensor, rand_encoder_params(rng, d)))
        row = rng.normal(size=d)
        x = np.tile(row, (1, t, 1))
        out = encoder_layer(Tensor(x), params, heads, np.ones((1, t), dtype=bool)).data
        assert np.abs(out - out[:, :1]).max() < 1e-12

    def test_divisibility_check(self):
        rng = np.random.default_rng(7)
        params = EncoderLayerParams(*map(Tensor, rand_encoder_params(rng, 8)))
        with pytest.raises(ValueError, match="divisible"):
            encoder_layer(Tensor(np.zeros((1, 2, 8))), params, 3, np.ones((1, 2), bool))

    def test_masked_keys_do_not_leak(self):
        rng = np.random.default_rng(8)
        d, heads, t = 8, 2, 4
        params = EncoderLayerParams(*map(Tensor, rand_encoder_params(rng, d)))
        mask = np.array([[True, True, True, False]])
        x = rng.normal(size=(1, t, d))
        x2 = x.copy()
        x2[0, 3] = 123.0
        a = encoder_layer(Tensor(x), params, heads, mask).data
        b = encoder_layer(Tensor(x2), params, heads, mask).data
        assert np.abs(a[0, :3] - b[0, :3]).max() < 1e-9

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        d, heads, t = 8, 2, 4
        vals = rand_encoder_params(rng, d)
        mask = np.array([[True, True, True, False], [True] * 4])
        x = rng.normal(size=(2, t, d))
        mflt = mask[:, :, None].astype(float)

        def f(xt, *ps):
            y = encoder_layer(xt, EncoderLayerParams(*ps), heads, mask)
            return (y * y * Tensor(mflt)).sum()

        assert finite_difference_check(f, [x] + vals).max_rel_err < 1e-4


class TestPositionalEncoding:
    def test_position_zero(self):
        pe = positional_encoding(3, 6)
        assert np.array_equal(pe[0, 0::2], np.zeros(3))
        assert np.array_equal(pe[0, 1::2], np.ones(3))

    def test_bounded(self):
        pe = positional_encoding(50, 16)
        assert pe.min() >= -1.0 and pe.max() <= 1.0

    def test_known_value(self):
        pe = positional_encoding(2, 4)
        assert abs(pe[1, 0] - math.sin(1.0)) < 1e-12

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError, match="even"):
            positional_encoding(4, 7)


class TestDropout:
    def test_inference_is_bit_identity(self):
        x = Tensor(np.random.default_rng(0).normal(size=(4, 5)))
        out = dropout(x, 0.5, training=False)
        assert out is x

    def test_rate_zero_identity(self):
        x = Tensor(np.ones((2, 2)))
        assert dropout(x, 0.0, training=True, rng=np.random.default_rng(0)) is x

    def test_inverted_scaling_preserves_mean(self):
        rng = np.random.default_rng(11)
        x = Tensor(np.ones(100_000))
        out = dropout(x, 0.5, training=True, rng=rng)
        assert 0.98 <= out.data.mean() <= 1.02

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            dropout(Tensor(np.ones(3)), 1.0, training=True, rng=np.random.default_rng(0))

    def test_deterministic_given_rng(self):
        x = Tensor(np.ones((3, 3)))
        a = dropout(x, 0.3, True, np.random.default_rng(5)).data
        b = dropout(x, 0.3, True, np.random.default_rng(5)).data
        assert np.array_equal(a, b)

    def test_gradient_with_fixed_mask(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 4))

        def f(xt):
            return (dropout(xt, 0.4, True, np.random.default_rng(7)) ** 2).sum()

        assert finite_difference_check(f, [x]).max_rel_err < 1e-6


class TestMaskedMeanPool:
    def test_all_true(self):
        seq = Tensor(np.array([[1.0, 1.0], [3.0, 3.0]]))
        out = masked_mean_pool(seq, np.array([True, True]))
        assert np.array_equal(out.data, [2.0, 2.0])

    def test_single_row_selected(self):
        seq = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        out = masked_mean_pool(seq, np.array([False, True]))
        assert np.array_equal(out.data, [3.0, 4.0])

    def test_masked_values_exactly_ignored(self):
        rng = np.random.default_rng(12)
        base = rng.normal(size=(2, 4, 3))
        mask = np.array([[True, True, False, False], [True, False, True, False]])
        poked = base.copy()
        poked[~mask] = 1e12
        a = masked_mean_pool(Tensor(base), mask).data
        b = masked_mean_pool(Tensor(poked), mask).data
        assert np.array_equal(a, b)

    def test_all_false_rejected(self):
        with pytest.raises(ValueError, match="no valid"):
            masked_mean_pool(Tensor(np.ones((1, 3, 2))), np.zeros((1, 3), dtype=bool))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        mask = np.array([[True, True, False], [True, False, True]])

        def f(xt):
            return (masked_mean_pool(xt, mask) ** 2).sum()

        assert finite_difference_check(f, [rng.normal(size=(2, 3, 4))]).max_rel_err < 1e-5


class TestSoftmaxCrossEntropy:
    def test_uniform_binary(self):
        loss, _ = softmax_cross_entropy(Tensor(np.zeros((1, 2))), np.array([0]))
        assert abs(loss.item() - math.log(2)) < 1e-12

    def test_extreme_logits_stable(self):
        loss, grad = softmax_cross_entropy(
            Tensor(np.array([[1000.0, -1000.0]])), np.array([0])
        )
        assert loss.item() < 1e-9
        assert np.isfinite(grad).all()

    def test_label_out_of_range(self):
        with pytest.raises(ValueError, match="range"):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(13)
        logits = rng.normal(size=(16, 7))
        labels = rng.integers(0, 7, size=16)
        loss, _ = softmax_cross_entropy(Tensor(logits), labels)
        assert loss.item() >= 0.0

    def test_returned_gradient_formula(self):
        rng = np.random.default_rng(14)
        logits = rng.normal(size=(4, 6))
        labels = np.array([0, 5, 2, 2])
        _, grad = softmax_cross_entropy(Tensor(logits), labels)
        p = softmax(logits)
        p[np.arange(4), labels] -= 1.0
        assert np.allclose(grad, p / 4, atol=1e-15)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(3, 5))
        labels = rng.integers(0, 5, size=3)

        def f(lt):
            return softmax_cross_entropy(lt, labels)[0]

        assert finite_difference_check(f, [logits]).max_rel_err < 1e-6


class TestSoftmax:
    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(15)
        p = softmax(rng.normal(size=(100, 9)) * 10)
        assert np.abs(p.sum(axis=1) - 1.0).max() < 1e-12


class TestAdam:
    def test_first_step_is_signed_lr(self):
        p = Parameter(np.array([1.0]), "w")
        p.grad = np.array([0.3])
        state = AdamState.for_params({"w": p}, lr=0.01, eps=1e-16)
        adam_step({"w": p}, state)
        assert abs(p.data[0] - (1.0 - 0.01)) < 1e-9

    def test_zero_gradient_no_change(self):
        p = Parameter(np.array([2.0]), "w")
        p.grad = np.array([0.0])
        state = AdamState.for_params({"w": p}, lr=0.5)
        adam_step({"w": p}, state)
        assert p.data[0] == 2.0

    def test_quadratic_convergence(self):
        p = Parameter(np.array([1.0]), "w")
        params = {"w": p}
        state = AdamState.for_params(params, lr=0.1)
        for _ in range(200):
            zero_grads(params)
            p.grad = 2.0 * p.data
            adam_step(params, state)
        assert abs(p.data[0]) < 0.05

    def test_missing_gradient_skipped(self):
        p = Parameter(np.array([1.5]), "w")
        state = AdamState.for_params({"w": p})
        adam_step({"w": p}, state)
        assert p.data[0] == 1.5


class TestFiniteDifferenceCheck:
    def test_square(self):
        rep = finite_difference_check(lambda x: x * x, [np.array(3.0)])
        assert rep.max_rel_err < 1e-6

    def test_sin_at_zero(self):
        rep = finite_difference_check(lambda x: sin(x), [np.array(0.0)])
        assert rep.max_rel_err < 1e-8

    def test_tolerance_verdict(self):
        good = finite_difference_check(lambda x: (x ** 2).sum(), [np.ones(3)], tol=1e-6)
        assert good.passed is True


class TestTensorOps:
    @pytest.mark.parametrize("seed", SEEDS)
    def test_composite_gradients(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(2, 3))
        b = rng.normal(size=(3, 4))
        c = rng.normal(size=(2, 4)) + 3.0

        def f(at, bt, ct):
            y = (at @ bt) / ct
            y = concat([y, y * 2.0], axis=-1)
            y = stack([y, y + 1.0], axis=0)
            z = y.swapaxes(0, 1).reshape(2, -1)
            return (tanh(z[:, :4]) ** 3).mean() + z.sum() * 0.1

        assert finite_difference_check(f, [a, b, c]).max_rel_err < 1e-6

    def test_broadcast_add_gradient(self):
        rng = np.random.default_rng(20)

        def f(at, bt):
            return ((at + bt) ** 2).sum()

        assert finite_difference_check(
            f, [rng.normal(size=(3, 4)), rng.normal(size=(4,))]
        ).max_rel_err < 1e-6

    def test_grad_accumulates_over_reuse(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = x * x + x * 3.0
        y.backward()
        assert x.grad == pytest.approx(2 * 2.0 + 3.0)

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            (x * 2).backward()

    def test_matmul_shape_error(self):
        with pytest.raises(ValueError, match="matmul"):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((4, 5)))

"""Network numerics: cell equations, forward oracle, gradients, optimizers."""

import math

import numpy as np
import pytest
from helpers import fd_gradient_check, make_tiny_model, ref_forward_eval

from maneuver_rec.errors import CompatibilityError, ConfigError, DataError
from maneuver_rec.nn import available_backends, backend_name, set_backend
from maneuver_rec.nn.model import (
    backward,
    forward,
    lstm_cell_forward,
    softmax_cross_entropy,
)
from maneuver_rec.nn.optim import AdamState, adam_step, init_adam_state, sgd_step
from maneuver_rec.nn.params import (
    GATE_ORDER,
    LstmLayerParams,
    ModelConfig,
    init_params,
    params_from_tensors,
)


@pytest.fixture(autouse=True)
def restore_backend():
    yield
    set_backend("auto")


def tiny_config(**overrides):
    base = dict(
        n_classes=3,
        n_features=2,
        hidden_size=3,
        n_lstm_layers=2,
        lstm_dropout=0.5,
        fc_dropout=0.25,
        fc1_size=4,
        fc2_size=3,
        init_seed=0,
    )
    base.update(overrides)
    return ModelConfig(**base)


class TestModelConfig:
    def test_gate_order_constant(self):
        assert GATE_ORDER == ("input", "forget", "cell", "output")

    def test_dropout_bounds(self):
        with pytest.raises(ConfigError):
            tiny_config(lstm_dropout=1.0)
        with pytest.raises(ConfigError):
            tiny_config(fc_dropout=-0.1)
        tiny_config(lstm_dropout=0.0, fc_dropout=0.0)

    def test_sizes_positive(self):
        with pytest.raises(ConfigError):
            tiny_config(hidden_size=0)
        with pytest.raises(ConfigError):
            tiny_config(n_lstm_layers=0)

    def test_dict_round_trip(self):
        cfg = tiny_config()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({**cfg.to_dict(), "bogus": 1})


class TestInitParams:
    def test_deterministic(self):
        a = init_params(tiny_config())
        b = init_params(tiny_config())
        for key, t in a.tensors().items():
            assert np.array_equal(t, b.tensors()[key])
        c = init_params(tiny_config(init_seed=1))
        assert any(
            not np.array_equal(t, c.tensors()[key]) for key, t in a.tensors().items()
        )

    def test_forget_gate_bias_is_one(self):
        params = init_params(tiny_config(hidden_size=4))
        for layer in params.lstm_layers:
            H = layer.hidden_size
            assert np.all(layer.b[H : 2 * H] == 1.0)
            assert np.all(layer.b[:H] == 0.0)
            assert np.all(layer.b[2 * H :] == 0.0)

    def test_weight_bounds(self):
        cfg = tiny_config(hidden_size=4, fc1_size=5)
        params = init_params(cfg)
        bound = 1.0 / math.sqrt(cfg.hidden_size)
        for layer in params.lstm_layers:
            assert np.abs(layer.w_ih).max() <= bound
            assert np.abs(layer.w_hh).max() <= bound
        assert np.abs(params.fc1.w).max() <= 1.0 / math.sqrt(cfg.hidden_size)
        assert np.abs(params.fc2.w).max() <= 1.0 / math.sqrt(cfg.fc1_size)
        assert np.all(params.fc1.b == 0.0)

    def test_tensor_keys_and_shapes(self):
        cfg = tiny_config()
        params = init_params(cfg)
        tensors = params.tensors()
        assert set(tensors) == {
            "lstm0.w_ih",
            "lstm0.w_hh",
            "lstm0.b",
            "lstm1.w_ih",
            "lstm1.w_hh",
            "lstm1.b",
            "fc1.w",
            "fc1.b",
            "fc2.w",
            "fc2.b",
            "classifier.w",
            "classifier.b",
        }
        assert tensors["lstm0.w_ih"].shape == (4 * 3, 2)
        assert tensors["lstm1.w_ih"].shape == (4 * 3, 3)
        assert tensors["classifier.w"].shape == (3, 3)

    def test_params_from_tensors_round_trip(self):
        cfg = tiny_config()
        params = init_params(cfg)
        again = params_from_tensors(cfg, params.tensors())
        for key, t in params.tensors().items():
            assert np.array_equal(t, again.tensors()[key])

    def test_params_from_tensors_rejects_bad_shapes(self):
        cfg = tiny_config()
        tensors = init_params(cfg).tensors()
        tensors["fc1.w"] = np.zeros((1, 1))
        with pytest.raises(CompatibilityError):
            params_from_tensors(cfg, tensors)
        del tensors["fc1.w"]
        with pytest.raises(CompatibilityError):
            params_from_tensors(cfg, tensors)


class TestLstmCell:
    def test_zero_everything_gives_zero(self):
        layer = LstmLayerParams(
            w_ih=np.zeros((8, 3)), w_hh=np.zeros((8, 2)), b=np.zeros(8)
        )
        h, c = lstm_cell_forward(np.ones((4, 3)), np.zeros((4, 2)), np.zeros((4, 2)), layer)
        assert np.all(h == 0.0) and np.all(c == 0.0)

    def test_saturated_forget_gate_preserves_cell(self):
        H = 2
        b = np.zeros(4 * H)
        b[H : 2 * H] = 20.0  # forget gate ~ 1
        layer = LstmLayerParams(w_ih=np.zeros((4 * H, 1)), w_hh=np.zeros((4 * H, H)), b=b)
        c_prev = np.array([[0.3, -0.7]])
        _, c = lstm_cell_forward(np.zeros((1, 1)), np.zeros((1, H)), c_prev, layer)
        assert np.allclose(c, c_prev, atol=1e-8)

    def test_hand_evaluated_two_by_two(self):
        # H=1, F=1: every gate preactivation is w_ih*x + w_hh*h + b
        w_ih = np.array([[0.5], [-0.25], [1.0], [0.75]])
        w_hh = np.array([[0.2], [0.4], [-0.6], [0.1]])
        b = np.array([0.1, 1.0, -0.2, 0.3])
        layer = LstmLayerParams(w_ih=w_ih, w_hh=w_hh, b=b)
        x, h_prev, c_prev = 0.8, -0.5, 0.25

        def sig(v):
            return 1.0 / (1.0 + math.exp(-v))

        gi = sig(0.5 * x + 0.2 * h_prev + 0.1)
        gf = sig(-0.25 * x + 0.4 * h_prev + 1.0)
        gg = math.tanh(1.0 * x + -0.6 * h_prev + -0.2)
        go = sig(0.75 * x + 0.1 * h_prev + 0.3)
        c_exp = gf * c_prev + gi * gg
        h_exp = go * math.tanh(c_exp)

        h, c = lstm_cell_forward(
            np.array([[x]]), np.array([[h_prev]]), np.array([[c_prev]]), layer
        )
        assert abs(float(h[0, 0]) - h_exp) < 1e-14
        assert abs(float(c[0, 0]) - c_exp) < 1e-14

    def test_shape_mismatch(self):
        layer = LstmLayerParams(w_ih=np.zeros((8, 3)), w_hh=np.zeros((8, 2)), b=np.zeros(8))
        with pytest.raises(DataError):
            lstm_cell_forward(np.zeros((1, 4)), np.zeros((1, 2)), np.zeros((1, 2)), layer)
        with pytest.raises(DataError):
            lstm_cell_forward(np.zeros((1, 3)), np.zeros((1, 3)), np.zeros((1, 2)), layer)

    def test_hidden_state_bounded(self):
        rng = np.random.default_rng(0)
        H, F = 3, 2
        layer = LstmLayerParams(
            w_ih=rng.normal(size=(4 * H, F)) * 10,
            w_hh=rng.normal(size=(4 * H, H)) * 10,
            b=rng.normal(size=4 * H) * 10,
        )
        h = np.zeros((5, H))
        c = np.zeros((5, H))
        for t in range(20):
            x = rng.normal(size=(5, F)) * 50
            h, c = lstm_cell_forward(x, h, c, layer)
            assert np.abs(h).max() <= 1.0
            assert np.isfinite(c).all()


class TestForward:
    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(7)
        for trial in range(5):
            params, X, _ = make_tiny_model(rng, dropout_allowed=False)
            got = forward(params, X, mode="eval")
            want = ref_forward_eval(params, X)
            assert np.abs(got - want).max() < 1e-10

    def test_zero_params_give_uniform_logits(self):
        cfg = tiny_config()
        params = init_params(cfg)
        for t in params.tensors().values():
            t[...] = 0.0
        logits = forward(params, np.ones((4, 5, 2)), mode="eval")
        assert np.all(logits == 0.0)

    def test_eval_is_pure(self):
        params = init_params(tiny_config())
        X = np.random.default_rng(1).normal(size=(3, 6, 2))
        a = forward(params, X, mode="eval")
        b = forward(params, X, mode="eval")
        assert np.array_equal(a, b)

    def test_zero_dropout_train_equals_eval(self):
        params = init_params(tiny_config(lstm_dropout=0.0, fc_dropout=0.0))
        X = np.random.default_rng(2).normal(size=(3, 6, 2))
        train = forward(params, X, mode="train", dropout_seed=123)
        ev = forward(params, X, mode="eval")
        assert np.allclose(train, ev, atol=1e-15)

    def test_train_mode_reproducible_per_seed(self):
        params = init_params(tiny_config())
        X = np.random.default_rng(3).normal(size=(4, 6, 2))
        a = forward(params, X, mode="train", dropout_seed=9)
        b = forward(params, X, mode="train", dropout_seed=9)
        c = forward(params, X, mode="train", dropout_seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_input_validation(self):
        params = init_params(tiny_config())
        with pytest.raises(DataError):
            forward(params, np.zeros((2, 5, 3)))  # wrong feature count
        with pytest.raises(DataError):
            forward(params, np.zeros((2, 5)))
        with pytest.raises(DataError):
            forward(params, np.zeros((2, 0, 2)))
        with pytest.raises(ConfigError):
            forward(params, np.zeros((2, 5, 2)), mode="training")

    def test_empty_batch(self):
        params = init_params(tiny_config())
        out = forward(params, np.zeros((0, 5, 2)))
        assert out.shape == (0, 3)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_log_k(self):
        loss, _ = softmax_cross_entropy(np.zeros((5, 8)), np.arange(5) % 8)
        assert abs(loss - math.log(8)) < 1e-12

    def test_saturated_margin(self):
        logits = np.zeros((2, 4))
        logits[:, 1] = 30.0
        loss, _ = softmax_cross_entropy(logits, np.array([1, 1]))
        assert loss < 1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        logits = rng.normal(size=(3, 4))
        targets = rng.integers(0, 4, size=3)
        _, grad = softmax_cross_entropy(logits, targets)
        h = 1e-6
        for i in range(3):
            for j in range(4):
                lp = logits.copy()
                lp[i, j] += h
                lm = logits.copy()
                lm[i, j] -= h
                num = (
                    softmax_cross_entropy(lp, targets)[0]
                    - softmax_cross_entropy(lm, targets)[0]
                ) / (2 * h)
                assert abs(num - grad[i, j]) / max(abs(num), abs(grad[i, j]), 1e-6) < 1e-6

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(12)
        logits = rng.normal(size=(6, 5)) * 30
        targets = rng.integers(0, 5, size=6)
        _, grad = softmax_cross_entropy(logits, targets)
        onehot = np.zeros((6, 5))
        onehot[np.arange(6), targets] = 1.0
        softmax = grad * 6 + onehot
        assert np.allclose(softmax.sum(axis=1), 1.0, atol=1e-12)

    def test_target_out_of_range(self):
        with pytest.raises(DataError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))
        with pytest.raises(DataError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([-1, 0]))

    def test_huge_logits_stable(self):
        logits = np.array([[1000.0, 999.0], [-1000.0, -1001.0]])
        loss, grad = softmax_cross_entropy(logits, np.array([0, 0]))
        assert np.isfinite(loss)
        assert np.isfinite(grad).all()


class TestBackward:
    def test_gradient_check_small_sweep(self):
        rng = np.random.default_rng(21)
        coord_rng = np.random.default_rng(22)
        for trial in range(6):
            params, X, y = make_tiny_model(rng)
            worst = fd_gradient_check(params, X, y, dropout_seed=trial, coord_rng=coord_rng)
            assert worst <= 1e-4, f"trial {trial}: relative error {worst}"

    def test_saturated_loss_has_tiny_gradients(self):
        params = init_params(tiny_config(lstm_dropout=0.0, fc_dropout=0.0))
        params.classifier.b[0] = 50.0
        X = np.random.default_rng(5).normal(size=(3, 4, 2))
        y = np.zeros(3, dtype=np.int64)
        loss, grads = backward(params, X, y, dropout_seed=0)
        assert loss < 1e-8
        total = math.sqrt(sum(float((g**2).sum()) for g in grads.values()))
        assert total < 1e-8

    def test_same_seed_bit_identical(self):
        params = init_params(tiny_config())
        X = np.random.default_rng(6).normal(size=(4, 5, 2))
        y = np.array([0, 1, 2, 0])
        l1, g1 = backward(params, X, y, dropout_seed=77)
        l2, g2 = backward(params, X, y, dropout_seed=77)
        assert l1 == l2
        for key in g1:
            assert np.array_equal(g1[key], g2[key])

    def test_gradients_finite_on_finite_inputs(self):
        params = init_params(tiny_config())
        X = np.random.default_rng(8).normal(size=(2, 5, 2)) * 100
        y = np.array([1, 2])
        loss, grads = backward(params, X, y, dropout_seed=0)
        assert np.isfinite(loss)
        for g in grads.values():
            assert np.isfinite(g).all()


@pytest.mark.skipif(
    "ext" not in available_backends(), reason="compiled extension not built"
)
class TestBackendAgreement:
    def test_forward_and_backward_agree(self):
        rng = np.random.default_rng(31)
        for trial in range(6):
            params, X, y = make_tiny_model(rng)
            set_backend("python")
            lp = forward(params, X, mode="eval")
            loss_p, grads_p = backward(params, X, y, dropout_seed=trial)
            set_backend("ext")
            le = forward(params, X, mode="eval")
            loss_e, grads_e = backward(params, X, y, dropout_seed=trial)
            assert np.allclose(lp, le, atol=1e-12)
            assert abs(loss_p - loss_e) < 1e-12
            for key in grads_p:
                assert np.allclose(grads_p[key], grads_e[key], atol=1e-12), key

    def test_backend_selection(self):
        assert set_backend("python") == "python"
        assert backend_name() == "python"
        assert set_backend("ext") == "ext"
        assert backend_name() == "ext"
        assert set_backend("auto") == "ext"
        with pytest.raises(ConfigError):
            set_backend("cuda")


class TestOptimizers:
    def test_sgd_exact_update(self):
        params = init_params(tiny_config())
        before = {k: t.copy() for k, t in params.tensors().items()}
        grads = {k: np.full_like(t, 0.5) for k, t in params.tensors().items()}
        sgd_step(params, grads, lr=0.1)
        for key, t in params.tensors().items():
            assert np.allclose(t, before[key] - 0.05, atol=1e-15)

    def test_adam_first_step_closed_form(self):
        params = init_params(tiny_config())
        before = {k: t.copy() for k, t in params.tensors().items()}
        rng = np.random.default_rng(41)
        grads = {k: rng.normal(size=t.shape) for k, t in params.tensors().items()}
        state = init_adam_state(params)
        lr, eps = 0.01, 1e-8
        adam_step(params, grads, state, lr=lr, eps=eps)
        assert state.steps == 1
        for key, t in params.tensors().items():
            g = grads[key]
            expected = before[key] - lr * g / (np.abs(g) + eps)
            assert np.allclose(t, expected, atol=1e-12)

    def test_adam_zero_gradient_is_noop(self):
        params = init_params(tiny_config())
        before = {k: t.copy() for k, t in params.tensors().items()}
        grads = {k: np.zeros_like(t) for k, t in params.tensors().items()}
        state = init_adam_state(params)
        adam_step(params, grads, state, lr=0.5)
        for key, t in params.tensors().items():
            assert np.array_equal(t, before[key])

    def test_adam_explicit_t_matches_auto(self):
        grads_rng = np.random.default_rng(42)
        grad_seq = [
            {
                k: grads_rng.normal(size=t.shape)
                for k, t in init_params(tiny_config()).tensors().items()
            }
            for _ in range(3)
        ]
        auto = init_params(tiny_config())
        auto_state = init_adam_state(auto)
        manual = init_params(tiny_config())
        manual_state = init_adam_state(manual)
        for i, grads in enumerate(grad_seq):
            adam_step(auto, grads, auto_state, lr=0.01)
            adam_step(manual, grads, manual_state, lr=0.01, t=i + 1)
        for key, t in auto.tensors().items():
            assert np.array_equal(t, manual.tensors()[key])

    def test_adam_rejects_bad_t(self):
        params = init_params(tiny_config())
        grads = {k: np.zeros_like(t) for k, t in params.tensors().items()}
        with pytest.raises(ConfigError):
            adam_step(params, grads, init_adam_state(params), lr=0.1, t=0)

    def test_missing_gradient_rejected(self):
        params = init_params(tiny_config())
        grads = {k: np.zeros_like(t) for k, t in params.tensors().items()}
        del grads["fc1.w"]
        with pytest.raises(CompatibilityError):
            sgd_step(params, grads, lr=0.1)

    def test_state_holds_moments_per_tensor(self):
        params = init_params(tiny_config())
        state = init_adam_state(params)
        assert isinstance(state, AdamState)
        assert set(state.m) == set(params.tensors())
        assert all(np.all(v == 0.0) for v in state.v.values())

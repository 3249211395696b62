import math

import numpy as np
import pytest

from bnrobust.exceptions import ContractError, DimensionError, DivergenceError, ParameterError
from bnrobust.network import (
    BatchNorm,
    Conv2d,
    Dataset,
    Dense,
    Flatten,
    ReLU,
    SequentialModel,
    SgdConfig,
    build_cnn,
    build_mlp,
    evaluate_accuracy,
    forward,
    loss_softmax_ce,
    make_blobs,
    sgd_step,
    train,
)
from bnrobust.network.training import iter_minibatches
from bnrobust.norm import NormKind
from bnrobust.tensor import SeededRng
from gradcheck import max_rel_error, numeric_grad


class TestForward:
    def test_empty_model_is_identity(self):
        x = np.arange(6.0).reshape(2, 3)
        out, _ = SequentialModel().forward(x)
        np.testing.assert_array_equal(out, x)

    def test_identity_dense(self):
        x = np.arange(6.0).reshape(2, 3)
        model = SequentialModel([Dense(3, 3, weight=np.eye(3))])
        np.testing.assert_array_equal(model.predict_logits(x), x)

    def test_dense_hand_value(self):
        model = SequentialModel([Dense(2, 1, weight=[[1], [1]], bias=[0.5])])
        assert model.predict_logits([[1, 2]]).tolist() == [[3.5]]

    def test_shape_error_names_layer(self):
        model = SequentialModel([Dense(2, 3), ReLU(), Dense(4, 1)])
        with pytest.raises(DimensionError, match="layer 2"):
            model.forward(np.zeros((1, 2)))

    def test_mode_argument(self):
        model = build_mlp(2, [4], 2, "l1", seed=0)
        before = model.layers[1].bn.running_mean.copy()
        forward(model, np.ones((3, 2)) * [[1], [2], [3]], mode="eval")
        np.testing.assert_array_equal(model.layers[1].bn.running_mean, before)
        forward(model, np.ones((3, 2)) * [[1], [2], [3]], mode="train")
        assert not np.array_equal(model.layers[1].bn.running_mean, before)
        with pytest.raises(ValueError):
            forward(model, np.ones((3, 2)), mode="test")

    def test_conv_output_shape_and_value(self):
        conv = Conv2d(1, 1, 2, stride=1, weight=np.ones((1, 1, 2, 2)))
        x = np.arange(9.0).reshape(1, 1, 3, 3)
        y, _ = conv.forward(x)
        np.testing.assert_array_equal(y[0, 0], [[8, 12], [20, 24]])

    def test_conv_stride(self):
        conv = Conv2d(2, 3, 3, stride=2, rng=SeededRng(0))
        y, _ = conv.forward(np.zeros((4, 2, 9, 7)))
        assert y.shape == (4, 3, 4, 3)
        assert conv.output_hw(9, 7) == (4, 3)


class TestLoss:
    def test_uniform_logits(self):
        loss, _ = loss_softmax_ce(np.zeros((4, 5)), [0, 1, 2, 3])
        assert loss == pytest.approx(math.log(5))

    def test_saturated_correct(self):
        loss, _ = loss_softmax_ce(np.eye(3) * 1e6, [0, 1, 2])
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_two_class_closed_form(self):
        loss, d = loss_softmax_ce([[1.0, 1.0]], [0])
        assert loss == pytest.approx(math.log(2), abs=1e-12)
        np.testing.assert_allclose(d, [[-0.5, 0.5]])

    def test_invalid_label(self):
        with pytest.raises(ParameterError):
            loss_softmax_ce(np.zeros((2, 3)), [0, 3])

    def test_gradient_matches_finite_differences(self, np_rng):
        logits = np_rng.normal(size=(5, 4))
        labels = np.array([0, 3, 1, 1, 2])
        _, d = loss_softmax_ce(logits, labels)
        num = numeric_grad(lambda: loss_softmax_ce(logits, labels)[0], logits)
        assert max_rel_error(d, num) < 1e-6


def _model_loss(model, x, y, training):
    logits, _ = model.forward(x, training=training)
    return loss_softmax_ce(logits, y)[0]


def _gradcheck(model, x, y, training=True):
    logits, caches = model.forward(x, training=training)
    _, d = loss_softmax_ce(logits, y)
    grads = model.backward(caches, d)
    snapshot = [(bn.running_mean.copy(), bn.running_sigma.copy()) for bn in model.norm_layers()]

    def loss():
        value = _model_loss(model, x, y, training)
        for bn, (rm, rs) in zip(model.norm_layers(), snapshot):
            bn.running_mean, bn.running_sigma = rm.copy(), rs.copy()
        return value

    worst = 0.0
    for path, p in model.parameters().items():
        worst = max(worst, max_rel_error(grads[path], numeric_grad(loss, p)))
    return worst


class TestBackward:
    def test_zero_upstream(self, np_rng):
        model = build_mlp(3, [4], 2, "topk", seed=1)
        _, caches = model.forward(np_rng.normal(size=(6, 3)), training=True)
        grads = model.backward(caches, np.zeros((6, 2)))
        assert all(np.all(g == 0) for g in grads.values())

    def test_single_dense_identity(self, np_rng):
        model = SequentialModel([Dense(3, 2, rng=SeededRng(0))])
        x = np_rng.normal(size=(4, 3))
        d = np_rng.normal(size=(4, 2))
        _, caches = model.forward(x)
        grads = model.backward(caches, d)
        np.testing.assert_allclose(grads["0.weight"], x.T @ d)
        np.testing.assert_allclose(grads["0.bias"], d.sum(axis=0))

    def test_stale_cache(self, np_rng):
        model = build_mlp(2, [3], 2, "l2")
        _, caches = model.forward(np_rng.normal(size=(4, 2)), training=True)
        grads = model.backward(caches, np.ones((4, 2)))
        sgd_step(model, grads, 0.1)
        with pytest.raises(ContractError):
            model.backward(caches, np.ones((4, 2)))

    def test_foreign_cache(self, np_rng):
        a, b = build_mlp(2, [3], 2, "l2"), build_mlp(2, [3], 2, "l2")
        _, caches = a.forward(np_rng.normal(size=(4, 2)), training=True)
        with pytest.raises(ContractError):
            b.backward(caches, np.ones((4, 2)))

    @pytest.mark.parametrize("norm", ["l2", "l1", "topk:3", None])
    def test_mlp_gradcheck(self, norm):
        rng = np.random.default_rng(11)
        model = build_mlp(4, [6, 5], 3, norm, seed=2)
        x = rng.normal(size=(8, 4))
        y = rng.integers(0, 3, size=8)
        worst = _gradcheck(model, x, y)
        assert worst < 1e-4

    @pytest.mark.parametrize("norm", ["l2", "l1", "topk:3"])
    def test_cnn_gradcheck(self, norm):
        rng = np.random.default_rng(5)
        model = build_cnn((1, 7, 7), channels=(2, 3), hidden=4, num_classes=3,
                          norm=norm, seed=3, kernel_size=3, stride=1)
        x = rng.normal(size=(4, 1, 7, 7))
        y = rng.integers(0, 3, size=4)
        worst = _gradcheck(model, x, y)
        assert worst < 1e-4

    def test_eval_mode_gradcheck(self, np_rng):
        model = build_mlp(3, [5], 2, "l1", seed=4)
        for bn in model.norm_layers():
            bn.running_mean = np_rng.normal(size=5)
            bn.running_sigma = np_rng.uniform(0.5, 2, size=5)
        worst = _gradcheck(model, np_rng.normal(size=(6, 3)), np_rng.integers(0, 2, 6), training=False)
        assert worst < 1e-4

    def test_input_gradient_through_stack(self, np_rng):
        layers = [Conv2d(1, 2, 2, rng=SeededRng(0)), BatchNorm(2, "l2"), ReLU(), Flatten(),
                  Dense(8, 2, rng=SeededRng(1))]
        model = SequentialModel(layers)
        x = np_rng.normal(size=(3, 1, 3, 3))
        r = np_rng.normal(size=(3, 2))
        logits, caches = model.forward(x, training=True)
        grads = model.backward(caches, r)
        num = numeric_grad(lambda: float((model.forward(x, training=True)[0] * r).sum()),
                           model.layers[0].weight)
        assert max_rel_error(grads["0.weight"], num) < 1e-4


class TestSgd:
    def _model(self):
        return SequentialModel([Dense(1, 1, weight=[[1.0]], bias=[1.0])])

    def test_zero_rate(self):
        model = self._model()
        sgd_step(model, {"0.weight": np.array([[2.0]]), "0.bias": np.array([2.0])}, 0.0)
        assert model.layers[0].weight[0, 0] == 1.0

    def test_hand_value_and_linearity(self):
        model = self._model()
        g = {"0.weight": np.array([[2.0]]), "0.bias": np.array([2.0])}
        sgd_step(model, g, 0.1)
        assert model.layers[0].weight[0, 0] == pytest.approx(0.8)
        sgd_step(model, g, 0.1)
        assert model.layers[0].bias[0] == pytest.approx(1 - 2 * 0.1 * 2)

    def test_key_mismatch(self):
        model = self._model()
        with pytest.raises(ContractError):
            sgd_step(model, {"0.weight": np.array([[2.0]])}, 0.1)
        with pytest.raises(ContractError):
            sgd_step(model, {"0.weight": np.zeros((1, 1)), "0.bias": np.zeros(1), "9.x": np.zeros(1)}, 0.1)


def _blobs(seed=0, n=400, classes=2, spread=0.15):
    return make_blobs(SeededRng(seed), n, classes, spread)


class TestTrain:
    def test_zero_epochs(self):
        model = build_mlp(2, [4], 2, "l2", seed=0)
        before = {k: v.copy() for k, v in model.parameters().items()}
        log = train(model, _blobs(), SgdConfig(epochs=0))
        assert log.rows() == []
        for k, v in model.parameters().items():
            np.testing.assert_array_equal(v, before[k])

    @pytest.mark.parametrize("norm", ["l2", "l1", "topk"])
    def test_separable_blobs(self, norm):
        model = build_mlp(2, [16], 2, norm, seed=0)
        log = train(model, _blobs(), SgdConfig(learning_rate=0.05, batch_size=32, epochs=50))
        assert log.accuracy[-1] >= 0.99

    def test_deterministic(self):
        logs, params = [], []
        for _ in range(2):
            model = build_mlp(2, [8], 2, "l1", seed=3)
            logs.append(train(model, _blobs(), SgdConfig(epochs=3, seed=9)).rows())
            params.append(b"".join(v.tobytes() for v in model.parameters().values()))
        assert logs[0] == logs[1]
        assert params[0] == params[1]

    def test_divergence(self):
        model = build_mlp(2, [8], 2, None, seed=0)
        ds = Dataset(np.array([[1e308, 1e308], [-1e308, 1e308]] * 4), [0, 1] * 4, 2)
        with np.errstate(all="ignore"), pytest.raises(DivergenceError) as info:
            train(model, ds, SgdConfig(learning_rate=1e10, epochs=3))
        assert info.value.epoch >= 1

    def test_config_validation(self):
        with pytest.raises(ParameterError):
            SgdConfig(learning_rate=0)
        with pytest.raises(ParameterError):
            SgdConfig(batch_size=0)

    def test_minibatches_cover_once(self):
        batches = list(iter_minibatches(65, 32, SeededRng(0)))
        assert sorted(np.concatenate(batches).tolist()) == list(range(65))
        assert [len(b) for b in batches] == [32, 33]

    def test_norm_kind_changes_only_bn_layers(self):
        models = [build_mlp(2, [8, 8], 3, kind, seed=7) for kind in ("l2", "l1", "topk", None)]
        dense = [[layer.weight for layer in m.layers if isinstance(layer, Dense)] for m in models]
        for other in dense[1:]:
            for a, b in zip(dense[0], other):
                np.testing.assert_array_equal(a, b)


class TestEvaluate:
    def test_constant_predictor(self):
        model = SequentialModel([Dense(2, 3, weight=np.zeros((2, 3)), bias=[0, 5, 0])])
        ds = Dataset(np.zeros((4, 2)), [1] * 4, 3)
        assert evaluate_accuracy(model, ds) == 1.0
        assert evaluate_accuracy(model, Dataset(np.zeros((4, 2)), [0, 2, 0, 2], 3)) == 0.0

    def test_counting(self):
        model = SequentialModel([Dense(2, 2, weight=np.eye(2))])
        x = np.array([[1, 0]] * 10, dtype=float)
        labels = [0] * 7 + [1] * 3
        assert evaluate_accuracy(model, Dataset(x, labels, 2)) == pytest.approx(0.7)

    def test_ties_go_to_lowest_class(self):
        model = SequentialModel([Dense(1, 3, weight=np.zeros((1, 3)))])
        assert evaluate_accuracy(model, Dataset(np.zeros((2, 1)), [0, 0], 3)) == 1.0

    def test_invariant_to_logit_scaling(self, np_rng):
        model = build_mlp(2, [8], 3, None, seed=1)
        ds = make_blobs(SeededRng(0), 60, 3, 0.5)
        acc = evaluate_accuracy(model, ds)
        last = model.layers[-1]
        last.weight *= 3.7
        last.bias *= 3.7
        assert evaluate_accuracy(model, ds) == acc


def test_bn_norm_kind_roundtrip():
    layer = BatchNorm(4, NormKind("topk", k=2))
    assert layer.config()["kind"]["k"] == 2

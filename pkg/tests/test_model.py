import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import confusion_matrix, f1_score

from sgda.augment import LabeledSpectrum
from sgda.errors import DataError
from sgda.metrics import classification_metrics
from sgda.model import (
    Adam,
    ModelConfig,
    PlateauScheduler,
    TrainedModel,
    evaluate,
    gradient_check,
    init_params,
    loss_and_grads,
    predict,
    probabilities,
    train,
)
from sgda.signals import NormalizationMode, NormContext, Spectrum, Stage

DIM = 12
FREQ = np.arange(DIM, dtype=float)


def toy(label_index, rng):
    """Class 0 lights bin 2, class 1 lights bin 9; background noise elsewhere."""
    bins = rng.uniform(0.0, 0.1, DIM)
    bins[2 if label_index == 0 else 9] = 0.9
    return Spectrum(bins, FREQ, Stage.NORMALIZED)


def toy_provider(classes, n=40, seed=0):
    def provide(epoch):
        rng = np.random.default_rng([seed, epoch])
        return [LabeledSpectrum(toy(i % 2, rng), classes[i % 2]) for i in range(n)]

    return provide


class TestConfig:
    def test_normal_first(self):
        with pytest.raises(ValueError, match="class 0 must be 'Normal'"):
            ModelConfig(DIM, ("RBD", "Normal"))

    @pytest.mark.parametrize(
        "kwargs",
        [{"kind": "resnet"}, {"hidden_units": 0}, {"learning_rate": 0.0}, {"plateau_factor": 1.0}, {"l2": -1.0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelConfig(DIM, ("Normal", "A"), **kwargs)

    def test_output_width(self):
        assert ModelConfig(DIM, ("Normal", "A")).n_outputs == 1
        assert ModelConfig(DIM, ("Normal", "A", "B")).n_outputs == 3


class TestTraining:
    @pytest.mark.parametrize("kind, lr", [("logistic", 1e-2), ("one_hidden", 1e-3)])
    def test_separable_toy(self, kind, lr):
        # Healthy-referenced inputs leave the logistic bias to do most of the
        # work, so it gets a larger step than the hidden-layer model.
        cfg = ModelConfig(DIM, ("Normal", "A"), kind=kind, max_epochs=200, hidden_units=8, learning_rate=lr)
        model = train(toy_provider(cfg.classes, n=200), cfg)
        assert min(e["loss"] for e in model.train_log) < 0.01
        p = predict(model, toy(1, np.random.default_rng(99)))
        assert p.label == "A" and p.probabilities[1] > 0.9

    def test_zero_epochs(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), max_epochs=0)
        model = train(toy_provider(cfg.classes), cfg)
        assert model.train_log == ()
        for k, v in init_params(cfg).items():
            np.testing.assert_array_equal(model.params[k], v)

    def test_bit_identical(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), max_epochs=5, seed=3)
        a = train(toy_provider(cfg.classes), cfg)
        b = train(toy_provider(cfg.classes), cfg)
        assert a.to_json() == b.to_json()

    def test_log_contents(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), max_epochs=30, plateau_patience=2)
        log = train(toy_provider(cfg.classes), cfg).train_log
        assert all(np.isfinite(e["loss"]) for e in log)
        lrs = [e["lr"] for e in log]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))
        assert log[0]["class_counts"] == {"Normal": 20, "A": 20}

    def test_dimension_mismatch(self):
        cfg = ModelConfig(DIM + 1, ("Normal", "A"), max_epochs=1)
        with pytest.raises(DataError, match="model expects"):
            train(toy_provider(cfg.classes), cfg)

    def test_unknown_label(self):
        cfg = ModelConfig(DIM, ("Normal", "B"), max_epochs=1)
        with pytest.raises(DataError, match="label"):
            train(toy_provider(("Normal", "A")), cfg)

    def test_empty_epoch(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), max_epochs=1)
        with pytest.raises(DataError, match="no samples"):
            train(lambda epoch: [], cfg)


class TestPrediction:
    def test_zero_weights_uniform_three_classes(self):
        cfg = ModelConfig(DIM, ("Normal", "A", "B"), kind="logistic")
        params = {k: np.zeros_like(v) for k, v in init_params(cfg).items()}
        model = TrainedModel(cfg, params)
        p = predict(model, Spectrum(np.full(DIM, 0.3), FREQ, Stage.NORMALIZED))
        assert p.probabilities == pytest.approx((1 / 3, 1 / 3, 1 / 3))
        assert p.label == "Normal"

    def test_zero_weights_binary_tie(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), kind="logistic")
        model = TrainedModel(cfg, {k: np.zeros_like(v) for k, v in init_params(cfg).items()})
        assert predict(model, Spectrum(np.zeros(DIM), FREQ, Stage.NORMALIZED)).label == "Normal"

    def test_wrong_dimension(self):
        cfg = ModelConfig(DIM, ("Normal", "A"))
        model = TrainedModel(cfg, init_params(cfg))
        with pytest.raises(DataError, match="model expects"):
            predict(model, Spectrum(np.zeros(DIM + 2), np.arange(DIM + 2.0), Stage.NORMALIZED))

    def test_non_finite_weights_rejected(self):
        cfg = ModelConfig(DIM, ("Normal", "A"), kind="logistic")
        params = init_params(cfg)
        params["W"][0, 0] = np.nan
        with pytest.raises(Exception, match="non-finite"):
            TrainedModel(cfg, params)

    def test_json_round_trip_exact(self):
        cfg = ModelConfig(DIM, ("Normal", "A", "B"), max_epochs=3)
        provider = toy_provider(("Normal", "A"))
        model = train(lambda e: provider(e), ModelConfig(DIM, ("Normal", "A"), max_epochs=3),
                      NormContext(NormalizationMode.GLOBAL, np.array([-1.0]), np.array([2.0])))
        back = TrainedModel.from_json(model.to_json())
        x = np.random.default_rng(0).uniform(size=(20, DIM))
        np.testing.assert_array_equal(model.predict_proba(x), back.predict_proba(x))
        assert back.normalization.mode is NormalizationMode.GLOBAL
        assert back.class_order == model.class_order
        assert cfg.n_outputs == 3


class TestGradientCheck:
    @pytest.mark.parametrize("kind", ["logistic", "one_hidden"])
    @pytest.mark.parametrize("classes", [("Normal", "A"), ("Normal", "A", "B", "C")])
    def test_passes(self, kind, classes):
        cfg = ModelConfig(10, classes, kind=kind, hidden_units=6)
        report = gradient_check(cfg, sample_count=5, tolerance=1e-4)
        assert report.passed, report.per_parameter

    def test_with_l2(self):
        cfg = ModelConfig(10, ("Normal", "A", "B"), hidden_units=6, l2=0.1)
        assert gradient_check(cfg, 5, 1e-4).passed

    def test_zero_tolerance_fails(self):
        cfg = ModelConfig(10, ("Normal", "A"), kind="logistic")
        assert not gradient_check(cfg, 3, 0.0).passed


class TestOptimiser:
    def test_adam_first_step_is_lr_signed(self):
        params = {"W": np.array([1.0, -1.0])}
        Adam(0.1).step(params, {"W": np.array([3.0, -0.5])})
        np.testing.assert_allclose(params["W"], [0.9, -0.9])

    def test_plateau_reduces_after_patience(self):
        sched = PlateauScheduler(1.0, patience=2, factor=0.5, min_lr=0.2)
        lrs = [sched.step(loss) for loss in [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]
        assert lrs == [1.0, 1.0, 0.5, 0.5, 0.25, 0.25, 0.2, 0.2]

    def test_plateau_resets_on_improvement(self):
        sched = PlateauScheduler(1.0, patience=2, factor=0.5)
        assert [sched.step(x) for x in [1.0, 1.0, 0.5, 0.5, 0.5]] == [1.0, 1.0, 1.0, 1.0, 0.5]


class TestEvaluate:
    def test_perfect(self):
        m = classification_metrics(["Normal", "A", "B"], ["Normal", "A", "B"], ("Normal", "A", "B"))
        assert m.accuracy == 1.0 and m.macro_f1 == 1.0
        np.testing.assert_array_equal(m.confusion, np.eye(3))

    def test_all_normal_balanced(self):
        m = classification_metrics(["Normal", "A"] * 5, ["Normal"] * 10, ("Normal", "A"))
        assert m.accuracy == 0.5
        assert m.macro_f1 == pytest.approx(1 / 3)

    def test_evaluate_unknown_class(self):
        cfg = ModelConfig(DIM, ("Normal", "A"))
        model = TrainedModel(cfg, init_params(cfg))
        data = [LabeledSpectrum(Spectrum(np.zeros(DIM), FREQ, Stage.NORMALIZED), "Z")]
        with pytest.raises(DataError, match="not among"):
            evaluate(model, data)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=60))
    def test_matches_sklearn(self, pairs):
        classes = ("Normal", "A", "B")
        t = [classes[a] for a, _ in pairs]
        p = [classes[b] for _, b in pairs]
        m = classification_metrics(t, p, classes)
        present = sorted(set(t) | set(p), key=classes.index)
        want = f1_score(t, p, labels=present, average="macro", zero_division=0)
        assert m.macro_f1 == pytest.approx(want, abs=1e-12)
        np.testing.assert_array_equal(m.counts, confusion_matrix(t, p, labels=list(classes)))
        for row, support in zip(m.confusion, m.counts.sum(axis=1)):
            assert row.sum() == pytest.approx(1.0 if support else 0.0, abs=1e-9)

    def test_random_classifier_near_chance(self):
        rng = np.random.default_rng(0)
        classes = ("Normal", "A", "B", "C")
        t = [classes[i] for i in rng.integers(0, 4, 20000)]
        p = [classes[i] for i in rng.integers(0, 4, 20000)]
        assert classification_metrics(t, p, classes).macro_f1 == pytest.approx(0.25, abs=0.02)


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.sampled_from(["logistic", "one_hidden"]))
    def test_probabilities_sum_to_one(self, seed, kind):
        rng = np.random.default_rng(seed)
        for classes in [("Normal", "A"), ("Normal", "A", "B")]:
            cfg = ModelConfig(DIM, classes, kind=kind, hidden_units=5, seed=seed)
            params = {k: v + rng.normal(0, 3, v.shape) for k, v in init_params(cfg).items()}
            p = probabilities(params, rng.normal(0, 5, (10, DIM)))
            assert np.all(p >= 0)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.permutations([1, 2, 3]))
    def test_label_permutation_equivariance(self, seed, perm):
        cfg = ModelConfig(DIM, ("Normal", "A", "B", "C"), hidden_units=5, seed=seed)
        params = init_params(cfg)
        order = [0, *perm]
        permuted = dict(params, W2=params["W2"][:, order], b2=params["b2"][order])
        x = np.random.default_rng(seed).uniform(size=(6, DIM))
        np.testing.assert_allclose(probabilities(permuted, x), probabilities(params, x)[:, order])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_loss_finite_for_extreme_logits(self, seed):
        cfg = ModelConfig(DIM, ("Normal", "A"), kind="logistic", seed=seed)
        params = {k: v * 1e4 for k, v in init_params(cfg).items()}
        x = np.random.default_rng(seed).uniform(size=(4, DIM))
        loss, grads = loss_and_grads(params, x, np.array([0, 1, 0, 1]))
        assert np.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads.values())

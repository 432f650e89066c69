import numpy as np
import pytest

from peakit import nn
from peakit.errors import UndefinedDenominator


class TestSgdStep:
    def test_vanilla_sgd(self):
        p = np.array([1.0, -2.0])
        g = np.array([0.5, 0.25])
        v = np.zeros(2)
        nn.sgd_step(p, g, v, lr=0.1, momentum=0.0, weight_decay=0.0)
        np.testing.assert_allclose(p, [1.0 - 0.05, -2.0 - 0.025], rtol=1e-15)

    def test_velocity_decays_geometrically(self):
        p = np.array([0.0])
        v = np.array([1.0])
        for k in range(1, 6):
            nn.sgd_step(p, np.zeros(1), v, lr=0.0, momentum=0.9, weight_decay=0.0)
            assert np.isclose(v[0], 0.9 ** k, rtol=1e-12)

    def test_three_step_trace_matches_closed_form_recurrence(self):
        # scalar oracle evaluated with plain Python floats
        momentum, wd, lr = 0.9, 1e-4, 0.1
        grads = [1.0, -0.5, 0.25]
        p_ref, v_ref = 2.0, 0.0
        trace = []
        for g in grads:
            v_ref = momentum * v_ref + g + wd * p_ref
            p_ref = p_ref - lr * v_ref
            trace.append((p_ref, v_ref))

        p = np.array([2.0])
        v = np.array([0.0])
        for g, (tp, tv) in zip(grads, trace):
            nn.sgd_step(p, np.array([g]), v, lr=lr, momentum=momentum, weight_decay=wd)
            assert abs(p[0] - tp) < 1e-12
            assert abs(v[0] - tv) < 1e-12

    def test_optimizer_class_matches_functional_step(self, rng):
        param = nn.Parameter(rng.standard_normal(4), "w")
        opt = nn.SGD([param], lr=0.05, momentum=0.9, weight_decay=1e-4)
        ref_p = param.value.copy()
        ref_v = np.zeros(4)
        for _ in range(4):
            param.grad[...] = rng.standard_normal(4)
            nn.sgd_step(ref_p, param.grad, ref_v, 0.05, 0.9, 1e-4)
            opt.step()
            np.testing.assert_allclose(param.value, ref_p, rtol=1e-14)


class TestTrainConfig:
    def test_lr_schedule_drops_by_factor_10(self):
        cfg = nn.TrainConfig(initial_lr=0.1, lr_drop_epochs=(2, 4, 6), epochs=8)
        assert cfg.lr_at(0) == 0.1
        assert np.isclose(cfg.lr_at(2), 0.01)
        assert np.isclose(cfg.lr_at(5), 0.001)
        assert np.isclose(cfg.lr_at(7), 0.0001)

    def test_momentum_range(self):
        with pytest.raises(ValueError):
            nn.TrainConfig(momentum=1.0)
        with pytest.raises(ValueError):
            nn.TrainConfig(weight_decay=-1e-4)

    def test_paper_mode_requires_three_drops_and_batch_256(self):
        nn.TrainConfig(batch_size=256, lr_drop_epochs=(10, 20, 30), paper_mode=True)
        with pytest.raises(ValueError):
            nn.TrainConfig(batch_size=256, lr_drop_epochs=(10, 20), paper_mode=True)
        with pytest.raises(ValueError):
            nn.TrainConfig(batch_size=64, lr_drop_epochs=(10, 20, 30), paper_mode=True)


class TestAccuracy:
    def test_perfect_classifier(self):
        assert nn.accuracy(nn.ConfusionCounts(tp=100, fp=0, tn=100, fn=0)) == 1.0

    def test_mixed_counts(self):
        c = nn.ConfusionCounts(tp=3, fp=1, tn=2, fn=2)
        assert nn.accuracy(c) == (0.75 + 0.5) / 2
        assert nn.accuracy(c) == 0.625

    def test_symmetric_half(self):
        assert nn.accuracy(nn.ConfusionCounts(tp=25, fp=25, tn=25, fn=25)) == 0.5

    def test_undefined_denominator(self):
        with pytest.raises(UndefinedDenominator):
            nn.accuracy(nn.ConfusionCounts(tp=0, fp=0, tn=5, fn=5))
        with pytest.raises(UndefinedDenominator):
            nn.accuracy(nn.ConfusionCounts(tp=5, fp=5, tn=0, fn=0))

    def test_balanced_accuracy_differs(self):
        c = nn.ConfusionCounts(tp=3, fp=1, tn=2, fn=2)
        assert nn.balanced_accuracy(c) == (3 / 5 + 2 / 3) / 2

    def test_from_predictions(self):
        preds = np.array([True, True, False, False, True])
        labels = np.array([1, 0, 0, 1, 1])
        c = nn.ConfusionCounts.from_predictions(preds, labels)
        assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)
        assert c.total == 5


class TestCheckpoint:
    def build(self, rng, dtype=np.float32):
        return nn.Sequential([
            nn.Conv2d(3, 4, 3, padding=1, dtype=dtype, rng=rng),
            nn.BatchNorm2d(4, dtype=dtype),
            nn.ReLU(),
            nn.Residual(
                [nn.Conv2d(4, 4, 3, padding=1, groups=2, bias=False, dtype=dtype, rng=rng),
                 nn.BatchNorm2d(4, dtype=dtype)],
                [],
            ),
            nn.MaxPool2x2(),
            nn.Flatten(),
            nn.FullyConnected(4 * 4 * 4, 2, dtype=dtype, rng=rng),
        ], dtype=dtype)

    def test_round_trip_preserves_forward(self, rng, tmp_path):
        model = self.build(rng)
        x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
        model.forward(x, train=True)  # move running stats off their init
        want = model.forward(x, train=False)
        path = tmp_path / "model.peaw"
        nn.save_model(model, path)
        loaded = nn.load_model(path)
        got = loaded.forward(x, train=False)
        np.testing.assert_array_equal(got, want)

    def test_magic_bytes(self, rng, tmp_path):
        model = self.build(rng)
        path = tmp_path / "model.peaw"
        nn.save_model(model, path)
        assert path.read_bytes()[:4] == b"PEAW"

    def test_save_is_deterministic(self, rng):
        model = self.build(rng)
        assert nn.save_model_bytes(model) == nn.save_model_bytes(model)

    def test_debug_mode_flags_non_finite_activations(self, rng):
        model = nn.Sequential(
            [nn.FullyConnected(4, 2, dtype=np.float64, rng=rng)], dtype=np.float64
        )
        x = rng.standard_normal((3, 4))
        x[0, 0] = np.inf
        nn.set_debug_checks(True)
        try:
            with pytest.raises(FloatingPointError):
                model.forward(x)
        finally:
            nn.set_debug_checks(False)
        model.forward(x)  # silent outside debug mode

    def test_training_reproducible_for_seed(self):
        def run():
            rng = np.random.default_rng(77)
            model = nn.Sequential([
                nn.Flatten(),
                nn.FullyConnected(8, 2, dtype=np.float64, rng=rng),
            ], dtype=np.float64)
            opt = nn.SGD(model.params(), lr=0.1)
            x = rng.standard_normal((16, 2, 2, 2))
            labels = rng.integers(0, 2, 16)
            for _ in range(5):
                logits = model.forward(x, train=True)
                _, grad = nn.softmax_cross_entropy(logits, labels)
                opt.zero_grad()
                model.backward(grad)
                opt.step()
            return nn.save_model_bytes(model)

        assert run() == run()

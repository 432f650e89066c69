import numpy as np
import pytest

from peakit import nn
from peakit.errors import (
    ConfigInvalid,
    EmptyClass,
    GeometryMismatch,
    ShapeUnderflow,
)
from peakit.pea_models import (
    LeNet5Config,
    PeaClassifier,
    ResNeXtConfig,
    build_lenet5,
    build_resnext,
    predict,
    train_classifier,
)
from peakit.pea_types import PeaType
from peakit.synthetic import synthetic_task
from peakit.video_io import PatchPayload


class TestLeNetShapes:
    def test_32_input_fc1_sees_1250(self):
        cfg = LeNet5Config(input_size=32)
        # 32 -> 28 -> 14 -> 10 -> 5; 50 maps of 5x5
        assert cfg.feature_trace() == [28, 14, 10, 5]
        assert cfg.fc1_inputs == 50 * 25 == 1250

    def test_72_input_trace(self):
        cfg = LeNet5Config(input_size=72)
        # 72 -> 68 -> 34 -> 30 -> 15; 50 maps of 15x15
        assert cfg.feature_trace() == [68, 34, 30, 15]
        assert cfg.fc1_inputs == 50 * 225 == 11_250

    def test_8_input_underflows(self):
        with pytest.raises(ShapeUnderflow):
            build_lenet5(LeNet5Config(input_size=8))

    def test_parameter_count_closed_form(self, rng):
        cfg = LeNet5Config(input_size=32, input_channels=3)
        model = build_lenet5(cfg, rng=rng)
        assert model.n_parameters() == cfg.parameter_count()
        expected = (20 * 75 + 20) + (50 * 500 + 50) + (1250 * 500 + 500) + (500 * 2 + 2)
        assert cfg.parameter_count() == expected

    def test_forward_shapes(self, rng):
        model = build_lenet5(LeNet5Config(input_size=32), rng=rng)
        out = model.forward(np.zeros((3, 3, 32, 32), np.float32))
        assert out.shape == (3, 2)
        model72 = build_lenet5(LeNet5Config(input_size=72, input_channels=10), rng=rng)
        out = model72.forward(np.zeros((2, 10, 72, 72), np.float32))
        assert out.shape == (2, 2)


class TestResNeXt:
    def test_wide_config_logits_shape(self, rng):
        # stem 64, stages 64/128/256 x1 block, cardinality 32, width 4
        cfg = ResNeXtConfig(input_size=32, stem_channels=64,
                            stage_widths=(64, 128, 256), blocks_per_stage=(1, 1, 1),
                            cardinality=32, bottleneck_width=4)
        model = build_resnext(cfg, rng=rng)
        out = model.forward(np.zeros((2, 3, 32, 32), np.float32))
        assert out.shape == (2, 2)

    def test_desk_default_logits_shape(self, rng):
        model = build_resnext(ResNeXtConfig(), rng=rng)
        out = model.forward(np.zeros((2, 3, 32, 32), np.float32))
        assert out.shape == (2, 2)
        assert ResNeXtConfig().cardinality == 32

    def test_parameter_count_closed_form(self, rng):
        for cfg in (
            ResNeXtConfig(),
            ResNeXtConfig(stem_channels=16, stage_widths=(16, 32),
                          blocks_per_stage=(2, 1), cardinality=8,
                          bottleneck_width=2),
        ):
            model = build_resnext(cfg, rng=rng)
            assert model.n_parameters() == cfg.parameter_count()
        assert ResNeXtConfig().parameter_count() == 16_970  # slim desk default

    def test_cardinality_must_divide_mid(self):
        with pytest.raises(ConfigInvalid):
            ResNeXtConfig(cardinality=0)

    def test_zeroed_branch_block_is_relu_identity(self, rng):
        cfg = ResNeXtConfig(input_size=16, stem_channels=8, stage_widths=(8,),
                            blocks_per_stage=(1,), cardinality=4, bottleneck_width=2)
        model = build_resnext(cfg, rng=rng)
        block = next(l for l in model.layers if isinstance(l, nn.Residual))
        assert block.shortcut == []  # stride 1, in == out -> identity shortcut
        for layer in block.branch:
            if isinstance(layer, nn.Conv2d):
                layer.weight.value[...] = 0.0
        x = rng.standard_normal((2, 8, 16, 16)).astype(np.float32)
        got = block.forward(x, train=True)
        np.testing.assert_array_equal(got, np.maximum(x, 0))

    def test_downsampling_stages_use_projection(self, rng):
        cfg = ResNeXtConfig(input_size=32, stem_channels=8, stage_widths=(8, 16),
                            blocks_per_stage=(1, 1), cardinality=4, bottleneck_width=2)
        model = build_resnext(cfg, rng=rng)
        blocks = [l for l in model.layers if isinstance(l, nn.Residual)]
        assert blocks[0].shortcut == []
        assert len(blocks[1].shortcut) == 2  # conv + bn projection

    def test_gradcheck_small_resnext(self, rng):
        cfg = ResNeXtConfig(input_size=8, stem_channels=4, stage_widths=(4, 8),
                            blocks_per_stage=(1, 1), cardinality=2, bottleneck_width=2)
        model = build_resnext(cfg, dtype=np.float64, rng=rng)
        x = rng.standard_normal((2, 3, 8, 8))
        err = nn.grad_check(model, x, rng=rng, samples_per_tensor=3)
        assert err < 1e-4

    def test_gradcheck_small_lenet(self, rng):
        cfg = LeNet5Config(input_size=16, input_channels=2, conv1_filters=4,
                           conv2_filters=6, fc1_width=10)
        model = build_lenet5(cfg, dtype=np.float64, rng=rng)
        x = rng.standard_normal((2, 2, 16, 16))
        err = nn.grad_check(model, x, rng=rng, samples_per_tensor=3)
        assert err < 1e-4


def tiny_lenet_cfg(size=32, channels=3):
    return LeNet5Config(input_size=size, input_channels=channels,
                        conv1_filters=6, conv2_filters=8, fc1_width=32)


class TestTraining:
    def test_separable_synthetic_reaches_99_within_10_epochs(self):
        # positives carry a brightness offset: linearly separable on mean luma
        data = synthetic_task("brightness", n_per_class=120, size=32, seed=5)
        cfg = nn.TrainConfig(batch_size=32, epochs=10, initial_lr=0.05,
                             lr_drop_epochs=(8,), seed=5)
        clf, logs = train_classifier(
            data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(),
        )
        assert logs[-1].test_acc >= 0.99
        assert len(logs) == 10

    def test_shuffled_labels_hit_chance_level(self):
        data = synthetic_task("blocking", n_per_class=400, size=32, seed=11)
        rng = np.random.default_rng(0)
        data.train.labels = rng.permutation(data.train.labels)
        data.test.labels = rng.permutation(data.test.labels)
        cfg = nn.TrainConfig(batch_size=32, epochs=2, initial_lr=0.01,
                             lr_drop_epochs=(), seed=3)
        _, logs = train_classifier(
            data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(),
        )
        assert abs(logs[-1].test_acc - 0.5) <= 0.05

    def test_train_at_least_test_after_convergence(self):
        data = synthetic_task("blurring", n_per_class=100, size=32, seed=6)
        cfg = nn.TrainConfig(batch_size=32, epochs=8, initial_lr=0.02,
                             lr_drop_epochs=(), seed=6)
        _, logs = train_classifier(
            data, PeaType.BLURRING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(),
        )
        assert logs[-1].train_acc >= logs[-1].test_acc - 0.02

    def test_temporal_task_trains_on_luma_stack(self):
        data = synthetic_task("flickering", n_per_class=60, size=32, seed=7)
        assert data.train.n_frames == 10
        cfg = nn.TrainConfig(batch_size=16, epochs=6, initial_lr=0.02,
                             lr_drop_epochs=(), seed=7)
        clf, logs = train_classifier(
            data, PeaType.FLICKERING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(channels=10),
        )
        assert clf.input_channels == 10
        assert logs[-1].test_acc >= 0.9

    def test_empty_class_rejected(self):
        data = synthetic_task("blocking", n_per_class=20, size=32, seed=1)
        data.train.labels[:] = 1
        with pytest.raises(EmptyClass):
            train_classifier(data, PeaType.BLOCKING, architecture="lenet5",
                             train_cfg=nn.TrainConfig(epochs=1), augment=None)

    def test_augmented_path_runs(self):
        data = synthetic_task("blocking", n_per_class=24, size=32, seed=2)
        cfg = nn.TrainConfig(batch_size=16, epochs=1, initial_lr=0.01,
                             lr_drop_epochs=(), seed=2)
        _, logs = train_classifier(
            data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg,
            augment="auto", model_config=tiny_lenet_cfg(),
        )
        assert len(logs) == 1


class TestPredict:
    def zero_classifier(self, rng):
        cfg = tiny_lenet_cfg()
        model = build_lenet5(cfg, rng=rng)
        for p in model.params():
            p.value[...] = 0.0
        return PeaClassifier(
            pea_type=PeaType.RINGING, architecture="lenet5", model=model,
            input_size=32, input_channels=3,
            channel_mean=np.zeros(3, np.float32), config={},
        )

    def patch(self, rng, size=32):
        return PatchPayload(
            rng.integers(0, 256, (size, size), dtype=np.uint8),
            rng.integers(0, 256, (size // 2, size // 2), dtype=np.uint8),
            rng.integers(0, 256, (size // 2, size // 2), dtype=np.uint8),
        )

    def test_zero_weights_give_half_probability_and_false(self, rng):
        clf = self.zero_classifier(rng)
        prob, decision = predict(clf, self.patch(rng))
        assert prob == 0.5
        assert decision is False  # strict > 0.5

    def test_geometry_mismatch(self, rng):
        clf = self.zero_classifier(rng)
        with pytest.raises(GeometryMismatch):
            predict(clf, self.patch(rng, size=72))

    def test_overfit_model_memorizes_training_patches(self):
        data = synthetic_task("blocking", n_per_class=16, size=32, seed=9,
                              train_fraction=0.75)
        cfg = nn.TrainConfig(batch_size=8, epochs=30, initial_lr=0.02,
                             lr_drop_epochs=(), seed=9)
        clf, logs = train_classifier(
            data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(),
        )
        assert logs[-1].train_acc == 1.0
        train = data.train
        for i in range(len(train)):
            patch = PatchPayload(train.y[i, 0], train.u[i, 0], train.v[i, 0])
            _, decision = predict(clf, patch)
            assert decision == bool(train.labels[i])

    def test_save_load_round_trip_predictions(self, rng, tmp_path):
        data = synthetic_task("blocking", n_per_class=16, size=32, seed=4)
        cfg = nn.TrainConfig(batch_size=8, epochs=2, initial_lr=0.01,
                             lr_drop_epochs=(), seed=4)
        clf, _ = train_classifier(
            data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg,
            augment=None, model_config=tiny_lenet_cfg(),
        )
        path = tmp_path / "blocking.peac"
        clf.save(path)
        loaded = PeaClassifier.load(path)
        assert loaded.pea_type is PeaType.BLOCKING
        assert loaded.architecture == "lenet5"
        patch = self.patch(rng)
        assert predict(loaded, patch) == predict(clf, patch)

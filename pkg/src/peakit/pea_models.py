"""Per-artifact binary classifiers: a LeNet-5 variant and a ResNeXt variant.

Each artifact type gets its own independent binary classifier (artifact
present / absent); the six detectors are never merged into one multi-class
head because artifact types co-occur within a patch.

Spatial classifiers see 3 channels (Y plus bilinearly upsampled U and V);
temporal classifiers see the 10 luma planes of a cuboid. Inputs are scaled
to [0, 1] and centered with per-channel training-set means that ship inside
the checkpoint.
"""

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import nn
from .dataset_store import DatasetStore
from .errors import (
    ConfigInvalid,
    CorruptRecord,
    DivergedLoss,
    EmptyClass,
    GeometryMismatch,
    ShapeUnderflow,
    UndefinedDenominator,
)
from .patch_pipeline import AugmentConfig, apply_affine, draw_affine_params
from .pea_types import PeaType
from .video_io import PatchPayload, upsample_chroma_bilinear

CLASSIFIER_MAGIC = b"PEAC"
CLASSIFIER_VERSION = 1

ARCHITECTURES = ("lenet5", "resnext")


# -- configurations -----------------------------------------------------------


@dataclass(frozen=True)
class LeNet5Config:
    input_size: int = 32
    input_channels: int = 3
    conv1_filters: int = 20
    conv2_filters: int = 50
    fc1_width: int = 500
    n_classes: int = 2

    def feature_trace(self) -> List[int]:
        """Spatial extents after conv1, pool1, conv2, pool2."""
        s = self.input_size
        trace = []
        for _ in range(2):
            s = s - 4  # 5x5 valid convolution
            if s < 2:
                raise ShapeUnderflow(
                    f"input {self.input_size} too small for two 5x5 convs with pooling"
                )
            trace.append(s)
            if s % 2:
                raise ShapeUnderflow(
                    f"intermediate extent {s} is odd; 2x2 pooling impossible"
                )
            s //= 2
            trace.append(s)
        return trace

    @property
    def fc1_inputs(self) -> int:
        return self.conv2_filters * self.feature_trace()[-1] ** 2

    def parameter_count(self) -> int:
        c1 = self.conv1_filters * (self.input_channels * 25) + self.conv1_filters
        c2 = self.conv2_filters * (self.conv1_filters * 25) + self.conv2_filters
        f1 = self.fc1_inputs * self.fc1_width + self.fc1_width
        f2 = self.fc1_width * self.n_classes + self.n_classes
        return c1 + c2 + f1 + f2


@dataclass(frozen=True)
class ResNeXtConfig:
    """Desk-scale defaults: one block per stage, cardinality 32, sized to
    train on a single CPU core. Wider variants (e.g. stem 64, stages
    64/128/256, bottleneck width 4) build with the same fields."""

    input_size: int = 32
    input_channels: int = 3
    stem_channels: int = 24
    stage_widths: Tuple[int, ...] = (24, 48, 96)
    blocks_per_stage: Tuple[int, ...] = (1, 1, 1)
    cardinality: int = 32
    bottleneck_width: int = 1
    n_classes: int = 2

    def __post_init__(self):
        if len(self.stage_widths) != len(self.blocks_per_stage):
            raise ConfigInvalid("stage_widths and blocks_per_stage differ in length")
        if self.cardinality < 1 or self.bottleneck_width < 1:
            raise ConfigInvalid("cardinality and bottleneck_width must be >= 1")
        if self.mid_channels % self.cardinality:
            raise ConfigInvalid(
                f"cardinality {self.cardinality} does not divide bottleneck "
                f"channels {self.mid_channels}"
            )

    @property
    def mid_channels(self) -> int:
        """Grouped 3x3 width: cardinality paths of bottleneck_width channels."""
        return self.cardinality * self.bottleneck_width

    def parameter_count(self) -> int:
        mid = self.mid_channels
        total = self.input_channels * self.stem_channels * 9  # stem, no bias
        total += 2 * self.stem_channels  # stem BN
        in_ch = self.stem_channels
        for si, (width, blocks) in enumerate(zip(self.stage_widths, self.blocks_per_stage)):
            for bi in range(blocks):
                stride = 2 if (si > 0 and bi == 0) else 1
                total += in_ch * mid + 2 * mid                      # 1x1 reduce + BN
                total += mid * (mid // self.cardinality) * 9 + 2 * mid  # grouped 3x3 + BN
                total += mid * width + 2 * width                    # 1x1 expand + BN
                if stride != 1 or in_ch != width:
                    total += in_ch * width + 2 * width              # projection + BN
                in_ch = width
        total += in_ch * self.n_classes + self.n_classes            # fc head
        return total


# -- builders -------------------------------------------------------------


def build_lenet5(cfg: LeNet5Config, dtype=np.float32,
                 rng: Optional[np.random.Generator] = None) -> nn.Sequential:
    """conv1 -> ReLU -> pool -> conv2 -> ReLU -> pool -> fc1 -> ReLU -> fc2."""
    rng = rng if rng is not None else np.random.default_rng(0)
    cfg.feature_trace()  # raises ShapeUnderflow early
    return nn.Sequential([
        nn.Conv2d(cfg.input_channels, cfg.conv1_filters, 5, dtype=dtype, rng=rng),
        nn.ReLU(),
        nn.MaxPool2x2(),
        nn.Conv2d(cfg.conv1_filters, cfg.conv2_filters, 5, dtype=dtype, rng=rng),
        nn.ReLU(),
        nn.MaxPool2x2(),
        nn.Flatten(),
        nn.FullyConnected(cfg.fc1_inputs, cfg.fc1_width, dtype=dtype, rng=rng),
        nn.ReLU(),
        nn.FullyConnected(cfg.fc1_width, cfg.n_classes, dtype=dtype, rng=rng),
    ], dtype=dtype)


def build_resnext(cfg: ResNeXtConfig, dtype=np.float32,
                  rng: Optional[np.random.Generator] = None) -> nn.Sequential:
    """Stem conv, bottleneck blocks with grouped 3x3s, global pool, fc head.

    The first block of every stage after the first downsamples with a
    stride-2 grouped conv and a projection shortcut.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    n_down = sum(1 for i in range(len(cfg.stage_widths)) if i > 0)
    if cfg.input_size // (2 ** n_down) < 1:
        raise ShapeUnderflow(
            f"input {cfg.input_size} vanishes after {n_down} stride-2 stages"
        )
    mid = cfg.mid_channels
    layers: List[nn.Layer] = [
        nn.Conv2d(cfg.input_channels, cfg.stem_channels, 3, padding=1,
                  bias=False, dtype=dtype, rng=rng),
        nn.BatchNorm2d(cfg.stem_channels, dtype=dtype),
        nn.ReLU(),
    ]
    in_ch = cfg.stem_channels
    for si, (width, blocks) in enumerate(zip(cfg.stage_widths, cfg.blocks_per_stage)):
        for bi in range(blocks):
            stride = 2 if (si > 0 and bi == 0) else 1
            branch = [
                nn.Conv2d(in_ch, mid, 1, bias=False, dtype=dtype, rng=rng),
                nn.BatchNorm2d(mid, dtype=dtype),
                nn.ReLU(),
                nn.Conv2d(mid, mid, 3, stride=stride, padding=1,
                          groups=cfg.cardinality, bias=False, dtype=dtype, rng=rng),
                nn.BatchNorm2d(mid, dtype=dtype),
                nn.ReLU(),
                nn.Conv2d(mid, width, 1, bias=False, dtype=dtype, rng=rng),
                nn.BatchNorm2d(width, dtype=dtype),
            ]
            if stride != 1 or in_ch != width:
                shortcut = [
                    nn.Conv2d(in_ch, width, 1, stride=stride, bias=False,
                              dtype=dtype, rng=rng),
                    nn.BatchNorm2d(width, dtype=dtype),
                ]
            else:
                shortcut = []
            layers.append(nn.Residual(branch, shortcut))
            in_ch = width
    layers.append(nn.GlobalAvgPool())
    layers.append(nn.FullyConnected(in_ch, cfg.n_classes, dtype=dtype, rng=rng))
    return nn.Sequential(layers, dtype=dtype)


# -- task data ------------------------------------------------------------


@dataclass
class PatchArrays:
    """Raw uint8 planar patches of one artifact task, frame-major."""

    y: np.ndarray          # (N, F, S, S)
    u: np.ndarray          # (N, F, S/2, S/2)
    v: np.ndarray          # (N, F, S/2, S/2)
    labels: np.ndarray     # (N,)
    ids: List[str] = field(default_factory=list)

    def __len__(self):
        return self.y.shape[0]

    @property
    def size(self) -> int:
        return self.y.shape[2]

    @property
    def n_frames(self) -> int:
        return self.y.shape[1]


@dataclass
class TaskData:
    train: PatchArrays
    test: PatchArrays


def _decode_payload(payload: bytes, size: int, n_frames: int):
    ys = size * size
    cs = ys // 4
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(n_frames, ys + 2 * cs)
    y = raw[:, :ys].reshape(n_frames, size, size)
    u = raw[:, ys:ys + cs].reshape(n_frames, size // 2, size // 2)
    v = raw[:, ys + cs:].reshape(n_frames, size // 2, size // 2)
    return y, u, v


def load_task(store: DatasetStore, pea_type: PeaType) -> TaskData:
    """Assemble train/test patch arrays for one artifact type from a store."""
    buckets: Dict[str, list] = {"train": [], "test": []}
    for row in store.manifest_rows():
        if row.pea_type != pea_type or row.split not in buckets:
            continue
        record = store.read(row.offset)
        buckets[row.split].append(record)
    parts = {}
    for split, records in buckets.items():
        if not records:
            parts[split] = PatchArrays(
                y=np.zeros((0, pea_type.n_frames, pea_type.window_size, pea_type.window_size), np.uint8),
                u=np.zeros((0, pea_type.n_frames, pea_type.window_size // 2, pea_type.window_size // 2), np.uint8),
                v=np.zeros((0, pea_type.n_frames, pea_type.window_size // 2, pea_type.window_size // 2), np.uint8),
                labels=np.zeros(0, np.int64), ids=[],
            )
            continue
        ys, us, vs, labels, ids = [], [], [], [], []
        for r in records:
            y, u, v = _decode_payload(r.payload, r.size, r.n_frames)
            ys.append(y)
            us.append(u)
            vs.append(v)
            labels.append(r.label)
            ids.append(r.record_id)
        parts[split] = PatchArrays(
            y=np.stack(ys), u=np.stack(us), v=np.stack(vs),
            labels=np.array(labels, dtype=np.int64), ids=ids,
        )
    return TaskData(train=parts["train"], test=parts["test"])


def assemble_input(arrays: PatchArrays, temporal: bool,
                   indices: Optional[np.ndarray] = None) -> np.ndarray:
    """uint8 planes -> float32 model input in [0, 1], (N, C, S, S)."""
    idx = indices if indices is not None else np.arange(len(arrays))
    if temporal:
        return arrays.y[idx].astype(np.float32) / 255.0
    n = len(idx)
    size = arrays.size
    out = np.empty((n, 3, size, size), dtype=np.float32)
    out[:, 0] = arrays.y[idx, 0]
    for row, i in enumerate(idx):
        out[row, 1] = upsample_chroma_bilinear(arrays.u[i, 0])
        out[row, 2] = upsample_chroma_bilinear(arrays.v[i, 0])
    out /= 255.0
    return out


# -- classifier container ---------------------------------------------------


@dataclass
class PeaClassifier:
    pea_type: PeaType
    architecture: str
    model: nn.Sequential
    input_size: int
    input_channels: int
    channel_mean: np.ndarray
    config: dict
    provenance: Optional[dict] = None

    @property
    def temporal(self) -> bool:
        return self.input_channels == 10

    @property
    def window_size(self) -> int:
        return self.input_size

    @property
    def n_frames(self) -> int:
        return 10 if self.temporal else 1

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return x - self.channel_mean[None, :, None, None].astype(x.dtype)

    def predict_batch(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Probabilities of the positive class and the strict >0.5 decision."""
        logits = self.model.forward(self.normalize(x), train=False)
        probs = nn.softmax(logits)[:, 1]
        return probs, probs > 0.5

    def predict_payload(self, patch: Union[PatchPayload, Sequence[PatchPayload]]):
        x = self._payload_to_input(patch)
        probs, decisions = self.predict_batch(x)
        return float(probs[0]), bool(decisions[0])

    def predict_payloads(self, payloads: Sequence) -> np.ndarray:
        """Batch decisions for a list of patches (or cuboids if temporal)."""
        if not payloads:
            return np.zeros(0, dtype=bool)
        x = np.concatenate([self._payload_to_input(p) for p in payloads])
        _, decisions = self.predict_batch(x)
        return decisions

    def _payload_to_input(self, patch) -> np.ndarray:
        if self.temporal:
            frames = list(patch) if not isinstance(patch, PatchPayload) else [patch]
            if len(frames) != 10:
                raise GeometryMismatch(
                    f"{self.pea_type.wire_name} expects a 10-frame cuboid, "
                    f"got {len(frames)} frame(s)"
                )
            for f in frames:
                if f.width != self.input_size or f.height != self.input_size:
                    raise GeometryMismatch(
                        f"cuboid frame {f.width}x{f.height} does not match "
                        f"{self.input_size}x{self.input_size}"
                    )
            x = np.stack([f.y for f in frames])[None].astype(np.float32) / 255.0
            return x
        if not isinstance(patch, PatchPayload):
            raise GeometryMismatch("spatial classifier expects a single patch")
        if patch.width != self.input_size or patch.height != self.input_size:
            raise GeometryMismatch(
                f"patch {patch.width}x{patch.height} does not match classifier "
                f"input {self.input_size}x{self.input_size}"
            )
        x = np.empty((1, 3, self.input_size, self.input_size), dtype=np.float32)
        x[0, 0] = patch.y
        x[0, 1] = upsample_chroma_bilinear(patch.u)
        x[0, 2] = upsample_chroma_bilinear(patch.v)
        return x / 255.0

    # -- persistence --

    def save(self, path) -> None:
        header = {
            "pea_type": self.pea_type.wire_name,
            "architecture": self.architecture,
            "input_size": self.input_size,
            "input_channels": self.input_channels,
            "channel_mean": [float(m) for m in self.channel_mean],
            "config": self.config,
            "provenance": self.provenance,
        }
        blob = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(CLASSIFIER_MAGIC)
            fh.write(struct.pack("<H", CLASSIFIER_VERSION))
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            fh.write(nn.save_model_bytes(self.model))

    @classmethod
    def load(cls, path, dtype=np.float32) -> "PeaClassifier":
        data = Path(path).read_bytes()
        if data[:4] != CLASSIFIER_MAGIC:
            raise CorruptRecord(f"bad classifier magic {data[:4]!r}")
        (version,) = struct.unpack_from("<H", data, 4)
        if version != CLASSIFIER_VERSION:
            raise CorruptRecord(f"unsupported classifier version {version}")
        (blob_len,) = struct.unpack_from("<I", data, 6)
        header = json.loads(data[10:10 + blob_len].decode("utf-8"))
        model = nn.load_model_bytes(data[10 + blob_len:], dtype=dtype)
        return cls(
            pea_type=PeaType.from_wire(header["pea_type"]),
            architecture=header["architecture"],
            model=model,
            input_size=header["input_size"],
            input_channels=header["input_channels"],
            channel_mean=np.array(header["channel_mean"], dtype=np.float32),
            config=header["config"],
            provenance=header.get("provenance"),
        )


def predict(classifier: PeaClassifier, patch) -> Tuple[float, bool]:
    """Positive-class probability and the strict >0.5 decision for one patch."""
    return classifier.predict_payload(patch)


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    test_acc: float


def _paper_accuracy_or_nan(counts: nn.ConfusionCounts) -> float:
    try:
        return nn.accuracy(counts)
    except UndefinedDenominator:
        return float("nan")


def evaluate(model: nn.Sequential, x: np.ndarray, labels: np.ndarray,
             mean: np.ndarray, batch_size: int = 256) -> nn.ConfusionCounts:
    preds = np.empty(len(labels), dtype=bool)
    for start in range(0, len(labels), batch_size):
        xb = x[start:start + batch_size] - mean[None, :, None, None]
        logits = model.forward(xb, train=False)
        preds[start:start + batch_size] = nn.softmax(logits)[:, 1] > 0.5
    return nn.ConfusionCounts.from_predictions(preds, labels)


def _augment_arrays(arrays: PatchArrays, indices: np.ndarray,
                    cfg: AugmentConfig, rng: np.random.Generator) -> PatchArrays:
    """Apply one fresh transform per selected sample (shared across a cuboid)."""
    y = arrays.y[indices].copy()
    u = arrays.u[indices].copy()
    v = arrays.v[indices].copy()
    size = arrays.size
    for row in range(len(indices)):
        params = draw_affine_params(cfg, size, rng)
        for f in range(arrays.n_frames):
            patch = PatchPayload(y[row, f], u[row, f], v[row, f])
            warped = apply_affine(patch, params, cfg.fill_mode, cfg.cval)
            y[row, f] = warped.y
            u[row, f] = warped.u
            v[row, f] = warped.v
    return PatchArrays(y=y, u=u, v=v, labels=arrays.labels[indices])


def train_classifier(
    data: TaskData,
    pea_type: PeaType,
    architecture: str = "resnext",
    train_cfg: Optional[nn.TrainConfig] = None,
    augment: Union[AugmentConfig, None, str] = "auto",
    model_config: Union[LeNet5Config, ResNeXtConfig, None] = None,
    provenance: Optional[dict] = None,
) -> Tuple[PeaClassifier, List[EpochLog]]:
    """Train one binary artifact classifier and evaluate both splits.

    ``augment="auto"`` enables the default augmentation on the LeNet path
    and disables it for ResNeXt.
    """
    if architecture not in ARCHITECTURES:
        raise ConfigInvalid(f"architecture must be one of {ARCHITECTURES}")
    cfg = train_cfg or nn.TrainConfig()
    if augment == "auto":
        augment = AugmentConfig() if architecture == "lenet5" else None

    train, test = data.train, data.test
    if len(train) == 0 or len(set(train.labels.tolist())) < 2:
        raise EmptyClass(f"training split lacks both labels for {pea_type.wire_name}")

    temporal = pea_type.is_temporal and train.n_frames == 10
    size = train.size
    channels = 10 if temporal else 3

    if model_config is None:
        if architecture == "lenet5":
            model_config = LeNet5Config(input_size=size, input_channels=channels)
        else:
            model_config = ResNeXtConfig(input_size=size, input_channels=channels)
    if model_config.input_channels != channels or model_config.input_size != size:
        raise ConfigInvalid(
            f"model config expects {model_config.input_channels}ch "
            f"{model_config.input_size}px, data provides {channels}ch {size}px"
        )
    rng = np.random.default_rng(cfg.seed)
    if architecture == "lenet5":
        model = build_lenet5(model_config, rng=rng)
    else:
        model = build_resnext(model_config, rng=rng)

    x_train = assemble_input(train, temporal)
    x_test = assemble_input(test, temporal) if len(test) else None
    mean = x_train.mean(axis=(0, 2, 3))

    optimizer = nn.SGD(model.params(), lr=cfg.initial_lr,
                       momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    logs: List[EpochLog] = []
    n = len(train)
    for epoch in range(cfg.epochs):
        optimizer.lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if augment is not None:
                batch_arrays = _augment_arrays(train, idx, augment, rng)
                xb = assemble_input(batch_arrays, temporal)
            else:
                xb = x_train[idx]
            xb = xb - mean[None, :, None, None]
            yb = train.labels[idx]
            logits = model.forward(xb, train=True)
            loss, grad = nn.softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise DivergedLoss(
                    f"non-finite loss at epoch {epoch}, batch offset {start} "
                    f"(lr={optimizer.lr})"
                )
            epoch_loss += loss * len(idx)
            optimizer.zero_grad()
            model.backward(grad)
            optimizer.step()
        train_counts = evaluate(model, x_train, train.labels, mean, cfg.batch_size)
        if x_test is not None and len(test):
            test_counts = evaluate(model, x_test, test.labels, mean, cfg.batch_size)
            test_acc = _paper_accuracy_or_nan(test_counts)
        else:
            test_acc = float("nan")
        logs.append(EpochLog(
            epoch=epoch, lr=optimizer.lr,
            train_loss=epoch_loss / n,
            train_acc=_paper_accuracy_or_nan(train_counts),
            test_acc=test_acc,
        ))

    classifier = PeaClassifier(
        pea_type=pea_type,
        architecture=architecture,
        model=model,
        input_size=size,
        input_channels=channels,
        channel_mean=mean.astype(np.float32),
        config=asdict(model_config),
        provenance=provenance,
    )
    return classifier, logs


def classifier_counts(classifier: PeaClassifier, arrays: PatchArrays,
                      batch_size: int = 256) -> nn.ConfusionCounts:
    """Confusion counts of a trained classifier over a patch array split."""
    x = assemble_input(arrays, classifier.temporal)
    return evaluate(classifier.model, x, arrays.labels, classifier.channel_mean,
                    batch_size)

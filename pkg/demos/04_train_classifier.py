"""Train a small blocking-artifact classifier end to end on a synthetic
corpus and verify the checkpoint reloads to identical predictions.

Runtime: a couple of minutes on one CPU core.
Run from the repository root:  python3 demos/04_train_classifier.py
"""

import tempfile
from pathlib import Path

from peakit import nn
from peakit.pea_models import LeNet5Config, PeaClassifier, predict, train_classifier
from peakit.pea_types import PeaType
from peakit.synthetic import synthetic_task
from peakit.video_io import PatchPayload

# Blocking positives carry DC steps on the 8x8 coding lattice; negatives are
# the same textures without the injection. 75:25 split, stratified.
data = synthetic_task("blocking", n_per_class=400, size=32, seed=13)
print(f"train {len(data.train)}, test {len(data.test)}")

cfg = nn.TrainConfig(batch_size=32, epochs=12, initial_lr=0.05,
                     lr_drop_epochs=(10,), seed=13)
clf, logs = train_classifier(
    data, PeaType.BLOCKING, architecture="lenet5", train_cfg=cfg, augment=None,
    model_config=LeNet5Config(input_size=32, conv1_filters=8, conv2_filters=12,
                              fc1_width=64),
)
for row in logs[::3] + [logs[-1]]:
    print(f"epoch {row.epoch:2d} lr {row.lr:<7g} loss {row.train_loss:.4f} "
          f"train {row.train_acc:.3f} test {row.test_acc:.3f}")

path = Path(tempfile.mkdtemp(prefix="pea-demo-")) / "blocking.peac"
clf.save(path)
reloaded = PeaClassifier.load(path)

sample = data.test
patch = PatchPayload(sample.y[0, 0], sample.u[0, 0], sample.v[0, 0])
prob, decision = predict(reloaded, patch)
print(f"\ncheckpoint: {path.stat().st_size} bytes")
print(f"test patch label={sample.labels[0]} -> p(artifact)={prob:.3f}, "
      f"decision={decision}")
assert predict(reloaded, patch) == predict(clf, patch)
print("reloaded classifier agrees with the trained one")

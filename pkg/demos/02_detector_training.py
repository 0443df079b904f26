"""
Training the sequence detector
==============================

Build a small convolutional-recurrent classifier, train it on one
scenario seed, and score it on a fresh seed it has never observed.
Runs in well under a minute; the full-size network follows the same
path with bigger widths.
"""

import tempfile

import numpy as np

from cloudguard.detector import (
    ArchConfig,
    TrainConfig,
    build_model,
    classify,
    evaluate,
    load_detector,
    prepare_dataset,
    save_detector,
    train,
)
from cloudguard.features import build_layout
from cloudguard.scenario import default_scenario, generate_stream
from cloudguard.telemetry import LABELS

# 1. two independent streams: train on seed 0, test on seed 1. Reusing one
#    stream for both would leak through the overlapping sliding windows.
layout = build_layout()
train_stream = generate_stream(default_scenario(seed=0, rounds=12))
test_stream = generate_stream(default_scenario(seed=1, rounds=3))
print(f"train windows: {len(train_stream.windows)}, "
      f"test windows: {len(test_stream.windows)}")

# 2. a mid-size architecture; the timeline shows the sequence length after
#    each conv/pool stage
arch = ArchConfig(conv_filters=(16, 16, 32, 32), lstm_hidden=32,
                  fc_widths=(64, 32))
print("sequence timeline through the stack:", arch.timeline())

# 3. featurize; test data reuses the training normalizer, as production would
x_train, y_train, stats = prepare_dataset(train_stream, layout, arch.seq_len)
x_test, y_test, _ = prepare_dataset(test_stream, layout, arch.seq_len,
                                    stats=stats)
print(f"tensors: train {x_train.shape}, test {x_test.shape}")

# 4. train with the seeded pipeline: shuffling, the validation split, and
#    the returned best-epoch weights are all reproducible
model = build_model(arch, seed=0)
model, history = train(model, x_train, y_train,
                       TrainConfig(epochs=12, lr=1e-3, seed=0))
print("\nepoch   loss   train-acc  val-acc")
for row in history:
    print(f"{row['epoch']:5d}  {row['loss']:6.3f}  {row['train_accuracy']:8.3f}"
          f"  {row['val_accuracy']:7.3f}")

# 5. held-out evaluation at the deployment confidence threshold
metrics = evaluate(model, x_test, y_test, threshold=0.75)
print(f"\nheld-out accuracy {metrics.accuracy:.3f}, "
      f"false-positive rate {metrics.false_positive_rate:.3f}, "
      f"unknown rate {metrics.unknown_rate:.3f}")
print("per-class F1:")
for name, f1 in zip(metrics.classes, metrics.f1):
    print(f"  {name:18s} {f1:.3f}")

# 6. checkpoints carry the architecture, weights, normalizer, and layout,
#    so a loaded detector is ready to classify raw sequences
with tempfile.TemporaryDirectory() as tmp:
    path = f"{tmp}/detector.npz"
    save_detector(path, model, arch, stats, layout)
    model2, arch2, stats2, layout2, classes = load_detector(path)
    verdict = classify(model2, x_test[0], threshold=0.75)
    print(f"\nreloaded checkpoint classifies test sequence 0 as "
          f"{classes[verdict.predicted]!r} (truth {LABELS[y_test[0]]!r}, "
          f"p = {verdict.max_probability:.3f}, confident = {verdict.confident})")

"""The three classifiers, trained from scratch on synthetic fragments.

The random forest sees flattened tensors; the 1-D CNN and the LSTM consume
the channels x time matrix directly and train with Adam on binary cross
entropy. Analytic gradients are verified against central finite
differences before training.
"""

import numpy as np

from gmakit.evaluation import samples_from_fragments
from gmakit.learn import TrainConfig, grad_check, predict, rf_fit, train
from gmakit.preprocess import fragment_dataset, prepare_records
from gmakit.synth import SynthSpec, generate

# -- gradient verification ---------------------------------------------------
rng = np.random.default_rng(0)
probe = rng.standard_normal((10, 40))
print("gradient check (max relative error vs finite differences):")
for kind in ("cnn", "lstm"):
    print(f"  {kind}: {grad_check(kind, probe, seed=1):.2e}")

# -- data ---------------------------------------------------------------------
_, records = generate(SynthSpec(n_subjects=16, seed=9, duration_range=(5.0, 8.0)))
fragments, _ = fragment_dataset(prepare_records(records))
samples = samples_from_fragments(fragments, "angles")
# hold out whole subjects, two per class
held_subjects = {"S006", "S007", "S014", "S015"}
train_samples = [s for s in samples if s.subject_id not in held_subjects]
held_out = [s for s in samples if s.subject_id in held_subjects]
train_set = [(s.values, s.label) for s in train_samples]
print(f"\n{len(train_set)} training fragments, {len(held_out)} held out "
      f"(subjects {sorted(held_subjects)})")

# -- random forest -------------------------------------------------------------
X = np.stack([s.values.reshape(-1) for s in train_samples])
y = np.array([s.label for s in train_samples])
forest = rf_fit(X, y, n_trees=170, seed=0)
rf_hits = [int(predict(forest, s.values) > 0.5) == s.label for s in held_out]
print(f"random forest (170 trees): {sum(rf_hits)}/{len(rf_hits)} held-out correct")

# -- neural models --------------------------------------------------------------
for kind, config in (
    ("cnn", TrainConfig("cnn", lr=1e-3, batch_size=6, epochs=40, seed=0)),
    ("lstm", TrainConfig("lstm", lr=3e-3, batch_size=6, epochs=60, seed=0)),
):
    model, losses = train(kind, train_set, config)
    hits = [int(predict(model, s.values) > 0.5) == s.label for s in held_out]
    print(f"{kind}: loss {losses[0]:.3f} -> {losses[-1]:.4f} over {config.epochs} epochs, "
          f"{sum(hits)}/{len(hits)} held-out correct")

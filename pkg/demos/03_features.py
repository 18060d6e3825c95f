"""Feature extraction: coordinate channels and joint-angle channels.

Classifiers consume a channels x time matrix per fragment. Coordinates
give 34 channels (x and y per keypoint); the 10 joint angles add dynamics
that are invariant to where the infant lies in the frame.
"""

import numpy as np

from gmakit.features import ANGLE_LABELS, angle, build_features
from gmakit.preprocess import fragment_dataset, prepare_records
from gmakit.synth import SynthSpec, generate

# the angle primitive: vertex angle of three points, clipped arccos
print("angle((1,0), (0,0), (0,1)) =", angle((1, 0), (0, 0), (0, 1)), "(quarter turn)")
print("angle((1,0), (0,0), (-1,0)) =", angle((1, 0), (0, 0), (-1, 0)), "(straight line)")
print("angle of coincident points:", angle((1, 1), (1, 1), (2, 2)), "(missing)")

_, records = generate(SynthSpec(n_subjects=6, seed=5, occlusion_rate=0.0))
fragments, length = fragment_dataset(prepare_records(records))
frag = fragments[0]

for feature_set in ("coords", "angles", "both"):
    tensor = build_features(frag, feature_set)
    print(f"\n{feature_set}: {tensor.values.shape[0]} channels x {tensor.values.shape[1]} frames")
    print("  first channels:", ", ".join(tensor.labels[:4]), "...")

# the classes differ in how much the limb angles move
angles_by_label = {0: [], 1: []}
for f in fragments:
    t = build_features(f, "angles")
    knee_rows = [ANGLE_LABELS.index("left hip-left knee-left ankle"),
                 ANGLE_LABELS.index("right hip-right knee-right ankle")]
    angles_by_label[f.label].append(t.values[knee_rows].std(axis=1).mean())

print("\nmean knee-angle swing (radians):")
print(f"  normal   (label 0): {np.mean(angles_by_label[0]):.3f}")
print(f"  impaired (label 1): {np.mean(angles_by_label[1]):.3f}")

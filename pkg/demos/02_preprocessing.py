"""Walk the preprocessing pipeline one stage at a time.

Stages: resample to a common 30 fps, detect and correct tracking outliers,
crop to the extreme keypoints with a 15% margin, normalize coordinates
into the crop, and cut fixed-length fragments sized by the shortest
recording.
"""

import numpy as np

from gmakit.keypoints import Keypoint
from gmakit.preprocess import (
    ScriptedCorrections,
    compute_crop,
    crop_record,
    detect_outliers,
    fragment_dataset,
    outlier_loop,
    resample_record,
)
from gmakit.synth import SynthSpec, generate, inject_jump
from gmakit.trackers import ReplayTracker

spec = SynthSpec(n_subjects=4, seed=3, occlusion_rate=0.0,
                 fps_choices=(30.0, 60.0, 120.0), duration_range=(20.0, 24.0))
_, records = generate(spec)

# -- resampling ------------------------------------------------------------
print("resampling to 30 fps:")
resampled = []
for r in records:
    out = resample_record(r, 30.0)
    print(f"  {r.video_id}: {r.fps:>5} fps x {r.n_frames:>5} frames "
          f"-> 30.0 fps x {out.n_frames} frames")
    resampled.append(out)

# -- outlier detection and correction ---------------------------------------
# corrupt one keypoint of one video with a sudden 20-sigma jump, the kind a
# tracker produces when limbs overlap
victim = resampled[0]
kp, frame = Keypoint.RIGHT_ANKLE, 250
clean_track = victim.tracks[kp]
sigma = np.linalg.norm(np.diff(clean_track.xy, axis=0), axis=1).std()
jumped = inject_jump(victim, kp, frame, (20.0 * sigma, 0.0))
print(f"\ninjected a {20 * sigma:.0f} px jump into {kp.value} at frame {frame}")

flags = detect_outliers(jumped.tracks, k=15.0)
for f in flags:
    print(f"  flagged: {f.keypoint.value} frame {f.frame} "
          f"(moved {f.displacement:.1f} px, threshold {f.threshold:.1f} px)")

# the loop asks a corrections source for each flag, reseeds the tracker and
# repeats until clean; here the source supplies the true position and a
# replay tracker stands in for the real one
fixes = ScriptedCorrections([(0, kp, frame, clean_track.xy[frame, 0], clean_track.xy[frame, 1])])
fixed_tracks, rounds = outlier_loop(jumped.tracks, ReplayTracker(victim), fixes)
print(f"  loop converged after {len(rounds)} round(s); "
      f"remaining flags: {len(detect_outliers(fixed_tracks))}")

# -- crop and normalize ------------------------------------------------------
box = compute_crop(victim.tracks, victim.frame_width, victim.frame_height, margin=0.15)
print(f"\ncrop box of {victim.video_id}: "
      f"x [{box.x_min:.0f}, {box.x_max:.0f}] y [{box.y_min:.0f}, {box.y_max:.0f}]")

prepared = [crop_record(r) for r in resampled]
sample = prepared[0].tracks[Keypoint.NOSE].xy[:3]
print("  nose coordinates after normalization:", sample.round(3).tolist())

# -- fragmenting --------------------------------------------------------------
fragments, length = fragment_dataset(prepared)
print(f"\nfragments of length {length} (shortest recording):")
for f in fragments:
    print(f"  {f.video_id} start={f.start_frame:>4} label={f.label}")

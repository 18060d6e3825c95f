"""The annotation service, driven end to end in process.

A labeller works against the HTTP API: list videos, place the prompted
keypoints, finish labelling (which runs the tracker and the outlier
detector), review the flags, post a correction, retrack. Here the tracker
is a mock that loses one point on purpose so the review flow has something
to show.
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from gmakit.service import create_app
from gmakit.synth import SynthSpec, generate, save_dataset
from gmakit.trackers import JumpInjectingTracker

root = Path(tempfile.mkdtemp(prefix="gmakit_demo_"))
spec = SynthSpec(n_subjects=2, seed=8, occlusion_rate=0.0,
                 fps_choices=(30.0,), duration_range=(10.0, 12.0))
manifest, records = generate(spec)
save_dataset(manifest, records, root, spec)

app = create_app(root / "manifest.csv", data_dir=root / "annotations",
                 tracker=JumpInjectingTracker(jump_at=60, offset=(150.0, 0.0)))
client = TestClient(app)

videos = client.get("/videos").json()
print("videos on the server:")
for v in videos:
    print(f"  {v['video_id']}: {v['n_frames']} frames, label {v['label']}")

vid = videos[0]["video_id"]

# extreme mode prompts only the 9 peripheral keypoints
session = client.get(f"/videos/{vid}/annotations", params={"mode": "extreme"}).json()
print(f"\nlabelling {vid} in {session['mode']} mode, prompt order:")
print(" ", ", ".join(session["prompt_order"]))

for i, name in enumerate(session["prompt_order"]):
    resp = client.post(f"/videos/{vid}/annotations",
                       json={"keypoint": name, "frame": 0, "x": 120.0 + 15 * i, "y": 180.0})
    resp.raise_for_status()
print("placed", len(session["prompt_order"]), "points on frame 0")

# a frame rendering is always available (schematic skeleton if no PNGs)
png = client.get(f"/videos/{vid}/frames/0")
print("frame 0 render:", len(png.content), "bytes of PNG")

done = client.post(f"/videos/{vid}/finish-labelling").json()
print(f"\nfinish-labelling: tracker ran, {done['n_flags']} outlier flag(s)")

flags = client.get(f"/videos/{vid}/outliers").json()["flags"]
for f in flags:
    print(f"  flag {f['index']}: {f['keypoint']} jumped {f['displacement']:.0f} px "
          f"at frame {f['frame']} (threshold {f['threshold']:.0f} px)")

flag = flags[0]
client.post(f"/videos/{vid}/outliers/{flag['index']}/correction",
            json={"x": 120.0, "y": 180.0}).raise_for_status()
after = client.post(f"/videos/{vid}/retrack").json()
print(f"corrected and retracked: round {after['round']}, {after['n_flags']} flags remain")
print("\ncorrections log:", (root / "annotations" / "corrections.csv").read_text().strip())

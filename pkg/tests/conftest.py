import numpy as np
import pytest

from gmakit.keypoints import ALL_KEYPOINTS, Keypoint
from gmakit.records import KeypointTrack, VideoRecord


def make_track(kp: Keypoint, xy, visible=None) -> KeypointTrack:
    xy = np.asarray(xy, dtype=np.float64)
    if visible is None:
        visible = np.ones(len(xy), dtype=bool)
    return KeypointTrack(kp, xy, np.asarray(visible, dtype=bool))


def make_record(n_frames=10, seed=0, video_id="V000", subject_id="S000",
                age_group="early", label=0, fps=30.0, width=640, height=480) -> VideoRecord:
    """Random stationary record: every keypoint wobbles around its own spot."""
    rng = np.random.default_rng(seed)
    tracks = {}
    for i, kp in enumerate(ALL_KEYPOINTS):
        center = rng.uniform([80, 80], [width - 80, height - 80])
        xy = center + rng.normal(0, 2.0, size=(n_frames, 2))
        tracks[kp] = KeypointTrack(kp, xy, np.ones(n_frames, dtype=bool))
    return VideoRecord(
        video_id=video_id, subject_id=subject_id, age_group=age_group, label=label,
        fps=fps, frame_width=width, frame_height=height, tracks=tracks,
    )


@pytest.fixture
def record():
    return make_record()

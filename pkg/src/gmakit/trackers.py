"""Point-tracker boundary.

The production tracker is an external neural point tracker; this package
only depends on the ``TrackerPort`` capability so it can be replaced by
deterministic mocks in tests and demos. Contract: output covers exactly
[start_frame, end_frame) and reproduces each seed point exactly at
start_frame.
"""

from __future__ import annotations

from typing import Mapping, Protocol

import numpy as np

from .keypoints import Keypoint
from .records import KeypointTrack, VideoRecord


class TrackerPort(Protocol):
    def track(
        self,
        start_frame: int,
        end_frame: int,
        seeds: Mapping[Keypoint, tuple[float, float]],
    ) -> dict[Keypoint, KeypointTrack]:
        ...


class ConstantTracker:
    """Holds every seed point fixed over the whole range. Fully visible."""

    def track(self, start_frame, end_frame, seeds):
        n = end_frame - start_frame
        out = {}
        for kp, (x, y) in seeds.items():
            xy = np.tile(np.array([x, y], dtype=np.float64), (n, 1))
            out[kp] = KeypointTrack(kp, xy, np.ones(n, dtype=bool))
        return out


class ReplayTracker:
    """Replays ground-truth tracks, overriding the seed frame with the seed.

    Used to model a perfect tracker: after a correction it returns the true
    trajectory from the corrected frame onward.
    """

    def __init__(self, truth: VideoRecord | dict[Keypoint, KeypointTrack]):
        self._tracks = truth.tracks if isinstance(truth, VideoRecord) else truth

    def track(self, start_frame, end_frame, seeds):
        out = {}
        for kp, (x, y) in seeds.items():
            ref = self._tracks[kp]
            xy = ref.xy[start_frame:end_frame].copy()
            vis = ref.visible[start_frame:end_frame].copy()
            xy[0] = (x, y)
            vis[0] = True
            out[kp] = KeypointTrack(kp, xy, vis)
        return out


class JumpInjectingTracker:
    """Constant tracker that corrupts exactly one track, once.

    The first keypoint it is ever asked to track gets displaced by
    ``offset`` pixels from ``jump_at`` frames past the segment start,
    simulating the tracker losing that point. Every later request is clean,
    so one labelling round plus one correction round converges. Needs a
    segment of at least ~230 frames for the jump to clear the 15-sigma
    outlier threshold.
    """

    def __init__(self, jump_at: int = 40, offset: tuple[float, float] = (160.0, 0.0)):
        self.jump_at = jump_at
        self.offset = np.asarray(offset, dtype=np.float64)
        self._armed = True
        self._inner = ConstantTracker()

    def track(self, start_frame, end_frame, seeds):
        out = self._inner.track(start_frame, end_frame, seeds)
        if self._armed and seeds:
            kp = next(iter(out))
            t = out[kp]
            if self.jump_at < len(t):
                xy = t.xy.copy()
                xy[self.jump_at:] += self.offset
                out[kp] = KeypointTrack(kp, xy, t.visible)
                self._armed = False
        return out

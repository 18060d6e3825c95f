"""Anatomical keypoint taxonomy.

17 landmarks are tracked per video. The 9 peripheral ones (head top,
elbows, wrists, knees, ankles) are the "extreme" keypoints used to compute
the per-video crop. Listing order is canonical: it fixes feature channel
order, CSV ordering and the labelling prompt order.
"""

from __future__ import annotations

from enum import Enum


class Keypoint(str, Enum):
    NOSE = "nose"
    HEAD_BOTTOM = "head bottom"
    HEAD_TOP = "head top"
    LEFT_EAR = "left ear"
    RIGHT_EAR = "right ear"
    LEFT_SHOULDER = "left shoulder"
    RIGHT_SHOULDER = "right shoulder"
    LEFT_ELBOW = "left elbow"
    RIGHT_ELBOW = "right elbow"
    LEFT_WRIST = "left wrist"
    RIGHT_WRIST = "right wrist"
    LEFT_HIP = "left hip"
    RIGHT_HIP = "right hip"
    LEFT_KNEE = "left knee"
    RIGHT_KNEE = "right knee"
    LEFT_ANKLE = "left ankle"
    RIGHT_ANKLE = "right ankle"

    @property
    def is_extreme(self) -> bool:
        return self in EXTREME_KEYPOINTS

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


ALL_KEYPOINTS: tuple[Keypoint, ...] = tuple(Keypoint)

EXTREME_KEYPOINTS: frozenset[Keypoint] = frozenset(
    {
        Keypoint.HEAD_TOP,
        Keypoint.LEFT_ELBOW,
        Keypoint.RIGHT_ELBOW,
        Keypoint.LEFT_WRIST,
        Keypoint.RIGHT_WRIST,
        Keypoint.LEFT_KNEE,
        Keypoint.RIGHT_KNEE,
        Keypoint.LEFT_ANKLE,
        Keypoint.RIGHT_ANKLE,
    }
)

# Joint-angle triples (p1, vertex, p3). The angle feature channel order
# follows this listing.
ANGLE_TRIPLES: tuple[tuple[Keypoint, Keypoint, Keypoint], ...] = (
    (Keypoint.HEAD_TOP, Keypoint.NOSE, Keypoint.HEAD_BOTTOM),
    (Keypoint.RIGHT_EAR, Keypoint.NOSE, Keypoint.LEFT_EAR),
    (Keypoint.LEFT_ELBOW, Keypoint.LEFT_SHOULDER, Keypoint.HEAD_BOTTOM),
    (Keypoint.RIGHT_ELBOW, Keypoint.RIGHT_SHOULDER, Keypoint.HEAD_BOTTOM),
    (Keypoint.LEFT_WRIST, Keypoint.LEFT_ELBOW, Keypoint.LEFT_SHOULDER),
    (Keypoint.RIGHT_WRIST, Keypoint.RIGHT_ELBOW, Keypoint.RIGHT_SHOULDER),
    (Keypoint.LEFT_KNEE, Keypoint.LEFT_HIP, Keypoint.LEFT_SHOULDER),
    (Keypoint.RIGHT_KNEE, Keypoint.RIGHT_HIP, Keypoint.RIGHT_SHOULDER),
    (Keypoint.LEFT_HIP, Keypoint.LEFT_KNEE, Keypoint.LEFT_ANKLE),
    (Keypoint.RIGHT_HIP, Keypoint.RIGHT_KNEE, Keypoint.RIGHT_ANKLE),
)


def parse_keypoint(name: str) -> Keypoint:
    """Resolve a keypoint by canonical name. Raises KeyError if unknown."""
    try:
        return Keypoint(name)
    except ValueError:
        raise KeyError(f"unknown keypoint name: {name!r}") from None

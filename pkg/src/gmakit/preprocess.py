"""Track preprocessing: resampling, cropping, outlier correction, fragmenting.

Pipeline order for a dataset: resample every video to a common rate
(30 fps), run the outlier detect/correct loop if a corrections source is
available, compute one crop per video from the extreme keypoints, normalize
coordinates into the crop, then cut fixed-length fragments sized by the
shortest recording.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .keypoints import ALL_KEYPOINTS, EXTREME_KEYPOINTS, Keypoint
from .records import CropBox, KeypointTrack, ValidationError, VideoRecord
from .trackers import TrackerPort

log = logging.getLogger(__name__)

DEFAULT_FPS = 30.0
DEFAULT_CROP_MARGIN = 0.15
DEFAULT_OUTLIER_K = 15.0
DEFAULT_MAX_ROUNDS = 3

# snap tolerance for "output instant coincides with a source frame"
_SNAP = 1e-9


@dataclass(frozen=True)
class OutlierFlag:
    keypoint: Keypoint
    frame: int            # later frame of the offending jump
    displacement: float   # px
    threshold: float      # px

    def __post_init__(self):
        if not self.displacement > self.threshold:
            raise ValidationError(f"flag displacement {self.displacement} not above threshold {self.threshold}")


@dataclass(frozen=True)
class Correction:
    keypoint: Keypoint
    frame: int
    x: float
    y: float


@dataclass(frozen=True)
class Fragment:
    """Fixed-length, crop-normalized slice of one recording.

    ``coords`` is (17, length, 2) in canonical keypoint order with values in
    [0, 1] where visible and exactly 0 where occluded. ``crop_width`` and
    ``crop_height`` are the pixel dimensions of the source crop box, kept so
    angle features can restore the true aspect ratio.
    """

    video_id: str
    subject_id: str
    age_group: str
    label: int
    start_frame: int
    coords: np.ndarray
    visible: np.ndarray
    crop_width: float
    crop_height: float

    @property
    def n_frames(self) -> int:
        return self.coords.shape[1]


# --------------------------------------------------------------------------
# resampling


def resample_track(track: KeypointTrack, src_fps: float, dst_fps: float = DEFAULT_FPS) -> KeypointTrack:
    """Resample one track onto a dst_fps timeline spanning the same duration.

    Coordinates are linearly interpolated between the two bracketing source
    frames; a resampled sample is visible only if both bracketing samples
    are visible. Output length is floor((n_src - 1) * dst_fps / src_fps) + 1.
    """
    if src_fps <= 0 or dst_fps <= 0:
        raise ValidationError(f"fps must be positive (src={src_fps}, dst={dst_fps})")
    n_src = len(track)
    if n_src == 0:
        raise ValidationError("cannot resample an empty track")
    if src_fps == dst_fps:
        return track

    n_out = int(math.floor((n_src - 1) * dst_fps / src_fps + _SNAP)) + 1
    pos = np.arange(n_out) * (src_fps / dst_fps)
    lo = np.floor(pos + _SNAP).astype(np.int64)
    lo = np.clip(lo, 0, n_src - 1)
    w = pos - lo
    w[w < _SNAP] = 0.0
    hi = np.minimum(lo + 1, n_src - 1)
    hi = np.where(w == 0.0, lo, hi)

    xy = (1.0 - w)[:, None] * track.xy[lo] + w[:, None] * track.xy[hi]
    vis = track.visible[lo] & track.visible[hi]
    xy[~vis] = 0.0
    return KeypointTrack(track.keypoint, xy, vis)


def resample_record(record: VideoRecord, dst_fps: float = DEFAULT_FPS) -> VideoRecord:
    tracks = {kp: resample_track(t, record.fps, dst_fps) for kp, t in record.tracks.items()}
    return replace(record, fps=dst_fps, tracks=tracks)


# --------------------------------------------------------------------------
# cropping


def compute_crop(
    tracks: dict[Keypoint, KeypointTrack],
    frame_width: float,
    frame_height: float,
    margin: float = DEFAULT_CROP_MARGIN,
) -> CropBox:
    """Bounding box of all visible extreme-keypoint samples, expanded per
    axis by margin * span and clamped to the frame.

    A degenerate span on an axis expands by margin * max(frame dimension)
    instead, so the box never collapses.
    """
    pts = [t.xy[t.visible] for kp, t in tracks.items() if kp in EXTREME_KEYPOINTS]
    pts = [p for p in pts if len(p)]
    if not pts:
        raise ValidationError("no visible extreme-keypoint samples; cannot compute crop")
    allpts = np.concatenate(pts, axis=0)
    x_min, y_min = allpts.min(axis=0)
    x_max, y_max = allpts.max(axis=0)

    pad_default = margin * max(frame_width, frame_height)
    pad_x = margin * (x_max - x_min) if x_max > x_min else pad_default
    pad_y = margin * (y_max - y_min) if y_max > y_min else pad_default
    return CropBox(
        x_min=float(max(0.0, x_min - pad_x)),
        y_min=float(max(0.0, y_min - pad_y)),
        x_max=float(min(float(frame_width), x_max + pad_x)),
        y_max=float(min(float(frame_height), y_max + pad_y)),
    )


def normalize_to_crop(tracks: dict[Keypoint, KeypointTrack], crop: CropBox) -> dict[Keypoint, KeypointTrack]:
    """Map visible samples into crop-relative [0, 1] coordinates (clipped);
    occluded samples become exactly (0, 0)."""
    if crop.width <= 0 or crop.height <= 0:
        raise ValidationError(f"degenerate crop {crop}")
    out = {}
    for kp, t in tracks.items():
        xy = np.zeros_like(t.xy)
        vis = t.visible
        xy[vis, 0] = np.clip((t.xy[vis, 0] - crop.x_min) / crop.width, 0.0, 1.0)
        xy[vis, 1] = np.clip((t.xy[vis, 1] - crop.y_min) / crop.height, 0.0, 1.0)
        out[kp] = KeypointTrack(kp, xy, vis.copy())
    return out


def crop_record(record: VideoRecord, margin: float = DEFAULT_CROP_MARGIN) -> VideoRecord:
    crop = compute_crop(record.tracks, record.frame_width, record.frame_height, margin)
    return record.with_tracks(normalize_to_crop(record.tracks, crop), crop=crop)


# --------------------------------------------------------------------------
# outlier detection and correction


def detect_outliers(tracks: dict[Keypoint, KeypointTrack], k: float = DEFAULT_OUTLIER_K) -> list[OutlierFlag]:
    """Flag sudden jumps: frame-to-frame displacements above k standard
    deviations of that keypoint's displacement magnitudes over the video.

    Displacements are Euclidean and only counted between consecutive frames
    that are both visible; the flag attributes to the later frame, and the
    comparison is strict (a displacement of exactly k*sigma is not flagged).
    Keypoints with fewer than 2 usable displacements are skipped.
    """
    n = len(next(iter(tracks.values())))
    if n < 3:
        raise ValidationError(f"need at least 3 frames to detect outliers, got {n}")
    flags: list[OutlierFlag] = []
    for kp in ALL_KEYPOINTS:
        if kp not in tracks:
            continue
        t = tracks[kp]
        both = t.visible[:-1] & t.visible[1:]
        if both.sum() < 2:
            log.warning("outlier detection skipped %s: fewer than 2 usable displacements", kp.value)
            continue
        deltas = np.linalg.norm(t.xy[1:] - t.xy[:-1], axis=1)
        sigma = float(deltas[both].std())
        if sigma == 0.0:
            continue
        threshold = k * sigma
        hits = np.nonzero(both & (deltas > threshold))[0]
        for i in hits:
            flags.append(OutlierFlag(kp, int(i) + 1, float(deltas[i]), threshold))
    return flags  # ALL_KEYPOINTS iteration already yields (keypoint, frame) order


def retrack_from_correction(
    tracks: dict[Keypoint, KeypointTrack],
    correction: Correction,
    tracker: TrackerPort,
) -> dict[Keypoint, KeypointTrack]:
    """Replace one keypoint's samples from the corrected frame to the end of
    the video with the tracker's output seeded at the correction."""
    if correction.keypoint not in tracks:
        raise ValidationError(f"unknown keypoint {correction.keypoint!r}")
    old = tracks[correction.keypoint]
    n = len(old)
    if not 0 <= correction.frame < n:
        raise ValidationError(f"correction frame {correction.frame} out of range [0, {n})")

    seeded = tracker.track(correction.frame, n, {correction.keypoint: (correction.x, correction.y)})
    new_tail = seeded[correction.keypoint]
    if len(new_tail) != n - correction.frame:
        raise ValidationError(
            f"tracker returned {len(new_tail)} frames, expected {n - correction.frame}"
        )
    if not (new_tail.visible[0] and new_tail.xy[0, 0] == correction.x and new_tail.xy[0, 1] == correction.y):
        raise ValidationError("tracker did not reproduce the seed point at the seed frame")

    xy = old.xy.copy()
    vis = old.visible.copy()
    xy[correction.frame:] = new_tail.xy
    vis[correction.frame:] = new_tail.visible
    out = dict(tracks)
    out[correction.keypoint] = KeypointTrack(correction.keypoint, xy, vis)
    return out


CorrectionsSource = Callable[[OutlierFlag, int], Correction]


class CorrectionsError(ValidationError):
    """The corrections source failed to answer a flag."""


def outlier_loop(
    tracks: dict[Keypoint, KeypointTrack],
    tracker: TrackerPort,
    corrections_source: CorrectionsSource,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    k: float = DEFAULT_OUTLIER_K,
) -> tuple[dict[Keypoint, KeypointTrack], list[list[OutlierFlag]]]:
    """Iterate detect -> correct -> retrack until clean or max_rounds.

    Returns the corrected tracks and the flags found in each executed round
    (a round counts only when it found flags). Clean input returns after 0
    rounds, unchanged.
    """
    rounds: list[list[OutlierFlag]] = []
    for round_idx in range(max_rounds):
        flags = detect_outliers(tracks, k=k)
        if not flags:
            break
        rounds.append(flags)
        for flag in flags:
            try:
                correction = corrections_source(flag, round_idx)
            except Exception as exc:
                raise CorrectionsError(f"corrections source failed for {flag}: {exc}") from exc
            if correction is None:
                raise CorrectionsError(f"corrections source returned no correction for {flag}")
            tracks = retrack_from_correction(tracks, correction, tracker)
    return tracks, rounds


def rounds_report_json(rounds: list[list[OutlierFlag]]) -> list[dict]:
    return [
        {
            "round": i,
            "flags": [
                {
                    "keypoint": f.keypoint.value,
                    "frame": f.frame,
                    "displacement": f.displacement,
                    "threshold": f.threshold,
                }
                for f in flags
            ],
        }
        for i, flags in enumerate(rounds)
    ]


class ScriptedCorrections:
    """Corrections source backed by a corrections-log table.

    Rows are (round, keypoint, frame, x, y); the same format doubles as the
    annotation service's append-only corrections log.
    """

    def __init__(self, rows: Sequence[tuple[int, Keypoint, int, float, float]]):
        self._by_key = {(r, kp, f): (x, y) for r, kp, f, x, y in rows}

    def __call__(self, flag: OutlierFlag, round_idx: int) -> Correction:
        key = (round_idx, flag.keypoint, flag.frame)
        if key not in self._by_key:
            raise KeyError(f"no scripted correction for round {round_idx}, {flag.keypoint.value}, frame {flag.frame}")
        x, y = self._by_key[key]
        return Correction(flag.keypoint, flag.frame, x, y)


# --------------------------------------------------------------------------
# fragmenting


def fragment_dataset(records: Sequence[VideoRecord]) -> tuple[list[Fragment], int]:
    """Cut each record into non-overlapping fragments of length L, where L
    is the shortest record's frame count. Tails shorter than L are dropped.

    All records must already be at a common fps and crop-normalized.
    """
    if not records:
        raise ValidationError("cannot fragment an empty record set")
    fps_values = {r.fps for r in records}
    if len(fps_values) != 1:
        raise ValidationError(f"records not at a common fps: {sorted(fps_values)}")
    for r in records:
        if r.crop is None:
            raise ValidationError(f"{r.video_id}: record is not crop-normalized")

    length = min(r.n_frames for r in records)
    fragments: list[Fragment] = []
    for r in records:
        coords = np.stack([r.tracks[kp].xy for kp in ALL_KEYPOINTS])      # (17, n, 2)
        visible = np.stack([r.tracks[kp].visible for kp in ALL_KEYPOINTS])
        coords = coords.copy()
        coords[~visible] = 0.0
        for i in range(r.n_frames // length):
            s = i * length
            fragments.append(
                Fragment(
                    video_id=r.video_id,
                    subject_id=r.subject_id,
                    age_group=r.age_group,
                    label=r.label,
                    start_frame=s,
                    coords=coords[:, s:s + length],
                    visible=visible[:, s:s + length],
                    crop_width=r.crop.width,
                    crop_height=r.crop.height,
                )
            )
    return fragments, length


def prepare_records(
    records: Sequence[VideoRecord],
    dst_fps: float = DEFAULT_FPS,
    margin: float = DEFAULT_CROP_MARGIN,
) -> list[VideoRecord]:
    """Resample to a common rate and crop-normalize each record."""
    return [crop_record(resample_record(r, dst_fps), margin) for r in records]

"""Synthetic articulated-infant dataset generator.

Stands in for clinical recordings so the whole pipeline can be exercised
and verified at desk scale. Each subject gets one recording: a schematic
17-keypoint skeleton whose limb keypoints oscillate on small ellipses
around a rest pose. Class 0 ("normal") uses larger, more variable
amplitudes and frequencies than class 1 ("impaired"), so the classes are
separable through joint-angle variance. No claim of biomechanical realism
is made; fps and duration heterogeneity mimic real recording conditions.

Durations default to a few seconds to keep verification fast; clinical
recordings are minutes long, and the range is configurable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .keypoints import ALL_KEYPOINTS, Keypoint
from .records import (
    DatasetManifest,
    KeypointTrack,
    ManifestEntry,
    ValidationError,
    VideoRecord,
    write_manifest,
    write_tracks,
)

# Rest pose of a supine infant in a 640x480 frame, image coordinates.
REST_POSE: dict[Keypoint, tuple[float, float]] = {
    Keypoint.NOSE: (320.0, 150.0),
    Keypoint.HEAD_BOTTOM: (320.0, 188.0),
    Keypoint.HEAD_TOP: (320.0, 108.0),
    Keypoint.LEFT_EAR: (348.0, 140.0),
    Keypoint.RIGHT_EAR: (292.0, 140.0),
    Keypoint.LEFT_SHOULDER: (360.0, 210.0),
    Keypoint.RIGHT_SHOULDER: (280.0, 210.0),
    Keypoint.LEFT_ELBOW: (395.0, 248.0),
    Keypoint.RIGHT_ELBOW: (245.0, 248.0),
    Keypoint.LEFT_WRIST: (420.0, 290.0),
    Keypoint.RIGHT_WRIST: (220.0, 290.0),
    Keypoint.LEFT_HIP: (345.0, 305.0),
    Keypoint.RIGHT_HIP: (295.0, 305.0),
    Keypoint.LEFT_KNEE: (372.0, 355.0),
    Keypoint.RIGHT_KNEE: (268.0, 355.0),
    Keypoint.LEFT_ANKLE: (388.0, 405.0),
    Keypoint.RIGHT_ANKLE: (252.0, 405.0),
}

# keypoints that carry the class-dependent limb motion
_LIMB_KEYPOINTS = frozenset(
    {
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


@dataclass(frozen=True)
class MotionParams:
    """Limb oscillation statistics for one class."""

    amplitude_px: float
    amplitude_jitter: float
    frequency_hz: float
    frequency_jitter: float
    phase_jitter: float = 0.6  # rad, spread of per-keypoint phase offsets

    def __post_init__(self):
        if self.amplitude_px < 0 or self.amplitude_jitter < 0:
            raise ValidationError("amplitudes must be >= 0")
        if self.frequency_hz <= 0:
            raise ValidationError("frequency must be > 0")


NORMAL_MOTION = MotionParams(amplitude_px=30.0, amplitude_jitter=9.0, frequency_hz=1.1, frequency_jitter=0.45)
IMPAIRED_MOTION = MotionParams(amplitude_px=10.0, amplitude_jitter=2.0, frequency_hz=0.45, frequency_jitter=0.1)


@dataclass(frozen=True)
class JumpSpec:
    video_index: int
    keypoint: Keypoint
    frame: int
    dx: float
    dy: float


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 40
    class_balance: float = 0.5          # fraction of impaired (label 1) subjects
    base_pose: dict[Keypoint, tuple[float, float]] = field(default_factory=lambda: dict(REST_POSE))
    class_motion: tuple[MotionParams, MotionParams] = (NORMAL_MOTION, IMPAIRED_MOTION)
    occlusion_rate: float = 0.02
    jumps: tuple[JumpSpec, ...] = ()
    fps_choices: tuple[float, ...] = (30.0, 60.0, 120.0)
    duration_range: tuple[float, float] = (8.0, 16.0)
    frame_width: int = 640
    frame_height: int = 480
    age_group: str | None = None        # None alternates early/late per subject
    tracker_noise_px: float = 1.2
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValidationError("n_subjects must be >= 1")
        if not 0.0 <= self.class_balance <= 1.0:
            raise ValidationError("class_balance must be in [0, 1]")
        if not 0.0 <= self.occlusion_rate < 1.0:
            raise ValidationError("occlusion_rate must be in [0, 1)")
        if not (0 < self.duration_range[0] <= self.duration_range[1]):
            raise ValidationError("durations must be positive and ordered")
        if any(f <= 0 for f in self.fps_choices):
            raise ValidationError("fps choices must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["base_pose"] = {kp.value: list(xy) for kp, xy in self.base_pose.items()}
        d["jumps"] = [
            {"video_index": j.video_index, "keypoint": j.keypoint.value,
             "frame": j.frame, "dx": j.dx, "dy": j.dy}
            for j in self.jumps
        ]
        d["class_motion"] = [asdict(m) for m in self.class_motion]
        return d


def _subject_record(spec: SynthSpec, index: int, label: int, age_group: str) -> VideoRecord:
    rng = np.random.default_rng([spec.seed, index])
    motion = spec.class_motion[label]

    fps = float(rng.choice(np.asarray(spec.fps_choices, dtype=np.float64)))
    duration = float(rng.uniform(*spec.duration_range))
    n = max(3, int(round(duration * fps)))
    t = np.arange(n) / fps

    offset = rng.uniform(-25.0, 25.0, size=2)
    scale = rng.uniform(0.92, 1.08)
    cx, cy = spec.frame_width / 2.0, spec.frame_height / 2.0

    tracks: dict[Keypoint, KeypointTrack] = {}
    for kp in ALL_KEYPOINTS:
        rest = np.asarray(spec.base_pose[kp], dtype=np.float64)
        rest = (rest - (cx, cy)) * scale + (cx, cy) + offset

        if kp in _LIMB_KEYPOINTS:
            amp = max(0.5, rng.normal(motion.amplitude_px, motion.amplitude_jitter))
            freq = max(0.05, rng.normal(motion.frequency_hz, motion.frequency_jitter))
        else:
            amp = max(0.2, 0.15 * rng.normal(motion.amplitude_px, motion.amplitude_jitter))
            freq = max(0.05, 0.5 * rng.normal(motion.frequency_hz, motion.frequency_jitter))
        phase = rng.uniform(0.0, 2.0 * np.pi) + rng.normal(0.0, motion.phase_jitter)
        aspect = rng.uniform(0.5, 1.0)

        xy = np.empty((n, 2))
        xy[:, 0] = rest[0] + amp * np.cos(2.0 * np.pi * freq * t + phase)
        xy[:, 1] = rest[1] + amp * aspect * np.sin(2.0 * np.pi * freq * t + phase)
        xy += rng.normal(0.0, spec.tracker_noise_px, size=(n, 2))
        xy[:, 0] = np.clip(xy[:, 0], 0.0, spec.frame_width)
        xy[:, 1] = np.clip(xy[:, 1], 0.0, spec.frame_height)

        visible = rng.random(n) >= spec.occlusion_rate
        xy[~visible] = 0.0
        tracks[kp] = KeypointTrack(kp, xy, visible)

    return VideoRecord(
        video_id=f"V{index:03d}",
        subject_id=f"S{index:03d}",
        age_group=age_group,
        label=label,
        fps=fps,
        frame_width=spec.frame_width,
        frame_height=spec.frame_height,
        tracks=tracks,
    )


def generate(spec: SynthSpec) -> tuple[DatasetManifest, list[VideoRecord]]:
    """Generate one record per subject, deterministically from spec.seed.

    The manifest references conventional relative paths tracks/<video>.csv;
    use save_dataset() to materialize the files.
    """
    n_impaired = int(np.floor(spec.class_balance * spec.n_subjects + 0.5))
    records = []
    for i in range(spec.n_subjects):
        label = 1 if i < n_impaired else 0
        age = spec.age_group if spec.age_group is not None else ("early" if i % 2 == 0 else "late")
        record = _subject_record(spec, i, label, age)
        for jump in spec.jumps:
            if jump.video_index == i:
                record = inject_jump(record, jump.keypoint, jump.frame, (jump.dx, jump.dy))
        records.append(record)

    entries = tuple(
        ManifestEntry(
            video_id=r.video_id,
            subject_id=r.subject_id,
            age_group=r.age_group,
            label=r.label,
            fps=r.fps,
            frame_width=r.frame_width,
            frame_height=r.frame_height,
            track_path=Path("tracks") / f"{r.video_id}.csv",
        )
        for r in records
    )
    return DatasetManifest(entries=entries), records


def inject_jump(record: VideoRecord, keypoint: Keypoint, frame: int, offset: tuple[float, float]) -> VideoRecord:
    """Displace one keypoint from ``frame`` onward, simulating a lost track."""
    track = record.tracks[keypoint]
    if not 0 <= frame < len(track):
        raise ValidationError(f"jump frame {frame} out of range [0, {len(track)})")
    xy = track.xy.copy()
    xy[frame:] += np.asarray(offset, dtype=np.float64)
    tracks = dict(record.tracks)
    tracks[keypoint] = KeypointTrack(keypoint, xy, track.visible.copy())
    return replace(record, tracks=tracks)


def save_dataset(manifest: DatasetManifest, records: list[VideoRecord], out_dir: str | Path,
                 spec: SynthSpec | None = None) -> Path:
    """Write manifest.csv, per-video track files, and the generator spec."""
    out_dir = Path(out_dir)
    (out_dir / "tracks").mkdir(parents=True, exist_ok=True)
    by_id = {r.video_id: r for r in records}
    for entry in manifest.entries:
        write_tracks(by_id[entry.video_id].tracks, out_dir / entry.track_path)
    manifest_path = out_dir / "manifest.csv"
    write_manifest(manifest, manifest_path)
    if spec is not None:
        with open(out_dir / "synth_spec.json", "w") as fh:
            json.dump(spec.to_json(), fh, indent=2)
    return manifest_path

"""Domain types and file formats.

Coordinate convention: pixel coordinates with top-left origin, x to the
right, y downward. Frames are 0-based.

File formats (all CSV with a mandatory header):
  track file:  keypoint,frame,x,y,visible      one row per (keypoint, frame)
  manifest:    video_id,subject_id,age_group,label,fps,width,height,track_path
  report:      model,feature_set,age_group,metric,mean,std,n_seeds

A (keypoint, frame) row missing from a track file denotes occlusion: the
sample is read back as visible=0 with x=y=0. Coordinates are serialized
with shortest round-trip precision, so sub-pixel values survive a
write/read cycle bit-exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .keypoints import ALL_KEYPOINTS, Keypoint, parse_keypoint

AGE_GROUPS = ("early", "late")


class DataError(Exception):
    """Base class for data loading/validation failures."""


class ParseError(DataError):
    """File is not well-formed (bad header, bad row, unparseable value)."""


class ValidationError(DataError):
    """File parsed but violates a domain invariant."""


@dataclass(frozen=True)
class KeypointTrack:
    """Per-keypoint sequence of (x, y, visible), one sample per frame."""

    keypoint: Keypoint
    xy: np.ndarray        # (n_frames, 2) float64
    visible: np.ndarray   # (n_frames,) bool

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64)
        vis = np.asarray(self.visible, dtype=bool)
        if xy.ndim != 2 or xy.shape[1] != 2 or vis.shape != (xy.shape[0],):
            raise ValidationError(f"track {self.keypoint}: shape mismatch {xy.shape} vs {vis.shape}")
        if not np.all(np.isfinite(xy[vis])):
            raise ValidationError(f"track {self.keypoint}: non-finite coordinate on a visible sample")
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "visible", vis)

    def __len__(self) -> int:
        return self.xy.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, KeypointTrack):
            return NotImplemented
        return (
            self.keypoint is other.keypoint
            and self.xy.shape == other.xy.shape
            and bool(np.array_equal(self.visible, other.visible))
            and bool(np.array_equal(self.xy, other.xy))
        )


@dataclass(frozen=True)
class CropBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(f"degenerate crop box {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class VideoRecord:
    """One recording: 17 tracks plus metadata.

    ``crop`` is set once the tracks have been normalized to a crop box; it
    is kept so that downstream angle computation can restore the original
    pixel aspect ratio.
    """

    video_id: str
    subject_id: str
    age_group: str
    label: int
    fps: float
    frame_width: int
    frame_height: int
    tracks: dict[Keypoint, KeypointTrack]
    crop: CropBox | None = None

    def __post_init__(self):
        if self.age_group not in AGE_GROUPS:
            raise ValidationError(f"{self.video_id}: age_group {self.age_group!r} not in {AGE_GROUPS}")
        if self.label not in (0, 1):
            raise ValidationError(f"{self.video_id}: label must be 0 or 1, got {self.label!r}")
        if not self.fps > 0:
            raise ValidationError(f"{self.video_id}: fps must be > 0, got {self.fps}")
        missing = [k.value for k in ALL_KEYPOINTS if k not in self.tracks]
        if missing:
            raise ValidationError(f"{self.video_id}: missing keypoints {missing}")
        lengths = {len(t) for t in self.tracks.values()}
        if len(lengths) != 1:
            raise ValidationError(f"{self.video_id}: tracks have unequal lengths {sorted(lengths)}")

    @property
    def n_frames(self) -> int:
        return len(next(iter(self.tracks.values())))

    def with_tracks(self, tracks: dict[Keypoint, KeypointTrack], crop: CropBox | None = None) -> "VideoRecord":
        return replace(self, tracks=tracks, crop=crop if crop is not None else self.crop)


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    subject_id: str
    age_group: str
    label: int
    fps: float
    frame_width: int
    frame_height: int
    track_path: Path


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def entry(self, video_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.video_id == video_id:
                return e
        raise KeyError(video_id)

    def resolve_track_path(self, entry: ManifestEntry) -> Path:
        p = entry.track_path
        return p if p.is_absolute() else self.root / p


@dataclass(frozen=True)
class ReportRow:
    model: str
    feature_set: str
    age_group: str
    metric: str
    mean: float
    std: float
    n_seeds: int

    def __post_init__(self):
        if self.std < 0:
            raise ValidationError(f"report row has std < 0: {self}")
        if self.n_seeds < 1:
            raise ValidationError(f"report row has n_seeds < 1: {self}")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=lambda r: (r.model, r.feature_set, r.age_group, r.metric))


# --------------------------------------------------------------------------
# CSV I/O


def _fmt(x: float) -> str:
    # repr() of a float is the shortest string that round-trips exactly
    return repr(float(x))


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and validate a dataset manifest.

    track_path entries are resolved relative to the manifest's directory.
    Raises ParseError for malformed files, ValidationError for duplicate
    video ids, unknown age groups, bad labels or missing track files.
    """
    path = Path(path)
    expected = ["video_id", "subject_id", "age_group", "label", "fps", "width", "height", "track_path"]
    entries: list[ManifestEntry] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise ParseError(f"{path}: bad manifest header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                entry = ManifestEntry(
                    video_id=row[0],
                    subject_id=row[1],
                    age_group=row[2],
                    label=int(row[3]),
                    fps=float(row[4]),
                    frame_width=int(row[5]),
                    frame_height=int(row[6]),
                    track_path=Path(row[7]),
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            entries.append(entry)

    manifest = DatasetManifest(entries=tuple(entries), root=path.parent)
    seen: set[str] = set()
    for e in manifest.entries:
        if e.video_id in seen:
            raise ValidationError(f"{path}: duplicate video_id {e.video_id!r}")
        seen.add(e.video_id)
        if e.age_group not in AGE_GROUPS:
            raise ValidationError(f"{path}: video {e.video_id}: age_group {e.age_group!r} not in {AGE_GROUPS}")
        if e.label not in (0, 1):
            raise ValidationError(f"{path}: video {e.video_id}: label must be 0 or 1")
        if e.fps <= 0:
            raise ValidationError(f"{path}: video {e.video_id}: fps must be > 0")
        if not manifest.resolve_track_path(e).exists():
            raise ValidationError(f"{path}: video {e.video_id}: track file not found: {e.track_path}")
    return manifest


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "subject_id", "age_group", "label", "fps", "width", "height", "track_path"])
        for e in manifest.entries:
            w.writerow([e.video_id, e.subject_id, e.age_group, e.label, _fmt(e.fps),
                        e.frame_width, e.frame_height, str(e.track_path)])


def read_tracks(path: str | Path, expected_frames: int | None = None) -> dict[Keypoint, KeypointTrack]:
    """Read a per-video track CSV into 17 equal-length tracks.

    Frames absent from the file are filled as occluded (visible=0, x=y=0).
    When ``expected_frames`` is None the track length is inferred from the
    largest frame index present.
    """
    path = Path(path)
    rows: dict[Keypoint, dict[int, tuple[float, float, bool]]] = {k: {} for k in ALL_KEYPOINTS}
    max_frame = -1
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["keypoint", "frame", "x", "y", "visible"]:
            raise ParseError(f"{path}: bad track header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                kp = parse_keypoint(row[0])
            except KeyError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc.args[0]}") from exc
            try:
                frame = int(row[1])
                x, y = float(row[2]), float(row[3])
                vis = row[4].strip()
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if vis not in ("0", "1"):
                raise ParseError(f"{path}:{lineno}: visible must be 0 or 1, got {row[4]!r}")
            if frame < 0:
                raise ValidationError(f"{path}:{lineno}: negative frame index {frame}")
            if expected_frames is not None and frame >= expected_frames:
                raise ValidationError(f"{path}:{lineno}: frame {frame} out of range (expected {expected_frames})")
            if frame in rows[kp]:
                raise ValidationError(f"{path}:{lineno}: duplicate row for ({kp.value}, frame {frame})")
            visible = vis == "1"
            if visible and not (math.isfinite(x) and math.isfinite(y)):
                raise ValidationError(f"{path}:{lineno}: non-finite coordinate on visible sample")
            rows[kp][frame] = (x, y, visible)
            max_frame = max(max_frame, frame)

    n = expected_frames if expected_frames is not None else max_frame + 1
    if n <= 0:
        raise ValidationError(f"{path}: track file contains no frames")
    missing = [k.value for k in ALL_KEYPOINTS if not rows[k]]
    if missing:
        raise ValidationError(f"{path}: missing keypoints {missing}")

    tracks: dict[Keypoint, KeypointTrack] = {}
    for kp in ALL_KEYPOINTS:
        xy = np.zeros((n, 2), dtype=np.float64)
        vis = np.zeros(n, dtype=bool)
        for frame, (x, y, v) in rows[kp].items():
            xy[frame] = (x, y)
            vis[frame] = v
        tracks[kp] = KeypointTrack(kp, xy, vis)
    return tracks


def write_tracks(tracks: dict[Keypoint, KeypointTrack], path: str | Path) -> None:
    """Write tracks to CSV. read_tracks(write_tracks(t)) == t, bit-exact."""
    if not tracks:
        raise ValidationError("cannot write an empty track set")
    lengths = {len(t) for t in tracks.values()}
    if len(lengths) != 1:
        raise ValidationError(f"tracks have unequal lengths {sorted(lengths)}")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["keypoint", "frame", "x", "y", "visible"])
        for kp in ALL_KEYPOINTS:
            if kp not in tracks:
                continue
            t = tracks[kp]
            for frame in range(len(t)):
                w.writerow([kp.value, frame, _fmt(t.xy[frame, 0]), _fmt(t.xy[frame, 1]),
                            1 if t.visible[frame] else 0])


def load_record(manifest: DatasetManifest, entry: ManifestEntry) -> VideoRecord:
    tracks = read_tracks(manifest.resolve_track_path(entry))
    return VideoRecord(
        video_id=entry.video_id,
        subject_id=entry.subject_id,
        age_group=entry.age_group,
        label=entry.label,
        fps=entry.fps,
        frame_width=entry.frame_width,
        frame_height=entry.frame_height,
        tracks=tracks,
    )


def load_records(manifest: DatasetManifest) -> list[VideoRecord]:
    return [load_record(manifest, e) for e in manifest.entries]


def write_report(report: EvalReport, path: str | Path) -> None:
    """Write a summary report CSV, rows sorted by (model, feature_set, age_group, metric)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "feature_set", "age_group", "metric", "mean", "std", "n_seeds"])
        for r in report.sorted_rows():
            w.writerow([r.model, r.feature_set, r.age_group, r.metric, _fmt(r.mean), _fmt(r.std), r.n_seeds])


def read_report(path: str | Path) -> EvalReport:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["model", "feature_set", "age_group", "metric", "mean", "std", "n_seeds"]:
            raise ParseError(f"{path}: bad report header {header}")
        for row in reader:
            if not row:
                continue
            rows.append(ReportRow(row[0], row[1], row[2], row[3], float(row[4]), float(row[5]), int(row[6])))
    return EvalReport(rows=tuple(rows))

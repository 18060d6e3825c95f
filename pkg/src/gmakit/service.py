"""Annotation HTTP service backing the labelling/review UI.

The service is a thin stateful wrapper around the pipeline: it serves the
manifest, frame images (pre-extracted PNGs when available, schematic
skeleton drawings otherwise), collects keypoint annotations, runs the
configured tracker on finish-labelling, surfaces outlier flags, and
retracks after corrections.

Original track files are never mutated: tracked/corrected tracks live under
the service data directory, and annotations/corrections are append-only
CSV logs (corrections use the same video_id,round,keypoint,frame,x,y format
the CLI accepts as a scripted corrections source).
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from pydantic import BaseModel

from .keypoints import ALL_KEYPOINTS, EXTREME_KEYPOINTS, Keypoint
from .preprocess import Correction, OutlierFlag, detect_outliers, retrack_from_correction
from .records import KeypointTrack, load_manifest, load_record, write_tracks
from .trackers import ConstantTracker, TrackerPort

# schematic skeleton bones for rendered frames
_BONES = [
    (Keypoint.HEAD_TOP, Keypoint.NOSE),
    (Keypoint.NOSE, Keypoint.HEAD_BOTTOM),
    (Keypoint.LEFT_EAR, Keypoint.NOSE),
    (Keypoint.RIGHT_EAR, Keypoint.NOSE),
    (Keypoint.HEAD_BOTTOM, Keypoint.LEFT_SHOULDER),
    (Keypoint.HEAD_BOTTOM, Keypoint.RIGHT_SHOULDER),
    (Keypoint.LEFT_SHOULDER, Keypoint.LEFT_ELBOW),
    (Keypoint.LEFT_ELBOW, Keypoint.LEFT_WRIST),
    (Keypoint.RIGHT_SHOULDER, Keypoint.RIGHT_ELBOW),
    (Keypoint.RIGHT_ELBOW, Keypoint.RIGHT_WRIST),
    (Keypoint.LEFT_SHOULDER, Keypoint.LEFT_HIP),
    (Keypoint.RIGHT_SHOULDER, Keypoint.RIGHT_HIP),
    (Keypoint.LEFT_HIP, Keypoint.RIGHT_HIP),
    (Keypoint.LEFT_HIP, Keypoint.LEFT_KNEE),
    (Keypoint.LEFT_KNEE, Keypoint.LEFT_ANKLE),
    (Keypoint.RIGHT_HIP, Keypoint.RIGHT_KNEE),
    (Keypoint.RIGHT_KNEE, Keypoint.RIGHT_ANKLE),
]


class AnnotationIn(BaseModel):
    keypoint: str
    frame: int
    x: float
    y: float


class CorrectionIn(BaseModel):
    x: float
    y: float


@dataclass
class AnnotationSession:
    """Server-side labelling state for one video."""

    video_id: str
    mode: str = "all"  # "extreme" or "all"
    annotations: list[dict] = field(default_factory=list)
    tracks: dict | None = None            # tracked (and corrected) tracks
    flags: list[OutlierFlag] = field(default_factory=list)
    corrected: set[int] = field(default_factory=set)   # flag indices answered
    pending: list[Correction] = field(default_factory=list)
    round: int = 0

    def prompt_order(self) -> list[str]:
        order = [k for k in ALL_KEYPOINTS if self.mode == "all" or k in EXTREME_KEYPOINTS]
        return [k.value for k in order]

    def next_keypoint(self) -> str | None:
        labelled = {a["keypoint"] for a in self.annotations}
        for name in self.prompt_order():
            if name not in labelled:
                return name
        return None


def _error(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(
    manifest_path: str | Path,
    frames_dir: Path | None = None,
    data_dir: Path | None = None,
    tracker: TrackerPort | None = None,
    outlier_k: float = 15.0,
) -> FastAPI:
    manifest = load_manifest(manifest_path)
    tracker = tracker or ConstantTracker()
    data_dir = Path(data_dir) if data_dir else Path(manifest_path).parent / "annotations"
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "tracks").mkdir(exist_ok=True)

    app = FastAPI(title="gmakit annotation service")
    sessions: dict[str, AnnotationSession] = {}
    records: dict[str, object] = {}
    locks: dict[str, threading.Lock] = {}
    global_lock = threading.Lock()

    def get_entry(video_id: str):
        try:
            return manifest.entry(video_id)
        except KeyError:
            _error(404, "unknown_video", f"no video {video_id!r} in manifest")

    def get_record(video_id: str):
        if video_id not in records:
            records[video_id] = load_record(manifest, get_entry(video_id))
        return records[video_id]

    def get_session(video_id: str, mode: str | None = None) -> AnnotationSession:
        get_entry(video_id)
        with global_lock:
            if video_id not in sessions:
                sessions[video_id] = AnnotationSession(video_id=video_id, mode=mode or "all")
                locks[video_id] = threading.Lock()
            elif mode is not None and not sessions[video_id].annotations:
                sessions[video_id].mode = mode
            return sessions[video_id]

    def lock_for(video_id: str) -> threading.Lock:
        with global_lock:
            return locks.setdefault(video_id, threading.Lock())

    def append_annotation_log(video_id: str, ann: dict) -> None:
        path = data_dir / f"{video_id}.annotations.csv"
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["keypoint", "frame", "x", "y"])
            w.writerow([ann["keypoint"], ann["frame"], repr(ann["x"]), repr(ann["y"])])

    def append_correction_log(video_id: str, round_idx: int, c: Correction) -> None:
        path = data_dir / "corrections.csv"
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["video_id", "round", "keypoint", "frame", "x", "y"])
            w.writerow([video_id, round_idx, c.keypoint.value, c.frame, repr(c.x), repr(c.y)])

    def persist_tracks(session: AnnotationSession) -> None:
        write_tracks(session.tracks, data_dir / "tracks" / f"{session.video_id}.csv")

    def run_detection(session: AnnotationSession) -> None:
        session.flags = detect_outliers(session.tracks, k=outlier_k)
        session.corrected = set()
        session.pending = []

    # ------------------------------------------------------------ routes

    @app.get("/videos")
    def list_videos():
        return [
            {
                "video_id": e.video_id,
                "subject_id": e.subject_id,
                "age_group": e.age_group,
                "label": e.label,
                "fps": e.fps,
                "width": e.frame_width,
                "height": e.frame_height,
                "n_frames": get_record(e.video_id).n_frames,
            }
            for e in manifest
        ]

    @app.get("/videos/{video_id}/frames/{frame}")
    def get_frame(video_id: str, frame: int):
        record = get_record(video_id)
        if not 0 <= frame < record.n_frames:
            _error(404, "frame_out_of_range", f"frame {frame} not in [0, {record.n_frames})")
        if frames_dir is not None:
            path = frames_dir / video_id / f"{frame}.png"
            if path.exists():
                return Response(content=path.read_bytes(), media_type="image/png")
        session = sessions.get(video_id)
        tracks = session.tracks if session and session.tracks else record.tracks
        png = render_frame(tracks, frame, record.frame_width, record.frame_height)
        return Response(content=png, media_type="image/png")

    @app.get("/videos/{video_id}/annotations")
    def get_annotations(video_id: str, mode: str | None = None):
        if mode is not None and mode not in ("extreme", "all"):
            _error(422, "bad_mode", "mode must be 'extreme' or 'all'")
        session = get_session(video_id, mode)
        return {
            "video_id": video_id,
            "mode": session.mode,
            "prompt_order": session.prompt_order(),
            "next_keypoint": session.next_keypoint(),
            "annotations": session.annotations,
        }

    @app.post("/videos/{video_id}/annotations")
    def post_annotation(video_id: str, body: AnnotationIn):
        record = get_record(video_id)
        session = get_session(video_id)
        try:
            kp = Keypoint(body.keypoint)
        except ValueError:
            _error(422, "unknown_keypoint", f"unknown keypoint {body.keypoint!r}")
        if not 0 <= body.frame < record.n_frames:
            _error(422, "frame_out_of_range", f"frame {body.frame} not in [0, {record.n_frames})")
        if not (0 <= body.x <= record.frame_width and 0 <= body.y <= record.frame_height):
            _error(422, "out_of_bounds", "coordinates outside frame")
        ann = {"keypoint": kp.value, "frame": body.frame, "x": body.x, "y": body.y}
        with lock_for(video_id):
            session.annotations = [a for a in session.annotations if a["keypoint"] != kp.value]
            session.annotations.append(ann)
            append_annotation_log(video_id, ann)
        return {"ok": True, "next_keypoint": session.next_keypoint()}

    @app.post("/videos/{video_id}/finish-labelling")
    def finish_labelling(video_id: str):
        record = get_record(video_id)
        session = get_session(video_id)
        if not session.annotations:
            _error(422, "no_annotations", "label at least one keypoint first")
        n = record.n_frames
        with lock_for(video_id):
            tracks = {}
            for kp in ALL_KEYPOINTS:
                ann = next((a for a in session.annotations if a["keypoint"] == kp.value), None)
                if ann is None:
                    tracks[kp] = KeypointTrack(kp, np.zeros((n, 2)), np.zeros(n, dtype=bool))
                    continue
                seeded = tracker.track(ann["frame"], n, {kp: (ann["x"], ann["y"])})
                xy = np.zeros((n, 2))
                vis = np.zeros(n, dtype=bool)
                xy[ann["frame"]:] = seeded[kp].xy
                vis[ann["frame"]:] = seeded[kp].visible
                tracks[kp] = KeypointTrack(kp, xy, vis)
            session.tracks = tracks
            persist_tracks(session)
            run_detection(session)
        return {"ok": True, "n_flags": len(session.flags), "round": session.round}

    @app.get("/videos/{video_id}/outliers")
    def get_outliers(video_id: str):
        session = get_session(video_id)

        def flag_json(i: int, f: OutlierFlag) -> dict:
            track = session.tracks[f.keypoint]
            return {
                "index": i,
                "keypoint": f.keypoint.value,
                "frame": f.frame,
                "displacement": f.displacement,
                "threshold": f.threshold,
                "corrected": i in session.corrected,
                # before/after positions of the offending jump, for review UIs
                "from": [float(track.xy[f.frame - 1, 0]), float(track.xy[f.frame - 1, 1])],
                "to": [float(track.xy[f.frame, 0]), float(track.xy[f.frame, 1])],
            }

        return {
            "video_id": video_id,
            "round": session.round,
            "flags": [flag_json(i, f) for i, f in enumerate(session.flags)],
        }

    @app.post("/videos/{video_id}/outliers/{index}/correction")
    def post_correction(video_id: str, index: int, body: CorrectionIn):
        record = get_record(video_id)
        session = get_session(video_id)
        if session.tracks is None:
            _error(422, "not_tracked", "finish labelling before correcting outliers")
        if not 0 <= index < len(session.flags):
            _error(404, "unknown_flag", f"no outlier flag {index}")
        if index in session.corrected:
            _error(422, "already_corrected", f"flag {index} already answered this round")
        if not (0 <= body.x <= record.frame_width and 0 <= body.y <= record.frame_height):
            _error(422, "out_of_bounds", "coordinates outside frame")
        flag = session.flags[index]
        correction = Correction(flag.keypoint, flag.frame, body.x, body.y)
        with lock_for(video_id):
            session.pending.append(correction)
            session.corrected.add(index)
            append_correction_log(video_id, session.round, correction)
        return {"ok": True, "pending": len(session.pending)}

    @app.post("/videos/{video_id}/retrack")
    def retrack(video_id: str):
        session = get_session(video_id)
        if session.tracks is None:
            _error(422, "not_tracked", "finish labelling before retracking")
        if not session.pending:
            _error(422, "no_corrections", "post at least one correction first")
        with lock_for(video_id):
            for correction in session.pending:
                session.tracks = retrack_from_correction(session.tracks, correction, tracker)
            session.round += 1
            persist_tracks(session)
            run_detection(session)
        return {"ok": True, "round": session.round, "n_flags": len(session.flags)}

    return app


def render_frame(tracks, frame: int, width: int, height: int) -> bytes:
    """Draw a schematic skeleton frame as PNG bytes."""
    from PIL import Image, ImageDraw

    img = Image.new("RGB", (int(width), int(height)), (245, 245, 245))
    draw = ImageDraw.Draw(img)
    pos = {}
    for kp, t in tracks.items():
        if frame < len(t) and t.visible[frame]:
            pos[kp] = (float(t.xy[frame, 0]), float(t.xy[frame, 1]))
    for a, b in _BONES:
        if a in pos and b in pos:
            draw.line([pos[a], pos[b]], fill=(90, 90, 200), width=3)
    for kp, (x, y) in pos.items():
        color = (200, 60, 60) if kp in EXTREME_KEYPOINTS else (60, 140, 60)
        draw.ellipse([x - 4, y - 4, x + 4, y + 4], fill=color)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()

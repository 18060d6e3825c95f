import numpy as np
import pytest

from gmakit.keypoints import ALL_KEYPOINTS, ANGLE_TRIPLES, EXTREME_KEYPOINTS, Keypoint, parse_keypoint
from gmakit.records import (
    DatasetManifest,
    EvalReport,
    KeypointTrack,
    ManifestEntry,
    ParseError,
    ReportRow,
    ValidationError,
    load_manifest,
    read_report,
    read_tracks,
    write_manifest,
    write_report,
    write_tracks,
)

from conftest import make_record, make_track


# ---------------------------------------------------------------- taxonomy

def test_keypoint_counts():
    assert len(ALL_KEYPOINTS) == 17
    assert len(EXTREME_KEYPOINTS) == 9
    assert sum(1 for k in ALL_KEYPOINTS if k.is_extreme) == 9
    assert sum(1 for k in ALL_KEYPOINTS if not k.is_extreme) == 8


def test_extreme_membership():
    extreme_names = {k.value for k in EXTREME_KEYPOINTS}
    assert extreme_names == {
        "head top", "left elbow", "right elbow", "left wrist", "right wrist",
        "left knee", "right knee", "left ankle", "right ankle",
    }


def test_angle_triples():
    assert len(ANGLE_TRIPLES) == 10
    for p1, p2, p3 in ANGLE_TRIPLES:
        assert p1 != p2 and p2 != p3 and p1 != p3


def test_parse_keypoint():
    assert parse_keypoint("left wrist") is Keypoint.LEFT_WRIST
    with pytest.raises(KeyError):
        parse_keypoint("left wing")


# ---------------------------------------------------------------- tracks

def _write_record_tracks(record, path):
    write_tracks(record.tracks, path)
    return path


def test_track_roundtrip_bit_exact(tmp_path, record):
    path = tmp_path / "t.csv"
    write_tracks(record.tracks, path)
    back = read_tracks(path)
    assert set(back) == set(record.tracks)
    for kp in ALL_KEYPOINTS:
        assert back[kp] == record.tracks[kp]


def test_track_roundtrip_subpixel_and_occlusion(tmp_path):
    rng = np.random.default_rng(3)
    tracks = {}
    for kp in ALL_KEYPOINTS:
        xy = rng.uniform(0, 640, size=(7, 2))
        vis = rng.random(7) > 0.3
        xy[~vis] = 0.0
        tracks[kp] = KeypointTrack(kp, xy, vis)
    path = tmp_path / "t.csv"
    write_tracks(tracks, path)
    back = read_tracks(path)
    for kp in ALL_KEYPOINTS:
        assert np.array_equal(back[kp].xy, tracks[kp].xy)
        assert np.array_equal(back[kp].visible, tracks[kp].visible)


def test_read_tracks_fills_missing_rows_as_occluded(tmp_path, record):
    path = tmp_path / "t.csv"
    write_tracks(record.tracks, path)
    lines = path.read_text().splitlines()
    # drop nose frame 5
    lines = [ln for ln in lines if not ln.startswith("nose,5,")]
    path.write_text("\n".join(lines) + "\n")
    back = read_tracks(path)
    assert not back[Keypoint.NOSE].visible[5]
    assert back[Keypoint.NOSE].xy[5].tolist() == [0.0, 0.0]
    assert back[Keypoint.NOSE].visible[4]


def test_read_tracks_missing_keypoint(tmp_path, record):
    path = tmp_path / "t.csv"
    write_tracks(record.tracks, path)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("left hip,")]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError, match="left hip"):
        read_tracks(path)


def test_read_tracks_duplicate_frame(tmp_path, record):
    path = tmp_path / "t.csv"
    write_tracks(record.tracks, path)
    with open(path, "a") as fh:
        fh.write("nose,0,1.0,2.0,1\n")
    with pytest.raises(ValidationError, match="duplicate"):
        read_tracks(path)


def test_read_tracks_bad_header(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("kp,frame,x,y,visible\n")
    with pytest.raises(ParseError):
        read_tracks(path)


def test_read_tracks_nonfinite_visible(tmp_path, record):
    path = tmp_path / "t.csv"
    write_tracks(record.tracks, path)
    with open(path, "a") as fh:
        fh.write("nose,11,nan,2.0,1\n")
    with pytest.raises(ValidationError, match="non-finite"):
        read_tracks(path)


def test_write_tracks_empty_set():
    with pytest.raises(ValidationError):
        write_tracks({}, "/tmp/never.csv")


def test_write_tracks_unwritable(record, tmp_path):
    with pytest.raises(OSError):
        write_tracks(record.tracks, tmp_path / "no" / "such" / "dir" / "t.csv")


def test_track_validation():
    with pytest.raises(ValidationError):
        KeypointTrack(Keypoint.NOSE, np.array([[np.inf, 0.0]]), np.array([True]))
    # non-finite is fine while occluded
    KeypointTrack(Keypoint.NOSE, np.array([[np.inf, 0.0]]), np.array([False]))


# ---------------------------------------------------------------- manifest

def _write_manifest_csv(tmp_path, rows):
    path = tmp_path / "manifest.csv"
    header = "video_id,subject_id,age_group,label,fps,width,height,track_path"
    path.write_text("\n".join([header] + rows) + "\n")
    return path


def test_manifest_roundtrip(tmp_path, record):
    track_path = tmp_path / "v0.csv"
    write_tracks(record.tracks, track_path)
    other = make_record(video_id="V001", subject_id="S001", seed=1)
    write_tracks(other.tracks, tmp_path / "v1.csv")
    path = _write_manifest_csv(tmp_path, [
        "V000,S000,early,0,30.0,640,480,v0.csv",
        "V001,S001,late,1,60.0,1280,720,v1.csv",
    ])
    manifest = load_manifest(path)
    assert len(manifest) == 2
    assert [e.video_id for e in manifest] == ["V000", "V001"]  # order preserved
    again = load_manifest(path)
    assert again.entries == manifest.entries  # idempotent


def test_manifest_duplicate_id(tmp_path, record):
    write_tracks(record.tracks, tmp_path / "v0.csv")
    path = _write_manifest_csv(tmp_path, [
        "V000,S000,early,0,30.0,640,480,v0.csv",
        "V000,S001,early,1,30.0,640,480,v0.csv",
    ])
    with pytest.raises(ValidationError, match="duplicate"):
        load_manifest(path)


def test_manifest_bad_age_group(tmp_path, record):
    write_tracks(record.tracks, tmp_path / "v0.csv")
    path = _write_manifest_csv(tmp_path, ["V000,S000,mid,0,30.0,640,480,v0.csv"])
    with pytest.raises(ValidationError, match="age_group"):
        load_manifest(path)


def test_manifest_missing_track_file(tmp_path):
    path = _write_manifest_csv(tmp_path, ["V000,S000,early,0,30.0,640,480,gone.csv"])
    with pytest.raises(ValidationError, match="not found"):
        load_manifest(path)


def test_manifest_parse_error(tmp_path):
    path = tmp_path / "manifest.csv"
    path.write_text("video_id,subject\nV0,S0\n")
    with pytest.raises(ParseError):
        load_manifest(path)


def test_manifest_write_read(tmp_path, record):
    write_tracks(record.tracks, tmp_path / "v0.csv")
    manifest = DatasetManifest(
        entries=(ManifestEntry("V000", "S000", "early", 0, 29.97, 640, 480, __import__("pathlib").Path("v0.csv")),),
        root=tmp_path,
    )
    write_manifest(manifest, tmp_path / "m.csv")
    back = load_manifest(tmp_path / "m.csv")
    assert back.entries[0].fps == 29.97


# ---------------------------------------------------------------- records

def test_record_requires_all_keypoints(record):
    tracks = dict(record.tracks)
    del tracks[Keypoint.LEFT_HIP]
    with pytest.raises(ValidationError, match="missing keypoints"):
        record.with_tracks(tracks)


def test_record_requires_equal_lengths(record):
    tracks = dict(record.tracks)
    tracks[Keypoint.NOSE] = make_track(Keypoint.NOSE, np.zeros((3, 2)))
    with pytest.raises(ValidationError, match="unequal"):
        record.with_tracks(tracks)


def test_record_label_and_fps_validation(record):
    import dataclasses
    with pytest.raises(ValidationError):
        dataclasses.replace(record, label=2)
    with pytest.raises(ValidationError):
        dataclasses.replace(record, fps=0.0)
    with pytest.raises(ValidationError):
        dataclasses.replace(record, age_group="mid")


def test_record_extreme_partition(record):
    extreme = [kp for kp in record.tracks if kp.is_extreme]
    assert len(extreme) == 9
    assert len(record.tracks) - len(extreme) == 8


# ---------------------------------------------------------------- report

def test_report_sorted_deterministic(tmp_path):
    rows = (
        ReportRow("rf", "coords", "late", "auroc", 0.7, 0.1, 5),
        ReportRow("cnn", "angles", "early", "auroc", 0.8, 0.05, 5),
        ReportRow("cnn", "angles", "early", "accuracy", 0.75, 0.02, 5),
    )
    path = tmp_path / "report.csv"
    write_report(EvalReport(rows=rows), path)
    lines = path.read_text().splitlines()
    assert lines[0] == "model,feature_set,age_group,metric,mean,std,n_seeds"
    assert lines[1].startswith("cnn,angles,early,accuracy")
    assert lines[2].startswith("cnn,angles,early,auroc")
    assert lines[3].startswith("rf,coords,late,auroc")

    back = read_report(path)
    assert len(back.rows) == 3


def test_report_single_row(tmp_path):
    path = tmp_path / "report.csv"
    write_report(EvalReport(rows=(ReportRow("rf", "angles", "early", "auroc", 0.9, 0.0, 1),)), path)
    assert len(path.read_text().splitlines()) == 2


def test_report_negative_std_rejected():
    with pytest.raises(ValidationError):
        ReportRow("rf", "angles", "early", "auroc", 0.9, -0.1, 1)
    with pytest.raises(ValidationError):
        ReportRow("rf", "angles", "early", "auroc", 0.9, 0.1, 0)

import numpy as np
import pytest

from gmakit.features import angle_channels
from gmakit.keypoints import ALL_KEYPOINTS, Keypoint
from gmakit.preprocess import detect_outliers, fragment_dataset, prepare_records
from gmakit.records import ValidationError, load_manifest, load_records
from gmakit.synth import REST_POSE, JumpSpec, MotionParams, SynthSpec, generate, inject_jump, save_dataset


def test_class_balance_counts():
    _, records = generate(SynthSpec(n_subjects=4, class_balance=0.5, seed=0,
                                    duration_range=(2.0, 3.0)))
    labels = [r.label for r in records]
    assert labels.count(0) == 2 and labels.count(1) == 2


def test_determinism_byte_level(tmp_path):
    spec = SynthSpec(n_subjects=3, seed=11, duration_range=(2.0, 3.0))
    for sub in ("a", "b"):
        manifest, records = generate(spec)
        save_dataset(manifest, records, tmp_path / sub, spec)
    for name in ["manifest.csv", "tracks/V000.csv", "tracks/V001.csv", "tracks/V002.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_zero_occlusion_all_visible():
    _, records = generate(SynthSpec(n_subjects=2, seed=3, occlusion_rate=0.0,
                                    duration_range=(2.0, 3.0)))
    for r in records:
        for t in r.tracks.values():
            assert t.visible.all()


def test_generated_records_pass_validation_and_load(tmp_path):
    spec = SynthSpec(n_subjects=4, seed=7, occlusion_rate=0.05, duration_range=(2.0, 3.0))
    manifest, records = generate(spec)
    save_dataset(manifest, records, tmp_path, spec)
    back = load_records(load_manifest(tmp_path / "manifest.csv"))
    assert len(back) == 4
    for orig, loaded in zip(records, back):
        assert orig.video_id == loaded.video_id
        for kp in ALL_KEYPOINTS:
            assert loaded.tracks[kp] == orig.tracks[kp]


def test_fps_and_duration_ranges():
    spec = SynthSpec(n_subjects=10, seed=9, fps_choices=(30.0, 60.0, 120.0),
                     duration_range=(3.0, 5.0))
    _, records = generate(spec)
    for r in records:
        assert r.fps in (30.0, 60.0, 120.0)
        assert 3.0 * r.fps <= r.n_frames <= 5.0 * r.fps + 1


def test_rest_pose_anatomical_adjacency():
    for side in ("LEFT", "RIGHT"):
        s = np.array(REST_POSE[Keypoint[f"{side}_SHOULDER"]])
        e = np.array(REST_POSE[Keypoint[f"{side}_ELBOW"]])
        w = np.array(REST_POSE[Keypoint[f"{side}_WRIST"]])
        detour = np.linalg.norm(s - e) + np.linalg.norm(e - w)
        assert detour <= 1.15 * np.linalg.norm(s - w)  # elbow sits between
        h = np.array(REST_POSE[Keypoint[f"{side}_HIP"]])
        k = np.array(REST_POSE[Keypoint[f"{side}_KNEE"]])
        a = np.array(REST_POSE[Keypoint[f"{side}_ANKLE"]])
        assert np.linalg.norm(h - k) + np.linalg.norm(k - a) <= 1.15 * np.linalg.norm(h - a)


def test_classes_separable_by_angle_variance():
    # measured occlusion-free so zero-fill does not mask the motion signal
    spec = SynthSpec(n_subjects=32, seed=5, occlusion_rate=0.0, duration_range=(5.0, 8.0))
    _, records = generate(spec)
    frags, _ = fragment_dataset(prepare_records(records))
    elbow_knee_rows = [4, 5, 8, 9]
    per_class = {0: [], 1: []}
    for f in frags:
        channels = angle_channels(f).values[elbow_knee_rows]
        per_class[f.label].append(channels.var(axis=1).mean())
    ratio = np.mean(per_class[0]) / np.mean(per_class[1])
    assert ratio >= 2.0


def test_inject_jump_identity():
    _, records = generate(SynthSpec(n_subjects=1, seed=2, duration_range=(2.0, 3.0)))
    out = inject_jump(records[0], Keypoint.LEFT_WRIST, 10, (0.0, 0.0))
    assert out.tracks[Keypoint.LEFT_WRIST] == records[0].tracks[Keypoint.LEFT_WRIST]


def test_inject_jump_out_of_range():
    _, records = generate(SynthSpec(n_subjects=1, seed=2, duration_range=(2.0, 3.0)))
    n = records[0].n_frames
    with pytest.raises(ValidationError):
        inject_jump(records[0], Keypoint.LEFT_WRIST, n, (5.0, 5.0))


def test_injected_20_sigma_jump_is_flagged_exactly():
    spec = SynthSpec(n_subjects=1, seed=13, occlusion_rate=0.0,
                     fps_choices=(30.0,), duration_range=(22.0, 24.0))
    _, records = generate(spec)
    record = records[0]
    kp, frame = Keypoint.RIGHT_KNEE, 300
    clean = record.tracks[kp]
    sigma = np.linalg.norm(np.diff(clean.xy, axis=0), axis=1).std()  # clean-record sigma
    step = clean.xy[frame] - clean.xy[frame - 1]
    offset = (clean.xy[frame - 1] + [20.0 * sigma, 0.0]) - clean.xy[frame]
    jumped = inject_jump(record, kp, frame, tuple(offset))
    flags = detect_outliers(jumped.tracks)
    assert [(f.keypoint, f.frame) for f in flags] == [(kp, frame)]


def test_jumps_in_spec_applied():
    spec = SynthSpec(n_subjects=2, seed=4, occlusion_rate=0.0, duration_range=(2.0, 3.0),
                     jumps=(JumpSpec(1, Keypoint.NOSE, 5, 100.0, 0.0),))
    _, records = generate(spec)
    clean_spec = SynthSpec(n_subjects=2, seed=4, occlusion_rate=0.0, duration_range=(2.0, 3.0))
    _, clean = generate(clean_spec)
    assert records[0].tracks[Keypoint.NOSE] == clean[0].tracks[Keypoint.NOSE]
    moved = records[1].tracks[Keypoint.NOSE].xy - clean[1].tracks[Keypoint.NOSE].xy
    assert (moved[:5] == 0).all()
    assert np.allclose(moved[5:], [100.0, 0.0])


def test_spec_validation():
    with pytest.raises(ValidationError):
        SynthSpec(n_subjects=0)
    with pytest.raises(ValidationError):
        SynthSpec(occlusion_rate=1.0)
    with pytest.raises(ValidationError):
        SynthSpec(duration_range=(0.0, 2.0))
    with pytest.raises(ValidationError):
        MotionParams(amplitude_px=-1.0, amplitude_jitter=0.0, frequency_hz=1.0, frequency_jitter=0.0)


def test_age_group_assignment():
    _, records = generate(SynthSpec(n_subjects=4, seed=1, duration_range=(2.0, 3.0)))
    assert {r.age_group for r in records} == {"early", "late"}
    _, early_only = generate(SynthSpec(n_subjects=4, seed=1, age_group="early",
                                       duration_range=(2.0, 3.0)))
    assert {r.age_group for r in early_only} == {"early"}

import json

import pytest

from gmakit.cli import main
from gmakit.records import load_manifest, read_report


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    assert run_cli("synth", "--subjects", 8, "--seed", 7, "--out", out,
                   "--duration-min", 3, "--duration-max", 5) == 0
    return out


def test_synth_then_evaluate_smoke(dataset, tmp_path):
    report_path = tmp_path / "report.csv"
    raw_path = tmp_path / "raw.csv"
    code = run_cli("evaluate", "--manifest", dataset / "manifest.csv",
                   "--model", "rf", "--features", "angles",
                   "--seeds", 2, "--seed", 1, "--trees", 20,
                   "--out", report_path, "--raw", raw_path)
    assert code == 0
    assert report_path.exists() and raw_path.exists()
    report = read_report(report_path)
    metrics = {r.metric for r in report.rows}
    assert metrics == {"auroc", "auprc", "accuracy"}


def test_evaluate_deterministic_raw_bytes(dataset, tmp_path):
    raws = []
    for name in ("r1.csv", "r2.csv"):
        raw = tmp_path / name
        assert run_cli("evaluate", "--manifest", dataset / "manifest.csv",
                       "--model", "rf", "--features", "angles",
                       "--seeds", 2, "--seed", 5, "--trees", 15,
                       "--out", tmp_path / ("report_" + name), "--raw", raw) == 0
        raws.append(raw.read_bytes())
    assert raws[0] == raws[1]


def test_synth_deterministic(tmp_path):
    for sub in ("a", "b"):
        assert run_cli("synth", "--subjects", 3, "--seed", 3, "--out", tmp_path / sub,
                       "--duration-min", 2, "--duration-max", 3) == 0
    assert (tmp_path / "a/manifest.csv").read_bytes() == (tmp_path / "b/manifest.csv").read_bytes()
    assert (tmp_path / "a/tracks/V001.csv").read_bytes() == (tmp_path / "b/tracks/V001.csv").read_bytes()


def test_resample_command(dataset, tmp_path):
    out = tmp_path / "resampled"
    assert run_cli("resample", "--manifest", dataset / "manifest.csv",
                   "--fps", 30, "--out", out) == 0
    manifest = load_manifest(out / "manifest.csv")
    assert all(e.fps == 30.0 for e in manifest)


def test_crop_command_writes_crops(dataset, tmp_path):
    out = tmp_path / "cropped"
    assert run_cli("crop", "--manifest", dataset / "manifest.csv", "--out", out) == 0
    crops = json.loads((out / "crops.json").read_text())
    assert len(crops) == 8
    for box in crops.values():
        x0, y0, x1, y1 = box
        assert x0 < x1 and y0 < y1


def test_outliers_clean_data_zero_flags(dataset, tmp_path):
    report = tmp_path / "rounds.json"
    assert run_cli("outliers", "--manifest", dataset / "manifest.csv",
                   "--k", 15, "--max-rounds", 3, "--report", report) == 0
    rounds = json.loads(report.read_text())
    assert len(rounds) == 8
    assert all(v == [] for v in rounds.values())


def test_features_command(dataset, tmp_path):
    out = tmp_path / "features"
    assert run_cli("features", "--manifest", dataset / "manifest.csv",
                   "--features", "both", "--out", out) == 0
    index = (out / "fragments.csv").read_text().splitlines()
    assert index[0].startswith("fragment_id,")
    assert len(index) > 1
    first = (out / "fragment_0000.csv").read_text().splitlines()
    assert len(first) == 45  # header + 44 channels


def test_train_command_rf(dataset, tmp_path):
    ckpt = tmp_path / "model.ckpt"
    assert run_cli("train", "--manifest", dataset / "manifest.csv",
                   "--model", "rf", "--features", "angles", "--trees", 10,
                   "--seed", 2, "--out", ckpt) == 0
    from gmakit.learn import load_model
    model = load_model(ckpt)
    assert len(model.trees) == 10


def test_report_command_matches_evaluate(dataset, tmp_path):
    report1 = tmp_path / "report1.csv"
    raw = tmp_path / "raw.csv"
    run_cli("evaluate", "--manifest", dataset / "manifest.csv",
            "--model", "rf", "--features", "coords", "--seeds", 2, "--seed", 3,
            "--trees", 10, "--out", report1, "--raw", raw)
    report2 = tmp_path / "report2.csv"
    assert run_cli("report", "--raw", raw, "--out", report2) == 0
    assert report1.read_bytes() == report2.read_bytes()


def test_unknown_feature_set_usage_error(dataset, tmp_path):
    with pytest.raises(SystemExit) as exc:
        run_cli("evaluate", "--manifest", dataset / "manifest.csv",
                "--model", "cnn", "--features", "velocity", "--out", tmp_path / "r.csv")
    assert exc.value.code == 2


def test_unknown_command_usage_error():
    with pytest.raises(SystemExit) as exc:
        run_cli("frobnicate")
    assert exc.value.code == 2


def test_missing_manifest_is_reported(tmp_path):
    code = run_cli("evaluate", "--manifest", tmp_path / "nope.csv",
                   "--model", "rf", "--features", "angles", "--out", tmp_path / "r.csv")
    assert code == 1


def test_env_default_data_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("GMA_DATA_DIR", str(tmp_path))
    assert run_cli("synth", "--subjects", 2, "--seed", 1,
                   "--duration-min", 2, "--duration-max", 3) == 0
    assert (tmp_path / "manifest.csv").exists()
    report = tmp_path / "r.csv"
    assert run_cli("evaluate", "--model", "rf", "--features", "angles",
                   "--seeds", 1, "--trees", 5, "--out", report) == 0
    assert report.exists()

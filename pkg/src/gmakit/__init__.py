"""gmakit: keypoint time-series toolkit for automated general movement
assessment.

Subsystems:
  keypoints    anatomical taxonomy and angle triples
  records      domain types and CSV file formats
  preprocess   resampling, cropping, outlier loop, fragmenting
  features     coordinate and joint-angle channels
  learn        random forest, 1-D CNN, LSTM, training and checkpoints
  evaluation   subject-grouped splits, metrics, seed-sweep protocol
  synth        deterministic synthetic dataset generator
  trackers     pluggable point-tracker boundary and mocks
  service      annotation HTTP service
  cli          command-line entry points
"""

from .keypoints import ALL_KEYPOINTS, ANGLE_TRIPLES, EXTREME_KEYPOINTS, Keypoint
from .records import (
    CropBox,
    DataError,
    DatasetManifest,
    EvalReport,
    KeypointTrack,
    ManifestEntry,
    ParseError,
    ReportRow,
    ValidationError,
    VideoRecord,
    load_manifest,
    load_records,
    read_tracks,
    write_report,
    write_tracks,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_KEYPOINTS",
    "ANGLE_TRIPLES",
    "EXTREME_KEYPOINTS",
    "Keypoint",
    "CropBox",
    "DataError",
    "DatasetManifest",
    "EvalReport",
    "KeypointTrack",
    "ManifestEntry",
    "ParseError",
    "ReportRow",
    "ValidationError",
    "VideoRecord",
    "load_manifest",
    "load_records",
    "read_tracks",
    "write_report",
    "write_tracks",
    "__version__",
]

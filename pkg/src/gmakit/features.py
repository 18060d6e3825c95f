"""Feature tensors: raw coordinate channels and joint-angle channels.

Feature sets:
  coords  34 channels: x and y of the 17 keypoints, canonical order
  angles  10 channels: joint angles in radians, one per angle triple
  both    44 channels: coords stacked on top of angles

Angles default to the true pixel geometry: fragment coordinates are
crop-normalized per axis, which distorts angles, so the per-axis crop
dimensions are multiplied back in before computing them (angles are
invariant to the translation this ignores). Pass angles_on_normalized=True
to compute them on the normalized coordinates instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .keypoints import ALL_KEYPOINTS, ANGLE_TRIPLES
from .preprocess import Fragment
from .records import ValidationError

FEATURE_SETS = ("coords", "angles", "both")

COORD_LABELS = tuple(f"{kp.value}.{axis}" for kp in ALL_KEYPOINTS for axis in ("x", "y"))
ANGLE_LABELS = tuple("-".join(p.value for p in triple) for triple in ANGLE_TRIPLES)

_KP_INDEX = {kp: i for i, kp in enumerate(ALL_KEYPOINTS)}


@dataclass(frozen=True)
class FeatureTensor:
    values: np.ndarray       # (channels, length) float64
    labels: tuple[str, ...]
    feature_set: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.labels):
            raise ValidationError(f"tensor shape {v.shape} does not match {len(self.labels)} labels")
        expected = {"coords": 34, "angles": 10, "both": 44}.get(self.feature_set)
        if expected is not None and v.shape[0] != expected:
            raise ValidationError(f"{self.feature_set} tensor must have {expected} channels, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("feature tensor contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


def angle(p1, p2, p3) -> float | None:
    """Angle at vertex p2 between rays to p1 and p3, in [0, pi].

    The cosine is clipped to [-1, 1] before arccos so near-collinear points
    cannot produce NaN. Returns None (missing) when either ray has zero
    length.
    """
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    p3 = np.asarray(p3, dtype=np.float64)
    v1 = p1 - p2
    v2 = p3 - p2
    n1 = float(np.hypot(v1[0], v1[1]))
    n2 = float(np.hypot(v2[0], v2[1]))
    if n1 == 0.0 or n2 == 0.0:
        return None
    c = float(np.dot(v1, v2)) / (n1 * n2)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def _angle_series(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Vectorized angle over time; invalid or degenerate frames yield 0."""
    v1 = p1 - p2
    v2 = p3 - p2
    n1 = np.linalg.norm(v1, axis=1)
    n2 = np.linalg.norm(v2, axis=1)
    ok = valid & (n1 > 0.0) & (n2 > 0.0)
    out = np.zeros(p1.shape[0], dtype=np.float64)
    if np.any(ok):
        c = np.sum(v1[ok] * v2[ok], axis=1) / (n1[ok] * n2[ok])
        out[ok] = np.arccos(np.clip(c, -1.0, 1.0))
    return out


def coord_channels(fragment: Fragment) -> FeatureTensor:
    """34 x L tensor of normalized coordinates; occluded samples are 0."""
    length = fragment.n_frames
    values = np.zeros((34, length), dtype=np.float64)
    for i in range(17):
        values[2 * i] = fragment.coords[i, :, 0]
        values[2 * i + 1] = fragment.coords[i, :, 1]
    return FeatureTensor(values, COORD_LABELS, "coords")


def angle_channels(fragment: Fragment, angles_on_normalized: bool = False) -> FeatureTensor:
    """10 x L tensor of joint angles in radians; missing angles are 0.

    An angle is missing at a frame when any of its three keypoints is
    occluded there, or when two of them coincide.
    """
    if angles_on_normalized:
        coords = fragment.coords
    else:
        coords = fragment.coords * np.array([fragment.crop_width, fragment.crop_height])
    values = np.zeros((len(ANGLE_TRIPLES), fragment.n_frames), dtype=np.float64)
    for row, (a, b, c) in enumerate(ANGLE_TRIPLES):
        ia, ib, ic = _KP_INDEX[a], _KP_INDEX[b], _KP_INDEX[c]
        valid = fragment.visible[ia] & fragment.visible[ib] & fragment.visible[ic]
        values[row] = _angle_series(coords[ia], coords[ib], coords[ic], valid)
    return FeatureTensor(values, ANGLE_LABELS, "angles")


def build_features(fragment: Fragment, feature_set: str, angles_on_normalized: bool = False) -> FeatureTensor:
    """Build the requested feature tensor: coords, angles, or both (coords first)."""
    if feature_set == "coords":
        return coord_channels(fragment)
    if feature_set == "angles":
        return angle_channels(fragment, angles_on_normalized)
    if feature_set == "both":
        c = coord_channels(fragment)
        a = angle_channels(fragment, angles_on_normalized)
        return FeatureTensor(np.vstack([c.values, a.values]), c.labels + a.labels, "both")
    raise ValueError(f"unknown feature_set {feature_set!r}; expected one of {FEATURE_SETS}")


def write_feature_csv(tensor: FeatureTensor, path: str | Path) -> None:
    """Debug export: one row per channel, label column then L values."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["channel"] + [str(i) for i in range(tensor.n_frames)])
        for label, row in zip(tensor.labels, tensor.values):
            w.writerow([label] + [repr(float(v)) for v in row])

"""Geometry/material feature maps.

Object names from a segmentation map are matched to an absorption database,
the four sub-band absorption coefficients are packed two per 8-bit channel
(4 bits each), and the third channel holds quantized depth.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_NAME = "default"
LEVELS = 15  # 4-bit quantization of absorption coefficients


@dataclass(frozen=True)
class AbsorptionEntry:
    material_name: str
    ac125: float
    ac500: float
    ac2000: float
    ac8000: float

    def __post_init__(self):
        for v in self.coefficients:
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{self.material_name}: absorption {v} outside [0, 1]")

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.ac125, self.ac500, self.ac2000, self.ac8000)


@dataclass(frozen=True)
class SegmentationMap:
    labels: np.ndarray  # H x W integer grid
    label_names: dict[int, str]

    def __post_init__(self):
        missing = set(np.unique(self.labels).tolist()) - set(self.label_names)
        if missing:
            raise ValueError(f"labels without a name: {sorted(missing)}")


@dataclass(frozen=True)
class GeoMatMap:
    channels: np.ndarray  # 3 x H x W, uint8 range
    depth_scale: float  # meters per depth unit


def tokens(text: str) -> frozenset[str]:
    return frozenset(t for t in re.split(r"[^0-9a-z]+", text.lower()) if t)


def jaccard(a: str, b: str) -> float:
    ta, tb = tokens(a), tokens(b)
    if not ta or not tb:
        return 0.0
    return len(ta & tb) / len(ta | tb)


def match_material(object_name: str, db: list[AbsorptionEntry]) -> AbsorptionEntry:
    """Entry whose name shares the most tokens with ``object_name``.

    Ties go to the earliest entry; when nothing overlaps the entry named
    ``"default"`` is returned.
    """
    if not db:
        raise ValueError("absorption database is empty")
    scores = [jaccard(object_name, e.material_name) for e in db]
    best = int(np.argmax(scores))
    if scores[best] > 0.0:
        return db[best]
    for entry in db:
        if entry.material_name == DEFAULT_NAME:
            return entry
    raise LookupError(f"no match for {object_name!r} and no {DEFAULT_NAME!r} entry")


def quantize(ac) -> np.ndarray:
    ac = np.asarray(ac, dtype=np.float64)
    if np.any((ac < 0.0) | (ac > 1.0)) or not np.all(np.isfinite(ac)):
        raise ValueError("absorption coefficients must lie in [0, 1]")
    # round half up
    return np.floor(LEVELS * ac + 0.5).astype(np.int64)


def pack_channels(ac125, ac500, ac2000, ac8000) -> tuple[int, int]:
    """Pack four coefficients into two bytes: low band in c0, high band in c1."""
    q125, q500, q2000, q8000 = (int(q) for q in quantize([ac125, ac500, ac2000, ac8000]))
    return q125 + 16 * q500, q2000 + 16 * q8000


def unpack_channels(c0: int, c1: int) -> tuple[int, int, int, int]:
    for c in (c0, c1):
        if not 0 <= c <= 255:
            raise ValueError(f"channel value {c} outside [0, 255]")
    return c0 % 16, c0 // 16, c1 % 16, c1 // 16


def build_geomat(seg: SegmentationMap, depth, db: list[AbsorptionEntry]) -> GeoMatMap:
    depth = np.asarray(depth, dtype=np.float64)
    labels = np.asarray(seg.labels)
    if depth.shape != labels.shape:
        raise ValueError(f"depth {depth.shape} and segmentation {labels.shape} differ")
    if np.any(depth < 0) or not np.all(np.isfinite(depth)):
        raise ValueError("depth must be finite and non-negative")
    out = np.zeros((3,) + labels.shape, dtype=np.uint8)
    for label in np.unique(labels):
        entry = match_material(seg.label_names[int(label)], db)
        c0, c1 = pack_channels(*entry.coefficients)
        mask = labels == label
        out[0][mask] = c0
        out[1][mask] = c1
    depth_max = float(depth.max()) if depth.size else 0.0
    if depth_max > 0:
        out[2] = np.floor(depth / depth_max * 255.0 + 0.5).astype(np.uint8)
    return GeoMatMap(out, depth_max / 255.0)


def load_db(path) -> list[AbsorptionEntry]:
    """Read a JSON array of ``{material_name, ac125, ac500, ac2000, ac8000}`` objects."""
    return [AbsorptionEntry(**item) for item in json.loads(Path(path).read_text())]


def load_label_names(path) -> dict[int, str]:
    return {int(k): v for k, v in json.loads(Path(path).read_text()).items()}

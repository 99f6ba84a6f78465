"""Room-acoustic metrics of an impulse response.

Energy decay is computed with Schroeder backward integration; reverberation
time uses T30 extrapolation over the -5..-35 dB part of the decay curve and
early decay time a line fit over 0..-10 dB.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .signal import SAMPLE_RATE

EDC_FLOOR_DB = -120.0
DEFAULT_BOUNDARY = 2000
DIRECT_WINDOW_S = 0.0025


class InsufficientDecayError(ValueError):
    """The decay curve never reaches the level a metric needs."""


@dataclass(frozen=True)
class Rir:
    """Impulse response with the sample index splitting early from late."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    early_late_boundary: int | None = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).reshape(-1)
        arr.setflags(write=False)
        if arr.size < 1:
            raise ValueError("an RIR needs at least one sample")
        if not np.all(np.isfinite(arr)):
            raise ValueError("RIR samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        boundary = self.early_late_boundary
        if boundary is None:
            boundary = min(DEFAULT_BOUNDARY, arr.size)
        if not 0 <= boundary <= arr.size:
            raise ValueError(f"boundary {boundary} outside [0, {arr.size}]")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "early_late_boundary", int(boundary))

    def __len__(self) -> int:
        return self.samples.shape[0]

    def with_samples(self, samples) -> "Rir":
        return Rir(samples, self.sample_rate, self.early_late_boundary)


@dataclass(frozen=True)
class EdcCurve:
    values_db: np.ndarray
    sample_rate: int

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values_db.size) / self.sample_rate


@dataclass(frozen=True)
class AcousticReport:
    t60_error: float  # ms
    drr_error: float  # dB
    edt_error: float  # ms
    emse: float
    lmse: float

    def to_dict(self) -> dict:
        return asdict(self)


def energy_decay_curve(h: Rir) -> EdcCurve:
    energy = np.cumsum(h.samples[::-1] ** 2)[::-1]
    if energy[0] <= 0.0:
        raise ValueError("impulse response has zero energy")
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(energy / energy[0])
    db = np.maximum(db, EDC_FLOOR_DB)
    db[0] = 0.0
    # cumulative sums can wobble by an ulp; enforce the physical monotonicity
    db = np.minimum.accumulate(db)
    return EdcCurve(db, h.sample_rate)


def _first_below(db: np.ndarray, level: float) -> int:
    idx = np.flatnonzero(db <= level)
    if idx.size == 0:
        raise InsufficientDecayError(f"decay curve never reaches {level} dB")
    return int(idx[0])


def _decay_slope(edc: EdcCurve, start_db: float, stop_db: float) -> float:
    """Least-squares slope (dB/s) of the EDC between two levels."""
    db = edc.values_db
    i0 = 0 if start_db >= 0 else _first_below(db, start_db)
    i1 = _first_below(db, stop_db)
    if i1 <= i0:
        i0 = max(i1 - 1, 0)
    if i1 == i0:
        raise InsufficientDecayError("fit region has a single point")
    t = np.arange(i0, i1 + 1) / edc.sample_rate
    slope, _ = np.polyfit(t, db[i0:i1 + 1], 1)
    return float(slope)


def t60(h: Rir) -> float:
    """Reverberation time in seconds (T30 line fit, extrapolated to 60 dB)."""
    slope = _decay_slope(energy_decay_curve(h), -5.0, -35.0)
    return -60.0 / slope


def edt(h: Rir) -> float:
    """Early decay time in seconds: 6x the fitted time to fall 10 dB."""
    slope = _decay_slope(energy_decay_curve(h), 0.0, -10.0)
    return -60.0 / slope


def drr(h: Rir, window_s: float = DIRECT_WINDOW_S) -> float:
    """Direct-to-reverberant ratio in dB.

    The direct part is the absolute peak +/- ``window_s``; everything else is
    reflected energy. Returns ``math.inf`` when there is no reflected energy.
    """
    x = h.samples
    power = x ** 2
    if not np.any(power > 0):
        raise ValueError("impulse response has zero energy")
    peak = int(np.argmax(np.abs(x)))
    half = int(round(window_s * h.sample_rate))
    lo, hi = max(peak - half, 0), min(peak + half + 1, x.size)
    direct = power[lo:hi].sum()
    reflected = power.sum() - direct
    if reflected <= 0.0:
        return math.inf
    return float(10.0 * np.log10(direct / reflected))


def split_early_late(h: Rir, boundary: int | None = None) -> tuple[Rir, Rir]:
    if boundary is None:
        boundary = h.early_late_boundary
    if not 0 <= boundary <= len(h):
        raise ValueError(f"boundary {boundary} outside [0, {len(h)}]")
    early = np.zeros(len(h))
    late = np.zeros(len(h))
    early[:boundary] = h.samples[:boundary]
    late[boundary:] = h.samples[boundary:]
    return (Rir(early, h.sample_rate, boundary), Rir(late, h.sample_rate, boundary))


def component_mse(a: Rir, b: Rir, region: str = "full") -> float:
    """Squared error summed over ``region`` and divided by the full length.

    Normalizing by the full length keeps ``early + late == full``.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")
    if a.early_late_boundary != b.early_late_boundary:
        raise ValueError("early/late boundaries differ")
    sq = (a.samples - b.samples) ** 2
    k = a.early_late_boundary
    if region == "full":
        part = sq
    elif region == "early":
        part = sq[:k]
    elif region == "late":
        part = sq[k:]
    else:
        raise ValueError(f"unknown region {region!r}")
    return float(part.sum() / sq.size)


def _abs_diff(x: float, y: float) -> float:
    if math.isinf(x) and math.isinf(y) and x == y:
        return 0.0
    return abs(x - y)


def acoustic_error_report(est: Rir, gt: Rir) -> AcousticReport:
    if len(est) != len(gt):
        raise ValueError(f"length mismatch: {len(est)} != {len(gt)}")
    return AcousticReport(
        t60_error=1000.0 * abs(t60(est) - t60(gt)),
        drr_error=_abs_diff(drr(est), drr(gt)),
        edt_error=1000.0 * abs(edt(est) - edt(gt)),
        emse=component_mse(est, gt, "early"),
        lmse=component_mse(est, gt, "late"),
    )

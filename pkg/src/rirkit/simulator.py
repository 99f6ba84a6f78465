"""Image-source shoebox room simulator and the Sabine reverberation estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, sosfilt

from .acoustics import Rir
from .signal import SAMPLE_RATE

SABINE_CONSTANT = 0.161
DESCRIPTOR_DIM = 1024


@dataclass(frozen=True)
class ShoeboxRoom:
    """Axis-aligned room. Walls are ordered x=0, x=Lx, y=0, y=Ly, z=0, z=Lz."""

    dims: tuple[float, float, float]
    wall_absorption: tuple[float, float, float, float, float, float] = (0.2,) * 6
    speed_of_sound: float = 343.0

    def __post_init__(self):
        if len(self.dims) != 3 or min(self.dims) <= 0:
            raise ValueError("room dims must be three positive lengths")
        if len(self.wall_absorption) != 6:
            raise ValueError("need six wall absorption coefficients")
        if any(not 0.0 < a <= 1.0 for a in self.wall_absorption):
            raise ValueError("absorption coefficients must lie in (0, 1]")
        if self.speed_of_sound <= 0:
            raise ValueError("speed_of_sound must be positive")

    @classmethod
    def uniform(cls, dims, alpha: float, speed_of_sound: float = 343.0) -> "ShoeboxRoom":
        return cls(tuple(dims), (alpha,) * 6, speed_of_sound)

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def wall_areas(self) -> np.ndarray:
        lx, ly, lz = self.dims
        return np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return bool(np.all(p > 0) and np.all(p < np.asarray(self.dims)))


@dataclass(frozen=True)
class SimParams:
    max_order: int = 10
    rir_len: int = SAMPLE_RATE
    sample_rate: int = SAMPLE_RATE
    # optional DC-removal high-pass (2nd-order Butterworth); None keeps the raw image sum
    highpass_hz: float | None = None

    def __post_init__(self):
        if self.max_order < 0 or self.rir_len < 1 or self.sample_rate <= 0:
            raise ValueError("invalid simulation parameters")
        if self.highpass_hz is not None and not 0 < self.highpass_hz < self.sample_rate / 2:
            raise ValueError("highpass_hz must lie between 0 and Nyquist")


def _axis_images(s: float, length: float, max_order: int):
    """Image coordinates along one axis with their hit counts on the two walls."""
    n = np.arange(-(max_order // 2) - 1, max_order // 2 + 2)
    coord, near, far = [], [], []
    for q in (0, 1):
        coord.append((1 - 2 * q) * s + 2 * n * length)
        near.append(np.abs(n - q))
        far.append(np.abs(n))
    coord, near, far = (np.concatenate(a) for a in (coord, near, far))
    keep = near + far <= max_order
    return coord[keep], near[keep], far[keep]


def simulate_rir(room: ShoeboxRoom, source, listener, params: SimParams = SimParams()) -> Rir:
    """Impulse response from image sources up to ``params.max_order`` reflections.

    Each image adds ``sqrt(prod (1 - alpha_wall) ** hits) / distance`` at the
    sample nearest to ``distance / c``.

    Rounding to whole samples piles thousands of positive late arrivals into
    each sample, which leaves a slowly decaying DC offset in the tail. Set
    ``params.highpass_hz`` to remove it before measuring decay times.
    """
    src = np.asarray(source, dtype=np.float64)
    lst = np.asarray(listener, dtype=np.float64)
    if not (room.contains(src) and room.contains(lst)):
        raise ValueError("source and listener must lie strictly inside the room")
    if np.allclose(src, lst):
        raise ValueError("source and listener coincide")

    refl = np.sqrt(1.0 - np.asarray(room.wall_absorption, dtype=np.float64))
    fs = params.sample_rate
    out = np.zeros(params.rir_len)
    axes = [_axis_images(src[k], room.dims[k], params.max_order) for k in range(3)]
    xs, xa, xb = axes[0]
    ys, ya, yb = axes[1]
    zs, za, zb = axes[2]
    # y/z grid shared by every x image
    dy = (ys - lst[1])[:, None] ** 2 + (zs - lst[2])[None, :] ** 2
    hits_yz = (ya + yb)[:, None] + (za + zb)[None, :]
    gain_yz = (refl[2] ** ya * refl[3] ** yb)[:, None] * (refl[4] ** za * refl[5] ** zb)[None, :]
    for x, a, b in zip(xs, xa, xb):
        ok = hits_yz + a + b <= params.max_order
        dist = np.sqrt((x - lst[0]) ** 2 + dy[ok])
        delay = np.rint(dist / room.speed_of_sound * fs).astype(np.int64)
        amp = refl[0] ** a * refl[1] ** b * gain_yz[ok] / dist
        inside = (delay < params.rir_len) & (amp != 0.0)
        np.add.at(out, delay[inside], amp[inside])
    if params.highpass_hz is not None:
        out = sosfilt(butter(2, params.highpass_hz, "highpass", fs=fs, output="sos"), out)
    return Rir(out, fs)


def sabine_t60(room: ShoeboxRoom) -> float:
    absorption = float(np.dot(room.wall_areas, room.wall_absorption))
    if absorption <= 0:
        raise ValueError("room has no absorption")
    return SABINE_CONSTANT * room.volume / absorption


def room_descriptor(room: ShoeboxRoom, source, listener, dim: int = DESCRIPTOR_DIM) -> np.ndarray:
    """Fixed-length feature vector for a room/position pair.

    The leading constant keeps descriptors of different rooms from being
    positive multiples of each other.
    """
    feats = np.concatenate([
        [1.0], room.dims, room.wall_absorption,
        np.asarray(source, dtype=np.float64), np.asarray(listener, dtype=np.float64),
    ])
    if dim < feats.size:
        raise ValueError(f"descriptor needs at least {feats.size} dimensions")
    out = np.zeros(dim)
    out[:feats.size] = feats
    return out


def order_for_duration(room: ShoeboxRoom, duration_s: float) -> int:
    """Smallest image order that reaches every arrival within ``duration_s``."""
    reach = room.speed_of_sound * duration_s
    inv = 1.0 / np.asarray(room.dims, dtype=np.float64)
    return int(np.ceil(reach * np.sqrt(np.sum(inv ** 2)))) + 2

"""Multi-resolution spectral losses and the weighted training objectives.

All functions are deterministic numpy code with no gradients. Each
per-resolution term is an element mean, and resolutions are summed in the
order they appear in ``SpectralConfig.window_lengths``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acoustics import Rir
from .signal import AudioBuffer

PHASE_MAG_FLOOR = 1e-8


@dataclass(frozen=True)
class SpectralConfig:
    window_lengths: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096)
    hop_ratio: float = 0.25
    mel_bands: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0

    def __post_init__(self):
        for w in self.window_lengths:
            if w < 1 or w & (w - 1):
                raise ValueError(f"window length {w} is not a power of two")
        if not 0 < self.hop_ratio <= 1:
            raise ValueError("hop_ratio must be in (0, 1]")
        if self.mel_bands < 1:
            raise ValueError("mel_bands must be >= 1")
        if not 0 <= self.fmin < self.fmax:
            raise ValueError("need 0 <= fmin < fmax")

    def hop(self, window_len: int) -> int:
        return max(1, int(window_len * self.hop_ratio))


@dataclass(frozen=True)
class ComplexSpectrogram:
    magnitude: np.ndarray  # frames x bins
    phase: np.ndarray  # radians in (-pi, pi]
    window_len: int


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        for v in (self.lambda1, self.lambda2):
            if not np.isfinite(v) or v < 0:
                raise ValueError("loss weights must be finite and non-negative")


@dataclass(frozen=True)
class DiscriminatorScores:
    scores_reverberant: tuple[float, ...]
    scores_clean: tuple[float, ...]


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x: np.ndarray, window_len: int, hop: int) -> np.ndarray:
    pad = window_len // 2
    xp = np.pad(x, pad, mode="reflect") if x.size > 1 else np.pad(x, pad, mode="edge")
    n_frames = 1 + (xp.size - window_len) // hop
    idx = np.arange(window_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return xp[idx]


def stft(x: AudioBuffer, window_len: int, hop: int | None = None) -> ComplexSpectrogram:
    """Hann-windowed, reflect-centered STFT split into magnitude and phase."""
    if len(x) == 0:
        raise ValueError("cannot transform an empty signal")
    if hop is None:
        hop = max(1, window_len // 4)
    frames = frame_signal(x.samples, window_len, hop) * hann(window_len)
    spg = np.fft.rfft(frames, axis=-1)
    phase = np.angle(spg)
    phase[phase <= -np.pi] += 2.0 * np.pi
    return ComplexSpectrogram(np.abs(spg), phase, window_len)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular HTK-mel filterbank, ``n_mels x (n_fft // 2 + 1)``.

    Each non-empty row is scaled to unit sum. Narrow filters that fall between
    FFT bins at short window lengths are left as zero rows.
    """
    nyquist = sample_rate / 2.0
    if fmax is None:
        fmax = nyquist
    if fmax > nyquist:
        raise ValueError(f"fmax {fmax} Hz exceeds Nyquist {nyquist} Hz")
    freqs = np.linspace(0.0, nyquist, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower = (freqs[None, :] - edges[:-2, None]) / np.diff(edges)[:-1, None]
    upper = (edges[2:, None] - freqs[None, :]) / np.diff(edges)[1:, None]
    fb = np.maximum(0.0, np.minimum(lower, upper))
    sums = fb.sum(axis=1, keepdims=True)
    np.divide(fb, sums, out=fb, where=sums > 0)
    return fb


def mel_spectrogram(x: AudioBuffer, cfg: SpectralConfig, window_len: int) -> np.ndarray:
    """Power mel spectrogram, frames x mel_bands."""
    fb = mel_filterbank(x.sample_rate, window_len, cfg.mel_bands, cfg.fmin, cfg.fmax)
    spg = stft(x, window_len, cfg.hop(window_len))
    return (spg.magnitude ** 2) @ fb.T


def _check_pairs(*pairs):
    for a, b in pairs:
        if len(a) != len(b):
            raise ValueError(f"length mismatch: {len(a)} != {len(b)}")


def mel_loss(sr_hat: AudioBuffer, sr: AudioBuffer, sc_hat: AudioBuffer, sc: AudioBuffer,
             cfg: SpectralConfig = SpectralConfig()) -> float:
    """Sum over window lengths of mean |MEL(a) - MEL(b)| for both signal pairs."""
    _check_pairs((sr_hat, sr), (sc_hat, sc))
    total = 0.0
    for w in cfg.window_lengths:
        for est, ref in ((sr_hat, sr), (sc_hat, sc)):
            d = mel_spectrogram(ref, cfg, w) - mel_spectrogram(est, cfg, w)
            total += float(np.mean(np.abs(d)))
    return total


def phase_distance(a: ComplexSpectrogram, b: ComplexSpectrogram) -> np.ndarray:
    """Per-bin Euclidean distance between phases mapped onto the unit circle."""
    return np.hypot(np.sin(a.phase) - np.sin(b.phase), np.cos(a.phase) - np.cos(b.phase))


def _rms(d: np.ndarray) -> float:
    return float(np.sqrt(np.mean(d ** 2))) if d.size else 0.0


def magnitude_term(a: ComplexSpectrogram, b: ComplexSpectrogram) -> float:
    return _rms(a.magnitude - b.magnitude)


def phase_term(a: ComplexSpectrogram, b: ComplexSpectrogram) -> float:
    """RMS unit-circle distance over bins where either magnitude is non-negligible."""
    valid = (a.magnitude >= PHASE_MAG_FLOOR) | (b.magnitude >= PHASE_MAG_FLOOR)
    return _rms(phase_distance(a, b)[valid])


def stft_loss(sr_hat: AudioBuffer, sr: AudioBuffer, sc_hat: AudioBuffer, sc: AudioBuffer,
              cfg: SpectralConfig = SpectralConfig()) -> tuple[float, float, float]:
    """Returns ``(magnitude, phase, magnitude + phase)``."""
    _check_pairs((sr_hat, sr), (sc_hat, sc))
    mag = phase = 0.0
    for w in cfg.window_lengths:
        hop = cfg.hop(w)
        for est, ref in ((sr_hat, sr), (sc_hat, sc)):
            s_ref, s_est = stft(ref, w, hop), stft(est, w, hop)
            mag += magnitude_term(s_ref, s_est)
            phase += phase_term(s_ref, s_est)
    return mag, phase, mag + phase


def rir_mse(h_hat: Rir, h: Rir) -> float:
    if len(h_hat) != len(h):
        raise ValueError(f"length mismatch: {len(h_hat)} != {len(h)}")
    return float(np.mean((h_hat.samples - h.samples) ** 2))


def _nonneg(**parts):
    for name, v in parts.items():
        if not v >= 0:
            raise ValueError(f"{name} must be non-negative, got {v}")


def metric_loss(mel: float, stft_total: float, rir_mse: float,
                w: LossWeights = LossWeights()) -> float:
    _nonneg(mel=mel, stft_total=stft_total, rir_mse=rir_mse)
    return mel + w.lambda1 * stft_total + w.lambda2 * rir_mse


def adversarial_hinge_loss(scores: DiscriminatorScores) -> float:
    """Generator hinge loss from reverberant- and clean-speech discriminator scores."""
    r = np.asarray(scores.scores_reverberant, dtype=np.float64)
    c = np.asarray(scores.scores_clean, dtype=np.float64)
    if r.size == 0 or c.size == 0:
        raise ValueError("discriminator score lists must be non-empty")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(c))):
        raise ValueError("discriminator scores must be finite")
    return float(np.mean(np.maximum(0.0, 1.0 - r)) + np.mean(np.maximum(0.0, 1.0 - c)))


def generator_total_loss(metric: float, adv: float, vq1: float, vq2: float,
                         w: LossWeights = LossWeights()) -> float:
    _nonneg(metric=metric, adv=adv, vq1=vq1, vq2=vq2)
    return metric + w.lambda1 * adv + w.lambda2 * (vq1 + vq2)


@dataclass
class LossReport:
    mel: float
    stft_mag: float
    stft_phase: float
    rir_mse: float
    metric: float
    adversarial: float
    generator: float


def loss_report(sr_hat, sr, sc_hat, sc, rir_hat: Rir, rir: Rir,
                scores: DiscriminatorScores | None = None,
                vq1: float = 0.0, vq2: float = 0.0,
                cfg: SpectralConfig = SpectralConfig(),
                metric_weights: LossWeights = LossWeights(),
                generator_weights: LossWeights = LossWeights()) -> LossReport:
    """Evaluate every objective at once. Missing scores count as zero adversarial loss."""
    mel = mel_loss(sr_hat, sr, sc_hat, sc, cfg)
    mag, phase, total = stft_loss(sr_hat, sr, sc_hat, sc, cfg)
    mse = rir_mse(rir_hat, rir)
    metric = metric_loss(mel, total, mse, metric_weights)
    adv = adversarial_hinge_loss(scores) if scores is not None else 0.0
    gen = generator_total_loss(metric, adv, vq1, vq2, generator_weights)
    return LossReport(mel, mag, phase, mse, metric, adv, gen)


import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rirkit.acoustics import Rir
from rirkit.losses import (ComplexSpectrogram, DiscriminatorScores, LossWeights, SpectralConfig,
                           adversarial_hinge_loss, generator_total_loss, hann, loss_report,
                           mel_filterbank, mel_loss, mel_spectrogram, metric_loss, phase_distance,
                           phase_term, rir_mse, stft, stft_loss)
from rirkit.signal import AudioBuffer

FS = 16000
SMALL = SpectralConfig(window_lengths=(64, 256, 1024))


def buf(x):
    return AudioBuffer(np.asarray(x, dtype=float))


# --- independent reference: explicit loops and a naive DFT -------------------------------

def ref_reflect_index(i, n):
    period = 2 * (n - 1)
    i = abs(i) % period
    return i if i < n else period - i


def ref_stft_power(x, w):
    hop = w // 4
    pad = w // 2
    padded = [x[ref_reflect_index(i - pad, len(x))] for i in range(len(x) + 2 * pad)]
    win = [0.5 - 0.5 * math.cos(2 * math.pi * k / w) for k in range(w)]
    n_frames = 1 + (len(padded) - w) // hop
    k = np.arange(w // 2 + 1)[:, None]
    dft = np.exp(-2j * np.pi * k * np.arange(w)[None, :] / w)
    out = []
    for f in range(n_frames):
        seg = np.array([padded[f * hop + j] * win[j] for j in range(w)])
        out.append(np.abs(dft @ seg) ** 2)
    return np.array(out)


def ref_filterbank(w, n_mels=80, fmin=0.0, fmax=8000.0, sr=FS):
    def mel(f):
        return 2595.0 * math.log10(1.0 + f / 700.0)

    def hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    lo, hi = mel(fmin), mel(fmax)
    edges = [hz(lo + (hi - lo) * i / (n_mels + 1)) for i in range(n_mels + 2)]
    n_bins = w // 2 + 1
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, centre, right = edges[m], edges[m + 1], edges[m + 2]
        for b in range(n_bins):
            f = b * (sr / 2) / (n_bins - 1)
            if left < f <= centre:
                fb[m, b] = (f - left) / (centre - left)
            elif centre < f < right:
                fb[m, b] = (right - f) / (right - centre)
        total = fb[m].sum()
        if total > 0:
            fb[m] /= total
    return fb


def ref_mel_mean_abs(x, w):
    return float(np.mean(np.abs(ref_stft_power(x, w) @ ref_filterbank(w).T)))


# --- transforms -------------------------------------------------------------------------

def test_hann_is_periodic():
    w = hann(8)
    assert w[0] == 0.0 and w[4] == pytest.approx(1.0)
    np.testing.assert_allclose(w[1:4], w[7:4:-1])


def test_stft_of_zeros():
    s = stft(buf(np.zeros(512)), 64)
    assert not np.any(s.magnitude)


@pytest.mark.parametrize("w,k", [(64, 5), (256, 17), (1024, 100)])
def test_sine_at_bin_centre(w, k):
    n = np.arange(8 * w)
    s = stft(buf(np.sin(2 * np.pi * k * n / w)), w)
    inner = s.magnitude[2:-2]
    assert np.all(np.argmax(inner, axis=1) == k)
    # Hann coherent gain 0.5 times window_len / 2
    np.testing.assert_allclose(inner[:, k], 0.5 * w / 2, rtol=0.01)


def test_stft_matches_naive_dft(rng):
    x = rng.normal(size=700)
    for w in (64, 256):
        np.testing.assert_allclose(stft(buf(x), w).magnitude ** 2, ref_stft_power(x, w),
                                   rtol=1e-9, atol=1e-9)


def test_stft_parseval(rng):
    x = rng.normal(size=2048)
    w = 256
    spg = stft(buf(x), w)
    power = spg.magnitude ** 2
    weights = np.full(w // 2 + 1, 2.0)
    weights[[0, -1]] = 1.0
    pad = np.pad(x, w // 2, mode="reflect")
    frames = np.array([pad[i:i + w] for i in range(0, pad.size - w + 1, w // 4)]) * hann(w)
    np.testing.assert_allclose((power * weights).sum(axis=1) / w, (frames ** 2).sum(axis=1))


def test_stft_phase_range(rng):
    s = stft(buf(rng.normal(size=1000)), 128)
    assert np.all(s.phase > -np.pi) and np.all(s.phase <= np.pi)


def test_filterbank_matches_reference():
    for w in (64, 512, 4096):
        np.testing.assert_allclose(mel_filterbank(FS, w, 80, 0, 8000), ref_filterbank(w),
                                   atol=1e-12)


def test_filterbank_rows():
    fb = mel_filterbank(FS, 1024, 80, 0, 8000)
    sums = fb.sum(axis=1)
    assert np.all(fb >= 0)
    assert np.all(sums <= 1.0 + 1e-12)
    np.testing.assert_allclose(sums[sums > 0], 1.0)
    with pytest.raises(ValueError):
        mel_filterbank(FS, 1024, 80, 0, 9000)


def test_mel_spectrogram_of_zeros_and_homogeneity(rng):
    cfg = SpectralConfig()
    assert not np.any(mel_spectrogram(buf(np.zeros(800)), cfg, 256))
    x = rng.normal(size=800)
    np.testing.assert_allclose(mel_spectrogram(buf(3 * x), cfg, 256),
                               9 * mel_spectrogram(buf(x), cfg, 256), rtol=1e-10)


# --- losses -----------------------------------------------------------------------------

def test_mel_loss_identity_and_symmetry(rng):
    a, b = buf(rng.normal(size=1500)), buf(rng.normal(size=1500))
    assert mel_loss(a, a, b, b) == 0.0
    assert mel_loss(a, b, a, b, SMALL) == pytest.approx(mel_loss(b, a, b, a, SMALL))


def test_mel_loss_against_reference(rng):
    x = rng.normal(size=5000)
    z = np.zeros_like(x)
    expected = sum(ref_mel_mean_abs(x, w) for w in SpectralConfig().window_lengths)
    got = mel_loss(buf(x), buf(z), buf(z), buf(z))
    assert got == pytest.approx(expected, rel=1e-9)


def test_mel_loss_length_mismatch():
    with pytest.raises(ValueError):
        mel_loss(buf(np.zeros(10)), buf(np.zeros(11)), buf(np.zeros(10)), buf(np.zeros(10)))


def test_stft_loss_identity(rng):
    a, b = buf(rng.normal(size=3000)), buf(rng.normal(size=3000))
    assert stft_loss(a, a, b, b) == (0.0, 0.0, 0.0)


def test_phase_of_negated_signal_is_antipodal(rng):
    x = rng.normal(size=2000)
    s, t = stft(buf(x), 256), stft(buf(-x), 256)
    mask = s.magnitude > 1e-6
    np.testing.assert_allclose(phase_distance(s, t)[mask], 2.0, atol=1e-9)
    assert phase_term(s, t) == pytest.approx(2.0, abs=1e-9)


@given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=20), st.integers(-3, 3))
def test_phase_distance_wraps_and_is_symmetric(phases, k):
    p = np.array(phases)[None, :]
    q = np.roll(p, 1)
    mag = np.ones_like(p)
    a = ComplexSpectrogram(mag, p, 8)
    b = ComplexSpectrogram(mag, q, 8)
    shifted = ComplexSpectrogram(mag, p + 2 * np.pi * k, 8)
    np.testing.assert_allclose(phase_distance(a, b), phase_distance(b, a))
    np.testing.assert_allclose(phase_distance(shifted, b), phase_distance(a, b), atol=1e-9)
    d = phase_distance(a, b)
    assert np.all(d >= 0) and np.all(d <= 2 + 1e-12)


def test_phase_ignores_silent_bins():
    z = buf(np.zeros(512))
    assert stft_loss(z, z, z, z, SMALL) == (0.0, 0.0, 0.0)


def test_rir_mse(rng):
    h = Rir(rng.normal(size=100))
    assert rir_mse(h, h) == 0.0
    assert rir_mse(h.with_samples(h.samples + 0.1), h) == pytest.approx(0.01)


def test_metric_loss_examples():
    assert metric_loss(0, 0, 0, LossWeights(3, 4)) == 0
    assert metric_loss(1, 2, 3) == 6
    assert metric_loss(1, 2, 3, LossWeights(0.5, 2)) == 8
    with pytest.raises(ValueError):
        metric_loss(-1, 0, 0)


def test_hinge_examples():
    assert adversarial_hinge_loss(DiscriminatorScores((1.0, 3.0), (1.0,))) == 0.0
    assert adversarial_hinge_loss(DiscriminatorScores((2.0,), (0.5,))) == 0.5
    assert adversarial_hinge_loss(DiscriminatorScores((0.0,), (0.0,))) == 2.0
    with pytest.raises(ValueError):
        adversarial_hinge_loss(DiscriminatorScores((), (0.0,)))


def test_generator_total_examples():
    assert generator_total_loss(0, 0, 0, 0) == 0
    assert generator_total_loss(1, 1, 1, 1) == 4
    assert generator_total_loss(2, 0.5, 0.1, 0.3, LossWeights(2, 0.5)) == pytest.approx(3.2)


@settings(max_examples=50)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10),
       st.floats(0, 5), st.floats(0, 5))
def test_objectives_non_negative(a, b, c, d, l1, l2):
    w = LossWeights(l1, l2)
    assert metric_loss(a, b, c, w) >= 0
    assert generator_total_loss(a, b, c, d, w) >= 0


def test_loss_report_identity(rng):
    x = buf(rng.normal(size=1200))
    h = Rir(rng.normal(size=300))
    r = loss_report(x, x, x, x, h, h, cfg=SMALL)
    assert (r.mel, r.stft_mag, r.stft_phase, r.rir_mse, r.metric, r.generator) == (0,) * 6

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rirkit.signal import (RIR_ENCODER_PLAN, SEGMENT_LEN, SPEECH_ENCODER_PLAN, AudioBuffer,
                           ConvLayer, LayerPlan, block_size, conv_plan_output_len, convolve,
                           fft_convolve, scale)


def direct_convolution(x, h):
    """O(n*m) textbook sum, used as the oracle for the FFT path."""
    out = [0.0] * (len(x) + len(h) - 1)
    for i, xi in enumerate(x):
        for j, hj in enumerate(h):
            out[i + j] += xi * hj
    return np.array(out)


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def buf(x):
    return AudioBuffer(np.asarray(x, dtype=float))


def test_identity_kernel():
    y = convolve(buf([1, 2, 3]), buf([1]))
    np.testing.assert_allclose(y.samples, [1, 2, 3], atol=1e-12)


def test_two_tap_box():
    np.testing.assert_allclose(convolve(buf([1, 1]), buf([1, 1])).samples, [1, 2, 1], atol=1e-12)


def test_small_cases_match_textbook_sum(rng):
    for n, m in [(1, 1), (5, 3), (3, 5), (17, 16), (100, 7)]:
        x, h = rng.normal(size=n), rng.normal(size=m)
        np.testing.assert_allclose(fft_convolve(x, h), direct_convolution(x, h), atol=1e-10)


def test_long_random_pair_matches_direct_sum(rng):
    x, h = rng.normal(size=4096), rng.normal(size=1024)
    # np.convolve is the direct O(n*m) sum; cross-check it against the loop on a slice
    ref = np.convolve(x, h)
    np.testing.assert_allclose(ref[:50], direct_convolution(x[:50], h[:50])[:50], atol=1e-10)
    y = convolve(buf(x), buf(h))
    assert len(y) == 4096 + 1024 - 1
    assert rel_err(y.samples, ref) < 1e-6


def test_delta_is_exact(rng):
    x = rng.normal(size=3000)
    y = convolve(buf(x), buf([1.0]))
    assert np.max(np.abs(y.samples - x)) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8192), st.integers(1, 1024), st.integers(0, 2**32 - 1))
def test_fft_matches_direct_sum(n, m, seed):
    r = np.random.default_rng(seed)
    x, h = r.normal(size=n), r.normal(size=m)
    assert rel_err(fft_convolve(x, h), np.convolve(x, h)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3000), st.integers(1, 3000), st.floats(0.01, 2) | st.floats(-2, -0.01), st.integers(0, 2**32 - 1))
def test_commutative_and_linear(n, m, a, seed):
    r = np.random.default_rng(seed)
    x, h = buf(r.normal(size=n)), buf(r.normal(size=m))
    xh = convolve(x, h).samples
    assert rel_err(convolve(h, x).samples, xh) < 1e-6
    assert rel_err(convolve(scale(x, a), h).samples, a * xh) < 1e-6


def test_rate_mismatch_and_empty():
    with pytest.raises(ValueError):
        convolve(AudioBuffer([1.0], 16000), AudioBuffer([1.0], 8000))
    with pytest.raises(ValueError):
        convolve(AudioBuffer([]), buf([1.0]))


def test_block_size_policy():
    assert block_size(1024) == 4096
    assert block_size(1000) == 4096
    assert block_size(2**17) == 2**18  # capped
    assert block_size(2**18) > 2**18  # kernel beyond the cap still fits


def test_scale():
    x = buf([1.0, -2.0])
    assert np.array_equal(scale(x, 1).samples, x.samples)
    np.testing.assert_array_equal(scale(x, 0.5).samples, [0.5, -1.0])
    z = scale(x, 0)
    assert len(z) == 2 and not np.any(z.samples)
    with pytest.raises(ValueError):
        scale(x, float("inf"))


def test_buffer_is_immutable_and_finite():
    x = buf([1.0, 2.0])
    with pytest.raises(ValueError):
        x.samples[0] = 3.0
    with pytest.raises(ValueError):
        AudioBuffer([np.nan])
    with pytest.raises(ValueError):
        AudioBuffer([1.0], 0)


def test_speech_encoder_downsamples_by_240():
    assert SPEECH_ENCODER_PLAN.downsample_factor == 240
    assert [layer.stride for layer in SPEECH_ENCODER_PLAN.layers] == [2, 2, 3, 4, 5]
    n, factor = conv_plan_output_len(SPEECH_ENCODER_PLAN, SEGMENT_LEN)
    assert factor == 240 and n == SEGMENT_LEN // 240


def test_rir_encoder_shapes():
    assert [layer.kernel_len for layer in RIR_ENCODER_PLAN.layers] == [14401, 41, 41]
    assert [layer.out_channels for layer in RIR_ENCODER_PLAN.layers] == [256, 512, 1024]
    assert conv_plan_output_len(RIR_ENCODER_PLAN, 14400) == (16, 900)


def test_too_short_input():
    with pytest.raises(ValueError):
        conv_plan_output_len(RIR_ENCODER_PLAN, 899)


@given(st.lists(st.tuples(st.integers(1, 64), st.integers(1, 8)), min_size=1, max_size=5),
       st.integers(1, 50))
def test_downsample_factor_is_stride_product(layers, mult):
    plan = LayerPlan(tuple(ConvLayer(k, s) for k, s in layers))
    expected = int(np.prod([s for _, s in layers]))
    n, factor = conv_plan_output_len(plan, expected * mult)
    assert factor == expected
    assert n == mult

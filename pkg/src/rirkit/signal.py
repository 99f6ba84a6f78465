"""Audio containers, FFT convolution and conv-stack shape arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

SAMPLE_RATE = 16000
# reverberant speech is processed in windows of this many samples
SEGMENT_LEN = 14400
MAX_BLOCK = 2**18


def _frozen(samples) -> np.ndarray:
    arr = np.array(samples, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal stored as float64 samples plus its sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        arr = _frozen(self.samples)
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def block_size(kernel_len: int) -> int:
    """FFT size used by :func:`fft_convolve` for a kernel of ``kernel_len`` taps."""
    nfft = min(_next_pow2(4 * kernel_len), MAX_BLOCK)
    if nfft <= kernel_len:
        # kernel longer than the cap; fall back to the smallest size that still fits
        nfft = _next_pow2(2 * kernel_len)
    return nfft


def fft_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of two 1-D arrays by FFT overlap-add.

    The shorter input is used as the kernel. Output length is
    ``len(x) + len(h) - 1``.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.size == 0 or h.size == 0:
        raise ValueError("cannot convolve an empty signal")
    if h.size > x.size:
        x, h = h, x
    n_out = x.size + h.size - 1
    nfft = block_size(h.size)
    hop = nfft - h.size + 1
    H = np.fft.rfft(h, nfft)
    out = np.zeros(n_out + nfft, dtype=np.float64)
    for start in range(0, x.size, hop):
        seg = x[start:start + hop]
        y = np.fft.irfft(np.fft.rfft(seg, nfft) * H, nfft)
        out[start:start + nfft] += y
    return out[:n_out]


def convolve(x: AudioBuffer, h: AudioBuffer) -> AudioBuffer:
    """Reverberant signal ``x * h`` (full length ``len(x) + len(h) - 1``)."""
    if x.sample_rate != h.sample_rate:
        raise ValueError(f"sample rate mismatch: {x.sample_rate} != {h.sample_rate}")
    return AudioBuffer(fft_convolve(x.samples, h.samples), x.sample_rate)


def scale(x: AudioBuffer, g: float) -> AudioBuffer:
    if not np.isfinite(g):
        raise ValueError("gain must be finite")
    return AudioBuffer(x.samples * g, x.sample_rate)


@dataclass(frozen=True)
class ConvLayer:
    kernel_len: int
    stride: int
    out_channels: int = 1

    def __post_init__(self):
        if self.kernel_len < 1 or self.stride < 1:
            raise ValueError("kernel_len and stride must be >= 1")

    @property
    def padding(self) -> int:
        # total zero padding; keeps output = input / stride for divisible inputs
        return max(self.kernel_len - self.stride, 0)

    def output_len(self, n: int) -> int:
        return (n + self.padding - self.kernel_len) // self.stride + 1


@dataclass(frozen=True)
class LayerPlan:
    layers: tuple[ConvLayer, ...] = field(default_factory=tuple)

    @property
    def downsample_factor(self) -> int:
        return prod(layer.stride for layer in self.layers)


# strided SEANet-style blocks use kernel = 2 * stride
SPEECH_ENCODER_PLAN = LayerPlan(tuple(
    ConvLayer(2 * s, s, c) for s, c in zip((2, 2, 3, 4, 5), (2, 4, 8, 16, 32))
))
RIR_ENCODER_PLAN = LayerPlan((
    ConvLayer(14401, 225, 256),
    ConvLayer(41, 2, 512),
    ConvLayer(41, 2, 1024),
))


def conv_plan_output_len(plan: LayerPlan, input_len: int) -> tuple[int, int]:
    """Run ``input_len`` through the layer stack.

    Returns ``(output_len, downsample_factor)``. Raises ``ValueError`` when the
    input is shorter than the product of strides.
    """
    factor = plan.downsample_factor
    if input_len < factor:
        raise ValueError(
            f"input of {input_len} samples is shorter than the receptive stride {factor}")
    n = input_len
    for layer in plan.layers:
        n = layer.output_len(n)
        if n < 1:
            raise ValueError(f"input of {input_len} samples is too short for this plan")
    return n, factor

"""Room impulse response toolkit: reverberant-speech synthesis, room-acoustic
metrics, spectral losses, residual vector quantization, geometry/material
feature maps, an RIR retrieval store and an image-source simulator."""

from .acoustics import (AcousticReport, EdcCurve, Rir, acoustic_error_report, component_mse,
                        drr, edt, energy_decay_curve, split_early_late, t60)
from .signal import (RIR_ENCODER_PLAN, SAMPLE_RATE, SEGMENT_LEN, SPEECH_ENCODER_PLAN,
                     AudioBuffer, ConvLayer, LayerPlan, conv_plan_output_len, convolve, scale)

__version__ = "0.1.0"

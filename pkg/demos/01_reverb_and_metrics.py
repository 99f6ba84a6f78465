"""Simulate a room, reverberate a test signal and measure the result."""

import numpy as np

from rirkit import AudioBuffer, convolve, drr, edt, split_early_late, t60
from rirkit.simulator import ShoeboxRoom, SimParams, order_for_duration, sabine_t60, simulate_rir

room = ShoeboxRoom.uniform((5.0, 4.0, 3.0), 0.2)
duration = 1.2 * sabine_t60(room) + 0.1
params = SimParams(max_order=order_for_duration(room, duration), rir_len=int(16000 * duration),
                   highpass_hz=50.0)
h = simulate_rir(room, (1.2, 1.1, 1.4), (3.7, 2.6, 1.6), params)

print(f"Sabine T60   {sabine_t60(room):.3f} s")
print(f"measured T60 {t60(h):.3f} s")
print(f"EDT          {edt(h):.3f} s")
print(f"DRR          {drr(h):.2f} dB")

# the first 2000 samples (125 ms) are the early part
early, late = split_early_late(h)
print("early energy share", np.sum(early.samples ** 2) / np.sum(h.samples ** 2))

# a chirp stands in for clean speech
t = np.arange(16000) / 16000
clean = AudioBuffer(np.sin(2 * np.pi * (100 + 1500 * t) * t))
wet = convolve(clean, AudioBuffer(h.samples))
print("reverberant length", len(wet), "=", len(clean), "+", len(h), "- 1")

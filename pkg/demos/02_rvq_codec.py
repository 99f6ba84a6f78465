"""Train a small residual vector quantizer and look at its rate/error trade-off."""

import numpy as np

from rirkit.rvq import RvqConfig, bitrate, new_codec

rng = np.random.default_rng(0)
# correlated 16-dim frames, loosely like encoder features
mix = rng.normal(size=(16, 16)) / 4
frames = rng.normal(size=(4096, 16)) @ mix

cfg = RvqConfig(num_layers=8, codebook_size=64, dim=16, seed=0)
codec = new_codec(cfg, frames)
for step in range(200):
    batch = frames[rng.choice(len(frames), 512, replace=False)]
    vq_loss, commit = codec.train_step(batch)
    if step % 50 == 0:
        print(f"step {step:3d}  vq_loss {vq_loss:.5f}  commitment {commit:.5f}")

held_out = rng.normal(size=(1000, 16)) @ mix
codes = codec.encode(held_out).codes
for n in (1, 2, 4, 8):
    err = np.mean((held_out - codec.decode(codes[:, :n])) ** 2)
    print(f"{n} layers: mse {err:.5f}")

# the full-size speech codec: 64 layers of 8192 entries at 16000 / 240 frames per second
full = RvqConfig(num_layers=64, codebook_size=8192)
print(f"bitrate {bitrate(full, 16000 / 240):.0f} bps")

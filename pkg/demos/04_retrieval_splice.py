"""Retrieve a stored RIR by embedding and splice its late part into an estimate."""

import numpy as np

from rirkit.acoustics import component_mse
from rirkit.simulator import ShoeboxRoom, SimParams, room_descriptor, simulate_rir
from rirkit.store import EmbeddingStore, assemble_estimate, contrastive_loss

rng = np.random.default_rng(1)
store = EmbeddingStore(1024)
rooms = []
for i in range(10):
    dims = rng.uniform(3, 8, size=3)
    room = ShoeboxRoom.uniform(tuple(dims), float(rng.uniform(0.1, 0.4)))
    src, lst = rng.uniform(0.5, dims - 0.5), rng.uniform(0.5, dims - 0.5)
    h = simulate_rir(room, src, lst, SimParams(max_order=30, rir_len=4000))
    key = room_descriptor(room, src, lst)
    store.add_entry(f"room{i}", key, h)
    rooms.append((key, h))

key, gt = rooms[3]
# an estimate that got the early part right but has a noise tail
tail = rng.normal(size=2000) * np.std(gt.samples[2000:])
est = gt.with_samples(np.r_[gt.samples[:2000], tail])
final, rid = assemble_estimate(est, store, key)
print("retrieved", rid)
print("late MSE before", component_mse(est, gt, "late"), "after", component_mse(final, gt, "late"))

# matched image/RIR embedding pairs score lower than shuffled ones
img = rng.normal(size=(6, 32))
img /= np.linalg.norm(img, axis=1, keepdims=True)
print("matched loss ", contrastive_loss(img, img)[0])
print("shuffled loss", contrastive_loss(img, np.roll(img, 1, axis=0))[0])

"""Build a geometry/material map from a toy segmentation and depth raster."""

import numpy as np

from rirkit.geomat import AbsorptionEntry, SegmentationMap, build_geomat, unpack_channels

db = [
    AbsorptionEntry("carpet", 0.02, 0.14, 0.60, 0.65),
    AbsorptionEntry("glass window", 0.35, 0.18, 0.07, 0.04),
    AbsorptionEntry("concrete wall", 0.01, 0.02, 0.02, 0.03),
    AbsorptionEntry("default", 0.20, 0.20, 0.20, 0.20),
]

labels = np.zeros((6, 8), dtype=int)
labels[:2] = 1  # window across the top
labels[4:] = 2  # floor
names = {0: "painted wall", 1: "window", 2: "floor carpet"}

yy, xx = np.mgrid[0:6, 0:8]
depth = 2.0 + 0.3 * xx + 0.1 * yy

gm = build_geomat(SegmentationMap(labels, names), depth, db)
print("channel 0\n", gm.channels[0])
print("channel 1\n", gm.channels[1])
print("depth unit", round(gm.depth_scale, 4), "m")

# pixel (5, 0) is floor: the four 4-bit absorption levels come back out
print(unpack_channels(int(gm.channels[0, 5, 0]), int(gm.channels[1, 5, 0])))

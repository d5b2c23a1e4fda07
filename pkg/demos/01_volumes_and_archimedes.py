"""Unit-ball volumes, sphere measures, and the Archimedes projection.

Run with ``python3 demos/01_volumes_and_archimedes.py``.
"""
# %%
import math

import numpy as np

from waistlab import geom
from waistlab.sampling import RandomStream, archimedes_project, radial_cdf_distance, sample_ball, sample_sphere

# %% [markdown]
# Ball volumes peak near dimension 5 and then decay to zero.  The table also
# checks v_l = 2 pi / l * v_(l-2) and s_(n+1) = 2 pi v_n at every row.

# %%
table = geom.VolumeTable(12)
print(" l        v_l          s_l     rec.res    arch.res")
for ell, v, s, rec, arch in table.rows():
    print(f"{ell:2d} {v:12.6f} {s:12.6f} {rec:10.1e} {arch:10.1e}")
best = max(range(40), key=geom.unit_ball_volume)
print("largest unit ball is in dimension", best)

# %% [markdown]
# Project uniform points on S^4 (in R^5) to their first three coordinates.
# The result is uniform on B^3, so the radius r has CDF r^3.

# %%
root = RandomStream(42)
sphere = sample_sphere(4, 200_000, root.substream(0))
projected = archimedes_project(sphere)
direct = sample_ball(3, 200_000, root.substream(1))
print("KS distance, projected:", round(radial_cdf_distance(projected, 3), 5))
print("KS distance, direct:   ", round(radial_cdf_distance(direct, 3), 5))
print("critical value at 1%:  ", round(1.628 / math.sqrt(200_000), 5))

# %% [markdown]
# Radial histogram against the density 3 r^2.

# %%
r = np.linalg.norm(projected, axis=1)
counts, edges = np.histogram(r, bins=10, range=(0, 1), density=True)
mids = 0.5 * (edges[1:] + edges[:-1])
for m, c in zip(mids, counts):
    bar = "#" * int(round(c * 15))
    print(f"{m:4.2f} {c:5.2f} {3 * m * m:5.2f} {bar}")

"""Measuring lower-dimensional size with Minkowski content.

The ratio vol(X + t) / (v_k t^k) tends to the size of X as t shrinks.  For
point clouds the neighborhood is a union of balls, which sits a little below
the neighborhood of the underlying set, so very small t is not useful either.
"""
# %%
import math

import numpy as np

from waistlab.minkowski import (
    circle_cloud,
    disk_cloud,
    exact_neighborhood_oracle,
    minkowski_content,
    neighborhood_volume,
    segment_cloud,
)
from waistlab.sampling import RandomStream

root = RandomStream(3)

# %% [markdown]
# Monte Carlo neighborhood volumes against closed forms.

# %%
seg = segment_cloud(1.0, 2001)
for t in (0.02, 0.05, 0.1):
    est, err = neighborhood_volume(seg, t, 400_000, root.substream(0, int(t * 100)))
    exact = exact_neighborhood_oracle("segment", t)
    print(f"segment t={t:<5} est={est:.5f} +- {err:.5f}   exact={exact:.5f}")

# %% [markdown]
# The ratio curve for a unit circle, and the extrapolated intercept.

# %%
circle = circle_cloud(1.0, 4000)
est = minkowski_content(circle, 1, budget=300_000, stream=root.substream(1))
for t, ratio in zip(est.t_values, est.ratios):
    print(f"t={t:.4f} ratio={ratio:.4f}")
print(f"content {est.value:.4f} +- {est.stderr:.4f} (exact {2 * math.pi:.4f})")

# %% [markdown]
# A flat disk in R^3 has 2-content pi.  Coarser sampling leaves holes between
# the balls and drags the estimate down.

# %%
for spacing in (0.01, 0.005, 0.0025):
    cloud = disk_cloud(1.0, spacing)
    est = minkowski_content(cloud, 2, schedule=[0.2, 0.1, 0.05], budget=300_000, stream=root.substream(2))
    print(f"spacing {spacing:<6} points {len(cloud.points):6d} content {est.value:.4f} ({est.value / math.pi - 1:+.2%})")

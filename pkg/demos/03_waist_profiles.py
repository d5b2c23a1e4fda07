"""Fibers of maps from the ball and their sizes.

Every continuous map B^n -> R^k has a fiber of (n-k)-size at least v_(n-k).
For a coordinate projection the central fiber attains that value exactly.
"""
# %%
import math

import numpy as np

from waistlab.fibers import ContentParams, DomainSpec, ball_waist_check, extract_fiber, waist_profile
from waistlab.geom import unit_ball_volume
from waistlab.maplang import parse_map
from waistlab.sampling import RandomStream

root = RandomStream(8)
params = ContentParams(target_points=30_000, budget=150_000)

# %% [markdown]
# Level sets of x1 on B^3 are disks of radius sqrt(1 - y^2).

# %%
f = parse_map("x1", 3, 1)
fib = extract_fiber(f, [0.5], DomainSpec.ball(3), target_points=5000, stream=root.substream(0))
r = np.linalg.norm(fib.cloud.points[:, 1:], axis=1)
print("fiber x1 = 0.5: max radius", round(r.max(), 4), "expected", round(math.sqrt(0.75), 4))

prof = waist_profile(f, DomainSpec.ball(3), [[-0.6], [-0.3], [0.0], [0.3], [0.6]], params, root.substream(1))
for (y,), v in zip(prof.y_grid, prof.values):
    print(f"y={y:+.1f} content {v:.4f}  slice law {math.pi * (1 - y * y):.4f}")

# %% [markdown]
# A nonlinear map: the fibers of x1^2 + x2^2 are circles, the largest one at
# the top of the grid.  The waist bound v_1 = 2 is far from tight here.

# %%
g = parse_map("x1^2 + x2^2", 2, 1)
rep = ball_waist_check(g, 2, [[0.1], [0.4], [0.9]], params, root.substream(2))
print(f"max content {rep.estimate:.4f} at y={rep.profile.best_y[0]} bound {rep.bound} passed {rep.passed}")
print("circle of radius sqrt(0.9):", round(2 * math.pi * math.sqrt(0.9), 4))

# %% [markdown]
# A map to the plane: fibers of (x1, x2) on B^3 are vertical chords.

# %%
h = parse_map("x1; x2", 3, 2)
rep = ball_waist_check(h, 3, [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]], ContentParams(target_points=5000),
                       root.substream(3))
print("chord lengths:", np.round(rep.profile.values, 3), "bound", unit_ball_volume(1))

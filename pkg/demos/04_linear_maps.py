"""Diagonal linear maps, homothety, and the segment shrink lemma."""
# %%
import math

import numpy as np

from waistlab.linmap import (
    DiagonalMap,
    SegmentFamily,
    homothety_content_check,
    sandwich_check,
    shrink_centers,
    shrink_lemma_suite,
    union_length,
)
from waistlab.minkowski import circle_cloud
from waistlab.sampling import RandomStream

root = RandomStream(12)

# %% [markdown]
# Pulling segment centers toward the origin never increases the length of
# their union: overlaps can only grow.

# %%
fam = SegmentFamily.from_intervals([[0, 1], [1.5, 2.5], [4, 4.5]])
for a in (1.0, 0.75, 0.5, 0.25):
    shrunk = shrink_centers(fam, a)
    print(f"a={a:<5} union {union_length(shrunk):.3f}  intervals {np.round(shrunk.intervals(), 3).tolist()}")

res = shrink_lemma_suite(2000, stream=root.substream(0))
print("random families:", res["cases"], "violations:", res["violations"])

# %% [markdown]
# Scaling a curve by lambda scales its length by lambda.

# %%
circle = circle_cloud(1.0, 4000)
hom = homothety_content_check(circle, 1, 2.0, budget=300_000, stream=root.substream(1))
print(f"homothety ratio {hom['estimate']:.4f} expected {hom['expected']}")

# %% [markdown]
# diag(2, 3) maps the unit circle to an ellipse whose perimeter lies between
# 2 * 2 pi and 3 * 2 pi.

# %%
rep = sandwich_check(circle, 1, DiagonalMap([2.0, 3.0]), budget=500_000, stream=root.substream(2))
h = (3 - 2) ** 2 / (3 + 2) ** 2
ramanujan = math.pi * 5 * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))
print(f"{rep['bound_low']:.4f} <= {rep['estimate']:.4f} <= {rep['bound_high']:.4f}  (perimeter {ramanujan:.4f})")

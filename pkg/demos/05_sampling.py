"""Collocation strategies side by side.

Uniform draws, a progressive schedule grown from the initial-time strip, and
rejection sampling weighted by the input gradient of a steep profile.
"""

import numpy as np

from pinnlab import autodiff as ad
from pinnlab.sampling import PartitionSchedule, gradient_weighted_sample, progressive_sample, uniform_sample

domain = [(-1.0, 1.0), (0.0, 1.0)]

u = uniform_sample(domain, 5000, seed=0)
print("uniform: mean", u.points.mean(axis=0).round(3))

sch = PartitionSchedule(domain, [[[-1.0, 1.0], [0.0, 0.1]]], growth=0.5, stages=4)
for k in range(sch.stages):
    b = progressive_sample(sch, k, 2000, seed=k)
    print(f"progressive stage {k}: t in [{b.points[:, 1].min():.3f}, {b.points[:, 1].max():.3f}]")


def front(x, t):
    # a tanh front at x = 0 that sharpens over time, like the Burgers shock
    return -ad.tanh(x / (0.05 + 0.2 * (1.0 - t)))


g = gradient_weighted_sample(front, domain, 5000, seed=1)
near = np.mean(np.abs(g.points[:, 0]) < 0.1)
print(f"gradient weighted: acceptance {g.acceptance:.3f}, share within 0.1 of the front {near:.2f} (uniform: 0.10)")

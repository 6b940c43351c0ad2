#!/usr/bin/env python3
"""A short tour of the manifold primitives.

Walks the same path on three geometries: pick a point, shoot a geodesic,
come back with the log map, and check the books balance (norms, distances,
midpoints).  Everything else in the library is built on these five calls:
exp, log, dist, inner, project_tangent.
"""

import numpy as np

from riemdiff.manifolds import (euclidean_spec, grassmann_spec, make_manifold,
                                sphere_spec)
from riemdiff.rng import substream

rng = substream(0, 1)

for spec in (euclidean_spec(3), sphere_spec(2), grassmann_spec(5, 2)):
    man = make_manifold(spec)
    print(f"\n== {man.manifold_id}  (curvature in [{spec.K_min}, {spec.K_max}], "
          f"injectivity radius {spec.inj:.4g})")

    x = man.random_point(rng)
    v = man.random_tangent(x, norm=0.6, rng=rng)
    y = man.exp(x, v)

    # the log map inverts the exponential...
    w = man.log(x, y)
    print(f"  |log(exp(v)) - v|      = {np.linalg.norm(w.vec - v.vec):.2e}")

    # ...and its norm is the geodesic distance
    print(f"  | |log| - dist |       = {abs(w.norm - man.dist(x, y)):.2e}")

    # half the tangent vector lands exactly halfway
    mid = man.exp(x, man.tangent(x, 0.5 * w.vec))
    print(f"  midpoint error         = "
          f"{abs(man.dist(x, mid) - 0.5 * man.dist(x, y)):.2e}")

    # projecting an ambient direction gives a legal tangent vector
    raw = rng.standard_normal(man.point_shape)
    tangent = man.project_tangent(x, raw)
    again = man.project_tangent(x, tangent.vec)
    print(f"  projection idempotency = "
          f"{np.linalg.norm(again.vec - tangent.vec):.2e}")

# the sphere has closed forms worth seeing once
man = make_manifold(sphere_spec(2))
north = man.point([1.0, 0.0, 0.0])
quarter = man.tangent(north, [0.0, np.pi / 2, 0.0])
print(f"\nquarter great circle from (1,0,0): {man.exp(north, quarter).coords}")

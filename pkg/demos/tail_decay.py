"""Surface-order decay of the large-finite-cluster tail.

In the supercritical phase the probability that the origin sits in a
finite cluster of at least n sites decays like exp(-w1 n^((d-1)/d)).  The
normalized rates a_n should flatten as n grows, and the mass-center
version of the same rate should approach the origin-cluster version.
"""
import numpy as np

from fkpoisson import Box, FKParams
from fkpoisson.census import decay_rate

sched = [2, 4, 6]
boxes = [Box.centered(2, 6 * n + 1) for n in sched]
est = decay_rate(FKParams(0.7, 1.0), boxes, sched,
                 samples_per_n=[200_000, 300_000, 600_000], seed=3)

print("d=2, q=1, p=0.7 (deep supercritical)")
print(f"{'n':>4} {'hits':>7} {'a_n (origin)':>13} {'a_n (centers)':>14}")
for i, n in enumerate(sched):
    print(f"{n:>4} {est.origin_hits[i]:>7} {est.a_origin[i]:13.3f} "
          f"{est.a_center[i]:14.3f}")
print(f"\nsliding-window oscillation: {np.round(est.oscillation(3), 3)}")
print(f"center-form / origin-form at largest n: {est.ratio_at_largest:.3f}")
print("(the two forms share the same exponential order; their ratio")
print("drifts toward 1 from above as n grows)")

"""One cluster merge, step by step.

Two nearby clusters are joined through the axis staircase path between
their order-minimal site pair; bonds incident to the path's interior are
pruned so the merged set is exactly one cluster.  The weight cost of the
rewiring is bounded below by the finite-energy floor per changed bond.
"""
import numpy as np

from fkpoisson import Box, FKParams
from fkpoisson.census import label_clusters
from fkpoisson.fk import BondConfig
from fkpoisson.surgery import (count_antecedents, transform,
                               weight_ratio_check)

box = Box.cube(2, 5)
state = np.zeros(box.n_bonds, dtype=np.uint8)
for a, b in [((1, 1), (2, 1)), ((1, 3), (2, 3))]:
    state[box.bond_index[(a, b)]] = 1
config = BondConfig(box, state)
cs = label_clusters(config)
c1, c2 = cs.cluster_of((1, 1)), cs.cluster_of((1, 3))
print("cluster A:", sorted(c1.sites))
print("cluster B:", sorted(c2.sites))

res = transform(config, c1, c2)
print("\nminimal pair:", res.pair)
print("staircase path:", res.path)
print("bonds opened: ", [box.bonds[i] for i in res.opened])
print("bonds closed: ", [box.bonds[i] for i in res.closed])

merged = label_clusters(res.new_config)
assert len({merged.site_cluster[s] for s in res.merged_sites}) == 1
print("merged cluster size:", len(res.merged_sites))

params = FKParams(0.5, 2.0)
wr = weight_ratio_check(params, res)
print(f"\nweight ratio after/before = {wr.ratio:.4g} "
      f">= floor {wr.floor:.4g}: {wr.holds}")

n, K = 2, 3.0  # distance cutoff K ln n must reach the merged pair
count = count_antecedents(res.new_config, n, K)
print(f"\nexhaustive antecedent count at n={n}, K={K}: {count}")
print("(every counted configuration maps back to the merged one,")
print(" including the original pair above)")

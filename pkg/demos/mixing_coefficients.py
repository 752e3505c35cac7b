"""How fast does the dependence between distant bonds die off?

The ratio-mixing coefficient compares joint and product probabilities of
events in two regions.  On small boxes the supremum over events is exact;
samples give the single-bond-cylinder version of the same quantity.

A one-dimensional chain is a tree, where the free-boundary measure
factorizes bond by bond and every coefficient is exactly zero; the
two-row ladder is the smallest strip with genuine decay.
"""
import numpy as np

from fkpoisson import Box, FKParams
from fkpoisson.coupling import mixing_scan
from fkpoisson.oracle import enumerate_measure, exact_ratio_mixing, sample_exact

chain = Box((0,), (8,))
dist = enumerate_measure(chain, FKParams(0.7, 2.0))
print("8-site chain, free boundary, q=2: ratio coefficient bond0 vs bond6 =",
      f"{exact_ratio_mixing(dist, [chain.bonds[0]], [chain.bonds[6]]):.2e}",
      "(a tree: exactly zero)")

box = Box((0, 0), (2, 6))
params = FKParams(0.7, 2.0)
dist = enumerate_measure(box, params)
rungs = [b for b in box.bonds if b[0][1] == b[1][1]]
states = sample_exact(dist, 200_000, seed=5)
table = mixing_scan(states, box,
                    [([rungs[0]], [rungs[j]]) for j in (1, 2, 3, 4, 5)])
print("\n2x6 ladder, p=0.7, q=2: rung 0 against rung j")
print(f"{'sep':>4} {'exact':>12} {'sampled':>12} {'se':>9}")
for row, j in zip(table.rows, (1, 2, 3, 4, 5)):
    exact = exact_ratio_mixing(dist, [rungs[0]], [rungs[j]])
    print(f"{row.separation:>4} {exact:12.3e} {row.ratio:12.3e} "
          f"{row.ratio_se:9.1e}")
print(f"fitted exponents: weak mu = {table.mu_hat:.2f}, "
      f"ratio mu1 = {table.mu1_hat:.2f}")

"""
Uniform bounds for operator families
====================================

Greedy lower bounds, Cauchy tails and two families with no uniform bound.
"""
import numpy as np

from unifgamma import OperatorFamily, shift_orbit_divergence, unif_gamma_lower

# Rank-one projections onto the coordinates: every tail stays large
rep = unif_gamma_lower(OperatorFamily.projection_family(100), cuts=[1, 10, 50, 100])
print(f"projections, N=100: lower {rep.lower_bound:.0f}, upper {rep.upper_bound:.0f} ({rep.upper_source})")
print("  tails:", [round(v) for v in rep.tail_values], "->", rep.verdict)

# A summable family: tails decay
h = 2.0 ** (-np.arange(20) / 2)
rep = unif_gamma_lower(OperatorFamily.rank_one_family(h, 4))
print(f"rank-one family: lower {rep.lower_bound:.6f} (2(1 - 2^-20) = {2 * (1 - 2.0**-20):.6f})")

# Orbit of a functional under the shift: block values grow like 2^(n/2) / n^2
print("shift orbit blocks:")
for b in shift_orbit_divergence(20)[1::3]:
    print(f"  n={b.n:2d}  block {b.block_value:8.4f}  partial sum {b.partial_sum:10.4f}")

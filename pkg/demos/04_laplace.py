"""
Laplace transforms of S(.)B
===========================

For the diagonal system lambda_k = k^2, beta_k = 1 we bracket the uniform
bound of the transforms on half-planes and on a sector.
"""
import math

import numpy as np

from unifgamma import DiagonalSystem, gamma_rl_decay, halfplane_scaling, sector_family
from unifgamma.laplace import poisson_mass_split

Phi = DiagonalSystem(lambda k: k**2, 1.0, truncation=1000).representable()
print(f"||Phi||_gamma^2 = {Phi.gamma_norm_sq():.6f}  (pi^2/12 = {math.pi**2 / 12:.6f})")

res = halfplane_scaling(Phi, 2.0 ** np.arange(-4, 5))
for b, L in zip(res["b"], res["L"]):
    print(f"  Re lambda >= {b:7.4f}: lower bound {L:.5f}")
print(f"log-log slope {res['slope']:.3f}")

_, rep = sector_family(Phi, 0.0, -16, 56, q=10 ** (1 / 8))
print(f"positive axis, 8 points per decade: {rep.lower:.6f} vs pi^2/24 = {math.pi**2 / 24:.6f}")

tab = gamma_rl_decay(Phi, 1.0, [0, 1, 10, 100])
print("decay along Re lambda = 1:", np.round(tab.values, 6))

for a in (0.25, 0.5, 0.75):
    m0, m1 = poisson_mass_split(a)
    print(f"strip kernel masses at alpha={a}: {m0:.6f} + {m1:.6f}")

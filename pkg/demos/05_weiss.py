"""
Admissibility of diagonal control operators
===========================================

Three quantities that either all converge or all diverge, a constructive
chain for a divergent example and an Ornstein-Uhlenbeck check.
"""
import numpy as np

from unifgamma import (DiagonalSystem, GaussianDrawConfig, OffDiagonalSystem, off_diagonal_contrapositive_run,
                       ou_simulate, weiss_equivalence_report)

for name, lam in [("k", lambda k: k), ("k^2", lambda k: k**2), ("k log^2(k+1)", lambda k: k * np.log(k + 1) ** 2)]:
    rep = weiss_equivalence_report(DiagonalSystem(lam, 1.0))
    print(f"lambda_k = {name:13s} {rep.verdict:12s} {rep.trends()}")

od = OffDiagonalSystem.diagonal_functional(DiagonalSystem(lambda k: k, 1.0))
for tr in off_diagonal_contrapositive_run(od, [2, 5, 10]):
    print(f"M={tr.M:4}: K={tr.K}, witness {tr.witness_value:.4f} >= {tr.witness_target:.4f}, "
          f"all {len(tr.steps)} steps hold: {tr.all_hold}")

sys_ = DiagonalSystem(lambda k: k**2, 1.0, truncation=50)
r = ou_simulate(sys_, 0.1, 20.0, 10_000, GaussianDrawConfig(0, 10_000), check_fidelity=False)
z = (r.variances - r.stationary) / r.std_errors
print(f"OU, 50 modes: total {r.total:.5f} +/- {r.total_std_error:.5f} "
      f"(stationary {r.stationary.sum():.5f}), max |z| {np.max(np.abs(z)):.2f}")

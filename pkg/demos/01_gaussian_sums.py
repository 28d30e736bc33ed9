"""
Gaussian sums and the gamma-norm
================================

For a Hilbert target the second moment of a Gaussian sum is the sum of the
squared column norms.  On other targets we estimate it by Monte Carlo.
"""
import math

import numpy as np

from unifgamma import ColumnOperator, GaussianDrawConfig, SpaceSpec, gamma_norm_sq

# A random operator into l^2: exact value against a seeded estimate
V = np.random.default_rng(0).standard_normal((6, 10))
T = ColumnOperator(V, SpaceSpec.ell(2, "real"))
exact = gamma_norm_sq(T).mean
est = gamma_norm_sq(T, GaussianDrawConfig(seed=1, n_samples=100_000), method="mc")
print(f"l^2 target: exact {exact:.5f}, Monte Carlo {est.mean:.5f} +/- {est.std_error:.5f}")

# Two coordinates in c0: E max(g1^2, g2^2) = 1 + 2/pi
T = ColumnOperator.diagonal([1.0, 1.0], SpaceSpec.c0("real"))
est = gamma_norm_sq(T, GaussianDrawConfig(seed=2, n_samples=200_000))
print(f"c0, two coordinates: {est.mean:.5f} +/- {est.std_error:.5f} (closed form {1 + 2 / math.pi:.5f})")

# Slowly decaying diagonal in c0: a_k = log(k+1)^(-1/2), k <= 1000
a = 1 / np.sqrt(np.log(np.arange(1, 1001) + 1.0))
est = gamma_norm_sq(ColumnOperator.diagonal(a, SpaceSpec.c0()), GaussianDrawConfig(seed=3, n_samples=100_000))
print(f"c0 diagonal with logarithmic decay: {est.mean:.4f} +/- {est.std_error:.4f} (quadrature 3.2018)")

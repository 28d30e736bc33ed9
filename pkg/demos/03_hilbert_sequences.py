"""
Exponential Hilbert sequences
=============================

Gram matrices of exponential systems on the half-line and closed-form bounds
for their Hilbert constants.
"""
import math

from unifgamma import HilbertSequenceSpec, gram
from unifgamma.hilbert_sequences import modulated_bound, power_scaled_phi, properly_spaced_margin

print("power-scaled sqrt(mu_n) e^(-mu_n t), mu_n = 2^n:")
for n in (8, 32, 128, 512):
    spec = HilbertSequenceSpec.power_scaled(0.5, 1.0, 0.0, 0, n - 1)
    print(f"  window {n:4d}: sqrt||G|| = {gram(spec).op_norm_sqrt:.6f}   bound {power_scaled_phi(spec)[1]:.6f}")

print(f"modulated e^(-t + 2 pi i (n + rho) t), bound {modulated_bound(1.0):.7f}:")
for rho in (0.0, 0.5, 0.9):
    g = gram(HilbertSequenceSpec.modulated(1.0, rho, -128, 128)).op_norm_sqrt
    print(f"  rho={rho}: {g:.6f}")

print("spacing margin of 2^n:", properly_spaced_margin([2.0**n for n in range(1, 30)]).margin)
print("1 + sqrt 2 =", 1 + math.sqrt(2))

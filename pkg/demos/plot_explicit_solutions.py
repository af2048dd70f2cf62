"""
Explicit solutions for K = xy
=============================

Flory and Smoluchowski agree up to the gel time t = 1.  Afterwards the
Flory gel keeps eating finite clusters and the mass in finite sizes drops
like t*/t; with inert gel (Smoluchowski) it only drops like 1/t.
"""

import numpy as np

from gelkit import reference as ref
from gelkit.kernel import KernelSpec

t = np.linspace(0, 3, 13)
print(f"{'t':>5} {'flory c2':>10} {'smolu c2':>10} {'flory M':>8} {'smolu M':>8}")
for ti in t:
    print(f"{ti:5.2f} {ref.flory_c(ti, 2):10.5f} {ref.smoluchowski_c(ti, 2):10.5f}"
          f" {ref.flory_mass(ti):8.4f} {ref.smoluchowski_mass(ti):8.4f}")

# t* is the conjugate point below 1 with the same x exp(-x)
for ti in (1.5, 2.0, 3.0):
    ts = ref.t_star(ti)
    print(f"t={ti}: t*={ts:.6f}  gel fraction 1 - t*/t = {1 - ts / ti:.4f}")

# T1(gamma): when the Flory gel first holds a fraction gamma
for g in (0.33, 0.5, 0.8):
    print(f"T1({g}) = {ref.T1(g):.4f}")

# the truncated ODE reproduces the closed form; for xy the error is roundoff
sol = ref.ode_solve("flory", KernelSpec.multiplicative(), k_max=300, t_max=2.0)
k = np.arange(1, 11)
print("ODE max error, k<=10, t=2:", np.max(np.abs(sol.at(2.0)[:10] - ref.flory_c(2.0, k))))

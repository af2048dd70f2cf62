"""
Kernels and their bounds
========================

Each kernel sits between c and C times x^a y + x y^a.  The sampler proposes
pairs from the upper envelope and accepts with K / majorant, so the spread
between c and C is exactly the rejection cost.
"""

import numpy as np

from gelkit import kernel

specs = [kernel.KernelSpec.multiplicative(),
         kernel.KernelSpec.symmetric_alpha(0.5),
         kernel.KernelSpec.aldous(0.5),
         kernel.KernelSpec.aldous(0.9)]

for spec in specs:
    print(f"{spec.family.value:16s} alpha={spec.alpha:<4g} c={spec.c_lower:.4f} C={spec.c_upper:.4f}")

# ratio K / envelope along a ray y = x / r; only r matters for Aldous
r = np.logspace(-6, 0, 7)
spec = kernel.KernelSpec.aldous(0.5)
for ri in r:
    x, y = ri, 1.0
    ratio = kernel.evaluate(spec, x, y) / kernel.envelope(spec.alpha, x, y)
    print(f"r={ri:8.1e}  K/env={ratio:.6f}")

# worst-case acceptance probability of the thinning step
print("min acceptance:", spec.c_lower / spec.c_upper)

# K(x, y) / y settles to l(x) as y grows
for y in (1e2, 1e4, 1e6):
    print(y, kernel.evaluate(spec, 3.0, y) / y, kernel.limit_l(spec, 3.0))

"""
The giant particle
==================

Without a cutoff the largest particle is negligible before t = 1 and then
carries the Flory gel mass 1 - t*/t.  The band integral of pairs with
masses in [b, m] stays below 4/b.
"""

from gelkit import harness
from gelkit.kernel import KernelSpec
from gelkit.simulate import SimConfig, run_ensemble

rep = harness.giant_particle_report(n=10**4, replicas=10, seed=7)
print(rep.format())

config = SimConfig(KernelSpec.multiplicative(), 10**4, 3.0, (0.5, 0.9, 1.0), seed=7,
                   replicas=10, observables=("mass_fraction_largest",))
res = run_ensemble(config, band_b=(10.0, 100.0))
for t, v in zip(res.times, res.mean["mass_fraction_largest"]):
    print(f"t={t:.1f}: M1/m = {v:.4f}")
for b, v in res.band_mean.items():
    print(f"b={b:g}: {v:.5f}  (bound {4 / b:g})")

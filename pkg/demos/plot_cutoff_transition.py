"""
Cutoff at a fraction of the mass
================================

With a = gamma m the process follows Flory until the gel would hold a
fraction gamma of the mass, at T1(gamma).  Then a single particle jumps
past the cutoff, leaves the dynamics, and the rest restarts from a smaller
system.  The active mass fraction shows the jump.
"""

import numpy as np

from gelkit import harness, reference as ref
from gelkit.simulate import run

preset = harness.get_preset("fig3")
print("gamma =", preset.gamma, " T1 =", round(ref.T1(preset.gamma), 4))

tr = run(preset.config(replicas=1, seed=3))
frac = tr.values["active_mass_fraction"]
for t, f, c2 in zip(tr.times[::4], frac[::4], tr.values["count_at_mass(2)"][::4]):
    print(f"t={t:4.2f}  active={f:.4f}  c2={c2:.5f}  flory={ref.flory_c(t, 2):.5f}")

print("crossings at grid times:",
      harness.count_transitions(np.asarray(tr.times), np.asarray(frac), preset.gamma))

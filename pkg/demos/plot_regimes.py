"""
Cutoff decides the limit
========================

Same particles, same kernel, two cutoffs.  With a small cutoff (a = 100 for
10^4 particles) big particles freeze and the count of dimers follows
Smoluchowski.  With a = m every particle stays active and the count
follows Flory.  Writes fig1.svg and fig2.svg next to the script.

Takes about half a minute.
"""

from pathlib import Path

from gelkit import harness

here = Path(__file__).parent
for name in ("fig1", "fig2"):
    report, result = harness.run_preset(name, replicas=10, seed=7,
                                        report_times=(0.5, 1.0, 2.0, 3.0))
    print(report.format())
    print()
    preset = harness.get_preset(name)
    svg = harness.figure_svg(result, title=f"{name}: n = {preset.n}, a = {preset.a:g}")
    (here / f"{name}.svg").write_text(svg)

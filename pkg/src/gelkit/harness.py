"""Experiment presets and Monte Carlo vs reference comparisons.

The presets reproduce the gelation experiments with ``K(x, y) = xy`` and
unit initial masses (``n = m_n``) under different cutoffs ``a_n``: small
cutoffs track the Smoluchowski solution, ``a_n = m_n`` tracks Flory, and
``a_n = gamma m_n`` tracks Flory until the gel first holds a fraction
``gamma`` of the mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import reference as ref
from .errors import ConfigError
from .kernel import KernelSpec
from .simulate import CutoffMode, EnsembleResult, SimConfig, run_ensemble

__all__ = [
    "DEFAULT_GRID",
    "ExperimentPreset",
    "PRESETS",
    "get_preset",
    "CompareRow",
    "CompareReport",
    "run_preset",
    "compare",
    "figure_csv",
    "figure_svg",
    "count_transitions",
    "GiantReport",
    "giant_particle_report",
]

DEFAULT_GRID = tuple(round(0.05 * i, 10) for i in range(61))
PRESET_OBSERVABLES = ("count_at_mass(2)", "active_mass_fraction", "mass_fraction_largest")
Z_THRESHOLD = 3.0


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    n: int
    a: float
    slow: bool = False
    t_max: float = 3.0

    @property
    def gamma(self) -> float:
        return self.a / self.n

    @property
    def regime(self) -> str:
        if self.gamma >= 1.0:
            return "flory"
        if self.gamma <= 0.05:
            return "smoluchowski"
        return "fraction"

    def config(self, replicas: int = 20, seed: int = 0,
               grid: Sequence[float] = DEFAULT_GRID) -> SimConfig:
        return SimConfig(
            kernel=KernelSpec.multiplicative(),
            n=self.n,
            t_max=max(self.t_max, max(grid, default=0.0)),
            obs_grid=tuple(grid),
            cutoff=CutoffMode("absolute", float(self.a)),
            seed=seed,
            replicas=replicas,
            observables=PRESET_OBSERVABLES,
        )


PRESETS = {
    "fig1": ExperimentPreset("fig1", 10**4, 1e2),
    "fig2": ExperimentPreset("fig2", 10**4, 1e4),
    "fig3": ExperimentPreset("fig3", 10**4, 5e3),
    "fig4": ExperimentPreset("fig4", 10**4, 8e3),
    "fig5": ExperimentPreset("fig5", 3 * 10**5, 1e5, slow=True),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _z(mean: float, se: float, target: float) -> float:
    if se > 0:
        return (mean - target) / se
    return 0.0 if mean == target else math.copysign(math.inf, mean - target)


@dataclass
class CompareRow:
    t: float
    observable: str
    mc_mean: float
    mc_se: float
    flory_ref: float
    smolu_ref: float

    @property
    def z_flory(self) -> float:
        return _z(self.mc_mean, self.mc_se, self.flory_ref)

    @property
    def z_smolu(self) -> float:
        return _z(self.mc_mean, self.mc_se, self.smolu_ref)


@dataclass
class CompareReport:
    preset: str
    rows: list[CompareRow]
    replicas: int
    gamma: float
    T1_expected: float | None = None
    transition_counts: list[int] = field(default_factory=list)
    transition_times: list[float] = field(default_factory=list)
    verdict: dict[str, object] = field(default_factory=dict)

    def row_at(self, t: float) -> CompareRow:
        for row in self.rows:
            if math.isclose(row.t, t, abs_tol=1e-9):
                return row
        raise KeyError(t)

    def to_csv(self) -> str:
        lines = ["t,observable,mc_mean,mc_se,flory_ref,smolu_ref,z_flory,z_smolu"]
        for r in self.rows:
            lines.append(",".join([repr(r.t), r.observable] + [
                repr(float(v)) for v in
                (r.mc_mean, r.mc_se, r.flory_ref, r.smolu_ref, r.z_flory, r.z_smolu)]))
        return "\n".join(lines) + "\n"

    def format(self) -> str:
        out = [f"preset {self.preset}: gamma = {self.gamma:g}, {self.replicas} replicas"]
        out.append(f"{'t':>6} {'mc_mean':>10} {'mc_se':>9} {'flory':>10} {'smolu':>10}"
                   f" {'z_flory':>8} {'z_smolu':>8}")
        for r in self.rows:
            out.append(f"{r.t:6.2f} {r.mc_mean:10.5f} {r.mc_se:9.5f} {r.flory_ref:10.5f}"
                       f" {r.smolu_ref:10.5f} {r.z_flory:8.2f} {r.z_smolu:8.2f}")
        if self.T1_expected is not None:
            out.append(f"T1(gamma) = {self.T1_expected:.4f}")
        if self.transition_counts:
            out.append(f"inert-giant transitions per replica: {self.transition_counts}")
            out.append("mean transition times: "
                       + ", ".join(f"{t:.3f}" for t in self.transition_times))
        for k, v in self.verdict.items():
            out.append(f"{k}: {v}")
        return "\n".join(out)


def count_transitions(times: np.ndarray, active_fraction: np.ndarray,
                      gamma: float) -> list[float]:
    """Grid times right after a giant particle crossed the cutoff.

    A crossing moves at least ``gamma`` of the mass into the inert set at
    once; drops of ``gamma / 2`` between consecutive grid points are counted.
    """
    drops = active_fraction[:-1] - active_fraction[1:]
    return [float(times[k + 1]) for k in np.nonzero(drops >= 0.5 * gamma)[0]]


def _rows(result: EnsembleResult, observable: str, keep=None) -> list[CompareRow]:
    rows = []
    for k, t in enumerate(result.times):
        if keep is not None and not any(math.isclose(t, s, abs_tol=1e-9) for s in keep):
            continue
        rows.append(CompareRow(float(t), observable,
                               float(result.mean[observable][k]),
                               float(result.se[observable][k]),
                               float(ref.flory_c(t, 2)), float(ref.smoluchowski_c(t, 2))))
    return rows


def _agreement(rows: Sequence[CompareRow], attr: str) -> float:
    scored = [r for r in rows if r.t > 0]
    if not scored:
        return float("nan")
    return sum(abs(getattr(r, attr)) <= Z_THRESHOLD for r in scored) / len(scored)


def compare(preset: ExperimentPreset, result: EnsembleResult,
            report_times: Sequence[float] | None = None) -> CompareReport:
    """Overlay both references on an ensemble of ``preset`` and judge the regime."""
    obs = "count_at_mass(2)"
    all_rows = _rows(result, obs)
    rows = all_rows if report_times is None else _rows(result, obs, report_times)
    report = CompareReport(preset.name, rows, result.replicas, preset.gamma)

    report.verdict["flory_agreement"] = round(_agreement(all_rows, "z_flory"), 3)
    report.verdict["smoluchowski_agreement"] = round(_agreement(all_rows, "z_smolu"), 3)

    if preset.regime == "fraction":
        report.T1_expected = ref.T1(preset.gamma)
        per_replica = [count_transitions(tr.times, tr.values["active_mass_fraction"],
                                         preset.gamma)
                       for tr in result.trajectories]
        report.transition_counts = [len(p) for p in per_replica]
        depth = max(report.transition_counts, default=0)
        report.transition_times = [
            float(np.mean([p[k] for p in per_replica if len(p) > k])) for k in range(depth)]
        before = [r for r in all_rows if 0 < r.t < report.T1_expected]
        first_dev = next((r.t for r in all_rows if abs(r.z_flory) > Z_THRESHOLD), None)
        report.verdict["flory_before_T1"] = all(abs(r.z_flory) <= Z_THRESHOLD for r in before)
        report.verdict["first_flory_deviation"] = first_dev
        report.verdict["behaviour_changes"] = int(np.median(report.transition_counts))
    elif preset.regime == "flory":
        report.verdict["tracks"] = "flory" if report.verdict["flory_agreement"] >= 0.9 else "?"
    else:
        report.verdict["tracks"] = ("smoluchowski"
                                    if report.verdict["smoluchowski_agreement"] >= 0.9 else "?")
    return report


def run_preset(preset: "ExperimentPreset | str", replicas: int = 20, seed: int = 0,
               grid: Sequence[float] = DEFAULT_GRID,
               report_times: Sequence[float] | None = None,
               workers: int | None = None) -> tuple[CompareReport, EnsembleResult]:
    if isinstance(preset, str):
        preset = get_preset(preset)
    if report_times:
        grid = tuple(sorted(set(grid) | {float(t) for t in report_times}))
    result = run_ensemble(preset.config(replicas, seed, grid), workers=workers)
    return compare(preset, result, report_times), result


# --- figure output -----------------------------------------------------------


def figure_csv(result: EnsembleResult) -> str:
    obs = "count_at_mass(2)"
    lines = ["t,mc_mean,mc_se,flory_ref,smolu_ref"]
    for k, t in enumerate(result.times):
        vals = (t, result.mean[obs][k], result.se[obs][k],
                ref.flory_c(t, 2), ref.smoluchowski_c(t, 2))
        lines.append(",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def figure_svg(result: EnsembleResult, title: str = "", width: int = 640,
               height: int = 400) -> str:
    """Static line chart of the MC curve against both references."""
    obs = "count_at_mass(2)"
    t = np.asarray(result.times, dtype=float)
    tf = np.linspace(t.min(), t.max(), 301)
    series = [
        ("Monte Carlo", t, result.mean[obs], "#000000", ""),
        ("Flory", tf, ref.flory_c(tf, 2), "#1f77b4", "6,4"),
        ("Smoluchowski", tf, ref.smoluchowski_c(tf, 2), "#d62728", "2,3"),
    ]
    ymax = max(float(np.max(s[2])) for s in series) * 1.05 or 1.0
    x0, x1 = float(t.min()), float(t.max()) or 1.0
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - y / ymax * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
             f' font-family="sans-serif" font-size="12">',
             f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{title}</text>')
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = ymax * k / 4
        parts.append(f'<text x="{px(xv):.1f}" y="{height - 20}" text-anchor="middle">{xv:g}</text>')
        parts.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3f}</text>')
    for k, (label, xs, ys, color, dash) in enumerate(series):
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}"'
                     f' stroke-width="1.5"{style}/>')
        ly = top + 16 + 16 * k
        parts.append(f'<line x1="{width - 150}" y1="{ly}" x2="{width - 125}" y2="{ly}"'
                     f' stroke="{color}"{style}/>')
        parts.append(f'<text x="{width - 120}" y="{ly + 4}">{label}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 4}" text-anchor="middle">t</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- giant particle ------------------------------------------------------------


@dataclass
class GiantReport:
    times: list[float]
    mean: list[float]
    se: list[float]
    reference: list[float]
    tail_integrals: dict[float, tuple[float, float]]

    @property
    def deviation(self) -> list[float]:
        return [m - r for m, r in zip(self.mean, self.reference)]

    def format(self) -> str:
        out = [f"{'t':>6} {'M1/m':>8} {'se':>8} {'1-t*/t':>8} {'dev':>8}"]
        for row in zip(self.times, self.mean, self.se, self.reference, self.deviation):
            out.append("{:6.2f} {:8.4f} {:8.4f} {:8.4f} {:8.4f}".format(*row))
        for b, (mu, s) in self.tail_integrals.items():
            out.append(f"int second_tail(b={b:g}) ds over (1, t_max]: {mu:.5f} +/- {s:.5f}")
        return "\n".join(out)


def giant_particle_report(n: int = 10**4, replicas: int = 20, times: Sequence[float] = (1.5, 2.0, 3.0),
                          seed: int = 0, b_values: Sequence[float] = (10, 100, 1000),
                          dt: float = 0.01, workers: int | None = None) -> GiantReport:
    """Largest-particle fraction against ``1 - t*/t`` without cutoff.

    Also integrates ``second_tail(b)`` (mass in non-largest particles of size
    at least ``b``) over ``(1, t_max]`` by the trapezoid rule on a ``dt`` grid.
    """
    times = [float(t) for t in times]
    if any(t <= 1.0 for t in times):
        raise ConfigError("giant-particle comparison times must exceed the gel time 1")
    t_max = max(times)
    fine = [1.0 + dt * k for k in range(int(round((t_max - 1.0) / dt)) + 1)]
    grid = tuple(sorted(set(round(t, 10) for t in fine + times)))
    obs = ["mass_fraction_largest"] + [f"second_tail({b:g})" for b in b_values]
    config = SimConfig(KernelSpec.multiplicative(), n, t_max, grid, seed=seed,
                       replicas=replicas, observables=tuple(obs))
    result = run_ensemble(config, workers=workers)
    idx = [int(np.argmin(np.abs(result.times - t))) for t in times]
    mf = "mass_fraction_largest"
    tails = {}
    for b, name in zip(b_values, config.observables[1:]):
        per_rep = [np.trapezoid(tr.values[name], tr.times) for tr in result.trajectories]
        se = np.std(per_rep, ddof=1) / math.sqrt(replicas) if replicas > 1 else 0.0
        tails[float(b)] = (float(np.mean(per_rep)), float(se))
    return GiantReport(
        times=times,
        mean=[float(result.mean[mf][k]) for k in idx],
        se=[float(result.se[mf][k]) for k in idx],
        reference=[1.0 - ref.flory_mass(t) for t in times],
        tail_integrals=tails,
    )

"""Exact event-driven simulation of the Marcus-Lushnikov coalescence process.

Each unordered pair of active particles ``{i, j}`` merges at rate
``K_a(x_i, x_j) / m``.  Pairs are proposed from the kernel's majorant
``C (x_i^a x_j + x_i x_j^a)``, which factorises into one draw proportional to
``x^a`` and one proportional to ``x``; summed over ordered pairs ``i != j`` it
gives the clock rate

    R = (C / m) * (S_a * S_1 - S_{1+a})

with ``S_p`` the sum of ``x^p`` over active particles.  For the
multiplicative and symmetric families the majorant equals the kernel, so every
proposal is an event (exact-rate mode).  For the Aldous family proposals are
accepted with probability ``K / majorant`` and rejected proposals only advance
the clock (thinning).
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernel as kern
from .errors import ConfigError
from .kernel import Cutoff, Family, KernelSpec
from .system import ObservableSpec, ParticleSystem, evaluate_observable

__all__ = [
    "CutoffMode",
    "SimConfig",
    "Trajectory",
    "EnsembleResult",
    "UniformStream",
    "total_rate_naive",
    "total_rate_product_closed_form",
    "majorant_rate",
    "sample_pair",
    "step",
    "run",
    "run_ensemble",
    "band_integral",
    "replica_generator",
    "trajectory_csv",
    "ensemble_csv",
    "event_log_csv",
]

DEFAULT_OBSERVABLES = ("count_at_mass(2)", "mass_fraction_largest")


class UniformStream:
    """Buffered uniforms in [0, 1) drawn from a numpy Generator."""

    def __init__(self, generator: np.random.Generator, block: int = 8192):
        self.generator = generator
        self.block = block
        self._buf: list[float] = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.generator.random(self.block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _as_stream(rng) -> UniformStream:
    if isinstance(rng, UniformStream):
        return rng
    if isinstance(rng, np.random.Generator):
        return UniformStream(rng)
    return UniformStream(np.random.default_rng(rng))


def replica_generator(seed: int, replica: int) -> np.random.Generator:
    """Independent, reproducible PCG64 stream for ``(seed, replica)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.PCG64(ss))


# --- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class CutoffMode:
    """How the cutoff is chosen: ``none`` (a = m), ``absolute`` or ``fraction`` (a = gamma m)."""

    kind: str = "none"
    value: float | None = None

    def __post_init__(self):
        if self.kind == "none":
            if self.value is not None:
                raise ConfigError("cutoff mode 'none' takes no value")
        elif self.kind == "absolute":
            if self.value is None or not self.value > 0:
                raise ConfigError("absolute cutoff must be positive")
        elif self.kind == "fraction":
            if self.value is None or not 0.0 < self.value <= 1.0:
                raise ConfigError("cutoff fraction gamma must lie in (0, 1]")
        else:
            raise ConfigError(f"unknown cutoff mode {self.kind!r}")

    def resolve(self, total_mass: float) -> Cutoff:
        if self.kind == "none":
            return Cutoff(total_mass)
        if self.kind == "absolute":
            return Cutoff(self.value)
        return Cutoff(self.value * total_mass)

    def to_dict(self) -> dict:
        if self.kind == "none":
            return {"mode": "none"}
        if self.kind == "absolute":
            return {"mode": "absolute", "a": self.value}
        return {"mode": "fraction", "gamma": self.value}

    @classmethod
    def from_dict(cls, d: dict | None) -> "CutoffMode":
        if d is None:
            return cls()
        mode = d.get("mode", "none")
        if mode == "absolute":
            return cls("absolute", float(d["a"]))
        if mode == "fraction":
            return cls("fraction", float(d["gamma"]))
        return cls(mode)


@dataclass(frozen=True)
class SimConfig:
    kernel: KernelSpec
    n: int
    t_max: float
    obs_grid: tuple[float, ...]
    cutoff: CutoffMode = field(default_factory=CutoffMode)
    initial_masses: tuple[float, ...] | None = None
    seed: int = 0
    replicas: int = 1
    observables: tuple[str, ...] = DEFAULT_OBSERVABLES

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        if not self.t_max > 0:
            raise ConfigError("t_max must be positive")
        grid = tuple(float(t) for t in self.obs_grid)
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ConfigError("obs_grid must be sorted")
        if grid and (grid[0] < 0 or grid[-1] > self.t_max):
            raise ConfigError("obs_grid must lie within [0, t_max]")
        if self.replicas < 1:
            raise ConfigError("replicas must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.initial_masses is not None:
            if len(self.initial_masses) != self.n:
                raise ConfigError("n must equal the number of initial masses")
            if any(not x > 0 for x in self.initial_masses):
                raise ConfigError("initial masses must be positive")
        obs = tuple(ObservableSpec.parse(o).name for o in self.observables)
        object.__setattr__(self, "obs_grid", grid)
        object.__setattr__(self, "observables", obs)

    @property
    def total_mass(self) -> float:
        if self.initial_masses is None:
            return float(self.n)
        return math.fsum(self.initial_masses)

    @property
    def resolved_cutoff(self) -> Cutoff:
        return self.cutoff.resolve(self.total_mass)

    def initial_system(self) -> ParticleSystem:
        cut = self.resolved_cutoff
        if self.initial_masses is None:
            return ParticleSystem.new_monodisperse(self.n, cut, self.kernel.alpha)
        return ParticleSystem.from_masses(self.initial_masses, cut, self.kernel.alpha)

    def replace(self, **changes) -> "SimConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return SimConfig(**d)

    # JSON ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "n": self.n,
            "initial": ("monodisperse" if self.initial_masses is None
                        else {"masses": list(self.initial_masses)}),
            "cutoff": self.cutoff.to_dict(),
            "t_max": self.t_max,
            "obs_grid": list(self.obs_grid),
            "seed": self.seed,
            "replicas": self.replicas,
            "observables": list(self.observables),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        try:
            kernel = KernelSpec.from_dict(d.get("kernel", {"family": "multiplicative"}))
            initial = d.get("initial", "monodisperse")
            masses = None
            if initial != "monodisperse":
                if not isinstance(initial, dict) or "masses" not in initial:
                    raise ConfigError(f"bad initial condition {initial!r}")
                masses = tuple(float(x) for x in initial["masses"])
            n = d.get("n", len(masses) if masses is not None else None)
            if n is None:
                raise ConfigError("config needs 'n'")
            return cls(
                kernel=kernel,
                n=int(n),
                t_max=float(d["t_max"]),
                obs_grid=tuple(d.get("obs_grid", ())),
                cutoff=CutoffMode.from_dict(d.get("cutoff")),
                initial_masses=masses,
                seed=int(d.get("seed", 0)),
                replicas=int(d.get("replicas", 1)),
                observables=tuple(d.get("observables", DEFAULT_OBSERVABLES)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d)


# --- rates and pair selection -----------------------------------------------


def total_rate_naive(sys: ParticleSystem, kernel: KernelSpec,
                     cutoff: Cutoff | None = None) -> float:
    """``(1/m) * sum_{i<j} K_a(x_i, x_j)`` by direct enumeration."""
    cut = sys.cutoff if cutoff is None else cutoff
    xs = sys.masses().tolist()
    total = 0.0
    for p in range(len(xs)):
        for q in range(p + 1, len(xs)):
            total += kern.evaluate_cutoff(kernel, cut, xs[p], xs[q])
    return total / sys.total_mass


def total_rate_product_closed_form(sys: ParticleSystem,
                                   kernel: KernelSpec | None = None) -> float:
    """Total rate for ``K = xy``: ``(S_1^2 - S_2) / (2m)`` over active particles."""
    if kernel is not None and kernel.family is not Family.MULTIPLICATIVE:
        raise RuntimeError("closed-form rate only holds for the multiplicative kernel")
    if sys.alpha != 1.0:
        raise RuntimeError("closed-form rate needs a system indexed with alpha = 1")
    if sys.active_count < 2:
        return 0.0
    s1 = sys.sum_mass_active
    return (s1 * s1 - sys.sum_mass_1alpha_active) / (2.0 * sys.total_mass)


def majorant_rate(sys: ParticleSystem, kernel: KernelSpec) -> float:
    """Clock rate of the proposal process, ``(C/m)(S_a S_1 - S_{1+a})``."""
    if sys.active_count < 2:
        return 0.0
    r = (sys.tree_xa.tree[1] * sys.tree_x.tree[1] - sys.tree_x1a.tree[1])
    return max(r, 0.0) * kernel.c_upper / sys.total_mass


def _check_alpha(sys: ParticleSystem, kernel: KernelSpec):
    if sys.alpha != kernel.alpha:
        raise RuntimeError(
            f"system indexed with alpha={sys.alpha} but kernel has alpha={kernel.alpha}")


def _propose(sys: ParticleSystem, u) -> tuple[int, int]:
    txa, tx = sys.tree_xa, sys.tree_x
    while True:
        i = txa.find(u())
        j = tx.find(u())
        if i != j:
            return i, j


def _accept(kernel: KernelSpec, xi: float, xj: float, u) -> bool:
    if kernel.is_tight:
        return True
    k = kern.evaluate(kernel, xi, xj)
    return u() * kernel.c_upper * kern.envelope(kernel.alpha, xi, xj) < k


def sample_pair(sys: ParticleSystem, kernel: KernelSpec, rng) -> tuple[int, int]:
    """Draw an active pair of slots with probability proportional to ``K(x_i, x_j)``."""
    _check_alpha(sys, kernel)
    if sys.active_count < 2:
        raise RuntimeError("sample_pair needs at least two active particles")
    u = _as_stream(rng)
    mass = sys.mass
    while True:
        i, j = _propose(sys, u)
        if _accept(kernel, mass[i], mass[j], u):
            return i, j


def _next_event(sys: ParticleSystem, kernel: KernelSpec, u, t_now: float):
    """Time and slots of the next accepted proposal, without applying it."""
    t = t_now
    mass = sys.mass
    while True:
        rate = majorant_rate(sys, kernel)
        if rate <= 0.0:
            return math.inf, -1, -1
        t -= math.log(1.0 - u()) / rate
        i, j = _propose(sys, u)
        if _accept(kernel, mass[i], mass[j], u):
            return t, i, j


def step(sys: ParticleSystem, kernel: KernelSpec, rng, t_now: float):
    """Advance to the next coalescence.

    Returns ``(t_next, (i, j, x_i, x_j))`` after merging slots ``i`` and
    ``j``, or ``(inf, None)`` when no active pair is left (absorption).
    """
    _check_alpha(sys, kernel)
    t, i, j = _next_event(sys, kernel, _as_stream(rng), t_now)
    if i < 0:
        return math.inf, None
    xi, xj = sys.mass[i], sys.mass[j]
    sys.coalesce(i, j)
    return t, (i, j, xi, xj)


# --- runs --------------------------------------------------------------------


class _BandSums:
    """Running ``sum x`` and ``sum x^2`` over particles with mass in ``[b, a]``."""

    def __init__(self, b: float, a: float, masses):
        self.b, self.a = b, a
        inside = [x for x in masses if b <= x <= a]
        self.s1 = math.fsum(inside)
        self.s2 = math.fsum(x * x for x in inside)

    def remove(self, x):
        if self.b <= x <= self.a:
            self.s1 -= x
            self.s2 -= x * x

    def add(self, x):
        if self.b <= x <= self.a:
            self.s1 += x
            self.s2 += x * x

    def pair_sum(self) -> float:
        # sum_{i != j} x_i x_j over the band
        return self.s1 * self.s1 - self.s2


@dataclass
class Trajectory:
    times: np.ndarray
    values: dict[str, np.ndarray]
    event_count: int
    wall_clock: float
    final: dict
    replica: int = 0
    band: dict[float, float] = field(default_factory=dict)
    events: list[tuple[int, float, float, float]] | None = None


def run(config: SimConfig, replica: int = 0, *, record_events: bool = False,
        band_b: Sequence[float] = ()) -> Trajectory:
    """Simulate one replica up to ``t_max`` or absorption.

    Observables at grid time ``g`` use the state after the last event at or
    before ``g``.  ``band_b`` lists thresholds ``b`` for which the
    event-wise time integral of ``(1/m^2) sum_{i != j} M_i M_j 1[b <= M <= a]``
    is accumulated over ``[0, t_max]``.
    """
    t0 = time.perf_counter()
    kernel = config.kernel
    sys = config.initial_system()
    m = sys.total_mass
    a = sys.cutoff.a
    specs = [ObservableSpec.parse(o) for o in config.observables]
    grid = config.obs_grid
    t_max = config.t_max
    u = UniformStream(replica_generator(config.seed, replica))

    for b in band_b:
        if not b < a:
            raise ConfigError(f"band threshold b={b} must be below the cutoff a={a}")
    bands = [_BandSums(b, a, sys.masses().tolist()) for b in band_b]
    integrals = [0.0] * len(bands)

    rows: list[list[float]] = []
    events = [] if record_events else None
    n_events = 0
    t = 0.0
    gi = 0

    def record():
        xs = sys.masses()
        rows.append([evaluate_observable(s, xs, m, sys.sum_mass_active) for s in specs])

    while True:
        t_next, i, j = _next_event(sys, kernel, u, t)
        while gi < len(grid) and grid[gi] < t_next:
            record()
            gi += 1
        horizon = min(t_next, t_max)
        for k, band in enumerate(bands):
            integrals[k] += band.pair_sum() * (horizon - t)
        if t_next > t_max:
            break
        xi, xj = sys.mass[i], sys.mass[j]
        sys.coalesce(i, j)
        for band in bands:
            band.remove(xi)
            band.remove(xj)
            band.add(xi + xj)
        if events is not None:
            events.append((n_events, t_next, xi, xj))
        n_events += 1
        t = t_next

    values = {s.name: np.array([r[k] for r in rows], dtype=float)
              for k, s in enumerate(specs)}
    final = {
        "t": min(t, t_max),
        "particles": sys.count,
        "active": sys.active_count,
        "inert": sys.inert_count,
        "largest": sys.largest(),
    }
    return Trajectory(
        times=np.asarray(grid, dtype=float),
        values=values,
        event_count=n_events,
        wall_clock=time.perf_counter() - t0,
        final=final,
        replica=replica,
        band={b: v / (m * m) for b, v in zip(band_b, integrals)},
        events=events,
    )


def _run_one(args):
    config, replica, band_b = args
    return run(config, replica, band_b=band_b)


def _default_workers(replicas: int) -> int:
    cap = os.environ.get("GELKIT_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, replicas))


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: dict[str, np.ndarray]
    se: dict[str, np.ndarray]
    replicas: int
    trajectories: list[Trajectory]
    band_mean: dict[float, float] = field(default_factory=dict)
    band_se: dict[float, float] = field(default_factory=dict)

    @property
    def observables(self) -> list[str]:
        return list(self.mean)


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = samples.mean(axis=0)
    if samples.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])


def run_ensemble(config: SimConfig, *, workers: int | None = None,
                 band_b: Sequence[float] = ()) -> EnsembleResult:
    """Run ``config.replicas`` independent replicas and reduce them.

    Replica ``r`` draws from the stream seeded by ``(config.seed, r)``, so
    results do not depend on ``workers`` or scheduling.
    """
    jobs = [(config, r, tuple(band_b)) for r in range(config.replicas)]
    workers = _default_workers(config.replicas) if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(_run_one, jobs))
    else:
        trajs = [_run_one(job) for job in jobs]

    mean, se = {}, {}
    for name in config.observables:
        mean[name], se[name] = _mean_se(np.stack([t.values[name] for t in trajs]))
    l_mean, l_se = {}, {}
    for b in band_b:
        mu, s = _mean_se(np.array([[t.band[b]] for t in trajs]))
        l_mean[b], l_se[b] = float(mu[0]), float(s[0])
    return EnsembleResult(
        times=np.asarray(config.obs_grid, dtype=float),
        mean=mean, se=se, replicas=config.replicas, trajectories=trajs,
        band_mean=l_mean, band_se=l_se,
    )


def band_integral(states, b: float, a: float, total_mass: float | None = None) -> float:
    """Time integral of ``(1/m^2) sum_{i != j} M_i M_j 1[b <= M_i, M_j <= a]``.

    ``states`` is a sequence of ``(t, masses)``: each state holds from its own
    time up to the next entry's time, and the last entry only marks the end of
    the path.  The path is piecewise constant, so the integral is exact.
    """
    if not b < a:
        raise ConfigError(f"need b < a, got b={b}, a={a}")
    states = list(states)
    total = 0.0
    for (t0, xs), (t1, _) in zip(states, states[1:]):
        xs = np.asarray(xs, dtype=float)
        m = float(xs.sum()) if total_mass is None else total_mass
        band = xs[(xs >= b) & (xs <= a)]
        s1 = float(band.sum())
        total += (s1 * s1 - float(np.sum(band * band))) / (m * m) * (t1 - t0)
    return total


# --- CSV ---------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def trajectory_csv(trajectories: Sequence[Trajectory], observables: Sequence[str]) -> str:
    lines = [",".join(["t", "replica", *observables])]
    if trajectories:
        for k, t in enumerate(trajectories[0].times):
            for tr in trajectories:
                vals = [_fmt(tr.values[o][k]) for o in observables]
                lines.append(",".join([_fmt(t), str(tr.replica), *vals]))
    return "\n".join(lines) + "\n"


def ensemble_csv(result: EnsembleResult) -> str:
    obs = result.observables
    header = ["t"] + [f"{o}_{s}" for o in obs for s in ("mean", "se")]
    lines = [",".join(header)]
    for k, t in enumerate(result.times):
        row = [_fmt(t)]
        for o in obs:
            row += [_fmt(result.mean[o][k]), _fmt(result.se[o][k])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def event_log_csv(trajectory: Trajectory) -> str:
    lines = ["event_index,t,x_i,x_j"]
    for idx, t, xi, xj in trajectory.events or ():
        lines.append(f"{idx},{_fmt(t)},{_fmt(xi)},{_fmt(xj)}")
    return "\n".join(lines) + "\n"

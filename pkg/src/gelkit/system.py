"""Particle-system state for the Marcus-Lushnikov process.

Active particles live in a dense slot array backed by segment trees, one per
weight function (``x``, ``x**alpha`` and ``x**(1+alpha)``), giving O(log n)
proportional draws and point updates.  Inert particles (mass above the
cutoff) never move again; they are kept in a plain list.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .kernel import Cutoff

__all__ = [
    "SumTree",
    "ParticleSystem",
    "ObservableSpec",
    "evaluate_observable",
]


class SumTree:
    """Array-backed binary segment tree of non-negative weights.

    Internal nodes are recomputed from their children on every update, so the
    root total never accumulates floating-point drift.
    """

    def __init__(self, capacity: int):
        size = 1
        while size < capacity:
            size *= 2
        self.size = size
        self.tree = [0.0] * (2 * size)

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "SumTree":
        st = cls(max(len(weights), 1))
        t = st.tree
        t[st.size:st.size + len(weights)] = [float(w) for w in weights]
        for i in range(st.size - 1, 0, -1):
            t[i] = t[2 * i] + t[2 * i + 1]
        return st

    @property
    def total(self) -> float:
        return self.tree[1]

    def __getitem__(self, slot: int) -> float:
        return self.tree[self.size + slot]

    def update(self, slot: int, weight: float) -> None:
        t = self.tree
        i = self.size + slot
        t[i] = weight
        i >>= 1
        while i:
            t[i] = t[2 * i] + t[2 * i + 1]
            i >>= 1

    def find(self, u: float) -> int:
        """Slot whose cumulative range contains ``u * total``, for u in [0, 1)."""
        t = self.tree
        size = self.size
        target = u * t[1]
        i = 1
        while i < size:
            left = 2 * i
            w = t[left]
            if target < w or t[left + 1] <= 0.0:
                i = left
            else:
                target -= w
                i = left + 1
        return i - size


@dataclass(frozen=True)
class ObservableSpec:
    """A functional of the empirical measure, e.g. ``count_at_mass(2)``."""

    kind: str
    param: float | None = None

    KINDS_WITH_PARAM = ("count_at_mass", "tail_mass", "second_tail", "moment")
    KINDS_BARE = ("mass_fraction_largest", "active_mass_fraction")

    def __post_init__(self):
        if self.kind in self.KINDS_WITH_PARAM:
            if self.param is None:
                raise ConfigError(f"observable {self.kind} needs a parameter")
        elif self.kind in self.KINDS_BARE:
            if self.param is not None:
                raise ConfigError(f"observable {self.kind} takes no parameter")
        else:
            raise ConfigError(f"unknown observable {self.kind!r}")

    @classmethod
    def parse(cls, text: "str | ObservableSpec") -> "ObservableSpec":
        if isinstance(text, ObservableSpec):
            return text
        m = re.fullmatch(r"\s*([a-z_]+)\s*(?:\(\s*([^)]*?)\s*\))?\s*", text)
        if m is None:
            raise ConfigError(f"cannot parse observable {text!r}")
        kind, arg = m.groups()
        if arg is None:
            return cls(kind)
        try:
            return cls(kind, float(arg))
        except ValueError:
            raise ConfigError(f"bad observable parameter in {text!r}") from None

    @property
    def name(self) -> str:
        if self.param is None:
            return self.kind
        p = self.param
        return f"{self.kind}({int(p) if p == int(p) else p})"

    def __str__(self):
        return self.name


class ParticleSystem:
    """Multiset of particle masses with an active/inert split under a cutoff.

    Slots ``0..capacity-1`` hold active particles (mass 0.0 marks an empty
    slot).  Merging particles in slots ``i`` and ``j`` writes the result into
    slot ``i`` and empties ``j``; the particle count never grows, so emptied
    slots are never reused.
    """

    def __init__(self, masses: Sequence[float], cutoff: Cutoff | None = None,
                 alpha: float = 1.0):
        masses = [float(x) for x in masses]
        if not masses:
            raise ConfigError("a particle system needs at least one particle")
        if any(not x > 0 or not math.isfinite(x) for x in masses):
            raise ConfigError("particle masses must be positive and finite")
        if not 0.0 < alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
        self.cutoff = cutoff if cutoff is not None else Cutoff()
        self.alpha = float(alpha)
        self.total_mass = math.fsum(masses)

        a = self.cutoff.a
        active = [x for x in masses if x <= a]
        self.inert = [x for x in masses if x > a]
        self.mass = active
        self.active_count = len(active)

        self.tree_x = SumTree.from_weights(active)
        if self.alpha == 1.0:
            self.tree_xa = self.tree_x
            self.tree_x1a = SumTree.from_weights([x * x for x in active])
        else:
            self.tree_xa = SumTree.from_weights([x**alpha for x in active])
            self.tree_x1a = SumTree.from_weights([x ** (1.0 + alpha) for x in active])
        self.mass.extend([0.0] * (self.tree_x.size - len(active)))

    # construction --------------------------------------------------------

    @classmethod
    def new_monodisperse(cls, n: int, cutoff: Cutoff | None = None,
                         alpha: float = 1.0) -> "ParticleSystem":
        if int(n) != n or n < 1:
            raise ConfigError(f"need at least one particle, got n={n}")
        return cls([1.0] * int(n), cutoff, alpha)

    @classmethod
    def from_masses(cls, masses: Iterable[float], cutoff: Cutoff | None = None,
                    alpha: float = 1.0) -> "ParticleSystem":
        return cls(list(masses), cutoff, alpha)

    # aggregates ----------------------------------------------------------

    @property
    def inert_count(self) -> int:
        return len(self.inert)

    @property
    def count(self) -> int:
        return self.active_count + len(self.inert)

    @property
    def sum_mass_active(self) -> float:
        return self.tree_x.total

    @property
    def sum_mass_alpha_active(self) -> float:
        return self.tree_xa.total

    @property
    def sum_mass_1alpha_active(self) -> float:
        return self.tree_x1a.total

    def active_slots(self) -> list[int]:
        return [i for i, x in enumerate(self.mass) if x > 0.0]

    def active_masses(self) -> np.ndarray:
        m = np.asarray(self.mass)
        return m[m > 0.0]

    def masses(self) -> np.ndarray:
        """All particle masses, active then inert, in no particular order."""
        return np.concatenate([self.active_masses(), np.asarray(self.inert, dtype=float)])

    def sorted_masses(self) -> np.ndarray:
        """Masses in decreasing order, M_1 >= M_2 >= ..."""
        return np.sort(self.masses())[::-1]

    # dynamics ------------------------------------------------------------

    def coalesce(self, i: int, j: int) -> float:
        """Merge the active particles in slots ``i`` and ``j``; return the new mass."""
        mass = self.mass
        if i == j:
            raise RuntimeError("cannot coalesce a particle with itself")
        if not (0 <= i < len(mass) and 0 <= j < len(mass)):
            raise RuntimeError(f"slot out of range: {i}, {j}")
        xi, xj = mass[i], mass[j]
        if xi <= 0.0 or xj <= 0.0:
            raise RuntimeError(f"slots {i} and {j} must both hold active particles")
        z = xi + xj
        mass[j] = 0.0
        self._set_weights(j, 0.0)
        self.active_count -= 1
        if z <= self.cutoff.a:
            mass[i] = z
            self._set_weights(i, z)
        else:
            mass[i] = 0.0
            self._set_weights(i, 0.0)
            self.active_count -= 1
            self.inert.append(z)
        return z

    def _set_weights(self, slot: int, x: float) -> None:
        self.tree_x.update(slot, x)
        if x == 0.0:
            if self.tree_xa is not self.tree_x:
                self.tree_xa.update(slot, 0.0)
            self.tree_x1a.update(slot, 0.0)
        elif self.alpha == 1.0:
            self.tree_x1a.update(slot, x * x)
        else:
            self.tree_xa.update(slot, x**self.alpha)
            self.tree_x1a.update(slot, x ** (1.0 + self.alpha))

    # queries -------------------------------------------------------------

    def mass_conserved(self, rel: float = 1e-9) -> bool:
        """Total mass still equals the initial one (exact for integer masses)."""
        return math.isclose(math.fsum(self.masses()), self.total_mass, rel_tol=rel)

    def largest(self) -> float:
        ms = self.masses()
        return float(ms.max())

    def second_largest(self) -> float:
        ms = self.masses()
        if ms.size < 2:
            return 0.0
        return float(np.partition(ms, ms.size - 2)[ms.size - 2])

    def observe(self, stat: "ObservableSpec | str") -> float:
        return evaluate_observable(ObservableSpec.parse(stat), self.masses(),
                                   self.total_mass, self.sum_mass_active)

    def histogram(self) -> list[tuple[float, int]]:
        """Mass histogram as sorted ``(mass, count)`` pairs."""
        values, counts = np.unique(self.masses(), return_counts=True)
        return [(float(v), int(c)) for v, c in zip(values, counts)]

    def snapshot_csv_lines(self, t: float) -> list[str]:
        """Rows ``t,mass,count`` for the current mass histogram."""
        return [f"{t!r},{m!r},{c}" for m, c in self.histogram()]


def evaluate_observable(spec: ObservableSpec, masses: np.ndarray, total_mass: float,
                        active_mass: float | None = None) -> float:
    """Functional of the empirical measure ``(1/m) sum_i delta_{x_i}``."""
    m = total_mass
    kind, p = spec.kind, spec.param
    if kind == "count_at_mass":
        return np.count_nonzero(masses == p) / m
    if kind == "mass_fraction_largest":
        return float(masses.max()) / m
    if kind == "tail_mass":
        return float(masses[masses >= p].sum()) / m
    if kind == "second_tail":
        if masses.size < 2:
            return 0.0
        rest = np.delete(masses, np.argmax(masses))
        return float(rest[rest >= p].sum()) / m
    if kind == "moment":
        return float(np.sum(masses**p)) / m
    if kind == "active_mass_fraction":
        if active_mass is None:
            raise ConfigError("active_mass_fraction needs the active mass")
        return active_mass / m
    raise ConfigError(f"unknown observable {kind!r}")

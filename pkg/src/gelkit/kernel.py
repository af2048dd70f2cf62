"""Coagulation kernels of the strongly gelling class.

Every kernel K here is sandwiched as

    c * (x**a * y + x * y**a) <= K(x, y) <= C * (x**a * y + x * y**a)

for an exponent ``a`` in (0, 1].  The constants travel with the kernel as a
certificate so that the upper envelope can be used as a rejection-sampling
majorant without further checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "Family",
    "KernelSpec",
    "Cutoff",
    "evaluate",
    "evaluate_cutoff",
    "limit_l",
    "majorant",
    "envelope",
]


class Family(str, Enum):
    MULTIPLICATIVE = "multiplicative"
    SYMMETRIC_ALPHA = "symmetric_alpha"
    ALDOUS = "aldous"


def _aldous_ratio_bounds(alpha: float) -> tuple[float, float]:
    # K / (x^a y + x y^a) depends only on r = min/max and is monotone in r,
    # so its extremes sit at r = 1 and r -> 0.
    at_diagonal = 1.0 / (2.0 ** (1.0 + alpha) - 2.0)
    if alpha == 1.0:
        return 0.5, 0.5
    at_zero = 2.0 / (1.0 + alpha)
    return min(at_diagonal, at_zero), max(at_diagonal, at_zero)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family together with its bound certificate.

    ``c_lower`` and ``c_upper`` are the constants of the two-sided bound.
    Use the classmethod constructors; they fill in a valid certificate.
    """

    family: Family
    alpha: float
    c_lower: float
    c_upper: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 < self.c_lower <= self.c_upper:
            raise ValueError("need 0 < c_lower <= c_upper")

    @classmethod
    def multiplicative(cls) -> "KernelSpec":
        return cls(Family.MULTIPLICATIVE, 1.0, 0.5, 0.5)

    @classmethod
    def symmetric_alpha(cls, alpha: float) -> "KernelSpec":
        return cls(Family.SYMMETRIC_ALPHA, float(alpha), 1.0, 1.0)

    @classmethod
    def aldous(cls, alpha: float, c_upper: float | None = None) -> "KernelSpec":
        """Aldous kernel ``2(xy)^(1+a) / ((x+y)^(1+a) - x^(1+a) - y^(1+a))``.

        ``c_upper`` may be loosened above the tight value (a larger majorant
        only costs acceptance rate); it may not be tightened.
        """
        alpha = float(alpha)
        lo, hi = _aldous_ratio_bounds(alpha)
        if c_upper is None:
            c_upper = hi
        elif c_upper < hi:
            raise ValueError(f"c_upper={c_upper} is below the tight bound {hi}")
        return cls(Family.ALDOUS, alpha, lo, float(c_upper))

    @property
    def is_tight(self) -> bool:
        """True when the kernel coincides with its majorant everywhere."""
        return self.family is not Family.ALDOUS

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {"family": self.family.value, "alpha": self.alpha}
        if self.family is Family.ALDOUS and self.c_upper != _aldous_ratio_bounds(self.alpha)[1]:
            d["c_upper"] = self.c_upper
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        family = Family(d["family"])
        if family is Family.MULTIPLICATIVE:
            alpha = d.get("alpha", 1.0)
            if alpha != 1.0:
                raise ValueError("the multiplicative kernel has alpha = 1")
            return cls.multiplicative()
        if "alpha" not in d:
            raise ValueError(f"kernel family {family.value!r} needs 'alpha'")
        if family is Family.SYMMETRIC_ALPHA:
            return cls.symmetric_alpha(d["alpha"])
        return cls.aldous(d["alpha"], d.get("c_upper"))


@dataclass(frozen=True)
class Cutoff:
    """Mass threshold ``a``; particles heavier than ``a`` are inert."""

    a: float = math.inf

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"cutoff must be positive, got {self.a}")

    def is_active(self, x: float) -> bool:
        return x <= self.a


def _check_mass(*masses):
    for m in masses:
        if not m > 0:
            raise ValueError(f"masses must be positive, got {m}")


def envelope(alpha: float, x: float, y: float) -> float:
    """``x**alpha * y + x * y**alpha``."""
    if alpha == 1.0:
        return 2.0 * x * y
    return x**alpha * y + x * y**alpha


def _aldous(alpha: float, x: float, y: float) -> float:
    if x > y:
        x, y = y, x
    r = x / y
    p = 1.0 + alpha
    if r < 1e-8:
        # With r = x/y the denominator is y^p * r * h(r), where
        # h(r) = ((1+r)^p - 1 - r^p) / r = p - r^a + p*a*r/2 + O(r^2),
        # so K = 2 x^a y / h(r).  This form cannot underflow.
        h = p - r**alpha + 0.5 * p * alpha * r
        return 2.0 * x**alpha * y / h
    # expm1/log1p keeps (1+r)^p - 1 accurate for moderately small r
    bracket = math.expm1(p * math.log1p(r)) - r**p
    return 2.0 * x**p / bracket


def evaluate(spec: KernelSpec, x: float, y: float) -> float:
    _check_mass(x, y)
    if spec.family is Family.MULTIPLICATIVE:
        return x * y
    if spec.family is Family.SYMMETRIC_ALPHA:
        return envelope(spec.alpha, x, y)
    return _aldous(spec.alpha, x, y)


def evaluate_cutoff(spec: KernelSpec, cut: Cutoff, x: float, y: float) -> float:
    """Kernel restricted to ``(0, a] x (0, a]``; mass equal to ``a`` is active."""
    _check_mass(x, y)
    if x > cut.a or y > cut.a:
        return 0.0
    return evaluate(spec, x, y)


def limit_l(spec: KernelSpec, x: float) -> float:
    """``lim_{y -> inf} K(x, y) / y``."""
    _check_mass(x)
    if spec.family is Family.MULTIPLICATIVE:
        return x
    if spec.family is Family.SYMMETRIC_ALPHA:
        return x**spec.alpha
    # Aldous: for y >> x the denominator is (1+a) x y^a + O(y^(a-1)), hence
    # K ~ 2 x^a y / (1+a).  At a = 1 the kernel is exactly xy.
    return 2.0 * x**spec.alpha / (1.0 + spec.alpha)


def majorant(spec: KernelSpec, x: float, y: float) -> float:
    _check_mass(x, y)
    return spec.c_upper * envelope(spec.alpha, x, y)

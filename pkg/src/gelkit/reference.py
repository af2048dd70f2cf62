"""Deterministic references for the multiplicative, monodisperse problem and a
truncated discrete solver for general kernels.

For ``K(x, y) = xy`` and unit initial masses both mean-field equations have
closed forms:

    Flory:         c(t, k) = k^(k-2) / k! * t^(k-1) * exp(-k t)
    Smoluchowski:  same for t <= 1, and k^(k-2) / k! * exp(-k) / t for t >= 1

The prefactor is evaluated in log space (via lgamma) so that large ``k`` does
not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import kernel as kern
from .errors import SolverError
from .kernel import Family, KernelSpec

__all__ = [
    "flory_c",
    "log_flory_c",
    "smoluchowski_c",
    "t_star",
    "flory_mass",
    "smoluchowski_mass",
    "T1",
    "gel_time_upper_bound",
    "band_bound_constant",
    "series_mass",
    "OdeState",
    "OdeSolution",
    "DiscreteCoagulation",
    "ode_solve",
    "ode_step",
]


def _log_prefactor(k):
    # log(k^(k-2) / k!)
    return (k - 2.0) * np.log(k) - gammaln(k + 1.0)


def _check_k(k):
    k = np.asarray(k, dtype=float)
    if np.any(k < 1) or np.any(k != np.floor(k)):
        raise ValueError("k must be an integer >= 1")
    return k


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def log_flory_c(t, k):
    """``log c(t, k)`` for ``t > 0``; finite even where ``c`` underflows."""
    k = _check_k(k)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("log_flory_c needs t > 0")
    return _scalar_or_array(_log_prefactor(k) + (k - 1.0) * np.log(t) - k * t)


def flory_c(t, k):
    """Explicit Flory concentration of size-``k`` clusters at time ``t``."""
    k = _check_k(k)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    t, k = np.broadcast_arrays(t, k)
    out = np.zeros(t.shape)
    pos = t > 0
    out[pos] = np.exp(log_flory_c(t[pos], k[pos]))
    out[~pos & (k == 1)] = 1.0
    return _scalar_or_array(out)


def smoluchowski_c(t, k):
    """Explicit Smoluchowski concentration; coincides with Flory on ``[0, 1]``."""
    k = _check_k(k)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    t, k = np.broadcast_arrays(t, k)
    out = np.asarray(flory_c(np.minimum(t, 1.0), k), dtype=float).copy()
    post = t > 1.0
    out[post] = np.exp(_log_prefactor(k[post]) - k[post]) / t[post]
    return _scalar_or_array(out)


def t_star(t: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Root in (0, 1) of ``x exp(-x) = t exp(-t)``, for ``t > 1``.

    ``x exp(-x)`` increases on (0, 1), so plain bisection on the bracket is
    guaranteed to converge.  Iteration stops once the bracket is narrower
    than ``tol`` relative to its upper end (hence also absolutely, as the
    root is below 1), which keeps tiny roots at large ``t`` accurate.
    """
    if not t > 1:
        raise ValueError(f"t_star needs t > 1, got {t}")
    target = t * math.exp(-t)
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    return 0.5 * (lo + hi)


def flory_mass(t: float) -> float:
    """First moment of the explicit Flory solution: 1 up to t = 1, then t*/t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t <= 1.0:
        return 1.0
    return t_star(t) / t


def smoluchowski_mass(t: float) -> float:
    """First moment of the explicit Smoluchowski solution: 1, then 1/t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return 1.0 if t <= 1.0 else 1.0 / t


def T1(gamma: float) -> float:
    """Time at which the Flory gel first holds a fraction ``gamma`` of the mass."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return -math.log1p(-gamma) / gamma


def gel_time_upper_bound(kernel: KernelSpec, mu0_moment: float) -> float:
    """Upper bound on the gelation time.

    ``mu0_moment`` is ``<mu_0, x^(1-alpha)>`` for an initial measure of unit
    mass; the bound is ``mu0_moment / ((1 - 2^-alpha) c)``.
    """
    if not mu0_moment > 0:
        raise ValueError("the initial moment must be positive")
    return mu0_moment / ((1.0 - 2.0 ** (-kernel.alpha)) * kernel.c_lower)


def band_bound_constant(kernel: KernelSpec) -> float:
    """``L = 1 / (c (1 - 2^-alpha))``, bounding the pre-factor of ``L / b^alpha``."""
    return 1.0 / (kernel.c_lower * (1.0 - 2.0 ** (-kernel.alpha)))


def series_mass(model: str, t: float, k_max: int) -> float:
    """``sum_{k <= k_max} k c(t, k)`` for the explicit solution of ``model``."""
    k = np.arange(1, k_max + 1, dtype=float)
    c = flory_c(t, k) if _model(model) == "flory" else smoluchowski_c(t, k)
    return float(np.sum(k * c))


def _model(model: str) -> str:
    m = model.lower()
    if m in ("flory", "f"):
        return "flory"
    if m in ("smoluchowski", "smolu", "s"):
        return "smoluchowski"
    raise ValueError(f"unknown model {model!r}")


# --- truncated discrete system -----------------------------------------------


@dataclass
class OdeState:
    t: float
    c: np.ndarray
    gel_mass: float

    @property
    def k_max(self) -> int:
        return self.c.size


@dataclass
class OdeSolution:
    """Saved states of a truncated solve.

    ``c[s, k-1]`` is ``c_k`` at ``times[s]``.  ``lost_mass`` is
    ``1 - sum_k k c_k``: the gel in the Flory model, pure truncation loss in
    the Smoluchowski model.
    """

    model: str
    times: np.ndarray
    c: np.ndarray
    lost_mass: np.ndarray

    @property
    def mass(self) -> np.ndarray:
        return 1.0 - self.lost_mass

    def at(self, t: float) -> np.ndarray:
        s = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[s], t, abs_tol=1e-9):
            raise KeyError(f"time {t} was not saved")
        return self.c[s]


class DiscreteCoagulation:
    """Right-hand side of the discrete equations truncated at ``k_max``.

        dc_k/dt = 1/2 sum_{i+j=k} K(i,j) c_i c_j - c_k sum_{j<=k_max} K(k,j) c_j
                  - [Flory] c_k l(k) (1 - sum_j j c_j)

    Pairs with ``i + j > k_max`` still deplete ``c_i`` and ``c_j``; the mass
    they create leaves the resolved range.
    """

    def __init__(self, model: str, kernel: KernelSpec, k_max: int):
        if k_max < 2:
            raise ValueError("k_max must be at least 2")
        self.model = _model(model)
        self.kernel = kernel
        self.k_max = k_max
        k = np.arange(1, k_max + 1, dtype=float)
        self.k = k
        self.l = np.array([kern.limit_l(kernel, x) for x in k])
        if kernel.family is Family.MULTIPLICATIVE:
            self.K = np.outer(k, k)
        elif kernel.family is Family.SYMMETRIC_ALPHA:
            ka = k**kernel.alpha
            self.K = np.outer(ka, k) + np.outer(k, ka)
        else:
            self.K = np.array([[kern.evaluate(kernel, x, y) for y in k] for x in k])
        self._ka = k**kernel.alpha
        idx = np.add.outer(np.arange(k_max), np.arange(k_max))  # (i+j) - 2
        self._sum_index = idx.ravel()

    def gain(self, c: np.ndarray) -> np.ndarray:
        fam = self.kernel.family
        if fam is Family.MULTIPLICATIVE:
            kc = self.k * c
            full = 0.5 * np.convolve(kc, kc)
        elif fam is Family.SYMMETRIC_ALPHA:
            full = np.convolve(self._ka * c, self.k * c)
        else:
            w = (self.K * np.outer(c, c)).ravel()
            full = 0.5 * np.bincount(self._sum_index, weights=w,
                                     minlength=2 * self.k_max - 1)
        # full[s] collects i + j = s + 2
        g = np.zeros(self.k_max)
        g[1:] = full[: self.k_max - 1]
        return g

    def truncation_flux(self, c: np.ndarray) -> float:
        """Mass per unit time carried past ``k_max`` by coagulation."""
        w = (self.K * np.outer(c, c)).ravel()
        full = 0.5 * np.bincount(self._sum_index, weights=w,
                                 minlength=2 * self.k_max - 1)
        sizes = np.arange(2, 2 * self.k_max + 1, dtype=float)
        return float(np.sum((sizes * full)[self.k_max - 1:]))

    def lost_mass(self, c: np.ndarray) -> float:
        return 1.0 - float(np.dot(self.k, c))

    def __call__(self, c: np.ndarray) -> np.ndarray:
        dc = self.gain(c) - c * (self.K @ c)
        if self.model == "flory":
            dc -= c * self.l * self.lost_mass(c)
        return dc


def _rk4(rhs, c, dt):
    k1 = rhs(c)
    k2 = rhs(c + 0.5 * dt * k1)
    k3 = rhs(c + 0.5 * dt * k2)
    k4 = rhs(c + dt * k3)
    return c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def ode_step(state: OdeState, rhs: DiscreteCoagulation, dt: float) -> OdeState:
    """One classical RK4 step."""
    c = _rk4(rhs, state.c, dt)
    _check_blowup(c, state.t + dt)
    return OdeState(state.t + dt, c, rhs.lost_mass(c))


def _check_blowup(c, t):
    if not np.all(np.isfinite(c)) or np.max(np.abs(c)) > 1e6:
        k = int(np.argmax(np.where(np.isfinite(c), np.abs(c), np.inf))) + 1
        raise SolverError(f"solution blew up at t={t:.6g} (|c_{k}| = {abs(c[k - 1]):.3g});"
                          " reduce dt")


def ode_solve(model: str, kernel: KernelSpec, k_max: int = 300, t_max: float = 3.0,
              dt: float = 1e-3, save_every: float | None = 0.01) -> OdeSolution:
    """Integrate the truncated system from the monodisperse state ``c = (1, 0, ...)``.

    States are saved every ``save_every`` time units (a multiple of ``dt``);
    ``None`` saves every step.
    """
    if not dt > 0 or not t_max > 0:
        raise ValueError("dt and t_max must be positive")
    rhs = DiscreteCoagulation(model, kernel, k_max)
    n_steps = int(round(t_max / dt))
    stride = 1 if save_every is None else int(round(save_every / dt))
    if stride < 1 or (save_every is not None and not math.isclose(stride * dt, save_every)):
        raise ValueError("save_every must be a positive multiple of dt")

    c = np.zeros(k_max)
    c[0] = 1.0
    times, cs, lost = [0.0], [c.copy()], [0.0]
    for s in range(1, n_steps + 1):
        c = _rk4(rhs, c, dt)
        if s % stride == 0 or s == n_steps:
            _check_blowup(c, s * dt)
            times.append(s * dt)
            cs.append(c.copy())
            lost.append(rhs.lost_mass(c))
    _check_blowup(c, n_steps * dt)
    return OdeSolution(rhs.model, np.array(times), np.array(cs), np.array(lost))

"""Benchmark mechanical systems.

Two contact problems drive the comparisons: a seven-DOF four-wheel dolly
with unilateral ground springs under an impulsive wheel load, and a
particle bouncing elastically on a rigid wall (penalty contact spring).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import SystemState

__all__ = [
    "DollyParams",
    "Dolly",
    "build_dolly",
    "dolly_initial_state",
    "BounceParams",
    "Bounce",
    "build_bounce",
    "bounce_initial_state",
    "bounce_analytic",
    "bounce_times",
    "LinearSystem",
]


@dataclass(frozen=True)
class DollyParams:
    m: float = 8.7563           # wheel mass [kg]
    M_body: float = 525.3804    # body translational inertia, DOF 5
    I: float = 6.77908975       # rotational inertias, DOFs 6-7 [kg m^2]
    c: float = 700.51           # suspension damping [N s/m]
    k: float = 87563.43         # suspension stiffness [N/m]
    K_ground: float = 175126.85  # ground contact springs [N/m]
    L: float = 0.6096           # half track [m]
    W: float = 5151.04          # dead load on the body [N]
    f_max: float = 2224.11      # pulse peak on wheel 1 [N]
    t_bar: float = 0.025        # pulse half-width [s]
    symmetric_pulse: bool = False  # apply the pulse to all four wheels

    def __post_init__(self):
        for name in ("m", "M_body", "I", "c", "k", "K_ground", "L", "W", "f_max", "t_bar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class Dolly:
    """Four-wheel dolly: DOFs 1-4 wheels, 5 body heave, 6-7 body rotations."""

    dof_count = 7

    def __init__(self, p: DollyParams):
        self.params = p
        c, k, L = p.c, p.k, p.L
        # sign pattern of the wheel-to-body couplings (columns 5, 6, 7)
        S = np.array([[-1.0, -L, L],
                      [-1.0, L, L],
                      [-1.0, -L, -L],
                      [-1.0, L, -L]])
        B = np.zeros((7, 7))
        B[:4, :4] = np.eye(4)
        B[:4, 4:] = S
        B[4:, :4] = S.T
        B[4, 4] = 4.0
        B[5, 5] = B[6, 6] = 4.0 * L * L
        self.C = c * B
        self.K_base = k * B  # suspension only; ground springs added per state
        self.mass_diagonal = np.array([p.m] * 4 + [p.M_body, p.I, p.I])
        self.mass_diagonal.setflags(write=False)
        self._inv_m = 1.0 / self.mass_diagonal
        # C and K_base share the pattern, so f_int = B (c v + k d) + ground
        self._B = B
        self._c = c
        self._k = k

    def pulse(self, t: float) -> float:
        p = self.params
        if 0.0 <= t <= p.t_bar:
            return p.f_max * t / p.t_bar
        if p.t_bar < t <= 2.0 * p.t_bar:
            return p.f_max * (2.0 - t / p.t_bar)
        return 0.0

    def ground_stiffness(self, d: np.ndarray) -> np.ndarray:
        """Active stiffness of the four ground springs (K when d_i <= 0)."""
        return np.where(np.asarray(d)[:4] <= 0.0, self.params.K_ground, 0.0)

    def stiffness_matrix(self, d: np.ndarray) -> np.ndarray:
        K = self.K_base.copy()
        K[range(4), range(4)] += self.ground_stiffness(d)
        return K

    def external_force(self, t: float) -> np.ndarray:
        f = np.zeros(7)
        f1 = self.pulse(t)
        if self.params.symmetric_pulse:
            f[:4] = f1
        else:
            f[0] = f1
        f[4] = -self.params.W
        return f

    def force(self, t: float, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        f = self._B @ (self._c * v + self._k * d)
        g = self.params.K_ground
        for i in range(4):
            if d[i] <= 0.0:
                f[i] += g * d[i]
        f = -f
        f1 = self.pulse(t)
        if self.params.symmetric_pulse:
            f[:4] += f1
        else:
            f[0] += f1
        f[4] -= self.params.W
        return f * self._inv_m

    def ground_forces(self, d: np.ndarray) -> np.ndarray:
        """Forces FK5..FK8 in the ground springs, ``k_i(d) * d``; shape (..., 4)."""
        d = np.asarray(d, dtype=float)[..., :4]
        return np.where(d <= 0.0, self.params.K_ground * d, 0.0)


def build_dolly(p: DollyParams | None = None) -> Dolly:
    return Dolly(p or DollyParams())


def dolly_initial_state(p: DollyParams | None = None) -> SystemState:
    """Static equilibrium under the dead load, at rest."""
    p = p or DollyParams()
    wheel = -p.W / (4.0 * p.K_ground)
    series = p.k * p.K_ground / (p.k + p.K_ground)
    body = -p.W / (4.0 * series)
    d = np.array([wheel] * 4 + [body, 0.0, 0.0])
    v = np.zeros(7)
    a = Dolly(p).force(0.0, d, v)
    return SystemState(0.0, d, v, a)


@dataclass(frozen=True)
class BounceParams:
    g: float = 10.0        # gravity [m/s^2]
    h0: float = 1.25       # launch height [m]
    k_c: float = 1e10      # contact stiffness [N/m]
    mass: float = 1.0      # [kg]
    dt_crit: float = 2e-5  # [s]

    def __post_init__(self):
        for name in ("g", "h0", "k_c", "mass", "dt_crit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


class Bounce:
    """Particle falling onto a fixed particle; penalty spring while ``h <= 0``."""

    dof_count = 1

    def __init__(self, p: BounceParams):
        self.params = p
        self.mass_diagonal = np.array([p.mass])
        self.mass_diagonal.setflags(write=False)
        self._g = p.g
        self._kc_m = p.k_c / p.mass

    def force(self, t: float, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        h = d[0]
        if h <= 0.0:
            return np.array([-self._g - self._kc_m * h])
        return np.array([-self._g])

    def force_scalar(self, t: float, h: float, v: float) -> float:
        if h <= 0.0:
            return -self._g - self._kc_m * h
        return -self._g


def build_bounce(p: BounceParams | None = None) -> Bounce:
    return Bounce(p or BounceParams())


def bounce_initial_state(p: BounceParams | None = None) -> SystemState:
    p = p or BounceParams()
    return SystemState(0.0, [p.h0], [0.0], [-p.g])


@dataclass(frozen=True)
class BounceTimes:
    t_q: float      # first touch
    t_cont: float   # contact duration
    t_ac: float     # lift-off
    t_f: float      # period


def _contact_branch(tc: float, p: BounceParams) -> float:
    w = math.sqrt(p.k_c / p.mass)
    st = p.mass * p.g / p.k_c
    amp = math.sqrt(2.0 * p.mass * p.g * p.h0 / p.k_c)
    return st * math.cos(tc * w) - amp * math.sin(tc * w) - st


_times_cache: dict[BounceParams, BounceTimes] = {}


def bounce_times(p: BounceParams | None = None) -> BounceTimes:
    """Characteristic instants of the exact bounce motion."""
    p = p or BounceParams()
    if p in _times_cache:
        return _times_cache[p]
    t_q = math.sqrt(2.0 * p.h0 / p.g)
    w = math.sqrt(p.k_c / p.mass)
    # the contact branch returns to zero after more than half and less than
    # a full natural period
    lo, hi = 0.5 * math.pi / w, 2.0 * math.pi / w - 1e-3 / w
    try:
        t_cont = brentq(_contact_branch, lo, hi, args=(p,), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except ValueError as exc:
        raise RuntimeError("contact duration root not bracketed") from exc
    times = BounceTimes(t_q, t_cont, t_q + t_cont, 2.0 * t_q + t_cont)
    _times_cache[p] = times
    return times


def bounce_analytic(t, p: BounceParams | None = None):
    """Exact height of the bouncing particle; scalar or array ``t >= 0``."""
    p = p or BounceParams()
    tm = bounce_times(p)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.isfinite(t_arr).all():
        raise ValueError("t must be finite and >= 0")
    # a whole number of periods maps to t_f, not 0, so h(t_f) uses the last branch
    tau = np.mod(t_arr, tm.t_f)
    tau = np.where((tau == 0.0) & (t_arr > 0.0), tm.t_f, tau)
    w = math.sqrt(p.k_c / p.mass)
    st = p.mass * p.g / p.k_c
    amp = math.sqrt(2.0 * p.mass * p.g * p.h0 / p.k_c)
    v_up = math.sqrt(2.0 * p.g * p.h0)
    tc = tau - tm.t_q
    tr = tau - tm.t_ac
    h = np.where(
        tau <= tm.t_q,
        p.h0 - 0.5 * p.g * tau**2,
        np.where(
            tau <= tm.t_ac,
            st * np.cos(tc * w) - amp * np.sin(tc * w) - st,
            tr * v_up - 0.5 * p.g * tr**2,
        ),
    )
    return float(h) if np.ndim(h) == 0 else h


class LinearSystem:
    """Generic linear MDOF system ``diag(m) a + C v + K d = f(t)``."""

    def __init__(self, mass_diagonal, K, C=None, f_ext=None):
        self.mass_diagonal = np.asarray(mass_diagonal, dtype=float).ravel()
        if not (self.mass_diagonal > 0).all():
            raise ValueError("masses must be positive")
        n = self.mass_diagonal.size
        self.dof_count = n
        self.K = np.asarray(K, dtype=float).reshape(n, n)
        self.C = np.zeros((n, n)) if C is None else np.asarray(C, dtype=float).reshape(n, n)
        self.f_ext = f_ext
        self._inv_m = 1.0 / self.mass_diagonal

    def force(self, t: float, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        f = -(self.K @ d) - self.C @ v
        if self.f_ext is not None:
            f = f + self.f_ext(t)
        return f * self._inv_m

"""Explicit direct integrators and the adaptive run loop.

Each integrator makes exactly one force evaluation per step and reproduces
constant-acceleration motion exactly for arbitrary step sequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DivergenceError, MechanicalSystem, SystemState
from .stepcontrol import StepController

__all__ = [
    "IntegratorConfig",
    "StepReport",
    "CDM",
    "EGAlpha",
    "ChungLee",
    "make_integrator",
    "eg_alpha_coefficients",
    "step_cdm",
    "step_eg_alpha",
    "step_chung_lee",
    "run",
    "ZeroProgressError",
]

INTEGRATOR_KINDS = ("CDM", "EGalpha", "ChungLee")


class ZeroProgressError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    kind: str = "CDM"
    rho_b: float = 0.8
    chung_lee_beta: float = 1.0

    def __post_init__(self):
        if self.kind not in INTEGRATOR_KINDS:
            raise ValueError(f"unknown integrator {self.kind!r}; expected one of {INTEGRATOR_KINDS}")
        if not 0.0 <= self.rho_b <= 1.0:
            raise ValueError("rho_b must lie in [0, 1]")
        if not math.isfinite(self.chung_lee_beta):
            raise ValueError("chung_lee_beta must be finite")


@dataclass(frozen=True)
class StepReport:
    new_state: SystemState
    force_evaluations: int = 1


def _check(t, *arrays):
    for x in arrays:
        if not np.isfinite(x).all():
            raise DivergenceError(t)


class CDM:
    """Central differences in single-step (velocity Verlet) form.

    The force at ``t + dt`` sees the predictor velocity ``v + dt a``.
    """

    kind = "CDM"

    def start(self, sys: MechanicalSystem, state: SystemState) -> SystemState:
        a = np.asarray(sys.force(state.t, state.d, state.v), dtype=float)
        return SystemState(state.t, state.d, state.v, a)

    def advance(self, sys, t, d, v, a, dt):
        d1 = d + dt * v + (0.5 * dt * dt) * a
        a1 = sys.force(t + dt, d1, v + dt * a)
        v1 = v + (0.5 * dt) * (a + a1)
        return d1, v1, a1

    def snapshot(self):
        return None

    def restore(self, snap):
        pass

    def config(self):
        return {"kind": self.kind}


def eg_alpha_coefficients(rho_b: float) -> tuple[float, float, float]:
    """``(alpha_m, beta, gamma)`` of the explicit generalized-alpha method.

    ``rho_b`` is the spectral radius at the bifurcation frequency.
    """
    if not 0.0 <= rho_b <= 1.0:
        raise ValueError("rho_b must lie in [0, 1]")
    alpha_m = (2.0 * rho_b - 1.0) / (1.0 + rho_b)
    beta = (5.0 - 3.0 * rho_b) / ((1.0 + rho_b) ** 2 * (2.0 - rho_b))
    gamma = 1.5 - alpha_m
    return alpha_m, beta, gamma


class EGAlpha:
    """Explicit generalized-alpha.

    The new acceleration solves ``(1 - alpha_m) a1 + alpha_m a0 = M^-1 f(t, d0, v0)``,
    then displacement and velocity follow Newmark updates. The stored ``a`` is
    the algorithmic acceleration.
    """

    kind = "EGalpha"

    def __init__(self, rho_b: float = 0.8):
        self.rho_b = rho_b
        self.alpha_m, self.beta, self.gamma = eg_alpha_coefficients(rho_b)

    def start(self, sys, state):
        a = np.asarray(sys.force(state.t, state.d, state.v), dtype=float)
        return SystemState(state.t, state.d, state.v, a)

    def advance(self, sys, t, d, v, a, dt):
        am = self.alpha_m
        f = sys.force(t, d, v)
        a1 = (f - am * a) / (1.0 - am)
        d1 = d + dt * v + (dt * dt) * ((0.5 - self.beta) * a + self.beta * a1)
        v1 = v + dt * ((1.0 - self.gamma) * a + self.gamma * a1)
        return d1, v1, a1

    def snapshot(self):
        return None

    def restore(self, snap):
        pass

    def config(self):
        return {"kind": self.kind, "rho_b": self.rho_b}


class ChungLee:
    """Chung-Lee explicit two-step method, ``1 <= beta <= 28/27``.

    Uses the previous acceleration. Under a step change of ratio
    ``r = dt / dt_prev`` the difference ``a_n - a_{n-1}`` is scaled by ``r``,
    which keeps the fixed-step coefficients when ``r = 1``.
    """

    kind = "ChungLee"

    def __init__(self, beta: float = 1.0):
        self.beta = beta
        self._a_prev = None
        self._dt_prev = None

    def start(self, sys, state):
        a = np.asarray(sys.force(state.t, state.d, state.v), dtype=float)
        self._a_prev = None
        self._dt_prev = None
        return SystemState(state.t, state.d, state.v, a)

    def advance(self, sys, t, d, v, a, dt):
        if self._a_prev is None:
            jump = 0.0 * a
        else:
            jump = (dt / self._dt_prev) * (a - self._a_prev)
        d1 = d + dt * v + (dt * dt) * (0.5 * a + (self.beta - 0.5) * jump)
        v1 = v + dt * (a + 0.5 * jump)
        a1 = sys.force(t + dt, d1, v1)
        self._pending = (a, dt)
        return d1, v1, a1

    def commit(self):
        self._a_prev, self._dt_prev = self._pending

    def snapshot(self):
        return (self._a_prev, self._dt_prev)

    def restore(self, snap):
        self._a_prev, self._dt_prev = snap

    def config(self):
        return {"kind": self.kind, "beta": self.beta}


def make_integrator(cfg: IntegratorConfig | str = "CDM"):
    if isinstance(cfg, str):
        cfg = IntegratorConfig(cfg)
    if cfg.kind == "CDM":
        return CDM()
    if cfg.kind == "EGalpha":
        return EGAlpha(cfg.rho_b)
    return ChungLee(cfg.chung_lee_beta)


def _single_step(integ, sys, s: SystemState, dt: float) -> StepReport:
    if not dt > 0:
        raise ValueError("dt must be positive")
    d1, v1, a1 = integ.advance(sys, s.t, s.d, s.v, s.a, dt)
    _check(s.t + dt, d1, v1, a1)
    return StepReport(SystemState(s.t + dt, d1, v1, a1), 1)


def step_cdm(sys: MechanicalSystem, s: SystemState, dt: float) -> StepReport:
    return _single_step(CDM(), sys, s, dt)


def step_eg_alpha(sys: MechanicalSystem, s: SystemState, dt: float, rho_b: float = 0.8) -> StepReport:
    return _single_step(EGAlpha(rho_b), sys, s, dt)


def step_chung_lee(sys: MechanicalSystem, s: SystemState, dt: float, beta: float = 1.0,
                   a_prev=None, dt_prev: float | None = None) -> StepReport:
    """One Chung-Lee step; without ``a_prev`` the step starts the method."""
    integ = ChungLee(beta)
    if a_prev is not None:
        integ.restore((np.asarray(a_prev, dtype=float), dt if dt_prev is None else dt_prev))
    return _single_step(integ, sys, s, dt)


def _finite_arrays(d, v, a):
    return np.isfinite(d).all() and np.isfinite(v).all() and np.isfinite(a).all()


def _finite_scalars(d, v, a):
    return math.isfinite(d) and math.isfinite(v) and math.isfinite(a)


class _ScalarView:
    dof_count = 1

    def __init__(self, sys):
        self.mass_diagonal = sys.mass_diagonal
        self.force = sys.force_scalar


# a step that would leave less than this fraction of itself before a
# landing point is stretched to land exactly
_SNAP = 1e-3


def run(sys: MechanicalSystem, initial: SystemState, controller: StepController, t_end: float,
        integrator=None, decimate: int = 1, max_steps: int | None = None):
    """Integrate from ``initial`` to ``t_end`` under ``controller``.

    The initial acceleration is recomputed with one (counted) force
    evaluation. Steps are shortened to land exactly on ``t_end`` and on the
    controller's sub-interval boundaries; a rollback restores the state and
    integrator memory saved at the previous boundary.

    Returns
    -------
    RunRecord
    """
    from .harness import RunRecord

    if not initial.t < t_end:
        raise ValueError("initial time must precede t_end")
    if decimate < 1:
        raise ValueError("decimate must be >= 1")
    integ = integrator if integrator is not None else CDM()
    if isinstance(integ, (str, IntegratorConfig)):
        integ = make_integrator(integ)
    s0 = integ.start(sys, initial)
    evals = 1
    controller.reset(s0)
    t, d, v, a = s0.t, s0.d, s0.v, s0.a
    model = sys
    finite = _finite_arrays
    if s0.dof_count == 1 and getattr(sys, "force_scalar", None) is not None:
        # single-DOF models run on Python floats; numpy call overhead dominates otherwise
        model = _ScalarView(sys)
        d, v, a = float(d[0]), float(v[0]), float(a[0])
        finite = _finite_scalars

    rec = RunRecord(meta={"integrator": integ.config(), "controller": controller.config()})
    rec.append(t, d, v, a, math.nan, controller.k_effective, evals)

    spacing = controller.boundary_spacing
    if spacing:
        m_next = int(math.floor(t / spacing + 1e-9)) + 1
        next_b = m_next * spacing
    else:
        m_next = 0
        next_b = math.inf
    ckpt = (t, d, v, a, integ.snapshot(), controller.snapshot(), len(rec), 0)
    commit = getattr(integ, "commit", None)
    floor = controller.dt_floor
    advance = integ.advance
    after_step = controller.after_step
    steps = 0
    rejected_steps = 0
    rejected_intervals = 0
    since_sample = 0

    while t < t_end:
        dt = controller.propose()
        if not dt >= floor or not dt > 0:
            raise ZeroProgressError(f"step {dt!r} below floor {floor!r} at t={t!r}")
        target = next_b if next_b < t_end else t_end
        rem = target - t
        if dt >= rem * (1.0 - _SNAP):
            dt = rem
            t_new = target
        else:
            t_new = t + dt
        d1, v1, a1 = advance(model, t, d, v, a, dt)
        evals += 1
        if not finite(d1, v1, a1):
            rec.meta["diverged_at"] = t_new
            err = DivergenceError(t_new)
            err.record = rec  # accepted samples so far, for partial output
            raise err
        dec = after_step((t, d, v, a), (t_new, d1, v1, a1), dt)
        if dec is not None and dec.reject:
            rejected_steps += 1
            continue
        if commit is not None:
            commit()
        t, d, v, a = t_new, d1, v1, a1
        steps += 1
        since_sample += 1
        on_boundary = t == next_b
        if since_sample >= decimate or t == t_end or on_boundary:
            rec.append(t, d, v, a, dt, controller.k_effective, evals)
            since_sample = 0
        if max_steps is not None and steps >= max_steps:
            raise ZeroProgressError(f"step budget {max_steps} exhausted at t={t!r}")
        if on_boundary:
            dec = controller.on_boundary(t)
            if dec is not None and dec.reject:
                t, d, v, a, isnap, csnap, n_rec, steps_at = ckpt
                integ.restore(isnap)
                controller.restore(csnap)
                rec.truncate(n_rec)
                rejected_intervals += 1
                rejected_steps += steps - steps_at
                steps = steps_at
                continue
            m_next += 1
            next_b = m_next * spacing
            ckpt = (t, d, v, a, integ.snapshot(), controller.snapshot(), len(rec), steps)

    rec.meta.update(
        accepted_steps=steps,
        rejected_steps=rejected_steps,
        rejected_intervals=rejected_intervals,
        force_evaluations=evals,
        t_end=t_end,
    )
    return rec

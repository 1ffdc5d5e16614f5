"""Time-step controllers.

All controllers share one small protocol used by :func:`curvadapt.integrators.run`:

``reset(state)``
    called once with the consistent initial state.
``propose()``
    step size for the next step.
``after_step(prev, new, dt)``
    called after every trial step with raw ``(t, d, v, a)`` tuples; returns a
    :class:`StepDecision` (``reject=True`` with ``rollback_to=prev t`` discards
    just that step).
``on_boundary(t)``
    called when the integration lands on a sub-interval boundary (only for
    controllers exposing ``boundary_spacing``); may request a rollback to
    the previous boundary.
``snapshot()`` / ``restore(snap)``
    controller memory for checkpoint/rollback.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import CurvatureSample, SystemState, _curvature_unchecked

__all__ = [
    "CurvatureControllerConfig",
    "CurvatureFilterState",
    "StepDecision",
    "dt_from_curvature",
    "regularized_k",
    "check_rejection",
    "regularize_series",
    "apparent_frequency_dt",
    "local_error_dt",
    "default_bounds",
    "StepController",
    "FixedController",
    "CurvatureController",
    "ApparentFrequencyController",
    "LocalErrorController",
    "fixed_dt",
]

# relative-measure floor for the local-error estimator [consistent units]
NORM_FLOOR = 1e-12
_MIN_CUT = 0.9


def default_bounds(dt_crit: float) -> tuple[float, float]:
    """``(dt_min, dt_max) = (dt_crit / 100, 0.85 dt_crit)``."""
    if not dt_crit > 0:
        raise ValueError("dt_crit must be positive")
    return dt_crit / 100.0, 0.85 * dt_crit


@dataclass(frozen=True)
class CurvatureControllerConfig:
    b: float
    dt_min: float
    dt_max: float
    zeta: float = 1.0
    alpha: float = 0.5
    rejection_enabled: bool = True

    def __post_init__(self):
        if not (0 < self.dt_min < self.dt_max):
            raise ValueError(f"need 0 < dt_min < dt_max, got {self.dt_min}, {self.dt_max}")
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")

    @property
    def dt_dl(self) -> float:
        """Length of the regularization sub-interval, ``zeta * dt_max``."""
        return self.zeta * self.dt_max


@dataclass(frozen=True)
class StepDecision:
    dt: float
    reject: bool = False
    rollback_to: float | None = None

    def __post_init__(self):
        if self.reject and self.rollback_to is None:
            raise ValueError("a rejection needs a rollback time")


def dt_from_curvature(k: float, cfg: CurvatureControllerConfig) -> float:
    """Exponential step law ``max(dt_max exp(-b k), dt_min)``."""
    if not (math.isfinite(k) and k >= 0):
        raise ValueError(f"curvature must be finite and >= 0, got {k}")
    return max(cfg.dt_max * math.exp(-cfg.b * k), cfg.dt_min)


@dataclass
class CurvatureFilterState:
    """Memory of the max-in-interval regularizer.

    ``k_prev`` represents the last finalized sub-interval, ``k_running_max``
    the one in progress (index ``m``, starting at ``m * dt_dl``).
    """

    dt_dl: float
    alpha: float = 0.5
    k_prev: float = 0.0
    k_running_max: float = 0.0
    m: int = 0
    t_last: float = -math.inf
    # (k_{m-1}, k_m, index) of the most recent finalization
    last_finalized: tuple[float, float, int] | None = None
    checkpoint: object | None = None
    rejected: frozenset = field(default_factory=frozenset)
    # when a list, every finalization appends (index, k_m)
    history: list | None = None

    def __post_init__(self):
        if not self.dt_dl > 0:
            raise ValueError("dt_dl must be positive")
        if self.k_prev < 0 or self.k_running_max < 0:
            raise ValueError("curvature memory must be nonnegative")

    @property
    def k_effective(self) -> float:
        return max(self.k_prev, self.k_running_max)

    def boundary(self, m: int) -> float:
        return m * self.dt_dl

    def finalize(self) -> float:
        maxk = self.k_running_max
        if maxk < self.k_prev:
            k_m = self.alpha * self.k_prev + (1.0 - self.alpha) * maxk
        else:
            k_m = maxk
        self.last_finalized = (self.k_prev, k_m, self.m)
        if self.history is not None:
            self.history.append((self.m, k_m))
        self.k_prev = k_m
        self.k_running_max = 0.0
        self.m += 1
        return k_m

    def update(self, t: float, k: float) -> float:
        """Fold in one curvature sample; returns the effective curvature."""
        if t < self.t_last:
            raise ValueError(f"sample time went backwards: {t} < {self.t_last}")
        self.t_last = t
        tol = 1e-9 * self.dt_dl
        nxt = (self.m + 1) * self.dt_dl
        while t >= nxt - tol:
            if t <= nxt + tol:
                # a sample on the boundary closes the old interval and opens the new one
                if k > self.k_running_max:
                    self.k_running_max = k
            self.finalize()
            nxt = (self.m + 1) * self.dt_dl
        if k > self.k_running_max:
            self.k_running_max = k
        return self.k_prev if self.k_prev > self.k_running_max else self.k_running_max


def regularized_k(filt: CurvatureFilterState, sample: CurvatureSample) -> tuple[CurvatureFilterState, float]:
    """Pure form of :meth:`CurvatureFilterState.update`; the input is not modified."""
    new = replace(filt, history=None if filt.history is None else list(filt.history))
    k_eff = new.update(sample.t, sample.k)
    return new, k_eff


def regularize_series(times, ks, dt_dl: float, alpha: float = 0.5):
    """Run a sampled curvature history through the max-in-interval filter.

    Returns
    -------
    k_eff : ndarray
        Effective curvature after each sample.
    levels : ndarray
        Finalized level ``k_m`` of the sub-interval holding each sample;
        ``nan`` for samples in a sub-interval still open at the end.
    """
    times = np.asarray(times, dtype=float)
    ks = np.asarray(ks, dtype=float)
    if times.shape != ks.shape:
        raise ValueError("times and curvatures must have the same shape")
    filt = CurvatureFilterState(dt_dl, alpha, history=[])
    k_eff = np.empty_like(ks)
    idx = np.empty(len(ks), dtype=int)
    for i, (t, k) in enumerate(zip(times.tolist(), ks.tolist())):
        k_eff[i] = filt.update(t, k)
        idx[i] = filt.m
    finalized = dict(filt.history)
    levels = np.array([finalized.get(j, math.nan) for j in idx.tolist()])
    return k_eff, levels


def check_rejection(filt: CurvatureFilterState, cfg: CurvatureControllerConfig) -> StepDecision:
    """Decide, right after a finalization, whether to redo the sub-interval.

    Rejects when the finalized curvature grew (``k_m > k_{m-1}``) and the
    sub-interval has not been redone already; the redo uses ``dt(k_m)``.
    """
    if filt.checkpoint is None:
        raise RuntimeError("rejection check without a checkpoint")
    if filt.last_finalized is None:
        raise RuntimeError("rejection check before any finalization")
    k_before, k_m, idx = filt.last_finalized
    dt = dt_from_curvature(k_m, cfg)
    if k_m > k_before and idx not in filt.rejected:
        return StepDecision(dt, reject=True, rollback_to=filt.boundary(idx))
    return StepDecision(dt_from_curvature(filt.k_effective, cfg))


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def apparent_frequency_dt(prev: SystemState, curr: SystemState, safety: float = 0.9,
                          dt_bounds: tuple[float, float] = (0.0, math.inf)) -> float:
    """Stability-limited step from the apparent frequency of the last step.

    ``omega = sqrt(|a1 - a0| / |d1 - d0|)`` and ``dt = safety * 2 / omega``,
    clamped to ``dt_bounds``. A step with no displacement change or no
    acceleration change returns the upper bound.
    """
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    return _apparent_frequency(curr.d - prev.d, curr.a - prev.a, safety, dt_bounds)


def _norm(x) -> float:
    if isinstance(x, float):
        return abs(x)
    return math.sqrt(float(x @ x))


def _apparent_frequency(dd, da, safety, dt_bounds):
    lo, hi = dt_bounds
    nd = _norm(dd)
    na = _norm(da)
    if nd == 0.0 or na == 0.0:
        return hi
    omega = math.sqrt(na / nd)
    return _clamp(2.0 * safety / omega, lo, hi)


def local_error_dt(prev_a, curr_a, curr_d, dt: float, tol_low: float, tol_high: float,
                   dt_bounds: tuple[float, float] = (0.0, math.inf)) -> StepDecision:
    """Band control on the central-difference local error estimate.

    ``e = dt^2 |a1 - a0| / 6`` relative to ``max(|d1|, NORM_FLOOR)``.
    Above ``tol_high`` the step is rejected and shrunk, below ``tol_low`` it
    is accepted and grown, otherwise kept. New steps scale with the cube
    root of the error ratio.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not 0 < tol_low < tol_high:
        raise ValueError("need 0 < tol_low < tol_high")
    da = np.asarray(curr_a, dtype=float) - np.asarray(prev_a, dtype=float)
    d = np.asarray(curr_d, dtype=float)
    return _local_error(math.sqrt(float(da @ da)), math.sqrt(float(d @ d)), dt,
                        tol_low, tol_high, dt_bounds)


def local_error_measure(da_norm: float, d_norm: float, dt: float) -> float:
    return dt * dt * da_norm / 6.0 / max(d_norm, NORM_FLOOR)


def _local_error(da_norm, d_norm, dt, tol_low, tol_high, dt_bounds):
    lo, hi = dt_bounds
    eta = local_error_measure(da_norm, d_norm, dt)
    if eta > tol_high:
        # at least a 10% cut, otherwise eta barely above tol_high retries the same step forever
        shrunk = min(dt * (tol_high / eta) ** (1.0 / 3.0), _MIN_CUT * dt)
        return StepDecision(max(shrunk, lo),
                            reject=True, rollback_to=math.nan)
    if eta < tol_low:
        grown = hi if eta == 0.0 else dt * (tol_high / eta) ** (1.0 / 3.0)
        return StepDecision(min(grown, hi))
    return StepDecision(dt)


class StepController:
    """Base class: no sub-intervals, no memory to checkpoint."""

    kind = "base"
    boundary_spacing: float | None = None
    dt_floor = 0.0

    def reset(self, state: SystemState) -> None:
        pass

    def propose(self) -> float:
        raise NotImplementedError

    def after_step(self, prev, new, dt: float) -> StepDecision | None:
        return None

    def on_boundary(self, t: float) -> StepDecision | None:
        return None

    def snapshot(self):
        return None

    def restore(self, snap) -> None:
        pass

    @property
    def k_effective(self) -> float:
        return math.nan

    def config(self) -> dict:
        return {"kind": self.kind}


class FixedController(StepController):
    kind = "fixed"

    def __init__(self, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.dt_floor = self.dt / 2.0

    def propose(self) -> float:
        return self.dt

    def config(self):
        return {"kind": self.kind, "dt": self.dt}


def fixed_dt(dt: float) -> FixedController:
    return FixedController(dt)


class CurvatureController(StepController):
    """Exponential curvature law driven by the max-in-interval regularizer.

    With rejection enabled, a sub-interval whose finalized curvature grew is
    integrated again from its start with ``dt(k_m)``, at most once.
    """

    kind = "curvature"

    def __init__(self, cfg: CurvatureControllerConfig):
        self.cfg = cfg
        self.boundary_spacing = cfg.dt_dl
        self.dt_floor = cfg.dt_min / 2.0
        self.filter = CurvatureFilterState(cfg.dt_dl, cfg.alpha)
        self._redo_dt: float | None = None
        self._dt = cfg.dt_max
        self.rejections = 0

    def reset(self, state):
        self.filter = CurvatureFilterState(self.cfg.dt_dl, self.cfg.alpha)
        self.filter.m = int(math.floor(state.t / self.cfg.dt_dl + 1e-9))
        self._redo_dt = None
        self.rejections = 0
        self._observe(state.t, state.v, state.a)

    def _observe(self, t, v, a):
        if isinstance(v, float):
            k = abs(a) / (1.0 + v * v) ** 1.5
        elif v.shape[0] == 1:
            vv = float(v[0])
            k = abs(float(a[0])) / (1.0 + vv * vv) ** 1.5
        else:
            k = _curvature_unchecked(v, a)
        k_eff = self.filter.update(t, k)
        cfg = self.cfg
        self._dt = max(cfg.dt_max * math.exp(-cfg.b * k_eff), cfg.dt_min)

    def propose(self):
        return self._redo_dt if self._redo_dt is not None else self._dt

    def after_step(self, prev, new, dt):
        self._observe(new[0], new[2], new[3])
        return None

    def on_boundary(self, t):
        if not self.cfg.rejection_enabled:
            return None
        self.filter.checkpoint = True
        dec = check_rejection(self.filter, self.cfg)
        self._redo_dt = None
        return dec if dec.reject else None

    def snapshot(self):
        snap = copy.copy(self.filter)
        snap.checkpoint = None
        return snap

    def restore(self, snap):
        # the decision that triggered the rollback survives the restore
        _, k_m, idx = self.filter.last_finalized
        rejected = self.filter.rejected | {idx}
        self.filter = copy.copy(snap)
        self.filter.rejected = rejected
        self._redo_dt = dt_from_curvature(k_m, self.cfg)
        self.rejections += 1

    @property
    def k_effective(self):
        return self.filter.k_effective

    def config(self):
        c = self.cfg
        return {"kind": self.kind, "b": c.b, "dt_min": c.dt_min, "dt_max": c.dt_max,
                "zeta": c.zeta, "alpha": c.alpha, "rejection": c.rejection_enabled}


class ApparentFrequencyController(StepController):
    """Step limited by the apparent frequency measured over the last step."""

    kind = "apparent-frequency"

    def __init__(self, dt_min: float, dt_max: float, safety: float = 0.9, dt_start: float | None = None):
        if not 0 < dt_min < dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if not 0 < safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        self.bounds = (dt_min, dt_max)
        self.safety = safety
        self.dt_start = dt_min if dt_start is None else dt_start
        self.dt_floor = dt_min / 2.0
        self._dt = self.dt_start

    def reset(self, state):
        self._dt = self.dt_start

    def propose(self):
        return self._dt

    def after_step(self, prev, new, dt):
        self._dt = _apparent_frequency(new[1] - prev[1], new[3] - prev[3], self.safety, self.bounds)
        return None

    def snapshot(self):
        return self._dt

    def restore(self, snap):
        self._dt = snap

    def config(self):
        return {"kind": self.kind, "dt_min": self.bounds[0], "dt_max": self.bounds[1],
                "safety": self.safety}


class LocalErrorController(StepController):
    """Accept/reject band control on the local error estimate."""

    kind = "local-error"

    def __init__(self, dt_min: float, dt_max: float, tol_low: float, tol_high: float,
                 dt_start: float | None = None):
        if not 0 < dt_min < dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if not 0 < tol_low < tol_high:
            raise ValueError("need 0 < tol_low < tol_high")
        self.bounds = (dt_min, dt_max)
        self.tol_low = tol_low
        self.tol_high = tol_high
        self.dt_start = dt_min if dt_start is None else dt_start
        self.dt_floor = dt_min / 2.0
        self._dt = self.dt_start
        self.rejections = 0
        self.last_eta = 0.0

    def reset(self, state):
        self._dt = self.dt_start
        self.rejections = 0

    def propose(self):
        return self._dt

    def after_step(self, prev, new, dt):
        da_n = _norm(new[3] - prev[3])
        d_n = _norm(new[1])
        self.last_eta = local_error_measure(da_n, d_n, dt)
        dec = _local_error(da_n, d_n, dt, self.tol_low, self.tol_high, self.bounds)
        if dec.reject and dt <= self.bounds[0] * (1 + 1e-12):
            # already at the floor: nothing smaller to retry with
            self._dt = self.bounds[0]
            return None
        self._dt = dec.dt
        if dec.reject:
            self.rejections += 1
            return StepDecision(dec.dt, reject=True, rollback_to=prev[0])
        return None

    def snapshot(self):
        return self._dt

    def restore(self, snap):
        self._dt = snap

    def config(self):
        return {"kind": self.kind, "dt_min": self.bounds[0], "dt_max": self.bounds[1],
                "tol_low": self.tol_low, "tol_high": self.tol_high}

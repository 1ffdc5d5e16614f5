"""State containers and the displacement-history curvature estimator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

__all__ = [
    "SystemState",
    "MechanicalSystem",
    "CurvatureSample",
    "DivergenceError",
    "curvature",
    "curvature_1dof",
]

# relative size of a negative radicand still attributed to round-off
_RADICAND_RTOL = 1e-14


class DivergenceError(RuntimeError):
    """Raised when an integration produces non-finite values."""

    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t!r}")
        self.t = t


@dataclass(frozen=True)
class SystemState:
    """Kinematic state at time ``t``: displacement, velocity, acceleration."""

    t: float
    d: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        for name in ("d", "v", "a"):
            arr = np.array(getattr(self, name), dtype=float, ndmin=1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.d.shape[0]
        if n < 1 or self.v.shape != (n,) or self.a.shape != (n,):
            raise ValueError(
                f"d, v, a must be 1-D with equal length >= 1, got "
                f"{self.d.shape}, {self.v.shape}, {self.a.shape}")
        if not (math.isfinite(self.t) and np.isfinite(self.d).all()
                and np.isfinite(self.v).all() and np.isfinite(self.a).all()):
            raise DivergenceError(self.t)

    @property
    def dof_count(self) -> int:
        return self.d.shape[0]

    @classmethod
    def trusted(cls, t, d, v, a) -> "SystemState":
        """Build without copying or validation; for integrator inner loops.

        The arrays must be fresh, 1-D, equal length and never mutated later.
        """
        s = object.__new__(cls)
        object.__setattr__(s, "t", t)
        object.__setattr__(s, "d", d)
        object.__setattr__(s, "v", v)
        object.__setattr__(s, "a", a)
        return s


class MechanicalSystem(Protocol):
    """Space-discrete model ``M a + f_int(d, v) = f_ext(t)`` with diagonal ``M``.

    ``force`` returns the acceleration ``M^-1 (f_ext(t) - f_int(d, v))``.
    """

    dof_count: int
    mass_diagonal: np.ndarray

    def force(self, t: float, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        ...


@dataclass(frozen=True)
class CurvatureSample:
    t: float
    k: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and self.k >= 0.0):
            raise ValueError(f"curvature must be finite and >= 0, got {self.k}")


def curvature(v, a):
    """First Frenet curvature of the curve ``(t, d(t))``.

    Parameters
    ----------
    v, a : array_like
        Velocity and acceleration vectors of equal shape. Arrays with more
        than one dimension are treated as stacks of states, with the DOFs
        along the last axis.

    Returns
    -------
    float or ndarray
        ``sqrt(((1 + v.v)(a.a) - (v.a)^2) / (1 + v.v)^3)``, always >= 0;
        an array of shape ``v.shape[:-1]`` for stacked input.

    Notes
    -----
    ``(v.v)(a.a) - (v.a)^2`` is evaluated as ``|v x a|^2`` (sum of squared
    pairwise minors), which avoids cancellation when ``|v|`` is large. Very
    large systems fall back to the direct form with round-off clamping.
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if v.shape != a.shape or v.size == 0:
        raise ValueError(f"velocity and acceleration must match, got {v.shape} and {a.shape}")
    if not (np.isfinite(v).all() and np.isfinite(a).all()):
        raise ValueError("non-finite velocity or acceleration")
    if v.ndim <= 1:
        return _curvature_unchecked(v.ravel(), a.ravel())
    return _curvature_rows(v, a)


def _curvature_rows(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    n = v.shape[-1]
    scale = np.max(np.abs(a), axis=-1)
    safe = np.where(scale > 0, scale, 1.0)
    a = a / safe[..., None]
    vv = np.einsum("...i,...i->...", v, v)
    aa = np.einsum("...i,...i->...", a, a)
    s = 1.0 + vv
    if n == 1:
        cross = 0.0
    elif n <= _LAGRANGE_MAX_DOF:
        c = v[..., :, None] * a[..., None, :]
        cross = 0.5 * np.sum((c - np.swapaxes(c, -1, -2)) ** 2, axis=(-2, -1))
    else:
        va = np.einsum("...i,...i->...", v, a)
        num = s * aa - va * va
        if np.any(num < -_RADICAND_RTOL * s * aa):
            raise ArithmeticError("negative curvature radicand")
        cross = np.maximum(num, 0.0) - aa
    return np.where(scale > 0, scale * np.sqrt(aa + cross) / s**1.5, 0.0)


# above this many DOFs the O(n^2) cross-product form gives way to the direct one
_LAGRANGE_MAX_DOF = 256


def _curvature_unchecked(v: np.ndarray, a: np.ndarray) -> float:
    # curvature is linear in |a|; scaling keeps a.a clear of under/overflow
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return 0.0
    a = a / scale
    vv = float(v @ v)
    aa = float(a @ a)
    s = 1.0 + vv
    if v.shape[0] <= _LAGRANGE_MAX_DOF:
        # vv*aa - (v.a)^2 as the sum of squared 2x2 minors: no cancellation
        c = np.multiply.outer(v, a)
        cross = 0.5 * float(np.sum((c - c.T) ** 2))
        return scale * math.sqrt(aa + cross) / s ** 1.5
    va = float(v @ a)
    num = s * aa - va * va
    if num < 0.0:
        if -num > _RADICAND_RTOL * s * aa:
            raise ArithmeticError(f"negative curvature radicand {num!r}")
        return 0.0
    return scale * math.sqrt(num) / s ** 1.5


def curvature_1dof(v: float, a: float) -> float:
    """Single-DOF curvature ``|a| / (1 + v^2)^(3/2)``."""
    v = float(v)
    a = float(a)
    if not (math.isfinite(v) and math.isfinite(a)):
        raise ValueError("non-finite velocity or acceleration")
    return abs(a) / (1.0 + v * v) ** 1.5

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from curvadapt.core import CurvatureSample, SystemState
from curvadapt.stepcontrol import (
    ApparentFrequencyController,
    CurvatureController,
    CurvatureControllerConfig,
    CurvatureFilterState,
    LocalErrorController,
    StepDecision,
    apparent_frequency_dt,
    check_rejection,
    default_bounds,
    dt_from_curvature,
    fixed_dt,
    local_error_dt,
    regularize_series,
    regularized_k,
)

DOLLY = CurvatureControllerConfig(b=0.005, dt_min=2.9412e-5, dt_max=2.5e-3)


def test_step_law_limits_and_example():
    assert dt_from_curvature(0.0, DOLLY) == DOLLY.dt_max
    assert dt_from_curvature(1e12, DOLLY) == DOLLY.dt_min
    assert dt_from_curvature(200.0, DOLLY) == pytest.approx(9.1970e-4, rel=1e-4)
    assert dt_from_curvature(200.0, DOLLY) == pytest.approx(2.5e-3 * math.exp(-1.0), rel=1e-15)


@pytest.mark.parametrize("k", [-1.0, math.inf, math.nan])
def test_step_law_rejects_bad_curvature(k):
    with pytest.raises(ValueError):
        dt_from_curvature(k, DOLLY)


@given(st.floats(0, 1e9), st.floats(0, 1e9))
def test_step_law_monotone_and_bounded(k1, k2):
    lo, hi = sorted((k1, k2))
    assert DOLLY.dt_min <= dt_from_curvature(hi, DOLLY) <= dt_from_curvature(lo, DOLLY) <= DOLLY.dt_max


def test_config_validation():
    with pytest.raises(ValueError):
        CurvatureControllerConfig(b=1.0, dt_min=1e-3, dt_max=1e-3)
    with pytest.raises(ValueError):
        CurvatureControllerConfig(b=0.0, dt_min=1e-4, dt_max=1e-3)
    with pytest.raises(ValueError):
        CurvatureControllerConfig(b=1.0, dt_min=1e-4, dt_max=1e-3, alpha=1.0)
    assert CurvatureControllerConfig(b=1, dt_min=1e-4, dt_max=1e-3, zeta=10).dt_dl == pytest.approx(1e-2)


def test_default_bounds_and_fixed_examples():
    lo, hi = default_bounds(2e-5)
    assert lo == pytest.approx(2e-7)
    assert hi == pytest.approx(1.7e-5)
    assert fixed_dt(1e-6).propose() == 1e-6
    assert fixed_dt(0.1 * 2e-5).propose() == pytest.approx(2e-6)
    assert StepDecision(1.0).reject is False
    with pytest.raises(ValueError):
        StepDecision(1.0, reject=True)


def test_first_sample_starts_from_null_history():
    filt = CurvatureFilterState(dt_dl=1.0)
    filt, k_eff = regularized_k(filt, CurvatureSample(0.0, 7.0))
    assert k_eff == 7.0
    assert filt.k_prev == 0.0


@pytest.mark.parametrize("maxk,expected", [(4.0, 7.0), (25.0, 25.0)])
def test_recurrence(maxk, expected):
    filt = CurvatureFilterState(dt_dl=1.0, k_prev=10.0)
    filt, _ = regularized_k(filt, CurvatureSample(0.5, maxk))
    filt, _ = regularized_k(filt, CurvatureSample(1.2, 0.0))
    assert filt.last_finalized == (10.0, expected, 0)
    assert filt.k_prev == expected


def test_regularized_k_is_pure_and_rejects_time_regression():
    filt = CurvatureFilterState(dt_dl=1.0)
    new, _ = regularized_k(filt, CurvatureSample(0.5, 3.0))
    assert filt.k_running_max == 0.0 and new.k_running_max == 3.0
    with pytest.raises(ValueError):
        regularized_k(new, CurvatureSample(0.4, 1.0))


def _finalized(k_prev, maxk):
    filt = CurvatureFilterState(dt_dl=1.0, k_prev=k_prev)
    filt.update(0.5, maxk)
    filt.update(1.0, 0.0)
    filt.checkpoint = True
    return filt


def test_rejection_when_curvature_grew():
    cfg = CurvatureControllerConfig(b=0.1, dt_min=1e-4, dt_max=1e-2)
    dec = check_rejection(_finalized(10.0, 25.0), cfg)
    assert dec.reject and dec.rollback_to == 0.0
    assert dec.dt == dt_from_curvature(25.0, cfg)
    assert not check_rejection(_finalized(10.0, 4.0), cfg).reject


def test_rejection_needs_checkpoint():
    filt = _finalized(10.0, 25.0)
    filt.checkpoint = None
    with pytest.raises(RuntimeError):
        check_rejection(filt, DOLLY)


def hand_simulation(samples, dt_dl, alpha=0.5):
    """Reference replay of the recurrence and rejection rule, written independently.

    ``samples`` are (t, k) pairs inside consecutive sub-intervals. Returns the
    list of (interval index, k_m, rejected?) with each interval redone at most once.
    """
    out = []
    k_prev = 0.0
    n_int = int(max(t for t, _ in samples) // dt_dl) + 1
    for m in range(n_int):
        ks = [k for t, k in samples if m * dt_dl <= t < (m + 1) * dt_dl]
        maxk = max(ks) if ks else 0.0
        k_m = alpha * k_prev + (1 - alpha) * maxk if maxk < k_prev else maxk
        out.append((m, k_m, k_m > k_prev))
        k_prev = k_m
    return out


def test_first_interval_rejects_once_like_hand_simulation():
    cfg = CurvatureControllerConfig(b=0.5, dt_min=1e-3, dt_max=0.1, zeta=1.0)
    ctrl = CurvatureController(cfg)
    ctrl.reset(SystemState(0.0, [0.0], [0.0], [3.0]))
    ckpt = ctrl.snapshot()
    kfun = lambda t: 3.0 if t < 0.1 else 1.0
    # first pass through interval 0 ends on its boundary
    for t in (0.05, 0.1):
        ctrl.after_step(None, (t, 0.0, 0.0, kfun(t)), 0.05)
    dec = ctrl.on_boundary(0.1)
    expected = hand_simulation([(0.0, 3.0), (0.05, 3.0)], 0.1)
    assert expected[0] == (0, 3.0, True)
    assert dec is not None and dec.reject and dec.rollback_to == 0.0
    ctrl.restore(ckpt)
    # the redo uses dt(k_m)
    assert ctrl.propose() == dt_from_curvature(3.0, cfg)
    for t in (0.05, 0.1):
        ctrl.after_step(None, (t, 0.0, 0.0, kfun(t)), 0.05)
    assert ctrl.on_boundary(0.1) is None  # same sub-interval is not redone twice


def test_replay_determinism():
    rng = np.random.default_rng(3)
    ks = rng.uniform(0, 50, 400)
    ts = np.linspace(0, 4, 400)

    def replay():
        cfg = CurvatureControllerConfig(b=0.05, dt_min=1e-3, dt_max=0.1, zeta=1.0)
        ctrl = CurvatureController(cfg)
        ctrl.reset(SystemState(0.0, [0.0], [0.0], [ks[0]]))
        out = []
        for t, k in zip(ts[1:], ks[1:]):
            ctrl.after_step(None, (t, 0.0, 0.0, k), 0.01)
            out.append(ctrl.propose())
            if abs(t / 0.1 - round(t / 0.1)) < 1e-9:
                out.append(ctrl.on_boundary(t))
        return out

    assert replay() == replay()


def test_levels_are_constant_without_exceedance():
    filt = CurvatureFilterState(dt_dl=1.0, k_prev=10.0)
    effs = [filt.update(t, k) for t, k in [(0.1, 3.0), (0.4, 9.0), (0.9, 2.0)]]
    assert effs == [10.0, 10.0, 10.0]


def test_regularization_envelope():
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 3.0, 1501)
    k = 10.0 - t**2 + rng.uniform(0.0, 1.0, t.size)
    k_eff, levels = regularize_series(t, k, dt_dl=0.1)
    done = ~np.isnan(levels)
    assert done.sum() > 1400
    assert np.all(levels[done] >= k[done])
    assert np.all(k_eff >= k)
    # the envelope decreases in trend: compare means of the first and last second
    assert levels[done][t[done] < 1].mean() > levels[done][t[done] > 2].mean()


def test_apparent_frequency_examples():
    w = 40.0
    prev = SystemState(0.0, [0.0, 0.0], [0, 0], [0.0, 0.0])
    curr = SystemState(1e-3, [1e-3, -2e-3], [0, 0], [-w * w * 1e-3, w * w * 2e-3])
    assert apparent_frequency_dt(prev, curr, 0.9) == pytest.approx(0.9 * 2 / w, rel=1e-14)
    inertial = SystemState(1e-3, [1e-3, 0.0], [0, 0], [0.0, 0.0])
    assert apparent_frequency_dt(prev, inertial, 0.9, (1e-6, 1e-2)) == 1e-2
    assert apparent_frequency_dt(prev, prev, 0.9, (1e-6, 1e-2)) == 1e-2
    with pytest.raises(ValueError):
        apparent_frequency_dt(prev, curr, 0.0)


def test_local_error_examples():
    # e = dt^2 |da| / 6 = 1e-6 relative to |d| = 1
    dec = local_error_dt([0.0], [6.0], [1.0], 1e-3, 1e-7, 1e-5)
    assert not dec.reject and dec.dt == 1e-3
    dec = local_error_dt([0.0], [6.0], [1.0], 1e-3, 1e-8, 1e-7)
    assert dec.reject
    assert dec.dt == pytest.approx(1e-3 * 0.1 ** (1 / 3), rel=1e-12)
    grown = local_error_dt([1.0], [1.0], [1.0], 1e-3, 1e-8, 1e-7, (1e-6, 5e-2))
    assert grown.dt == 5e-2


def test_local_error_rejection_always_shrinks():
    # eta just above tol_high would otherwise retry the same step
    dt = 1e-3
    eta_target = 1e-3 * (1 + 1e-15)
    da = eta_target * 6 / dt**2
    dec = local_error_dt([0.0], [da], [1.0], dt, 1e-4, 1e-3)
    assert dec.reject and dec.dt <= 0.9 * dt


def test_local_error_controller_accepts_at_floor():
    ctrl = LocalErrorController(1e-4, 1e-2, 1e-8, 1e-7)
    ctrl.reset(None)
    assert ctrl.propose() == 1e-4
    dec = ctrl.after_step((0.0, 1.0, 0.0, 0.0), (1e-4, 1.0, 0.0, 1e9), 1e-4)
    assert dec is None and ctrl.propose() == 1e-4


def test_apparent_frequency_controller_tracks_bounds():
    ctrl = ApparentFrequencyController(1e-4, 1.0, 0.5)
    ctrl.reset(None)
    ctrl.after_step((0.0, 0.0, 0.0, 0.0), (1e-3, 1e-3, 0.0, -1.0), 1e-3)
    assert ctrl.propose() == pytest.approx(0.5 * 2 / math.sqrt(1000.0))

import hashlib
import math

import numpy as np
import pytest

from curvadapt import harness
from curvadapt.core import SystemState
from curvadapt.harness import (
    RunConfig,
    RunRecord,
    analytic_reference,
    dt_drop_times,
    dt_on_grid,
    error_vs_reference,
    experiment_catalog,
    force_channel_dolly,
    reference_run,
)
from curvadapt.models import BounceParams, bounce_times
from curvadapt.stepcontrol import apparent_frequency_dt, local_error_measure


def small_record(n=5, ndof=2, problem="bounce"):
    rec = RunRecord({"problem": problem})
    for i in range(n):
        t = 0.1 * i
        rec.append(t, np.full(ndof, t), np.full(ndof, 1.0), np.zeros(ndof), math.nan if i == 0 else 0.1, 0.5, i + 1)
    return rec


def test_record_columns_and_truncate():
    rec = small_record()
    assert rec.d.shape == (5, 2)
    assert rec.columns()[:3] == ["t", "d1", "d2"]
    assert rec.total_evaluations == 5
    rec.truncate(3)
    assert len(rec) == 3 and rec.t[-1] == pytest.approx(0.2)


@pytest.mark.parametrize("ndof", [1, 3])
def test_csv_round_trip_is_byte_identical(tmp_path, ndof):
    rec = small_record(ndof=ndof)
    rec.append(0.55, np.full(ndof, 1 / 3), np.full(ndof, -0.0), np.full(ndof, 1e-300), 0.05, 0.1, 9)
    rec.to_csv(tmp_path / "a.csv")
    back = RunRecord.from_csv(tmp_path / "a.csv")
    back.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert np.array_equal(back.d, rec.d)
    assert back.meta == {"problem": "bounce"}
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw and b"0.33333333333333331" in raw


def test_error_vs_reference_identity_and_modes():
    rec = small_record()
    err = error_vs_reference(rec, rec, "d1")
    assert np.all(err.values == 0) and err.kind == "absolute"
    ref = small_record()
    ref._d = [x + 0.5 for x in ref._d]
    rel = error_vs_reference(rec, ref, "d1", "relative", floor=1.0)
    assert np.allclose(rel.values, 0.5 / np.maximum(np.abs(ref.d[:, 0]), 1.0))


def test_error_vs_reference_horizon_checks():
    rec = small_record(5)
    with pytest.raises(ValueError):
        error_vs_reference(rec, small_record(3), "d1")
    with pytest.raises(ValueError):
        error_vs_reference(rec, RunRecord(), "d1")
    with pytest.raises(ValueError):
        error_vs_reference(rec, rec, "q1")


def test_force_channel_needs_dolly():
    with pytest.raises(ValueError):
        force_channel_dolly(small_record())


def test_force_channel_dolly_initial_value(dolly_reference):
    fk5 = force_channel_dolly(dolly_reference)["FK5"]
    assert fk5.values[0] == pytest.approx(-0.007353 * 175126.85, rel=1e-4)


def test_fk5_vanishes_while_wheel_one_is_airborne(dolly_reference):
    fk5 = force_channel_dolly(dolly_reference)["FK5"]
    window = (fk5.times > 0.022) & (fk5.times < 0.057)
    assert np.all(fk5.values[window] == 0.0)
    assert np.all(fk5.values[fk5.times < 0.02] < 0.0)


def test_reference_cache_reuses_bytes(tmp_path, monkeypatch):
    first = reference_run("bounce", 1e-5, horizon=0.05, cache=tmp_path)
    assert first.meta["from_cache"] is False
    files = list(tmp_path.glob("*.runrecord"))
    assert len(files) == 1
    digest = hashlib.sha256(files[0].read_bytes()).hexdigest()

    def no_integration(cfg):
        raise AssertionError("reference was recomputed")

    monkeypatch.setattr(harness, "execute", no_integration)
    second = reference_run("bounce", 1e-5, horizon=0.05, cache=tmp_path)
    assert second.meta["from_cache"] is True
    assert np.array_equal(second.d, first.d)
    assert hashlib.sha256(files[0].read_bytes()).hexdigest() == digest


def test_reference_of_free_flight_is_exact(tmp_path):
    ref = reference_run("bounce", 1e-4, horizon=0.3, cache=tmp_path)
    assert np.max(np.abs(ref.d[:, 0] - analytic_reference(ref.t).d[:, 0])) < 1e-12
    with pytest.raises(ValueError):
        reference_run("bounce", 0.0)


def test_apparent_frequency_from_reference_states(dolly_reference):
    ref = dolly_reference
    i, j = (int(np.argmin(np.abs(ref.t - t))) for t in (0.02, 0.021))
    states = [SystemState(ref.t[k], ref.d[k], ref.v[k], ref.a[k]) for k in (i, j)]
    lo, hi = 2.9412e-5, 2.5e-3
    assert lo <= apparent_frequency_dt(*states, 0.9, (lo, hi)) <= hi


def test_local_error_and_curvature_peak_together_at_impact():
    cfg = RunConfig(problem="bounce", controller="fixed", dt=2e-6, horizon=0.6)
    rec = harness.execute(cfg)
    eta = [local_error_measure(abs(rec.a[k + 1, 0] - rec.a[k, 0]), abs(rec.d[k + 1, 0]), rec.dt[k + 1])
           for k in range(len(rec) - 1)]
    k_raw = np.abs(rec.a[:, 0]) / (1 + rec.v[:, 0] ** 2) ** 1.5
    t_eta = rec.t[1 + int(np.argmax(eta))]
    t_k = rec.t[int(np.argmax(k_raw))]
    dt_dl = 10 * 0.85 * BounceParams().dt_crit
    assert abs(t_eta - t_k) <= dt_dl
    assert abs(t_k - bounce_times().t_q) <= dt_dl


def test_catalog_parameters():
    cat = experiment_catalog()
    assert set(cat) == {"dolly-controllers", "bounce-controllers", "dolly-integrators", "bounce-integrators"}
    d = cat["dolly-controllers"].configs()
    assert (d["curvature"].b, d["curvature"].zeta, d["curvature"].bounds[1]) == (0.005, 1.0, 2.5e-3)
    assert d["fixed-min"].dt == pytest.approx(2.9412e-5, rel=1e-4)
    assert d["fixed-max"].dt == 2.5e-3
    b = cat["bounce-controllers"].configs()
    assert (b["curvature"].b, b["curvature"].zeta) == (0.444, 10.0)
    assert b["curvature"].bounds == pytest.approx((2e-7, 1.7e-5))
    assert b["fixed"].dt == pytest.approx(2e-6)
    assert b["fixed"].t_end == pytest.approx(3 * bounce_times().t_f)
    assert d["fixed-min"].t_end == 0.25
    for name in ("dolly-integrators", "bounce-integrators"):
        assert {c.integrator for c in cat[name].configs().values()} == {"CDM", "EGalpha", "ChungLee"}


def test_fixed_step_bounce_error_grows_each_contact(bounce_controllers):
    err = bounce_controllers.errors["fixed"]
    t_f = bounce_times().t_f
    peaks = [err.values[(err.times > (i + 0.5) * t_f - 0.4) & (err.times < (i + 0.5) * t_f + 0.4)].max()
             for i in range(3)]
    assert peaks[0] < peaks[1] < peaks[2]


def test_run_config_validation():
    with pytest.raises(ValueError, match="dt_min"):
        RunConfig(problem="dolly", controller="curvature", b=1.0, dt_min=1e-3, dt_max=1e-4)
    with pytest.raises(ValueError, match="problem"):
        RunConfig(problem="pendulum")
    with pytest.raises(ValueError, match="horizon"):
        RunConfig(controller="curvature", b=1.0, horizon=-1.0)
    with pytest.raises(ValueError, match="b"):
        RunConfig(controller="curvature")
    with pytest.raises(ValueError, match="nope"):
        RunConfig.from_mapping({"nope": 1})
    cfg = RunConfig.from_mapping({"controller": "fixed", "dt": "1e-6", "rejection": "false"})
    assert cfg.dt == 1e-6 and cfg.rejection is False
    assert RunConfig.from_mapping(cfg.to_dict()) == cfg


def test_dt_history_helpers():
    rec = RunRecord()
    t = 0.0
    rec.append(t, 0.0, 0.0, 0.0, math.nan, 0.0, 1)
    for dt in [1.0, 1.0, 0.01, 0.01, 1.0, 0.01]:
        t += dt
        rec.append(t, 0.0, 0.0, 0.0, dt, 0.0, 1)
    assert np.allclose(dt_drop_times(rec, 1e-3, 1.0), [2.0, 3.02])
    assert dt_on_grid(rec, [0.5, 2.005]).tolist() == [1.0, 0.01]

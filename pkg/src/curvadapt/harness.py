"""Run records, error metrics, reference solutions and the experiment catalog."""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from array import array
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "RunRecord",
    "Series",
    "ErrorSeries",
    "RunConfig",
    "execute",
    "reference_run",
    "analytic_reference",
    "error_vs_reference",
    "force_channel_dolly",
    "channel_values",
    "Experiment",
    "experiment_catalog",
    "run_experiment",
    "ordering_checks",
    "dt_drop_times",
    "dt_on_grid",
    "cache_dir",
]

CACHE_ENV = "CURVADAPT_CACHE"


class RunRecord:
    """Sampled time series of one integration run.

    Columns: ``t``, ``d``, ``v``, ``a`` (n_samples x n_dof), ``dt`` (step that
    reached the sample, NaN at the start), ``k`` (effective curvature, NaN if
    the controller does not track one) and ``evals`` (cumulative force
    evaluations when the sample was taken).
    """

    def __init__(self, meta: dict | None = None):
        self.meta = dict(meta or {})
        self._t = array("d")
        self._dt = array("d")
        self._k = array("d")
        self._evals = array("q")
        # float columns for single-DOF runs, lists of arrays otherwise
        self._d = self._v = self._a = None
        self._cache = None

    def append(self, t, d, v, a, dt, k, evals):
        if self._d is None:
            if isinstance(d, float):
                self._d, self._v, self._a = array("d"), array("d"), array("d")
            else:
                self._d, self._v, self._a = [], [], []
        self._t.append(t)
        self._d.append(d)
        self._v.append(v)
        self._a.append(a)
        self._dt.append(dt)
        self._k.append(k)
        self._evals.append(evals)
        self._cache = None

    def truncate(self, n: int):
        for col in (self._t, self._d, self._v, self._a, self._dt, self._k, self._evals):
            del col[n:]
        self._cache = None

    def __len__(self):
        return len(self._t)

    def _arrays(self):
        if self._cache is None:
            n = len(self._t)
            self._cache = {
                "t": np.array(self._t, dtype=float),
                "d": np.array(self._d, dtype=float).reshape(n, -1),
                "v": np.array(self._v, dtype=float).reshape(n, -1),
                "a": np.array(self._a, dtype=float).reshape(n, -1),
                "dt": np.array(self._dt, dtype=float),
                "k": np.array(self._k, dtype=float),
                "evals": np.array(self._evals, dtype=np.int64),
            }
        return self._cache

    t = property(lambda self: self._arrays()["t"])
    d = property(lambda self: self._arrays()["d"])
    v = property(lambda self: self._arrays()["v"])
    a = property(lambda self: self._arrays()["a"])
    dt = property(lambda self: self._arrays()["dt"])
    k = property(lambda self: self._arrays()["k"])
    evals = property(lambda self: self._arrays()["evals"])

    @property
    def dof_count(self) -> int:
        return self.d.shape[1]

    @property
    def total_evaluations(self) -> int:
        return int(self._evals[-1])

    def cumulative_steps(self) -> tuple[np.ndarray, np.ndarray]:
        return self.t, self.evals

    def columns(self) -> list[str]:
        n = self.dof_count
        return (["t"] + [f"d{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
                + [f"a{i + 1}" for i in range(n)] + ["dt", "k_effective", "evals"])

    def to_csv(self, path, include_meta: bool = True) -> None:
        """Write the record as CSV: header row, LF endings, 17 significant digits.

        The first line carries the metadata as ``# meta: <json>`` unless
        ``include_meta`` is false.
        """
        arr = self._arrays()
        body = np.column_stack([arr["t"], arr["d"], arr["v"], arr["a"], arr["dt"], arr["k"]])
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            if include_meta:
                fh.write("# meta: " + json.dumps(_jsonable(self.meta), sort_keys=True) + "\n")
            fh.write(",".join(self.columns()) + "\n")
            for row, ev in zip(body.tolist(), arr["evals"].tolist()):
                fh.write(",".join(_fmt(x) for x in row) + f",{ev}\n")

    @classmethod
    def from_csv(cls, path) -> "RunRecord":
        with open(path, encoding="ascii") as fh:
            first = fh.readline()
            meta = {}
            if first.startswith("# meta: "):
                meta = json.loads(first[len("# meta: "):])
                header = fh.readline()
            else:
                header = first
            names = header.strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        n = (len(names) - 4) // 3
        if names[0] != "t" or names[-3:] != ["dt", "k_effective", "evals"] or 3 * n + 4 != len(names):
            raise ValueError(f"{path}: not a run record (header {names[:4]}...)")
        rec = cls(meta)
        rec._t = array("d", data[:, 0])
        rec._dt = array("d", data[:, 3 * n + 1])
        rec._k = array("d", data[:, 3 * n + 2])
        rec._evals = array("q", data[:, 3 * n + 3].astype(np.int64))
        if n == 1:
            rec._d, rec._v, rec._a = (array("d", data[:, j]) for j in (1, 2, 3))
        else:
            rec._d = list(data[:, 1:n + 1])
            rec._v = list(data[:, n + 1:2 * n + 1])
            rec._a = list(data[:, 2 * n + 1:3 * n + 1])
        return rec

    def steps_to_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write("t,force_evaluations\n")
            for t, ev in zip(self.t.tolist(), self.evals.tolist()):
                fh.write(f"{_fmt(t)},{ev}\n")


def _fmt(x: float) -> str:
    if x != x:
        return "nan"
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


@dataclass(frozen=True)
class Series:
    """A named scalar channel sampled at ``times``."""

    times: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        if np.shape(self.times) != np.shape(self.values):
            raise ValueError("times and values must have the same shape")


@dataclass(frozen=True)
class ErrorSeries(Series):
    kind: str = "absolute"

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in ("absolute", "relative"):
            raise ValueError(f"unknown error kind {self.kind!r}")
        if np.any(self.values < 0):
            raise ValueError("errors must be nonnegative")

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if len(self.values) else 0.0


# --------------------------------------------------------------------------
# run configuration

PROBLEMS = ("dolly", "bounce")
CONTROLLERS = ("fixed", "curvature", "apparent-frequency", "local-error")


@dataclass(frozen=True)
class RunConfig:
    """Flat configuration of one run; every field maps to a config key and a CLI flag."""

    problem: str = "bounce"
    integrator: str = "CDM"
    rho_b: float = 0.8
    chung_lee_beta: float = 1.0
    controller: str = "curvature"
    dt: float | None = None
    b: float | None = None
    zeta: float = 1.0
    alpha: float = 0.5
    rejection: bool = True
    dt_crit: float | None = None
    dt_min: float | None = None
    dt_max: float | None = None
    safety: float = 0.9
    tol_low: float = 1e-4
    tol_high: float = 1e-3
    horizon: float | None = None
    decimate: int = 1
    reference_dt: float | None = None

    def __post_init__(self):
        from .integrators import INTEGRATOR_KINDS

        if self.problem not in PROBLEMS:
            raise ValueError(f"problem: unknown id {self.problem!r}; expected one of {PROBLEMS}")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller: unknown id {self.controller!r}; expected one of {CONTROLLERS}")
        if self.integrator not in INTEGRATOR_KINDS:
            raise ValueError(f"integrator: unknown id {self.integrator!r}; expected one of {INTEGRATOR_KINDS}")
        if self.controller == "fixed" and self.dt is None:
            raise ValueError("dt: required for the fixed controller")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt: must be positive")
        if self.controller == "curvature" and self.b is None:
            raise ValueError("b: required for the curvature controller")
        if self.b is not None and not self.b > 0:
            raise ValueError("b: must be positive")
        lo, hi = self.bounds
        if not 0 < lo < hi:
            raise ValueError(f"dt_min/dt_max: need 0 < dt_min < dt_max, got {lo}, {hi}")
        if not self.t_end > 0:
            raise ValueError("horizon: must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety: must lie in (0, 1]")
        if not 0 < self.tol_low < self.tol_high:
            raise ValueError("tol_low/tol_high: need 0 < tol_low < tol_high")
        if not self.zeta > 0:
            raise ValueError("zeta: must be positive")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha: must lie in [0, 1)")
        if not 0 <= self.rho_b <= 1:
            raise ValueError("rho_b: must lie in [0, 1]")
        if int(self.decimate) != self.decimate or self.decimate < 1:
            raise ValueError("decimate: must be an integer >= 1")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        clean = {}
        for key, val in data.items():
            name = key.replace("-", "_").replace(".", "_")
            if name not in known:
                raise ValueError(f"{key}: unknown configuration key")
            clean[name] = _coerce(name, val)
        return cls(**clean)

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @property
    def problem_dt_crit(self) -> float:
        if self.dt_crit is not None:
            return self.dt_crit
        if self.problem == "bounce":
            from .models import BounceParams
            return BounceParams().dt_crit
        return DOLLY_DT_MAX / 0.85

    @property
    def bounds(self) -> tuple[float, float]:
        from .stepcontrol import default_bounds

        lo, hi = default_bounds(self.problem_dt_crit)
        return (lo if self.dt_min is None else self.dt_min,
                hi if self.dt_max is None else self.dt_max)

    @property
    def t_end(self) -> float:
        if self.horizon is not None:
            return self.horizon
        if self.problem == "dolly":
            return DOLLY_HORIZON
        from .models import bounce_times
        return 3.0 * bounce_times().t_f


_FIELD_TYPES = {
    "problem": str, "integrator": str, "controller": str,
    "decimate": int, "rejection": bool,
}


def _coerce(name, val):
    if val is None:
        return None
    kind = _FIELD_TYPES.get(name, float)
    if kind is bool:
        if isinstance(val, str):
            low = val.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{name}: expected a boolean, got {val!r}")
        return bool(val)
    try:
        return kind(val)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: expected {kind.__name__}, got {val!r}") from None


DOLLY_DT_MAX = 2.5e-3
DOLLY_HORIZON = 0.25
DOLLY_REFERENCE_DT = 1e-6


def build_problem(cfg: RunConfig):
    """Return ``(system, initial_state)`` for ``cfg.problem``."""
    from . import models

    if cfg.problem == "dolly":
        p = models.DollyParams()
        return models.build_dolly(p), models.dolly_initial_state(p)
    p = models.BounceParams()
    return models.build_bounce(p), models.bounce_initial_state(p)


def build_controller(cfg: RunConfig):
    from . import stepcontrol as sc

    lo, hi = cfg.bounds
    if cfg.controller == "fixed":
        return sc.FixedController(cfg.dt)
    if cfg.controller == "curvature":
        return sc.CurvatureController(sc.CurvatureControllerConfig(
            cfg.b, lo, hi, cfg.zeta, cfg.alpha, cfg.rejection))
    if cfg.controller == "apparent-frequency":
        return sc.ApparentFrequencyController(lo, hi, cfg.safety)
    return sc.LocalErrorController(lo, hi, cfg.tol_low, cfg.tol_high)


def execute(cfg: RunConfig) -> RunRecord:
    """Run one configuration and return its record (config echoed in ``meta``)."""
    from .integrators import IntegratorConfig, make_integrator, run

    system, s0 = build_problem(cfg)
    integ = make_integrator(IntegratorConfig(cfg.integrator, cfg.rho_b, cfg.chung_lee_beta))
    rec = run(system, s0, build_controller(cfg), cfg.t_end, integrator=integ,
              decimate=cfg.decimate)
    rec.meta["problem"] = cfg.problem
    rec.meta["config"] = cfg.to_dict()
    return rec


# --------------------------------------------------------------------------
# references and error metrics

def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "curvadapt"


def _config_hash(payload: dict) -> str:
    blob = json.dumps(_jsonable(payload), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:20]


def reference_run(problem: str | RunConfig, dt_ref: float, horizon: float | None = None,
                  cache: str | os.PathLike | None = None, use_cache: bool = True) -> RunRecord:
    """Fixed-step CDM run at ``dt_ref``, cached on disk by configuration hash.

    The cache file is ``<cache>/<hash>.runrecord`` (run-record CSV), written
    to a temporary file and renamed into place. A record loaded from the
    cache has ``meta["from_cache"] = True``.
    """
    if not dt_ref > 0:
        raise ValueError("dt_ref must be positive")
    base = problem if isinstance(problem, RunConfig) else RunConfig(problem=problem, controller="fixed", dt=dt_ref)
    cfg = RunConfig.from_mapping({**base.to_dict(), "controller": "fixed", "dt": dt_ref,
                                  "integrator": "CDM", "decimate": 1,
                                  "horizon": base.t_end if horizon is None else horizon})
    key = _config_hash({"kind": "reference", "config": cfg.to_dict(), "format": 1})
    folder = Path(cache) if cache is not None else cache_dir()
    path = folder / f"{key}.runrecord"
    if use_cache and path.exists():
        rec = RunRecord.from_csv(path)
        rec.meta["from_cache"] = True
        return rec
    rec = execute(cfg)
    if use_cache:
        folder.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=folder, suffix=".tmp")
        os.close(fd)
        try:
            rec.to_csv(tmp)
            os.chmod(tmp, 0o644)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
    rec.meta["from_cache"] = False
    return rec


def analytic_reference(times, params=None) -> RunRecord:
    """Exact bounce heights at ``times`` packaged as a run record."""
    from .models import bounce_analytic

    times = np.asarray(times, dtype=float)
    h = np.atleast_1d(bounce_analytic(times, params))
    rec = RunRecord({"problem": "bounce", "reference": "analytic"})
    nan = math.nan
    for t, x in zip(times.tolist(), h.tolist()):
        rec.append(t, x, nan, nan, nan, nan, 0)
    return rec


def force_channel_dolly(rec: RunRecord, params=None) -> dict[str, Series]:
    """Ground-spring forces FK5 (wheel 1) and FK8 (wheel 4) along a dolly run."""
    from .models import DollyParams

    if rec.meta.get("problem") != "dolly" or rec.dof_count != 7:
        raise ValueError("force channels need a dolly run")
    p = params or DollyParams()
    d = rec.d
    fk = np.where(d[:, :4] <= 0.0, p.K_ground * d[:, :4], 0.0)
    return {"FK5": Series(rec.t, fk[:, 0], "FK5"), "FK8": Series(rec.t, fk[:, 3], "FK8")}


def channel_values(rec: RunRecord, channel) -> np.ndarray:
    """Values of ``channel`` along ``rec``.

    ``channel`` is ``"d<i>"``, ``"v<i>"``, ``"a<i>"`` (1-based DOF), ``"FK5"``
    / ``"FK8"`` on dolly runs, or a callable taking the record.
    """
    if callable(channel):
        return np.asarray(channel(rec), dtype=float)
    if channel in ("FK5", "FK8"):
        return force_channel_dolly(rec)[channel].values
    col, idx = channel[0], channel[1:]
    if col not in "dva" or not idx.isdigit():
        raise ValueError(f"unknown channel {channel!r}")
    return getattr(rec, col)[:, int(idx) - 1]


def error_vs_reference(rec: RunRecord, ref: RunRecord, channel="d1", mode: str = "absolute",
                       floor: float = 1e-12) -> ErrorSeries:
    """Pointwise error of ``channel`` against ``ref`` interpolated to the run's times.

    Relative errors divide by ``max(|ref|, floor)``.
    """
    if mode not in ("absolute", "relative"):
        raise ValueError(f"unknown mode {mode!r}")
    t_ref = ref.t
    t = rec.t
    if len(t) == 0 or len(t_ref) == 0:
        raise ValueError("empty record")
    tol = 1e-9 * max(abs(t_ref[-1]), 1.0)
    if t[0] < t_ref[0] - tol or t[-1] > t_ref[-1] + tol:
        raise ValueError("run horizon exceeds the reference horizon")
    inside = (t >= t_ref[0] - tol) & (t <= t_ref[-1] + tol)
    if not inside.any():
        raise ValueError("no overlap between run and reference")
    y = channel_values(rec, channel)
    y_ref = np.interp(t, t_ref, channel_values(ref, channel))
    err = np.abs(y - y_ref)
    if mode == "relative":
        err = err / np.maximum(np.abs(y_ref), floor)
    name = channel if isinstance(channel, str) else getattr(channel, "__name__", "channel")
    return ErrorSeries(t, err, name, mode)


# --------------------------------------------------------------------------
# experiment catalog

@dataclass(frozen=True)
class Experiment:
    """A named comparison: member runs, a reference, and the error channel.

    ``reference`` is either ``{"kind": "fixed", "dt": ...}`` (cached CDM run)
    or ``{"kind": "analytic"}`` (exact bounce solution).
    """

    name: str
    problem: str
    members: dict
    reference: dict
    channel: str
    mode: str = "absolute"
    floor: float = 1e-12
    checks: tuple = ()

    def configs(self) -> dict[str, RunConfig]:
        return {k: RunConfig.from_mapping({"problem": self.problem, **v})
                for k, v in self.members.items()}


def experiment_catalog() -> dict[str, Experiment]:
    """The named comparison studies on the dolly and the bounce problem."""
    from .models import BounceParams
    from .stepcontrol import default_bounds

    d_min, _ = default_bounds(DOLLY_DT_MAX / 0.85)
    b_crit = BounceParams().dt_crit
    b_min, b_max = default_bounds(b_crit)
    dolly_ref = {"kind": "fixed", "dt": DOLLY_REFERENCE_DT}
    dolly_curv = {"controller": "curvature", "b": 0.005, "zeta": 1.0, "dt_max": DOLLY_DT_MAX}
    bounce_curv = {"controller": "curvature", "b": 0.444, "zeta": 10.0, "dt_min": b_min, "dt_max": b_max}
    exps = [
        Experiment(
            "dolly-controllers", "dolly",
            {
                "fixed-min": {"controller": "fixed", "dt": d_min},
                "fixed-max": {"controller": "fixed", "dt": DOLLY_DT_MAX},
                "curvature": dolly_curv,
                # safety 0.9 saturates at dt_max on this problem; 0.1 resolves
                # about thirty steps per apparent period
                "apparent-frequency": {"controller": "apparent-frequency", "safety": 0.1},
                "local-error": {"controller": "local-error", "tol_low": 1e-4, "tol_high": 1e-3},
            },
            dolly_ref, "FK5", "absolute",
            checks=("dolly-error-order", "dolly-step-order"),
        ),
        Experiment(
            "bounce-controllers", "bounce",
            {
                "fixed": {"controller": "fixed", "dt": 0.1 * b_crit},
                "curvature": bounce_curv,
                "local-error": {"controller": "local-error", "tol_low": 1e-4, "tol_high": 1e-3},
            },
            {"kind": "analytic"}, "d1", "relative", floor=BounceParams().h0,
            checks=("bounce-two-orders", "bounce-step-order"),
        ),
        Experiment(
            "dolly-integrators", "dolly",
            {kind: {**dolly_curv, "integrator": kind} for kind in ("CDM", "EGalpha", "ChungLee")},
            dolly_ref, "FK5", "absolute",
            checks=("dt-history-agreement",),
        ),
        Experiment(
            "bounce-integrators", "bounce",
            {kind: {**bounce_curv, "integrator": kind} for kind in ("CDM", "EGalpha", "ChungLee")},
            {"kind": "analytic"}, "d1", "relative", floor=BounceParams().h0,
            checks=("dt-history-agreement",),
        ),
    ]
    return {e.name: e for e in exps}


@dataclass
class ExperimentResult:
    experiment: Experiment
    runs: dict
    reference: RunRecord
    errors: dict

    @property
    def max_errors(self) -> dict[str, float]:
        return {k: e.max for k, e in self.errors.items()}

    @property
    def evaluations(self) -> dict[str, int]:
        return {k: r.total_evaluations for k, r in self.runs.items()}


def run_experiment(exp: Experiment | str, cache=None, members=None) -> ExperimentResult:
    """Execute the members of ``exp`` (or a subset) and score them against its reference."""
    if isinstance(exp, str):
        catalog = experiment_catalog()
        if exp not in catalog:
            raise KeyError(exp)
        exp = catalog[exp]
    cfgs = exp.configs()
    if members is not None:
        cfgs = {k: cfgs[k] for k in members}
    runs = {k: execute(c) for k, c in cfgs.items()}
    if exp.reference["kind"] == "analytic":
        grid = np.unique(np.concatenate([r.t for r in runs.values()]))
        ref = analytic_reference(grid)
    else:
        ref = reference_run(exp.problem, exp.reference["dt"],
                            horizon=max(c.t_end for c in cfgs.values()), cache=cache)
    errors = {k: error_vs_reference(r, ref, exp.channel, exp.mode, exp.floor) for k, r in runs.items()}
    return ExperimentResult(exp, runs, ref, errors)


# --------------------------------------------------------------------------
# step-size histories

def dt_on_grid(rec: RunRecord, grid) -> np.ndarray:
    """Step size in force at each grid time: the step that covers it."""
    t = rec.t
    dt = rec.dt
    idx = np.searchsorted(t, np.asarray(grid, dtype=float), side="right")
    return dt[np.clip(idx, 1, len(t) - 1)]


def dt_drop_times(rec: RunRecord, dt_min: float, dt_max: float,
                  spacing: float | None = None) -> np.ndarray:
    """Start times of major step-size drops.

    A major drop begins with a step of at least ``dt_max / 2`` and ends
    when the step falls to the geometric mean of the bounds or below. The
    hysteresis keeps a step size hovering near one level from counting twice.
    With ``spacing`` given, steps shortened to land on a sub-interval
    boundary are ignored.
    """
    low = math.sqrt(dt_min * dt_max)
    high = 0.5 * dt_max
    t1 = rec.t[1:]
    keep = np.ones(len(t1), dtype=bool)
    if spacing:
        phase = t1 / spacing
        keep = np.abs(phase - np.round(phase)) > 1e-9 * np.maximum(phase, 1.0)
    dt = rec.dt[1:][keep].tolist()
    t0 = rec.t[:-1][keep].tolist()
    events = []
    armed = False
    for t, h in zip(t0, dt):
        if h >= high:
            armed = True
        elif armed and h <= low:
            events.append(t)
            armed = False
    return np.array(events)


def _events_aligned(a, b, tol) -> bool:
    if len(a) != len(b):
        return False
    return bool(np.all(np.abs(np.asarray(a) - np.asarray(b)) <= tol))


def ordering_checks(res: ExperimentResult) -> list[tuple[str, bool, str]]:
    """Evaluate the experiment's ordering properties as ``(name, passed, detail)``."""
    out = []
    err = res.max_errors
    ev = res.evaluations
    for check in res.experiment.checks:
        if check == "dolly-error-order":
            ok1 = err["fixed-min"] < err["curvature"] < err["apparent-frequency"] < err["fixed-max"]
            out.append(("error: fixed-min < curvature < apparent-frequency < fixed-max", ok1,
                        _fmt_map(err, ("fixed-min", "curvature", "apparent-frequency", "fixed-max"))))
            ok2 = err["curvature"] < err["local-error"] < err["fixed-max"]
            out.append(("error: curvature < local-error < fixed-max", ok2,
                        _fmt_map(err, ("curvature", "local-error", "fixed-max"))))
        elif check == "dolly-step-order":
            adaptive = ("curvature", "apparent-frequency", "local-error")
            ok = all(ev["fixed-min"] > ev[k] > ev["fixed-max"] for k in adaptive)
            out.append(("steps: fixed-min > adaptive > fixed-max", ok, _fmt_map(ev, ("fixed-min",) + adaptive + ("fixed-max",))))
            out.append(("steps: local-error >= curvature", ev["local-error"] >= ev["curvature"],
                        _fmt_map(ev, ("local-error", "curvature"))))
        elif check == "bounce-two-orders":
            ratio = err["fixed"] / err["curvature"] if err["curvature"] > 0 else math.inf
            out.append(("error: curvature <= 1e-2 x fixed", err["curvature"] <= 1e-2 * err["fixed"],
                        f"ratio={ratio:.4g} " + _fmt_map(err, ("fixed", "curvature"))))
        elif check == "bounce-step-order":
            from .models import bounce_times

            ok, detail = bounce_step_order(res.runs["curvature"], res.runs["local-error"], bounce_times().t_f)
            out.append(("steps: curvature < local-error after the first period", ok, detail))
        elif check == "dt-history-agreement":
            out.extend(dt_history_agreement(res))
    return out


def bounce_step_order(curv: RunRecord, le: RunRecord, t_first: float) -> tuple[bool, str]:
    """Whether cumulative evaluations of ``curv`` stay below ``le`` on ``[t_first, end]``."""
    t_end = min(curv.t[-1], le.t[-1])
    grid = np.linspace(t_first, t_end, 200)
    c = cumulative_at(curv, grid)
    e = cumulative_at(le, grid)
    ok = bool(np.all(c < e))
    return ok, f"at end curvature={int(c[-1])} local-error={int(e[-1])}"


def cumulative_at(rec: RunRecord, grid) -> np.ndarray:
    """Cumulative force evaluations at each grid time (last sample at or before it)."""
    idx = np.searchsorted(rec.t, np.asarray(grid, dtype=float), side="right") - 1
    return rec.evals[np.clip(idx, 0, None)]


def dt_history_agreement(res: ExperimentResult, coverage: float = 0.95) -> list[tuple[str, bool, str]]:
    cfgs = res.experiment.configs()
    names = list(res.runs)
    first = cfgs[names[0]]
    lo, hi = first.bounds
    spacing = first.zeta * hi
    t_end = min(r.t[-1] for r in res.runs.values())
    grid = np.linspace(0.0, t_end, 20001)[1:]
    base = res.runs[names[0]]
    drops0 = dt_drop_times(base, lo, hi, spacing)
    out = []
    for other in names[1:]:
        rec = res.runs[other]
        drops = dt_drop_times(rec, lo, hi, spacing)
        aligned = _events_aligned(drops0, drops, spacing)
        out.append((f"dt drops {names[0]} vs {other} within one sub-interval", aligned,
                    f"events {len(drops0)} vs {len(drops)}"))
        ratio = dt_on_grid(rec, grid) / dt_on_grid(base, grid)
        frac = float(np.mean((ratio >= 0.5) & (ratio <= 2.0)))
        out.append((f"dt ratio {other}/{names[0]} in [0.5, 2]", frac >= coverage,
                    f"fraction of horizon {frac:.4f}"))
    return out


def _fmt_map(values: dict, keys) -> str:
    return " ".join(f"{k}={values[k]:.6g}" for k in keys)

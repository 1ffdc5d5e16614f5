"""Command-line front end: ``run``, ``compare`` and ``oracle``.

Exit codes: 0 success, 1 a compared ordering property failed, 2 bad
configuration or unknown experiment, 3 divergence (partial output is still
written), 4 I/O error.

All CSV output is comma separated with a header row, LF line endings and
17 significant digits, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from .core import DivergenceError
from . import harness
from .harness import RunConfig, RunRecord

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

# dotted config keys whose last segment is not the field name
_ALIASES = {
    "problem.id": "problem",
    "problem.kind": "problem",
    "controller.kind": "controller",
    "integrator.kind": "integrator",
    "output.dir": "out",
    "output.out": "out",
    "sampling.decimate": "decimate",
}


class ConfigError(ValueError):
    pass


def normalize_keys(raw: dict) -> dict:
    """Flatten dotted keys (``controller.b`` -> ``b``) and accept a meta.json echo."""
    if "config" in raw and isinstance(raw["config"], dict):
        raw = raw["config"]
    out = {}
    for key, val in raw.items():
        name = _ALIASES.get(key, key.rsplit(".", 1)[-1])
        out[name.replace("-", "_")] = val
    return out


def load_config(path: str | None, overrides: dict) -> tuple[RunConfig, str | None]:
    """Merge a JSON config file with flag overrides (flags win)."""
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be an object")
        data = normalize_keys(loaded)
    data.update({k: v for k, v in overrides.items() if v is not None})
    out = data.pop("out", None)
    try:
        return RunConfig.from_mapping(data), out
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _atomic(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_text(path: Path, text: str) -> None:
    def w(tmp):
        with open(tmp, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    _atomic(path, w)


def _fmt(x: float) -> str:
    return "nan" if x != x else "%.17g" % x


def run_summary(rec: RunRecord, cfg: RunConfig) -> dict:
    meta = rec.meta
    summary = {
        "total_steps": meta.get("accepted_steps", len(rec) - 1),
        "rejected_steps": meta.get("rejected_steps", 0),
        "rejected_subintervals": meta.get("rejected_intervals", 0),
        "force_evaluations": meta.get("force_evaluations", rec.total_evaluations),
        "t_end": float(rec.t[-1]),
    }
    if "diverged_at" in meta:
        summary["diverged_at"] = meta["diverged_at"]
    ref = None
    if cfg.reference_dt is not None:
        ref = harness.reference_run(cfg, cfg.reference_dt, horizon=cfg.t_end)
        channel, mode, floor = ("FK5", "absolute", 1e-12) if cfg.problem == "dolly" else ("d1", "absolute", 1e-12)
        summary["reference"] = f"fixed CDM dt={cfg.reference_dt!r}"
    elif cfg.problem == "bounce":
        ref = harness.analytic_reference(rec.t)
        channel, mode, floor = "d1", "absolute", 1e-12
        summary["reference"] = "analytic"
    if ref is not None:
        err = harness.error_vs_reference(rec, ref, channel, mode, floor)
        summary["max_error"] = err.max
        summary["error_channel"] = channel
    return summary


def write_run_outputs(rec: RunRecord, cfg: RunConfig, out: Path, summary: dict) -> None:
    _atomic(out / "trajectory.csv", lambda p: rec.to_csv(p, include_meta=False))
    _atomic(out / "steps.csv", rec.steps_to_csv)
    meta = {
        "config": cfg.to_dict(),
        "integrator": rec.meta.get("integrator"),
        "controller": rec.meta.get("controller"),
        "summary": summary,
    }
    _write_text(out / "meta.json", json.dumps(harness._jsonable(meta), indent=2, sort_keys=True) + "\n")


def cmd_run(config_path: str | None, overrides: dict, out_dir: str | None = None) -> int:
    try:
        cfg, out_cfg = load_config(config_path, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: cannot read {config_path}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out_dir or out_cfg or ".")
    status = EXIT_OK
    try:
        rec = harness.execute(cfg)
    except DivergenceError as exc:
        rec = getattr(exc, "record", None)
        print(f"diverged: {exc}", file=sys.stderr)
        status = EXIT_DIVERGED
        if rec is None:
            return status
    try:
        summary = run_summary(rec, cfg) if status == EXIT_OK else {
            "total_steps": len(rec) - 1, "diverged_at": rec.meta.get("diverged_at"),
            "t_end": float(rec.t[-1])}
        write_run_outputs(rec, cfg, out, summary)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if status == EXIT_OK:
        print(f"wrote {out}/trajectory.csv, steps.csv, meta.json "
              f"({summary['total_steps']} steps, {summary['rejected_subintervals']} rejected sub-intervals)")
    return status


def _long_csv(header: str, blocks) -> str:
    lines = [header]
    for name, cols in blocks:
        for row in zip(*cols):
            lines.append(",".join([name] + [_fmt(x) if isinstance(x, float) else str(x) for x in row]))
    return "\n".join(lines) + "\n"


def compare_report(res: harness.ExperimentResult) -> tuple[str, bool]:
    checks = harness.ordering_checks(res)
    lines = [f"experiment {res.experiment.name} ({res.experiment.problem}, "
             f"{res.experiment.mode} error of {res.experiment.channel})"]
    for name, rec in res.runs.items():
        lines.append(f"  {name:<20s} max error {res.errors[name].max:.6g}  "
                     f"force evaluations {rec.total_evaluations}  "
                     f"rejected sub-intervals {rec.meta.get('rejected_intervals', 0)}")
    for name, ok, detail in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
    return "\n".join(lines) + "\n", all(ok for _, ok, _ in checks)


def cmd_compare(name: str, out_dir: str = ".", cache: str | None = None) -> int:
    catalog = harness.experiment_catalog()
    if name not in catalog:
        print(f"unknown experiment {name!r}; known: {', '.join(sorted(catalog))}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = harness.run_experiment(catalog[name], cache=cache)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Path(out_dir)
    report, ok = compare_report(res)
    try:
        _write_text(out / "errors.csv", _long_csv(
            "member,t,error",
            ((k, (e.times.tolist(), e.values.tolist())) for k, e in res.errors.items())))
        _write_text(out / "steps_compare.csv", _long_csv(
            "member,t,force_evaluations",
            ((k, (r.t.tolist(), r.evals.tolist())) for k, r in res.runs.items())))
        _write_text(out / "dt_history.csv", _long_csv(
            "member,t,dt",
            ((k, (r.t[1:].tolist(), r.dt[1:].tolist())) for k, r in res.runs.items())))
        _write_text(out / "summary.txt", report)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    sys.stdout.write(report)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_oracle(times) -> int:
    from .models import bounce_analytic

    values = []
    for raw in times:
        try:
            t = float(raw)
        except ValueError:
            print(f"not a time: {raw!r}", file=sys.stderr)
            return EXIT_CONFIG
        if not (math.isfinite(t) and t >= 0):
            print(f"time must be finite and >= 0: {raw!r}", file=sys.stderr)
            return EXIT_CONFIG
        values.append(t)
    lines = ["t,h"] + [f"{_fmt(t)},{_fmt(bounce_analytic(t))}" for t in values]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _config_flags(p: argparse.ArgumentParser) -> None:
    for name, field in RunConfig.__dataclass_fields__.items():
        flag = "--" + name.replace("_", "-")
        if name == "rejection":
            p.add_argument(flag, dest=name, default=None, metavar="BOOL",
                           help="enable step rejection (true/false)")
        else:
            p.add_argument(flag, dest=name, default=None, metavar=name.upper())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curvadapt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="execute one configured run")
    run.add_argument("--config", help="JSON file with flat (optionally dotted) keys")
    run.add_argument("--out", help="output directory (default: current directory)")
    _config_flags(run)
    comp = sub.add_parser("compare", help="run a named experiment and check its orderings")
    comp.add_argument("experiment")
    comp.add_argument("--out", default=".", help="output directory")
    comp.add_argument("--cache", help=f"reference cache directory (default ${harness.CACHE_ENV})")
    orc = sub.add_parser("oracle", help="print the exact bounce height h(t)")
    orc.add_argument("times", nargs="+")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        overrides = {k: getattr(args, k) for k in RunConfig.__dataclass_fields__}
        return cmd_run(args.config, overrides, args.out)
    if args.command == "compare":
        return cmd_compare(args.experiment, args.out, args.cache)
    return cmd_oracle(args.times)


if __name__ == "__main__":
    raise SystemExit(main())

"""
Runs, records and the command line
==================================

A run is described by a flat RunConfig. Records serialize to CSV with a
JSON comment line and read back exactly. The same runs are available from the
shell through ``python3 -m curvadapt``.
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from curvadapt import harness

cfg = harness.RunConfig(problem="bounce", controller="curvature", b=0.444, zeta=10.0, horizon=0.55)
rec = harness.execute(cfg)
print(f"{len(rec) - 1} steps, {rec.total_evaluations} force evaluations")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "bounce.runrecord"
    rec.to_csv(path)
    again = harness.RunRecord.from_csv(path)
    print("round trip identical:", bool((again.d == rec.d).all()))

    # The command line writes trajectory.csv, steps.csv and meta.json.
    out = Path(tmp) / "run"
    sys.stdout.flush()
    subprocess.run([sys.executable, "-m", "curvadapt", "run", "--problem", "bounce",
                    "--controller", "curvature", "--b", "0.444", "--zeta", "10",
                    "--horizon", "0.55", "--out", str(out)], check=True)
    meta = json.loads((out / "meta.json").read_text())
    print("summary from meta.json:", meta["summary"])

# The analytic bounce height is also exposed directly.
sys.stdout.flush()
subprocess.run([sys.executable, "-m", "curvadapt", "oracle", "0.1", "0.5", "0.6"], check=True)

"""
Four-wheel dolly over a bump
============================

A rigid body on four unilateral wheel springs crosses a half-sine bump. The
wheels leave the ground and land again, which is where a fixed step either
wastes effort or loses accuracy. This script runs the reference solution and
then the five step strategies, reporting the error in the fifth spring force
and the number of force evaluations each one needs.

The reference run takes a few seconds and is cached on disk, see
CURVADAPT_CACHE.
"""
import numpy as np

from curvadapt import harness

ref = harness.reference_run("dolly", harness.DOLLY_REFERENCE_DT, horizon=harness.DOLLY_HORIZON)
for wheel in (0, 3):
    d = ref.d[:, wheel]
    flips = np.flatnonzero((d[1:] > 0) != (d[:-1] > 0)) + 1
    print(f"wheel {wheel + 1} contact changes at t =", np.round(ref.t[flips], 4))

res = harness.run_experiment("dolly-controllers")
for name in res.runs:
    print(f"{name:20s} max FK5 error {res.max_errors[name]:9.4g}  evaluations {res.evaluations[name]}")
for name, ok, detail in harness.ordering_checks(res):
    print("PASS" if ok else "FAIL", name, detail)

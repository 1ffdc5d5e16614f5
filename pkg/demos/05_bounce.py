"""
A ball bouncing on a stiff spring
=================================

Free flight is a parabola, which every integrator here reproduces exactly. The
error comes from the short contact phases. Adaptive curvature control spends
its steps inside the contacts, where they are needed, and ends up two orders
of magnitude more accurate than a fixed step of one tenth the stability limit.
"""
from curvadapt import harness
from curvadapt.models import bounce_analytic, bounce_times

tm = bounce_times()
print(f"first touch {tm.t_q:.4f} s, contact lasts {tm.t_cont:.3e} s, period {tm.t_f:.4f} s")
print("exact height at 0.25 s:", float(bounce_analytic(0.25)))

res = harness.run_experiment("bounce-controllers")
for name in res.runs:
    print(f"{name:12s} max relative error {res.max_errors[name]:.3g}  evaluations {res.evaluations[name]}")
print("error ratio fixed / curvature:", res.max_errors["fixed"] / res.max_errors["curvature"])

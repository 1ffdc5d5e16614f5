"""
Curvature of a displacement history
===================================

The controller measures how sharply the curve t -> (t, d(t)) bends. Only the
current velocity and acceleration are needed, so the measure costs one dot
product per step.
"""
import numpy as np

from curvadapt.core import curvature, curvature_1dof

# A body at rest that starts to accelerate bends the curve by |a| exactly.
print("at rest, a = -4.5:", curvature([0.0], [-4.5]))

# Moving fast straightens the curve: the same acceleration matters less.
for v in (0.0, 1.0, 10.0, 100.0):
    print(f"v = {v:6.1f}  k = {curvature_1dof(v, 10.0):.6g}")

# Several degrees of freedom are one curve in a higher-dimensional space.
# For a single DOF the general formula collapses to the scalar one.
v = np.array([3.0, -2.0, 7.0])
a = np.array([0.5, 9.0, -1.0])
print("3-DOF curvature:", curvature(v, a))
print("1-DOF agreement:", curvature([3.0], [10.0]), curvature_1dof(3.0, 10.0))

# Rows of a 2-D array are evaluated independently, which is handy for
# post-processing a stored trajectory.
rng = np.random.default_rng(0)
print("batched:", curvature(rng.normal(size=(4, 2)), rng.normal(size=(4, 2))))

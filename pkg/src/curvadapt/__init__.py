"""Curvature-based adaptive time stepping for explicit structural dynamics."""

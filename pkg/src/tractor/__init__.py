"""Numerical conformal tractor calculus: normal tractor connection, curvature,
holonomy algebra estimates and Fefferman-metric certificates."""

__version__ = "0.1.0"

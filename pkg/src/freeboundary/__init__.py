"""Numerical toolkit for the linearized free-boundary Euler equations on the unit disk.

Lagrangian labels live on a Chebyshev-Fourier disk grid.  The modules cover
the metric geometry of a coordinate map, tangential frames and Lie
derivatives, Dirichlet solves and the Leray projection, the normal operator,
first and second variations of the Euler map, the smoothed evolution, the
smoothing operators and a Nash-Moser iteration.
"""
from ._kernels import BACKEND
from .grid import DiskGrid
from .metric import CoordinateState, MetricData, Trajectory

__version__ = "0.1.0"

__all__ = ["BACKEND", "CoordinateState", "DiskGrid", "MetricData", "Trajectory", "__version__"]

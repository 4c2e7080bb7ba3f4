"""
saddle-flow

Simulation of the Arrow-Hurwicz primal-dual differential system for linearly
constrained convex minimization, including:
- the saddle operator, KKT oracle and operator constants (model)
- AH / GAH / AAH vector fields (flows)
- fixed RK4 and adaptive Dormand-Prince integration with a matrix
  exponential oracle for linear flows (integrate)
- gap, Cesaro, velocity and error series with rate fits (diagnostics)
- built-in instances and figure replication drivers (experiments)
"""

from .cfg import settings, get_settings
from . import errors

__all__ = ["settings", "get_settings", "errors"]

__version__ = "0.1.0"

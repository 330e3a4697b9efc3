"""Neural and finite-difference power/inverse-power eigensolvers.

Subpackages and modules:

- ``autodiff``: expression graphs with spatial jets and parameter gradients
- ``network``: tanh multilayer perceptron trial functions
- ``problems``: differential operators, boundary wrapping, Rayleigh quotient
- ``sampling``: collocation sets and the discretized (RMS) norm
- ``training``: power and inverse-power iteration drivers with Adam
- ``fdm``: classical finite-difference matrix baselines
- ``harness``: experiment configs, registry, artifact emission and CLI
"""

from .errors import (ConfigError, DegeneracyError, EigenpowerError,
                     ShapeError, SolverDivergedError)

__all__ = [
    "ConfigError",
    "DegeneracyError",
    "EigenpowerError",
    "ShapeError",
    "SolverDivergedError",
]

"""hforge: simulation and synthesis of geometric and holonomic quantum gates.

Subpackages: ``qcore`` (operators, schedules, propagation), ``geometry``
(phase decomposition and holonomies), ``gqc`` (Abelian geometric-gate
schemes), ``hqc`` (holonomic schemes), ``protect`` (DFS/NS encodings,
dynamical decoupling, noise models), ``grape`` (pulse optimization), and
the ``cli`` scenario runner.
"""

__version__ = "0.1.0"

from . import geometry, gqc, grape, hqc, protect, qcore  # noqa: F401

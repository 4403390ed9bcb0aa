"""Centralized numerical tolerances.

A single :class:`ToleranceConfig` instance is threaded through the
validation helpers; the CLI can override individual fields via
``--tol-override key=value``.
"""

from dataclasses import dataclass, replace, fields


@dataclass(frozen=True)
class ToleranceConfig:
    unitarity: float = 1e-10
    hermiticity: float = 1e-12
    cyclicity: float = 1e-8
    # Degeneracy detection, relative to ||H||_F.
    degeneracy_spread: float = 1e-9
    degeneracy_gap: float = 1e-6
    # Subspace distance for moving frames vs propagated subspaces.
    subspace: float = 1e-8
    # Holonomic condition (ii): max ||K(t)||_F considered "purely geometric".
    dynamical_norm: float = 1e-8
    # Commensurability snapping: largest denominator accepted for tan^2 ratios.
    max_denominator: int = 64

    def override(self, **kwargs) -> "ToleranceConfig":
        """Return a copy with the given fields replaced."""
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT = ToleranceConfig()

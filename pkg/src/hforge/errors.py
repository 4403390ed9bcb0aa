"""Exception and warning types raised across the package."""


class HforgeError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(HforgeError):
    """Operands have incompatible or invalid dimensions."""


class HermiticityError(HforgeError):
    """A matrix required to be Hermitian is not, within tolerance."""


class UnitarityError(HforgeError):
    """A matrix required to be unitary is not, within tolerance."""


class ProjectorError(HforgeError):
    """A matrix required to be an orthogonal projector is not."""


class NotCyclicError(HforgeError):
    """An evolution expected to be cyclic failed the cyclicity check."""


class CyclicityError(HforgeError):
    """A pulse or loop violates the cyclic-evolution condition."""


class DegeneracyError(HforgeError):
    """Eigenvalue degeneracy structure differs from what an operation requires."""


class FrameError(HforgeError):
    """A moving frame is inconsistent with the subspace it must span."""


class SequenceError(HforgeError):
    """A composite pulse sequence is malformed (e.g. bad echo pi-pulse)."""


class NoSolutionError(HforgeError):
    """A closed-form parameter equation has no solution for the given inputs."""


class ConstraintError(HforgeError):
    """Nonlinear scheme constraints could not be satisfied."""


class DivisionError(HforgeError):
    """A formula parameter that must be nonzero is zero."""


class PulseShapeError(HforgeError):
    """A pulse envelope violates a scheme's shape requirement."""


class SegmentChainError(HforgeError):
    """Multi-pulse segments do not chain subspace-to-subspace."""


class ReducibleError(HforgeError):
    """A four-level coupling block is singular; use the three-level reduction."""


class CommensurabilityError(HforgeError):
    """Singular-value ratio cannot be matched by a small rational."""


class LeakageError(HforgeError):
    """Population leaked out of the computational subspace beyond tolerance."""


class ModelError(HforgeError):
    """A noise or interaction model is not in the declared form."""


class ConfigError(HforgeError):
    """A scenario configuration failed validation."""


class AdiabaticityWarning(UserWarning):
    """The requested evolution rate violates the adiabaticity bound."""


class ConvergenceReport(UserWarning):
    """An optimizer hit its iteration cap below the target objective."""

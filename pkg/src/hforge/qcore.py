"""Dense complex operator algebra and time-ordered propagation.

Operators and kets are plain ``numpy`` arrays (complex128); the helpers
here validate the roles (Hermitian, unitary, projector, normalized) that
the rest of the package relies on.  Hamiltonians are in angular-frequency
units with hbar = 1; times are in the inverse units.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import (
    DimensionError,
    HermiticityError,
    ProjectorError,
    UnitarityError,
)
from .tolerances import DEFAULT, ToleranceConfig

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "ControlSchedule",
    "EvolutionRecord",
    "expectation",
    "gate_fidelity",
    "herm_expm",
    "hermitian_basis",
    "ket",
    "kron",
    "normalize",
    "projector_basis",
    "propagate",
    "require_hermitian",
    "require_projector",
    "require_unitary",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def require_hermitian(h: np.ndarray, tol: ToleranceConfig = DEFAULT) -> np.ndarray:
    """Return ``h`` as complex128, raising HermiticityError if h != h^dag."""
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {h.shape}")
    scale = max(np.linalg.norm(h), 1.0)
    if np.linalg.norm(h - h.conj().T) > tol.hermiticity * scale:
        raise HermiticityError(
            f"matrix is not Hermitian within {tol.hermiticity:g} (relative)"
        )
    return h


def require_unitary(u: np.ndarray, tol: ToleranceConfig = DEFAULT) -> np.ndarray:
    u = np.asarray(u, dtype=np.complex128)
    d = u.shape[0]
    if np.linalg.norm(u.conj().T @ u - np.eye(d)) > tol.unitarity * d:
        raise UnitarityError(f"matrix is not unitary within {tol.unitarity:g}")
    return u


def require_projector(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    p = np.asarray(p, dtype=np.complex128)
    if np.linalg.norm(p - p.conj().T) > tol or np.linalg.norm(p @ p - p) > tol:
        raise ProjectorError("matrix is not an orthogonal projector")
    return p


def ket(amplitudes: Sequence[complex]) -> np.ndarray:
    """Normalized state vector from raw amplitudes."""
    v = np.asarray(amplitudes, dtype=np.complex128)
    n = np.linalg.norm(v)
    if n == 0:
        raise DimensionError("cannot normalize the zero vector")
    return v / n


normalize = ket


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product of two operators or two kets."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def expectation(psi: np.ndarray, op: np.ndarray) -> complex:
    """<psi|op|psi>."""
    psi = np.asarray(psi, dtype=np.complex128)
    op = np.asarray(op, dtype=np.complex128)
    if op.shape[0] != psi.shape[0]:
        raise DimensionError("operator and ket dimensions differ")
    return complex(np.vdot(psi, op @ psi))


def hermitian_basis(dim: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) Hermitian basis of dim x dim matrices.

    Ordering: diagonal units, then the symmetric and antisymmetric pair
    for each i < j.  Any Hermitian H decomposes with real coefficients
    c_k = Tr(B_k H).
    """
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=np.complex128)
        e[i, i] = 1.0
        basis.append(e)
    s2 = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = s2
            e[j, i] = s2
            basis.append(e)
            e = np.zeros((dim, dim), dtype=np.complex128)
            e[i, j] = -1j * s2
            e[j, i] = 1j * s2
            basis.append(e)
    return basis


def projector_basis(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """(d, L) orthonormal basis of range(P).

    For projectors that are diagonal with 0/1 entries the canonical basis
    vectors are used in index order, so computational-basis blocks keep
    their ordering; otherwise an eigenbasis is returned.
    """
    p = require_projector(p, tol)
    d = p.shape[0]
    diag = np.diag(p)
    if np.linalg.norm(p - np.diag(diag)) < tol and np.all(
        (np.abs(diag) < tol) | (np.abs(diag - 1) < tol)
    ):
        cols = [np.eye(d, dtype=np.complex128)[:, i] for i in range(d) if diag[i].real > 0.5]
        return np.column_stack(cols)
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5]


# ---------------------------------------------------------------------------
# matrix exponential
# ---------------------------------------------------------------------------

def herm_expm(h: np.ndarray, t: float, tol: ToleranceConfig = DEFAULT) -> np.ndarray:
    """expm(-i h t) by Hermitian eigendecomposition (exact to roundoff)."""
    h = require_hermitian(h, tol)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------

def _canonical_coefficients(h: np.ndarray) -> np.ndarray:
    """Real coefficients of a Hermitian matrix on :func:`hermitian_basis`.

    Vectorized entry reads (no matmuls): diagonal entries, then
    sqrt(2) Re H_ij and -sqrt(2) Im H_ij for each i < j.
    """
    d = h.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    off = h[iu, ju]
    coeffs = np.empty(d * d)
    coeffs[:d] = np.diag(h).real
    coeffs[d::2] = np.sqrt(2.0) * off.real
    coeffs[d + 1 :: 2] = -np.sqrt(2.0) * off.imag
    return coeffs


@dataclass
class ControlSchedule:
    """Piecewise-constant Hamiltonian: H_j = sum_k coeffs[j, k] basis[k].

    basis entries must be Hermitian and share one dimension; all segment
    durations must be positive.  Schedules built from explicit matrices
    keep them cached so reconstruction does not round-trip through the
    (possibly large) canonical basis.
    """

    basis: tuple
    segments: tuple  # of (duration, coefficient vector)
    _matrices: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.basis:
            raise DimensionError("schedule needs at least one basis operator")
        dim = self.basis[0].shape[0]
        for b in self.basis:
            if b.shape != (dim, dim):
                raise DimensionError("basis operators must share one dimension")
        for dur, coeffs in self.segments:
            if dur <= 0:
                raise DimensionError("segment durations must be positive")
            if len(coeffs) != len(self.basis):
                raise DimensionError("coefficient vector length must match basis")

    @property
    def dim(self) -> int:
        return self.basis[0].shape[0]

    @property
    def total_time(self) -> float:
        return float(sum(d for d, _ in self.segments))

    @property
    def durations(self) -> np.ndarray:
        return np.array([d for d, _ in self.segments])

    def segment_hamiltonian(self, j: int) -> np.ndarray:
        if self._matrices is not None:
            return self._matrices[j]
        _, coeffs = self.segments[j]
        h = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for c, b in zip(coeffs, self.basis):
            h = h + c * b
        return h

    def matrices(self) -> np.ndarray:
        """(n, d, d) stack of the segment Hamiltonians."""
        if self._matrices is not None:
            return self._matrices
        return np.stack([self.segment_hamiltonian(j) for j in range(len(self.segments))])

    def concat(self, other: "ControlSchedule") -> "ControlSchedule":
        """Schedule running self first, then other (shared basis required)."""
        if len(other.basis) != len(self.basis) or any(
            not np.array_equal(a, b) for a, b in zip(self.basis, other.basis)
        ):
            raise DimensionError("can only concatenate schedules over one basis")
        cache = None
        if self._matrices is not None and other._matrices is not None:
            cache = np.concatenate([self._matrices, other._matrices])
        return ControlSchedule(self.basis, self.segments + other.segments, cache)

    def reversed(self) -> "ControlSchedule":
        """Segments in reverse order (traverses the control path backwards)."""
        cache = None if self._matrices is None else self._matrices[::-1].copy()
        return ControlSchedule(self.basis, tuple(reversed(self.segments)), cache)

    def scaled(self, factor: float) -> "ControlSchedule":
        """All coefficient vectors multiplied by ``factor``."""
        segs = tuple((d, np.asarray(c) * factor) for d, c in self.segments)
        cache = None if self._matrices is None else self._matrices * factor
        return ControlSchedule(self.basis, segs, cache)

    @classmethod
    def from_hamiltonians(
        cls, hamiltonians: Sequence[np.ndarray], durations: Sequence[float]
    ) -> "ControlSchedule":
        """Schedule from explicit per-segment Hermitian matrices."""
        if len(hamiltonians) != len(durations):
            raise DimensionError("one duration per Hamiltonian required")
        hs = np.stack([require_hermitian(h) for h in hamiltonians])
        dim = hs.shape[1]
        basis = tuple(hermitian_basis(dim))
        segs = tuple(
            (float(dur), _canonical_coefficients(h))
            for h, dur in zip(hs, durations)
        )
        return cls(basis, segs, hs)

    @classmethod
    def from_sampler(
        cls,
        sampler: Callable[[float], np.ndarray],
        total_time: float,
        n_segments: int,
    ) -> "ControlSchedule":
        """Midpoint-sampled piecewise-constant approximation of a smooth H(t)."""
        dt = total_time / n_segments
        hs = [sampler((j + 0.5) * dt) for j in range(n_segments)]
        return cls.from_hamiltonians(hs, [dt] * n_segments)


# ---------------------------------------------------------------------------
# evolution records
# ---------------------------------------------------------------------------

@dataclass
class EvolutionRecord:
    """Sampled trajectory of a propagation.

    grid: (n+1,) strictly increasing times with grid[0] = 0;
    propagators: (n+1, d, d) with U(grid[0]) = I;
    hamiltonians: (n+1, d, d) per-sample H(t_j);
    interval_hamiltonians: optional (n, d, d) exact constant H on each
    interval (present for piecewise-constant schedules, where it makes
    interval-wise quadrature exact and is preferred by consumers).
    """

    grid: np.ndarray
    propagators: np.ndarray
    hamiltonians: np.ndarray
    interval_hamiltonians: Optional[np.ndarray] = None
    initial_states: Optional[list] = None

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise DimensionError("time grid must be strictly increasing")
        if not np.allclose(self.propagators[0], np.eye(self.dim), atol=1e-12):
            raise UnitarityError("record must start from the identity")

    @property
    def dim(self) -> int:
        return self.propagators.shape[1]

    @property
    def total_time(self) -> float:
        return float(self.grid[-1])

    @property
    def final_propagator(self) -> np.ndarray:
        return self.propagators[-1]

    def states(self, psi0: np.ndarray) -> np.ndarray:
        """(n+1, d) trajectory psi(t_j) = U(t_j) psi0."""
        return np.einsum("tij,j->ti", self.propagators, np.asarray(psi0, complex))

    def energy_expectations(self, psi0: np.ndarray) -> np.ndarray:
        """<psi(t_j)|H(t_j)|psi(t_j)> on the grid (real array)."""
        states = self.states(psi0)
        vals = np.einsum("ti,tij,tj->t", states.conj(), self.hamiltonians, states)
        return vals.real


def propagate(
    schedule: ControlSchedule,
    substeps_per_segment: int = 64,
    tol: ToleranceConfig = DEFAULT,
) -> EvolutionRecord:
    """Time-ordered evolution of a piecewise-constant schedule.

    Each segment is split into equal substeps carrying its constant H, so
    the record's grid resolves the trajectory for phase extraction.  The
    propagators are exact (to roundoff) for the piecewise-constant H; the
    quality of a smooth-H approximation is set by how the schedule was
    sampled, not by this routine.
    """
    if substeps_per_segment < 1:
        raise DimensionError("substeps_per_segment must be >= 1")
    seg_hs = schedule.matrices()
    durs = schedule.durations
    hs = np.repeat(seg_hs, substeps_per_segment, axis=0)
    dts = np.repeat(durs / substeps_per_segment, substeps_per_segment)
    us = _kernels.chain_propagate(np.ascontiguousarray(hs), dts)
    grid = np.concatenate([[0.0], np.cumsum(dts)])
    hs_samples = np.concatenate([hs, hs[-1:]], axis=0)
    return EvolutionRecord(
        grid=grid,
        propagators=us,
        hamiltonians=hs_samples,
        interval_hamiltonians=hs,
    )


def record_from_functions(
    u_of_t: Callable[[float], np.ndarray],
    h_of_t: Callable[[float], np.ndarray],
    total_time: float,
    samples: int,
) -> EvolutionRecord:
    """Record built from closed-form propagators (exact solutions).

    Used when U(t) is known analytically; the per-sample H feeds the
    dynamical-phase quadrature.
    """
    grid = np.linspace(0.0, total_time, samples + 1)
    us = np.stack([u_of_t(t) for t in grid])
    hs = np.stack([h_of_t(t) for t in grid])
    return EvolutionRecord(grid=grid, propagators=us, hamiltonians=hs)


# ---------------------------------------------------------------------------
# gate comparison
# ---------------------------------------------------------------------------

def gate_fidelity(
    u: np.ndarray,
    v: np.ndarray,
    p: Optional[np.ndarray] = None,
    tol: ToleranceConfig = DEFAULT,
) -> float:
    """Projected overlap fidelity |Tr[V^dag U P]|^2 / L^2.

    P defaults to the identity.  Insensitive to a global phase on either
    gate by construction.
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    if u.shape != v.shape:
        raise DimensionError("gates must share one dimension")
    if p is None:
        p = np.eye(u.shape[0], dtype=np.complex128)
    p = require_projector(p)
    if p.shape != u.shape:
        raise DimensionError("projector dimension must match the gates")
    ldim = np.trace(p).real
    z = np.trace(v.conj().T @ u @ p)
    return float(abs(z) ** 2 / ldim**2)


def phase_aligned_distance(u: np.ndarray, v: np.ndarray) -> float:
    """min over global phase of ||e^{i chi} U - V||_F (exact optimum)."""
    u = np.asarray(u, complex)
    v = np.asarray(v, complex)
    z = np.trace(v.conj().T @ u)
    chi = -np.angle(z) if abs(z) > 0 else 0.0
    return float(np.linalg.norm(np.exp(1j * chi) * u - v))

"""Collective-error protection: DFS/NS encodings, dynamical decoupling,
and quasi-static noise models for robustness studies.

The environment is modeled as a small explicit quantum register so every
claim can be checked by exact propagation.
"""

from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import logm

from .errors import DimensionError, ModelError
from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ControlSchedule,
    herm_expm,
    kron,
)

__all__ = [
    "DfsCode",
    "NoiseModel",
    "NsDecomposition",
    "collective_error_ops",
    "dd_sequence",
    "dfs2",
    "dfs3",
    "dfs4",
    "dfs_encode",
    "dfs_logical_lambda",
    "noise_inject",
    "ns_dimensions",
]

_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}


def _embed(op: np.ndarray, k: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=np.complex128)
    for i in range(n):
        out = kron(out, op if i == k else np.eye(2))
    return out


def collective_error_ops(n_qubits: int, axes: Sequence[str] = ("x", "y", "z")) -> dict:
    """Collective spin operators S_alpha = (1/2) sum_k sigma_alpha^k."""
    if n_qubits < 1:
        raise DimensionError("need at least one qubit")
    out = {}
    for ax in axes:
        if ax not in _PAULI:
            raise DimensionError(f"unknown axis {ax!r}")
        s = np.zeros((2**n_qubits, 2**n_qubits), dtype=np.complex128)
        for k in range(n_qubits):
            s += _embed(_PAULI[ax], k, n_qubits)
        out[ax] = 0.5 * s
    return out


# ---------------------------------------------------------------------------
# noiseless-subsystem bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NsDecomposition:
    """Angular-momentum sector list (J, n_J, d_J) of N spin-1/2 systems."""

    n_qubits: int
    sectors: tuple  # of (j, multiplicity n_J, dimension d_J)

    @property
    def total_dimension(self) -> int:
        return sum(n * d for _, n, d in self.sectors)


def ns_dimensions(n_qubits: int) -> NsDecomposition:
    """Sector decomposition H = (+)_J C^{n_J} (x) C^{d_J}.

    n_J = (2J+1) N! / ((N/2+1+J)! (N/2-J)!) and d_J = 2J+1; completeness
    sum n_J d_J = 2^N is asserted.
    """
    if n_qubits < 1:
        raise DimensionError("need at least one qubit")
    sectors = []
    # J runs from 0 (even N) or 1/2 (odd N) up to N/2 in integer steps;
    # N/2 + 1 + J and N/2 - J are integers for every admissible J.
    twice_j = n_qubits % 2
    while twice_j <= n_qubits:
        j = twice_j / 2
        d_j = twice_j + 1
        num = d_j * factorial(n_qubits)
        den = _int_factorial(n_qubits / 2 + 1 + j) * _int_factorial(n_qubits / 2 - j)
        n_j = num // den
        sectors.append((j, n_j, d_j))
        twice_j += 2
    dec = NsDecomposition(n_qubits=n_qubits, sectors=tuple(sectors))
    if dec.total_dimension != 2**n_qubits:
        raise DimensionError("sector dimensions do not sum to 2^N")
    return dec


def _int_factorial(x: float) -> int:
    xi = int(round(x))
    if abs(x - xi) > 1e-9 or xi < 0:
        raise DimensionError(f"factorial argument {x} is not a nonnegative integer")
    return factorial(xi)


# ---------------------------------------------------------------------------
# DFS codes
# ---------------------------------------------------------------------------

def _basis_ket(bits: str) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=np.complex128)
    v[int(bits, 2)] = 1.0
    return v


@dataclass(frozen=True)
class DfsCode:
    """Decoherence-free encoding: logical basis kets over physical qubits."""

    name: str
    physical_qubits: int
    logical_basis: tuple        # kets, one per logical level
    auxiliary_basis: tuple = ()

    @property
    def logical_dim(self) -> int:
        return len(self.logical_basis)

    def encoder(self) -> np.ndarray:
        """(2^n, L) isometry from logical amplitudes to the physical space."""
        return np.column_stack(self.logical_basis)


def dfs2() -> DfsCode:
    """Two-qubit collective-dephasing code: |0>_L = |01>, |1>_L = |10>."""
    return DfsCode("DFS2", 2, (_basis_ket("01"), _basis_ket("10")))


def dfs3() -> DfsCode:
    """Three-qubit code |0>_L=|010>, |1>_L=|001>, auxiliary |a>_L=|100>."""
    return DfsCode(
        "DFS3", 3, (_basis_ket("010"), _basis_ket("001")), (_basis_ket("100"),)
    )


def dfs4() -> DfsCode:
    """Four-qubit code with all logical states at S_z eigenvalue +1."""
    return DfsCode(
        "DFS4",
        4,
        (_basis_ket("0001"), _basis_ket("0010")),
        (_basis_ket("0100"), _basis_ket("1000")),
    )


def dfs_encode(code: DfsCode, logical: np.ndarray) -> np.ndarray:
    """Map logical amplitudes onto the physical basis."""
    logical = np.asarray(logical, dtype=np.complex128)
    if logical.shape != (code.logical_dim,):
        raise DimensionError(
            f"{code.name} encodes {code.logical_dim} logical amplitudes"
        )
    return code.encoder() @ logical


def dfs_logical_lambda(
    coupling_0a: float, coupling_1a: float, pulse_area: float = np.pi
) -> tuple[ControlSchedule, DfsCode]:
    """XY-interaction schedule acting as a Lambda system inside DFS3.

    Physical two-body terms (c/2)(sx sx + sy sy) on the qubit pairs (1,2)
    and (1,3) couple |0>_L = |010> and |1>_L = |001> to the auxiliary
    |a>_L = |100> with strengths coupling_0a and coupling_1a; the span of
    the three logical states is the full S_z = +1/2 sector, so the
    schedule never leaks out of it, and collective dephasing acts on the
    sector as a global phase.
    """
    code = dfs3()
    n = 3
    h = 0.5 * coupling_0a * (
        _embed(SIGMA_X, 0, n) @ _embed(SIGMA_X, 1, n)
        + _embed(SIGMA_Y, 0, n) @ _embed(SIGMA_Y, 1, n)
    )
    h += 0.5 * coupling_1a * (
        _embed(SIGMA_X, 0, n) @ _embed(SIGMA_X, 2, n)
        + _embed(SIGMA_Y, 0, n) @ _embed(SIGMA_Y, 2, n)
    )
    strength = float(np.hypot(coupling_0a, coupling_1a))
    if strength == 0:
        raise DimensionError("at least one coupling must be nonzero")
    duration = pulse_area / strength
    schedule = ControlSchedule.from_hamiltonians([h], [duration])
    return schedule, code


# ---------------------------------------------------------------------------
# dynamical decoupling
# ---------------------------------------------------------------------------

@dataclass
class DdResult:
    cycle_unitary: np.ndarray
    residual: float
    cycle_time: float


def dd_sequence(
    kind: str,
    tau: float,
    h_env: np.ndarray,
    interactions: Sequence[tuple],
    n_system_qubits: int = 1,
    env_dim: Optional[int] = None,
    cycles: int = 1,
) -> DdResult:
    """Ideal-pulse decoupling cycle and its uncancelled residual.

    kind "X": [tau, X, tau, X] cancels interactions anticommuting with
    X = (x) sigma_x (decoupled at 2 tau); kind "XY": [tau, X, tau, Y,
    tau, X, tau, Y] removes every linear coupling at 4 tau.
    ``interactions`` is the declared linear form: (system Pauli label or
    matrix, environment operator) pairs; anything else raises ModelError.
    The residual is the norm of log(U_cycle e^{+i c H_E tau}) per cycle,
    measuring the coupling surviving first-order averaging.
    """
    h_env = np.asarray(h_env, dtype=np.complex128)
    if env_dim is None:
        env_dim = h_env.shape[0]
    sys_dim = 2**n_system_qubits
    eye_env = np.eye(env_dim, dtype=np.complex128)
    eye_sys = np.eye(sys_dim, dtype=np.complex128)

    h_total = kron(eye_sys, h_env)
    for sys_op, env_op in interactions:
        mat = _declared_coupling(sys_op, n_system_qubits, kind)
        h_total += kron(mat, np.asarray(env_op, dtype=np.complex128))

    u_free = herm_expm(h_total, tau)
    x_op = kron(_collective_pulse("x", n_system_qubits), eye_env)
    y_op = kron(_collective_pulse("y", n_system_qubits), eye_env)
    z_op = kron(_collective_pulse("z", n_system_qubits), eye_env)

    if kind.upper() == "X":
        cycle = x_op @ u_free @ x_op @ u_free
        c_time = 2 * tau
    elif kind.upper() == "XY":
        cycle = z_op @ u_free @ z_op @ y_op @ u_free @ y_op @ x_op @ u_free @ x_op @ u_free
        c_time = 4 * tau
    else:
        raise ModelError(f"unknown decoupling kind {kind!r}")

    target = kron(eye_sys, herm_expm(h_env, c_time))
    dev = logm(cycle @ target.conj().T)
    residual = float(np.linalg.norm(dev))

    total = np.linalg.matrix_power(cycle, cycles)
    return DdResult(cycle_unitary=total, residual=residual, cycle_time=c_time)


def _collective_pulse(axis: str, n_qubits: int) -> np.ndarray:
    out = np.eye(1, dtype=np.complex128)
    for _ in range(n_qubits):
        out = kron(out, _PAULI[axis])
    return out


def _declared_coupling(sys_op, n_qubits: int, kind: str) -> np.ndarray:
    """Validate one system-side coupling against the declared linear form.

    Labels are Pauli strings of weight one (e.g. 'z', 'iy'); matrices are
    decomposed onto Pauli strings and must be supported on weight-one
    terms.  D_x additionally requires anticommutation with the collective
    X pulse, i.e. only y/z couplings.
    """
    labels = ["i", "x", "y", "z"]
    paulis = {"i": np.eye(2, dtype=complex), **_PAULI}
    if isinstance(sys_op, str):
        if len(sys_op) != n_qubits or any(c not in labels for c in sys_op):
            raise ModelError(f"bad interaction label {sys_op!r}")
        weight = sum(c != "i" for c in sys_op)
        axes = {c for c in sys_op if c != "i"}
        mat = np.eye(1, dtype=np.complex128)
        for c in sys_op:
            mat = kron(mat, paulis[c])
    else:
        mat = np.asarray(sys_op, dtype=np.complex128)
        dim = 2**n_qubits
        if mat.shape != (dim, dim):
            raise ModelError("interaction operator has wrong dimension")
        weight = 0
        axes = set()
        from itertools import product as iproduct

        for string in iproduct(labels, repeat=n_qubits):
            op = np.eye(1, dtype=np.complex128)
            for c in string:
                op = kron(op, paulis[c])
            coeff = np.trace(op.conj().T @ mat) / dim
            if abs(coeff) > 1e-12:
                w = sum(c != "i" for c in string)
                weight = max(weight, w)
                axes |= {c for c in string if c != "i"}
    if weight != 1:
        raise ModelError("interactions must be weight-one (linear) couplings")
    if kind.upper() == "X" and "x" in axes:
        raise ModelError("D_x cannot cancel x-axis couplings (they commute with X)")
    return mat


# ---------------------------------------------------------------------------
# quasi-static noise models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseDistribution:
    """Declared scalar error distribution.

    kind "gaussian" (sigma), "uniform" (half_width, symmetric about 0), or
    "fixed" (value).
    """

    kind: str
    scale: float

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "gaussian":
            return float(rng.normal(0.0, self.scale))
        if self.kind == "uniform":
            return float(rng.uniform(-self.scale, self.scale))
        if self.kind == "fixed":
            return self.scale
        raise ModelError(f"unknown distribution kind {self.kind!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Quasi-static error model H -> H + sum_l delta_l E_l + delta_1-scaled controls.

    error_ops: (Hermitian operator, distribution) pairs; amplitude_error:
    distribution of the multiplicative control error delta_1.  One draw
    per gate execution (quasi-static convention).
    """

    error_ops: tuple = ()
    amplitude_error: Optional[NoiseDistribution] = None

    def draw(self, seed: int) -> tuple[float, tuple]:
        rng = np.random.default_rng(seed)
        delta1 = 0.0 if self.amplitude_error is None else self.amplitude_error.sample(rng)
        deltas = tuple(dist.sample(rng) for _, dist in self.error_ops)
        return delta1, deltas


def noise_inject(
    schedule: ControlSchedule, model: NoiseModel, seed: int
) -> ControlSchedule:
    """Perturbed schedule: controls scaled by (1 + delta_1), static error
    terms sum delta_l E_l added to every segment (one draw per call)."""
    delta1, deltas = model.draw(seed)
    static = np.zeros((schedule.dim, schedule.dim), dtype=np.complex128)
    for (op, _), d in zip(model.error_ops, deltas):
        op = np.asarray(op, dtype=np.complex128)
        if op.shape != (schedule.dim, schedule.dim):
            raise DimensionError("error operator dimension mismatch")
        static += d * op
    hs = schedule.matrices() * (1.0 + delta1) + static
    return ControlSchedule.from_hamiltonians(list(hs), list(schedule.durations))

"""Holonomic gate schemes: builders and closed-form predictors.

Covers the adiabatic tripod, the resonant and off-resonant (single-shot)
Lambda models, the Sorensen-Molmer two-qubit setting, multi-pulse loops,
the four-level SVD scheme and its XY-auxiliary realizations, plus
reverse-engineered Hamiltonians and counterdiabatic (STA) driving.

Basis conventions: single Lambda systems are ordered {|0>, |1>, |e>};
tripods {|0>, |1>, |a>, |e>}; multi-qubit spaces are tensor products in
the written qubit order.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CommensurabilityError,
    CyclicityError,
    DegeneracyError,
    DimensionError,
    FrameError,
    LeakageError,
    PulseShapeError,
    ReducibleError,
    SegmentChainError,
)
from .geometry import (
    HolonomyReport,
    ParameterLoop,
    bargmann_loop_phase,
    check_holonomic_conditions,
    polar_unitary,
    wilczek_zee_holonomy,
)
from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ControlSchedule,
    EvolutionRecord,
    herm_expm,
    kron,
    propagate,
)
from .tolerances import DEFAULT, ToleranceConfig

__all__ = [
    "FourLevelCoupling",
    "LambdaParams",
    "PathSpec",
    "compose_lambda_gates",
    "four_level_gate",
    "lambda_hamiltonian",
    "lambda_resonant_gate",
    "multi_pulse_gate",
    "reverse_engineer_hamiltonian",
    "single_shot_gate",
    "sm_two_qubit_gate",
    "snap_ratio",
    "sta_counterdiabatic",
    "tripod_gates",
    "xy_aux_single_gate",
    "xy_aux_two_qubit_gate",
]


QUBIT_PROJECTOR_3 = np.diag([1.0, 1.0, 0.0]).astype(np.complex128)


# ---------------------------------------------------------------------------
# Lambda model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaParams:
    """Bright-state angles and drive of the three-level Lambda model.

    omega_0 = sin(theta/2) e^{i phi} and omega_1 = -cos(theta/2) set the
    relative strength/phase of the two pulse legs (|omega_0|^2 +
    |omega_1|^2 = 1); detuning = 0 selects the resonant scheme, which
    requires pulse area pi.
    """

    theta: float
    phi: float
    pulse_area: float = np.pi
    detuning: float = 0.0

    @property
    def omega_0(self) -> complex:
        return np.sin(self.theta / 2) * np.exp(1j * self.phi)

    @property
    def omega_1(self) -> complex:
        return -np.cos(self.theta / 2)

    @property
    def axis(self) -> np.ndarray:
        return np.array(
            [
                np.sin(self.theta) * np.cos(self.phi),
                np.sin(self.theta) * np.sin(self.phi),
                np.cos(self.theta),
            ]
        )


def lambda_hamiltonian(
    omega_0: complex, omega_1: complex, amplitude: float = 1.0, detuning: float = 0.0
) -> np.ndarray:
    """Lambda Hamiltonian on {|0>, |1>, |e>}:
    -Delta |e><e| + Omega (w0 |e><0| + w1 |e><1| + h.c.)."""
    h = np.zeros((3, 3), dtype=np.complex128)
    h[2, 0] = amplitude * omega_0
    h[2, 1] = amplitude * omega_1
    h[0, 2] = np.conj(h[2, 0])
    h[1, 2] = np.conj(h[2, 1])
    h[2, 2] = -detuning
    return h


def n_dot_sigma(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


@dataclass
class HolonomicGateResult:
    schedule: ControlSchedule
    record: EvolutionRecord
    gate: np.ndarray            # computational block of U(T)
    predicted: np.ndarray       # closed-form gate
    report: HolonomyReport      # holonomic-condition residuals


def _lambda_schedule(
    omega_0: complex,
    omega_1: complex,
    pulse_area: float,
    detuning: float = 0.0,
    n_segments: int = 1,
    envelope: Optional[Callable[[float], float]] = None,
    duration: float = 1.0,
) -> ControlSchedule:
    """Schedule with exact total pulse area (envelope normalized internally)."""
    if envelope is None:
        hs = [lambda_hamiltonian(omega_0, omega_1, pulse_area / duration, detuning)]
        return ControlSchedule.from_hamiltonians(hs, [duration])
    dt = duration / n_segments
    mids = np.array([envelope((j + 0.5) * dt) for j in range(n_segments)])
    if np.any(mids < 0):
        raise PulseShapeError("envelope must be nonnegative")
    mids *= pulse_area / (np.sum(mids) * dt)
    hs = [lambda_hamiltonian(omega_0, omega_1, m, detuning) for m in mids]
    return ControlSchedule.from_hamiltonians(hs, [dt] * n_segments)


def lambda_resonant_gate(
    p: LambdaParams,
    n_segments: int = 1,
    envelope: Optional[Callable[[float], float]] = None,
    substeps: int = 1,
    tol: ToleranceConfig = DEFAULT,
) -> HolonomicGateResult:
    """Resonant Lambda gate: a pi rotation n.sigma on Span{|0>, |1>}.

    Requires zero detuning and pulse area pi (the cyclicity condition);
    the closed form is the Householder reflection |d><d| - |b><b|.
    """
    if p.detuning != 0:
        raise CyclicityError("resonant scheme requires zero detuning")
    if abs(p.pulse_area - np.pi) > 1e-12:
        raise CyclicityError("resonant scheme requires pulse area pi")
    schedule = _lambda_schedule(
        p.omega_0, p.omega_1, p.pulse_area, 0.0, n_segments, envelope
    )
    record = propagate(schedule, substeps)
    gate = record.final_propagator[:2, :2].copy()
    report = check_holonomic_conditions(record, QUBIT_PROJECTOR_3, tol=tol)
    return HolonomicGateResult(
        schedule=schedule,
        record=record,
        gate=gate,
        predicted=n_dot_sigma(p.axis),
        report=report,
    )


def compose_lambda_gates(n: np.ndarray, m: np.ndarray) -> np.ndarray:
    """(n.m) I - i sigma.(n x m): two successive resonant loops.

    A rotation by 2 arccos(n.m) about the normal of the (n, m) plane.
    """
    n = np.asarray(n, float)
    m = np.asarray(m, float)
    if abs(np.linalg.norm(n) - 1) > 1e-12 or abs(np.linalg.norm(m) - 1) > 1e-12:
        raise DimensionError("axis vectors must be unit length")
    cross = np.cross(n, m)
    return float(np.dot(n, m)) * np.eye(2, dtype=complex) - 1j * n_dot_sigma(cross)


# ---------------------------------------------------------------------------
# Sorensen-Molmer two-qubit gate
# ---------------------------------------------------------------------------

def _two_qutrit_ket(a: int, b: int) -> np.ndarray:
    v = np.zeros(9, dtype=np.complex128)
    v[3 * a + b] = 1.0
    return v


def sm_two_qubit_gate(
    theta: float,
    phi: float,
    n_segments: int = 1,
    envelope: Optional[Callable[[float], float]] = None,
    substeps: int = 1,
    tol: ToleranceConfig = DEFAULT,
) -> HolonomicGateResult:
    """Sorensen-Molmer holonomic two-qubit gate on a pair of qutrits.

    H_2 = Omega'(t) (H_e + H_a) with
    H_e = sin(t/2) e^{i p/2}|ee><00| - cos(t/2) e^{-i p/2}|ee><11| + h.c.
    and H_a the commuting singly-excited exchange term; at pulse area pi
    the computational block equals
    [[cos t, 0, 0, sin t e^{-ip}], [0,1,0,0], [0,0,1,0],
     [sin t e^{ip}, 0, 0, -cos t]].
    """
    ee = _two_qutrit_ket(2, 2)
    k00 = _two_qutrit_ket(0, 0)
    k11 = _two_qutrit_ket(1, 1)
    he = np.sin(theta / 2) * np.exp(1j * phi / 2) * np.outer(ee, k00.conj())
    he -= np.cos(theta / 2) * np.exp(-1j * phi / 2) * np.outer(ee, k11.conj())
    he = he + he.conj().T
    e0 = _two_qutrit_ket(2, 0)
    zero_e = _two_qutrit_ket(0, 2)
    e1 = _two_qutrit_ket(2, 1)
    one_e = _two_qutrit_ket(1, 2)
    ha = np.sin(theta / 2) * np.outer(e0, zero_e.conj())
    ha -= np.cos(theta / 2) * np.outer(e1, one_e.conj())
    ha = ha + ha.conj().T

    h_full = he + ha
    if envelope is None:
        schedule = ControlSchedule.from_hamiltonians([np.pi * h_full], [1.0])
    else:
        dt = 1.0 / n_segments
        mids = np.array([envelope((j + 0.5) * dt) for j in range(n_segments)])
        mids *= np.pi / (np.sum(mids) * dt)
        schedule = ControlSchedule.from_hamiltonians(
            [m * h_full for m in mids], [dt] * n_segments
        )
    record = propagate(schedule, substeps)

    comp = [0, 1, 3, 4]  # |00>, |01>, |10>, |11> among the 3x3 states
    gate = record.final_propagator[np.ix_(comp, comp)].copy()
    p0 = np.zeros((9, 9), dtype=np.complex128)
    for i in comp:
        p0[i, i] = 1.0
    report = check_holonomic_conditions(record, p0, tol=tol)
    predicted = np.array(
        [
            [np.cos(theta), 0, 0, np.sin(theta) * np.exp(-1j * phi)],
            [0, 1, 0, 0],
            [0, 0, 1, 0],
            [np.sin(theta) * np.exp(1j * phi), 0, 0, -np.cos(theta)],
        ],
        dtype=np.complex128,
    )
    return HolonomicGateResult(
        schedule=schedule, record=record, gate=gate, predicted=predicted, report=report
    )


# ---------------------------------------------------------------------------
# single-shot (off-resonant) scheme
# ---------------------------------------------------------------------------

def single_shot_gate(
    alpha: float,
    beta: float,
    gamma: float,
    amplitude: float = 1.0,
    substeps: int = 1,
    tol: ToleranceConfig = DEFAULT,
) -> HolonomicGateResult:
    """One-loop off-resonant Lambda gate e^{-i (phi/2) n.sigma}.

    Square pulse with Omega T = pi, detuning Delta = -2 Omega sin(gamma),
    omega_0 = cos(alpha) cos(gamma), omega_1 = sin(alpha) cos(gamma)
    e^{i beta}; the rotation angle is phi = pi (1 + sin gamma) about
    n = (sin 2a cos b, sin 2a sin b, cos 2a).
    """
    duration = np.pi / amplitude
    # The coupling phases are conjugated relative to the bright state
    # cos(a)|0> + e^{i b} sin(a)|1> they produce, which carries the printed
    # rotation axis n.
    w0 = np.cos(alpha) * np.cos(gamma)
    w1 = np.sin(alpha) * np.cos(gamma) * np.exp(-1j * beta)
    delta = -2.0 * amplitude * np.sin(gamma)
    h = lambda_hamiltonian(w0, w1, amplitude, delta)
    schedule = ControlSchedule.from_hamiltonians([h], [duration])
    record = propagate(schedule, substeps)
    gate = record.final_propagator[:2, :2].copy()
    report = check_holonomic_conditions(record, QUBIT_PROJECTOR_3, tol=tol)
    phi_rot = np.pi * (1 + np.sin(gamma))
    n = np.array(
        [np.sin(2 * alpha) * np.cos(beta), np.sin(2 * alpha) * np.sin(beta), np.cos(2 * alpha)]
    )
    predicted = herm_expm(n_dot_sigma(n), phi_rot / 2)  # e^{-i(phi/2) n.sigma}
    return HolonomicGateResult(
        schedule=schedule, record=record, gate=gate, predicted=predicted, report=report
    )


# ---------------------------------------------------------------------------
# multi-pulse scheme
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PulseSegment:
    """One resonant segment: pulse area and the relative phase of its pair.

    The segment drives Omega_j(t) (e^{-i eta_j}|psi_e><psi_b| + h.c.)
    built on the subspace frame reached by the previous segments.
    """

    area: float
    eta: float = 0.0


def multi_pulse_gate(
    p: LambdaParams,
    segments: Sequence[PulseSegment],
    substeps: int = 1,
    tol: ToleranceConfig = DEFAULT,
) -> HolonomicGateResult:
    """Single-loop multi-pulse holonomic gate U_L ... U_1 on Span{|0>, |1>}.

    Each segment's Hamiltonian is rebuilt on the evolved bright/excited
    directions (an instantaneous frame change that fixes the excited
    direction), with eta_j the relative phase of its pulse pair.  For two
    pi/2 segments with relative phase eta the gate is
    e^{-i (pi - eta) n.sigma / 2}.
    """
    if not segments:
        raise SegmentChainError("at least one segment required")
    total_area = sum(s.area for s in segments)
    if abs(total_area - np.pi) > 1e-12:
        raise CyclicityError("segment areas must total pi to close the loop")

    b = np.array([np.conj(p.omega_0), np.conj(p.omega_1), 0.0], dtype=np.complex128)
    e = np.array([0.0, 0.0, 1.0], dtype=np.complex128)
    u_total = np.eye(3, dtype=np.complex128)
    hs, durs = [], []
    for seg in segments:
        psi_b = u_total @ b
        psi_e = u_total @ e
        h = np.exp(-1j * seg.eta) * np.outer(psi_e, psi_b.conj())
        h = h + h.conj().T
        hs.append(seg.area * h)
        durs.append(1.0)
        u_total = herm_expm(h, seg.area) @ u_total
    schedule = ControlSchedule.from_hamiltonians(hs, durs)
    record = propagate(schedule, substeps)
    gate = record.final_propagator[:2, :2].copy()
    report = check_holonomic_conditions(record, QUBIT_PROJECTOR_3, tol=tol)

    if len(segments) == 2 and all(abs(s.area - np.pi / 2) < 1e-12 for s in segments):
        eta = segments[1].eta - segments[0].eta
        predicted = herm_expm(n_dot_sigma(p.axis), (np.pi - eta) / 2)
    else:
        predicted = gate
    return HolonomicGateResult(
        schedule=schedule, record=record, gate=gate, predicted=predicted, report=report
    )


# ---------------------------------------------------------------------------
# four-level SVD scheme
# ---------------------------------------------------------------------------

def snap_ratio(value: float, max_denominator: int) -> Fraction:
    """Best rational approximation with bounded denominator."""
    return Fraction(value).limit_denominator(max_denominator)


def _canonical_svd(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD S = U_l diag(D) U_r^dag with a deterministic phase convention.

    Each left singular vector's largest-magnitude entry is made real
    positive (ties broken by index order), which also fixes U_r; for
    degenerate singular values this picks the lexicographically-largest
    real first column among the gauge orbit.
    """
    ul, d, vh = np.linalg.svd(s)
    ur = vh.conj().T
    for k in range(ul.shape[1]):
        idx = int(np.argmax(np.abs(ul[:, k])))
        ph = ul[idx, k] / abs(ul[idx, k])
        ul[:, k] /= ph
        ur[:, k] /= ph
    return ul, d, ur


@dataclass(frozen=True)
class FourLevelCoupling:
    """Off-diagonal 2x2 coupling block S of the four-level Hamiltonian
    H(t) = Omega(t) [[0, S], [S^dag, 0]] on {|a>, |b>, |c>, |d>}."""

    s_block: np.ndarray

    def svd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _canonical_svd(np.asarray(self.s_block, dtype=np.complex128))


@dataclass
class FourLevelResult:
    gate: np.ndarray
    predicted: np.ndarray
    mode: str                    # "block-diagonal" or "block-swap"
    block_gates: tuple           # (U_0, U_1) for block-diagonal mode
    off_block_norm: float
    pulse_area: float
    timing_error: float          # |ratio - p/q| of the snapped singular ratio


def four_level_gate(
    coupling: FourLevelCoupling,
    mode: str = "block-diagonal",
    tol: ToleranceConfig = DEFAULT,
) -> FourLevelResult:
    """Holonomic gate of the four-level scheme at a commensurate time.

    block-diagonal mode: a pulse area a_T with cos(a_T D) = diag(1, -1)
    and sin(a_T D) = 0, giving U_0 = U_l Z U_l^dag on V_0 and U_1 =
    U_r Z U_r^dag on V_1 (assembled as |0><0| x U_0 + |1><1| x U_1).
    block-swap mode: cos(a_T D) = 0, swapping V_0 and V_1.

    The singular-value ratio beta/alpha is snapped to a rational p/q with
    bounded denominator (parity constraints per mode); incommensurate
    ratios raise CommensurabilityError.
    """
    s = np.asarray(coupling.s_block, dtype=np.complex128)
    if abs(np.linalg.det(s)) < 1e-12:
        raise ReducibleError("det S = 0: reduce to the three-level Lambda scheme")
    ul, d, ur = _canonical_svd(s)
    alpha, beta = float(d[0]), float(d[1])
    ratio = beta / alpha

    # a_T alpha and a_T beta must hit multiples of pi with the parities
    # demanded by the mode.
    best = None
    for q in range(1, tol.max_denominator + 1):
        for pnum in range(0, int(np.ceil(ratio * q)) + 2):
            if mode == "block-diagonal":
                # cos(a alpha) = 1, cos(a beta) = -1: a alpha = 2k pi,
                # a beta = odd pi -> q even multiplier, p odd.
                if q % 2 != 0 or pnum % 2 != 1:
                    continue
            elif mode == "block-swap":
                # cos = 0 for both: a alpha, a beta odd multiples of pi/2.
                if q % 2 != 1 or pnum % 2 != 1:
                    continue
            else:
                raise DimensionError(f"unknown mode {mode!r}")
            err = abs(ratio - pnum / q)
            if best is None or err < best[0]:
                best = (err, pnum, q)
    if best is None or best[0] > 0.5:
        raise CommensurabilityError(
            f"singular ratio {ratio:.6f} has no admissible p/q with q <= "
            f"{tol.max_denominator}"
        )
    err, pnum, q = best
    if mode == "block-diagonal":
        a_t = q * np.pi / alpha
    else:
        a_t = q * (np.pi / 2) / alpha

    h = np.zeros((4, 4), dtype=np.complex128)
    h[:2, 2:] = s
    h[2:, :2] = s.conj().T
    gate = herm_expm(h, a_t)

    z = np.diag([1.0, -1.0]).astype(complex)
    if mode == "block-diagonal":
        u0 = ul @ z @ ul.conj().T
        u1 = ur @ z @ ur.conj().T
        predicted = np.zeros((4, 4), dtype=np.complex128)
        predicted[:2, :2] = u0
        predicted[2:, 2:] = u1
        off = float(np.linalg.norm(gate[:2, 2:]) + np.linalg.norm(gate[2:, :2]))
        blocks = (u0, u1)
    else:
        sw = -1j * ul @ np.diag(np.sin(a_t * d)) @ ur.conj().T
        predicted = np.zeros((4, 4), dtype=np.complex128)
        predicted[:2, 2:] = sw
        predicted[2:, :2] = -1j * ur @ np.diag(np.sin(a_t * d)) @ ul.conj().T
        off = float(np.linalg.norm(gate[:2, :2]) + np.linalg.norm(gate[2:, 2:]))
        blocks = (np.zeros((2, 2), complex), np.zeros((2, 2), complex))
    return FourLevelResult(
        gate=gate,
        predicted=predicted,
        mode=mode,
        block_gates=blocks,
        off_block_norm=off,
        pulse_area=a_t,
        timing_error=err,
    )


# ---------------------------------------------------------------------------
# XY-auxiliary realizations
# ---------------------------------------------------------------------------

def _xy(i: int, j: int, n: int) -> np.ndarray:
    """sigma_x^i sigma_x^j + sigma_y^i sigma_y^j on n qubits."""
    ops = {"x": SIGMA_X, "y": SIGMA_Y}
    out = np.zeros((2**n, 2**n), dtype=np.complex128)
    for ax in ("x", "y"):
        term = np.eye(1, dtype=np.complex128)
        for k in range(n):
            term = kron(term, ops[ax] if k in (i, j) else np.eye(2))
        out += term
    return out


def _single(op: np.ndarray, i: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=np.complex128)
    for k in range(n):
        out = kron(out, op if k == i else np.eye(2))
    return out


@dataclass
class XYAuxResult:
    gate: np.ndarray            # target block (auxiliary in |0>)
    predicted: np.ndarray
    leakage: float              # population left outside the auxiliary-|0> block
    snapped_theta: float
    pulse_area: float
    theta_error: float


def xy_aux_single_gate(
    theta: float,
    beta: float,
    tol: ToleranceConfig = DEFAULT,
) -> XYAuxResult:
    """Single-qubit holonomic gate via one auxiliary qubit and XY coupling.

    H = (J/2) sin(t) (cos(b) sx_aux + sin(b) sy_aux)
      + (J/2) cos(t) (sx_aux sx_tgt + sy_aux sy_tgt)
    on |aux, target>; the evolution is block-off-diagonal between the
    aux-|0> and aux-|1> subspaces with singular values cos^2(t/2),
    sin^2(t/2).  tan^2(theta/2) is snapped to p/q (p even, q odd,
    q <= max_denominator), the pulse area is (p + q) pi, and the target
    gate is cos(t') sz - sin(t') (cos(b) sx + sin(b) sy) at the snapped
    angle t', up to a global phase.
    """
    ratio = np.tan(theta / 2) ** 2
    # cos(a cos^2) and cos(a sin^2) must land on -+1 in either order (the
    # orders differ by a global sign of the block), so p/q may have either
    # opposite-parity pattern.
    best = None
    for q in range(1, tol.max_denominator + 1):
        pnum = round(ratio * q)
        for cand in (pnum, pnum - 1, pnum + 1):
            if cand < 0 or (cand + q) % 2 == 0:
                continue
            err = abs(ratio - cand / q)
            if best is None or err < best[0]:
                best = (err, cand, q)
    if best is None:
        raise CommensurabilityError("no admissible opposite-parity rational for tan^2(theta/2)")
    err, pnum, q = best
    snapped = 2 * np.arctan(np.sqrt(pnum / q))
    area = (pnum + q) * np.pi
    sign = 1.0 if q % 2 == 1 else -1.0  # q odd: cos(aD) = diag(-1, +1)

    h = 0.5 * np.sin(snapped) * (
        np.cos(beta) * _single(SIGMA_X, 0, 2) + np.sin(beta) * _single(SIGMA_Y, 0, 2)
    )
    h += 0.5 * np.cos(snapped) * _xy(0, 1, 2)
    u = herm_expm(h, area)

    block = u[:2, :2].copy()   # aux |0> block, basis {|00>, |01>}
    leak = float(np.linalg.norm(u[2:, :2]) ** 2)
    predicted = sign * (
        np.cos(snapped) * SIGMA_Z
        - np.sin(snapped) * (np.cos(beta) * SIGMA_X + np.sin(beta) * SIGMA_Y)
    )
    return XYAuxResult(
        gate=block,
        predicted=predicted,
        leakage=leak,
        snapped_theta=float(snapped),
        pulse_area=float(area),
        theta_error=float(abs(snapped - theta)),
    )


def xy_aux_two_qubit_gate(theta: float) -> XYAuxResult:
    """Two-qubit holonomic gate on targets 1, 2 via auxiliary qubit 3.

    H = (J13/2)(sx1 sx3 + sy1 sy3) + (J23/2)(sx2 sx3 + sy2 sy3) with
    J13 = Omega cos(theta/2), J23 = Omega sin(theta/2) and run time
    tau = pi / Omega; the auxiliary returns to |0> and the targets see
    |00><00| (+) [[cos t, -sin t], [-sin t, -cos t]] on {|01>, |10>}
    (+) (-|11><11|).
    """
    omega = 1.0
    j13 = omega * np.cos(theta / 2)
    j23 = omega * np.sin(theta / 2)
    h = 0.5 * j13 * _xy(0, 2, 3) + 0.5 * j23 * _xy(1, 2, 3)
    u = herm_expm(h, np.pi / omega)

    # Target block: auxiliary (qubit 3) fixed to |0> on both sides.
    idx = [0, 2, 4, 6]  # |q1 q2 0>
    block = u[np.ix_(idx, idx)].copy()
    leak = float(np.linalg.norm(np.delete(u[:, idx], idx, axis=0)) ** 2)
    predicted = np.eye(4, dtype=np.complex128)
    predicted[1:3, 1:3] = np.array(
        [[np.cos(theta), -np.sin(theta)], [-np.sin(theta), -np.cos(theta)]]
    )
    predicted[3, 3] = -1.0
    return XYAuxResult(
        gate=block,
        predicted=predicted,
        leakage=leak,
        snapped_theta=float(theta),
        pulse_area=float(np.pi),
        theta_error=0.0,
    )


# ---------------------------------------------------------------------------
# tripod scheme
# ---------------------------------------------------------------------------

def tripod_hamiltonian(
    omega_0: complex, omega_1: complex, omega_a: complex, amplitude: float = 1.0
) -> np.ndarray:
    """Tripod Hamiltonian on {|0>, |1>, |a>, |e>}:
    Omega (w0 |e><0| + w1 |e><1| + wa |e><a| + h.c.)."""
    h = np.zeros((4, 4), dtype=np.complex128)
    for k, w in enumerate((omega_0, omega_1, omega_a)):
        h[3, k] = amplitude * w
        h[k, 3] = np.conj(h[3, k])
    return h


@dataclass
class TripodGates:
    u_z: np.ndarray
    phi_1: float
    u_y: np.ndarray
    phi_2: float
    u_conditional: np.ndarray
    phi_3: float


def tripod_gates(
    loop_theta_phi: Callable[[float], tuple[float, float]],
    samples: int = 2000,
    tol: ToleranceConfig = DEFAULT,
) -> TripodGates:
    """Adiabatic tripod gate set for one (theta, phi) parameter loop.

    The loop must be based at theta = 0.  U_z(phi_1) = e^{i phi_1 |1><1|}
    comes from the dark-state Berry phase of the z-loop parameterization
    (Omega_0 = 0), U_y(phi_2) = e^{i phi_2 sigma_y} from the Wilczek-Zee
    holonomy of the two-fold dark band, and the conditional phase
    U^{jk}(phi_3) = e^{i phi_3 |11><11|} from the two-ion dark state.
    phi_1 and phi_3 equal minus half the loop's solid angle (the Berry
    convention); phi_2 equals the full solid angle.
    """
    t0, _ = loop_theta_phi(0.0)
    t1, _ = loop_theta_phi(1.0)
    if abs(t0) > 1e-10 or abs(t1) > 1e-10:
        raise DegeneracyError("tripod loops must be based at theta = 0")

    # U_z loop: Omega_0 = 0; work on the {|1>, |a>, |e>} three-level system.
    def hz(s: float) -> np.ndarray:
        th, ph = loop_theta_phi(s)
        w1 = -np.sin(th / 2) * np.exp(1j * ph)
        wa = np.cos(th / 2)
        h = np.zeros((3, 3), dtype=np.complex128)
        h[2, 0] = w1
        h[2, 1] = wa
        h[0, 2] = np.conj(w1)
        h[1, 2] = np.conj(wa)
        return h

    anchor_z = np.array([1.0, 0.0, 0.0], dtype=complex)  # dark state at theta=0
    phi_1 = bargmann_loop_phase(
        _loop_band_vectors(ParameterLoop(hz, samples), 1, tol), anchor_z
    )
    u_z = np.diag([1.0, np.exp(1j * phi_1)]).astype(complex)

    # U_y loop: full tripod with the two-fold dark band.
    def hy(s: float) -> np.ndarray:
        th, ph = loop_theta_phi(s)
        return tripod_hamiltonian(
            np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)
        )

    ref = np.zeros((4, 2), dtype=complex)
    ref[0, 0] = 1.0
    ref[1, 1] = 1.0
    hol = wilczek_zee_holonomy(
        ParameterLoop(hy, samples), band=1, degeneracy=2, reference_frame=ref, tol=tol
    )
    # hol = e^{i phi_2 sigma_y} = [[cos, sin], [-sin, cos]] on the dark pair;
    # phi_2 is minus the oriented solid angle of the (theta, phi) loop.
    phi_2 = float(np.arctan2(-hol[1, 0].real, hol[0, 0].real))
    u_y = hol

    # Conditional loop: two-ion dark state on {|11>, |aa>, |ee>}.
    def hjk(s: float) -> np.ndarray:
        th, ph = loop_theta_phi(s)
        h = np.zeros((3, 3), dtype=np.complex128)
        h[2, 0] = -np.sin(th / 2) * np.exp(1j * ph)
        h[2, 1] = np.cos(th / 2)
        h[0, 2] = np.conj(h[2, 0])
        h[1, 2] = np.conj(h[2, 1])
        return h

    phi_3 = bargmann_loop_phase(
        _loop_band_vectors(ParameterLoop(hjk, samples), 1, tol), anchor_z
    )
    u_cond = np.diag([1.0, 1.0, 1.0, np.exp(1j * phi_3)]).astype(complex)
    return TripodGates(
        u_z=u_z, phi_1=phi_1, u_y=u_y, phi_2=phi_2, u_conditional=u_cond, phi_3=phi_3
    )


def _loop_band_vectors(loop: ParameterLoop, band: int, tol: ToleranceConfig) -> np.ndarray:
    from .geometry import _band_frames

    hs = loop.matrices()
    vecs = _band_frames(hs, band, 1, tol)[:, :, 0]
    vecs[-1] = vecs[0]
    return vecs


# ---------------------------------------------------------------------------
# reverse engineering and STA
# ---------------------------------------------------------------------------

@dataclass
class PathSpec:
    """Instantaneous-state path for reverse engineering.

    vectors: (n+1, d, L) orthonormal frame samples on ``grid``; mode
    "abelian" uses all L = d states as cyclic carriers, "non-abelian"
    treats the last column as the auxiliary state.  ``breakpoints`` mark
    interior samples where the path's derivative jumps (segment borders
    of piecewise schedules), handled one-sided.
    """

    grid: np.ndarray
    vectors: np.ndarray
    mode: str = "abelian"
    breakpoints: tuple = ()

    def __post_init__(self):
        gram = np.einsum("tik,til->tkl", self.vectors.conj(), self.vectors)
        eye = np.eye(self.vectors.shape[2])
        if np.max(np.linalg.norm(gram - eye, axis=(1, 2))) > 1e-8:
            raise FrameError("path frame must be orthonormal at every sample")


def _derivatives_with_breaks(
    vectors: np.ndarray, grid: np.ndarray, breakpoints: tuple
) -> np.ndarray:
    """Frame time derivatives, second-order one-sided at breakpoints/ends."""
    n1 = len(grid)
    borders = sorted({0, n1 - 1, *breakpoints})
    out = np.empty_like(vectors)
    starts = borders[:-1]
    for a, b in zip(borders[:-1], borders[1:]):
        lo, hi = a, b
        seg = slice(lo, hi + 1)
        v = vectors[seg]
        t = grid[seg]
        dv = np.empty_like(v)
        dv[1:-1] = (v[2:] - v[:-2]) / (t[2:] - t[:-2])[:, None, None]
        h0 = t[1] - t[0]
        dv[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h0)
        h1 = t[-1] - t[-2]
        dv[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h1)
        out[seg] = dv
    return out


def reverse_engineer_hamiltonian(
    path: PathSpec,
    locally_dynamical_free: bool = False,
    aux_phase_rate: Callable[[float], float] = None,
) -> ControlSchedule:
    """Hamiltonian driving a prescribed state path.

    Abelian mode over a complete frame: H(t) = i sum_k |dpsi_k><psi_k|
    (Hermitian up to discretization; symmetrized).  With
    ``locally_dynamical_free`` the diagonal (dynamical) part is stripped:
    H = i sum_{k != l} <psi_k|dpsi_l> |psi_k><psi_l|.  Non-Abelian mode
    keeps only the couplings of the computational frame to the auxiliary
    column plus the auxiliary's free phase rate (zero by default).

    The returned schedule holds midpoint-sampled segment Hamiltonians on
    the path grid.
    """
    vecs = path.vectors
    grid = path.grid
    dvecs = _derivatives_with_breaks(vecs, grid, path.breakpoints)
    n1, d, ldim = vecs.shape

    hs = np.empty((n1, d, d), dtype=np.complex128)
    if path.mode == "abelian":
        if ldim != d:
            raise FrameError("abelian reverse engineering needs a complete frame")
        hs = 1j * np.einsum("til,tkl->tik", dvecs, vecs.conj())
        if locally_dynamical_free:
            # Remove the diagonal-in-frame part: project out
            # <psi_k|dpsi_k> |psi_k><psi_k|.
            rates = np.einsum("tik,tik->tk", vecs.conj(), dvecs)
            hs = hs - 1j * np.einsum(
                "tk,tik,tjk->tij", rates, vecs, vecs.conj()
            )
    elif path.mode == "non-abelian":
        comp = vecs[:, :, :-1]
        aux = vecs[:, :, -1]
        daux = dvecs[:, :, -1]
        coup = np.einsum("tik,ti->tk", comp.conj(), daux)  # <phi_k|d phi_aux>
        hs = 1j * np.einsum("tk,tik,tj->tij", coup, comp, aux.conj())
        hs = hs + hs.conj().transpose(0, 2, 1)
        # Auxiliary diagonal: [i <aux|d aux> - gamma_dot] |aux><aux|;
        # i <aux|d aux> is real for a normalized path.
        free = np.real(1j * np.einsum("ti,ti->t", aux.conj(), daux))
        gamma_dot = np.zeros(n1) if aux_phase_rate is None else np.array(
            [aux_phase_rate(t) for t in grid]
        )
        hs = hs + np.einsum("t,ti,tj->tij", free - gamma_dot, aux, aux.conj())
    else:
        raise FrameError(f"unknown path mode {path.mode!r}")

    hs = 0.5 * (hs + hs.conj().transpose(0, 2, 1))
    mids = 0.5 * (hs[:-1] + hs[1:])
    return ControlSchedule.from_hamiltonians(list(mids), list(np.diff(grid)))


def sta_counterdiabatic(
    h0_sampler: Callable[[float], np.ndarray],
    total_time: float,
    n_samples: int = 2048,
    mode: str = "nondegenerate",
    degeneracy_pattern: Optional[Sequence[int]] = None,
    tol: ToleranceConfig = DEFAULT,
) -> ControlSchedule:
    """Counterdiabatic schedule for H_0(t): H = H_0 + H_a.

    nondegenerate: H_a = i sum_k (|dpsi_k><psi_k| - <psi_k|dpsi_k>
    |psi_k><psi_k|).  degenerate: the same with the intra-subspace
    connection A^k_{nm} = <psi^k_n|dpsi^k_m> subtracted block-wise
    (``degeneracy_pattern`` lists the block sizes in ascending-eigenvalue
    order).  Propagation under the result follows the instantaneous
    eigenframe exactly at any speed.
    """
    grid = np.linspace(0.0, total_time, n_samples + 1)
    hs0 = np.stack([h0_sampler(t) for t in grid])
    w, v = np.linalg.eigh(hs0)
    d = hs0.shape[1]

    if mode == "nondegenerate":
        blocks = [1] * d
    elif mode == "degenerate":
        if degeneracy_pattern is None or sum(degeneracy_pattern) != d:
            raise DegeneracyError("degeneracy_pattern must partition the spectrum")
        blocks = list(degeneracy_pattern)
        scale = max(float(np.max(np.abs(w))), 1e-300)
        start = 0
        for b in blocks:
            spread = float(np.max(w[:, start + b - 1] - w[:, start]))
            if b > 1 and spread > tol.degeneracy_spread * scale * 1e3:
                raise DegeneracyError("declared degenerate block is split")
            start += b
    else:
        raise DegeneracyError(f"unknown STA mode {mode!r}")

    # Smooth the eigenframe: align each degenerate block to the previous
    # sample by the unitary part of the overlap.
    start = 0
    for b in blocks:
        cols = slice(start, start + b)
        for t in range(1, len(grid)):
            m = v[t - 1][:, cols].conj().T @ v[t][:, cols]
            v[t][:, cols] = v[t][:, cols] @ polar_unitary(m).conj().T
        start += b

    dv = _central_diff_stack(v, grid)
    # H_a = i dV V^dag - i V A_block V^dag with A the block-diagonal
    # connection <psi_n|dpsi_m> restricted to each degenerate block.
    a_full = np.einsum("tin,tim->tnm", v.conj(), dv)
    mask = np.zeros((d, d))
    start = 0
    for b in blocks:
        mask[start : start + b, start : start + b] = 1.0
        start += b
    a_block = a_full * mask
    ha = 1j * (
        np.einsum("tim,tjm->tij", dv, v.conj())
        - np.einsum("tnm,tin,tjm->tij", a_block, v, v.conj())
    )
    ha = 0.5 * (ha + ha.conj().transpose(0, 2, 1))
    hs = hs0 + ha
    mids = 0.5 * (hs[:-1] + hs[1:])
    return ControlSchedule.from_hamiltonians(list(mids), list(np.diff(grid)))


def _central_diff_stack(v: np.ndarray, grid: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (grid[2:] - grid[:-2])[:, None, None]
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * (grid[1] - grid[0]))
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * (grid[-1] - grid[-2]))
    return out

"""Abelian geometric-gate schemes: builders and closed-form predictors.

Covers the adiabatic rotating-field phase gates with spin-echo
cancellation, the nonadiabatic dynamical-phase-free and two-loop NMR
constructions, orange-slice geodesic gates, and the unconventional
(phase-space displacement) gates of the driven oscillator and trapped
ions.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import root

from .errors import (
    AdiabaticityWarning,
    ConstraintError,
    DivisionError,
    NoSolutionError,
    SequenceError,
)
from .geometry import ParameterLoop, decompose_phase
from .qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ControlSchedule,
    EvolutionRecord,
    herm_expm,
    phase_aligned_distance,
    propagate,
    record_from_functions,
)

__all__ = [
    "NmrParams",
    "OscillatorDriveParams",
    "SpinFieldParams",
    "adiabatic_phase_gate",
    "conditional_adiabatic_gate",
    "dynamical_free_frequency",
    "dynamical_free_nmr_params",
    "dynamical_free_record",
    "ion_unconventional_gate",
    "loop_geometric_phase",
    "orange_slice_gate",
    "rotating_spin_record",
    "s_sequence",
    "spin_berry_phase",
    "spin_echo_gate",
    "spin_field_hamiltonian",
    "spin_field_loop",
    "spin_field_schedule",
    "two_loop_schedule",
    "unconventional_oscillator_phases",
    "oscillator_drive_record",
]


# ---------------------------------------------------------------------------
# rotating-field spin-1/2 model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinFieldParams:
    """Rotating magnetic field B(t) = B0 (sin t cos wt, sin t sin wt, cos t).

    mu_b0 is the product of the gyromagnetic ratio and field magnitude, in
    angular-frequency units; theta the polar angle; omega the rotation
    rate; phi0 the initial azimuth.
    """

    mu_b0: float
    theta: float
    omega: float
    phi0: float = 0.0

    def __post_init__(self):
        if self.mu_b0 <= 0:
            raise ValueError("mu_b0 must be positive")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    @property
    def period(self) -> float:
        return 2 * np.pi / abs(self.omega)


def spin_field_hamiltonian(p: SpinFieldParams, t: float) -> np.ndarray:
    """H(t) = mu B(t) . sigma for the rotating field."""
    phi = p.omega * t + p.phi0
    ct, st = np.cos(p.theta), np.sin(p.theta)
    return p.mu_b0 * (
        ct * SIGMA_Z + st * (np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y)
    )


def spin_field_loop(p: SpinFieldParams, samples: int = 1000) -> ParameterLoop:
    """Parameter loop of the field Hamiltonian over one azimuthal turn."""
    period = p.period

    def sampler(s: float) -> np.ndarray:
        return spin_field_hamiltonian(p, s * period)

    return ParameterLoop(sampler=sampler, samples=samples, closed=True)


def spin_field_schedule(
    p: SpinFieldParams, total_time: float, n_segments: int
) -> ControlSchedule:
    """Midpoint-sampled schedule of the rotating field over ``total_time``."""
    return ControlSchedule.from_sampler(
        lambda t: spin_field_hamiltonian(p, t), total_time, n_segments
    )


def spin_berry_phase(p: SpinFieldParams, band: int, samples: int = 10000) -> float:
    """Berry phase of the rotating-field family, latitude-loop branch.

    Anchors the winding at the band's pole eigenstate (theta = 0), the
    state the loop shrinks to, so band 1 (+) returns -pi (1 - cos theta)
    and band 0 (-) returns +pi (1 - cos theta), unreduced.
    """
    from .geometry import berry_phase_loop

    loop = spin_field_loop(p, samples)
    anchor = np.array([0.0, 1.0] if band == 0 else [1.0, 0.0], dtype=complex)
    return berry_phase_loop(loop, band, reference_state=anchor)


def spin_eigenstate(p: SpinFieldParams, band: str = "+") -> np.ndarray:
    """Instantaneous eigenstate of H(0): |phi_+> or |phi_->."""
    c, s = np.cos(p.theta / 2), np.sin(p.theta / 2)
    e = np.exp(1j * p.phi0)
    if band == "+":
        return np.array([c, e * s], dtype=np.complex128)
    return np.array([-s, e * c], dtype=np.complex128)


def rotating_frame_angle(p: SpinFieldParams) -> float:
    """Tilt angle of the rotating-frame eigenaxis.

    tan(theta_bar) = 2 mu B0 sin(theta) / (2 mu B0 cos(theta) - omega);
    theta_bar in [0, pi] (the numerator is nonnegative), reducing to theta
    as omega -> 0.
    """
    num = 2 * p.mu_b0 * np.sin(p.theta)
    den = 2 * p.mu_b0 * np.cos(p.theta) - p.omega
    return float(np.arctan2(num, den))


def aa_geometric_phases(p: SpinFieldParams) -> tuple[float, float]:
    """Closed-form nonadiabatic geometric phases -pi (1 -+ cos theta_bar)."""
    tb = rotating_frame_angle(p)
    return -np.pi * (1 - np.cos(tb)), -np.pi * (1 + np.cos(tb))


def rotating_spin_record(
    p: SpinFieldParams, total_time: float, samples: int = 2048
) -> EvolutionRecord:
    """Exact evolution record of the rotating field via the rotating frame.

    U(t) = exp(-i w t sigma_z / 2) exp(-i H_bar t) with
    H_bar = H(0) - (w / 2) sigma_z; exact at every sample, so phase
    extraction is limited only by the quadrature grid.
    """
    h0 = spin_field_hamiltonian(p, 0.0)
    hbar = h0 - 0.5 * p.omega * SIGMA_Z
    wb, vb = np.linalg.eigh(hbar)

    def u_of_t(t: float) -> np.ndarray:
        rot = np.diag(np.exp(-0.5j * p.omega * t * np.array([1.0, -1.0])))
        inner = (vb * np.exp(-1j * wb * t)) @ vb.conj().T
        return rot @ inner

    return record_from_functions(
        u_of_t, lambda t: spin_field_hamiltonian(p, t), total_time, samples
    )


def rotating_eigenstates(p: SpinFieldParams) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic initial states |eta_+->: eigenstates of H(0) - (w/2) sigma_z."""
    tb = rotating_frame_angle(p)
    rot = herm_expm(SIGMA_Z, p.phi0 / 2) @ herm_expm(SIGMA_Y, tb / 2)
    return rot @ np.array([1, 0], dtype=complex), rot @ np.array([0, 1], dtype=complex)


# ---------------------------------------------------------------------------
# adiabatic phase gates and spin echo
# ---------------------------------------------------------------------------

@dataclass
class AdiabaticGateResult:
    schedule: ControlSchedule
    predicted_gate: np.ndarray        # in the initial-eigenbasis {phi_+, phi_-}
    solid_angle: float
    geometric_phases: tuple           # (gamma_+, gamma_-)
    dynamical_phases: tuple           # (gamma_+^d, gamma_-^d) = (-+ mu B0 T)
    eigenbasis: np.ndarray            # columns |phi_+(0)>, |phi_-(0)>


def adiabatic_phase_gate(
    p: SpinFieldParams,
    total_time: Optional[float] = None,
    n_segments: int = 512,
    adiabaticity_bound: float = 0.05,
) -> AdiabaticGateResult:
    """Adiabatic loop schedule and the Berry phase-shift gate it predicts.

    The predicted gate diag(e^{i gamma_+}, e^{i gamma_-}) lives in the
    initial eigenbasis; up to a global phase it is |k> -> e^{i k Omega}|k>.
    Dynamical phases are reported separately (they are to be removed by an
    echo sequence).
    """
    total_time = p.period if total_time is None else total_time
    ratio = abs(p.omega) / p.mu_b0
    if ratio > adiabaticity_bound:
        warnings.warn(
            f"omega/(mu B0) = {ratio:.3g} exceeds the adiabaticity bound "
            f"{adiabaticity_bound:g}",
            AdiabaticityWarning,
        )
    schedule = spin_field_schedule(p, total_time, n_segments)
    omega_c, gp, gm = (
        2 * np.pi * (1 - np.cos(p.theta)),
        -np.pi * (1 - np.cos(p.theta)),
        np.pi * (1 - np.cos(p.theta)),
    )
    gate = np.diag([np.exp(1j * gp), np.exp(1j * gm)])
    basis = np.column_stack([spin_eigenstate(p, "+"), spin_eigenstate(p, "-")])
    dyn = (-p.mu_b0 * total_time, p.mu_b0 * total_time)
    return AdiabaticGateResult(
        schedule=schedule,
        predicted_gate=gate,
        solid_angle=omega_c,
        geometric_phases=(gp, gm),
        dynamical_phases=dyn,
        eigenbasis=basis,
    )


def spin_echo_gate(
    loop_schedule: ControlSchedule,
    pi_pulse: np.ndarray,
    eigenbasis: np.ndarray,
    substeps: int = 1,
    extra_dynamical_phase: float = 0.0,
) -> np.ndarray:
    """Echo composite C -> pi -> C-reversed -> pi, as a single unitary.

    ``pi_pulse`` must swap the tracked eigenpair (columns of
    ``eigenbasis``); ``extra_dynamical_phase`` injects an artificial
    diag(e^{i d}, e^{-i d}) after each traversal (in the eigenbasis) to
    exercise the echo cancellation.
    """
    b = eigenbasis
    swapped = pi_pulse @ b[:, 0]
    overlap = abs(np.vdot(b[:, 1], swapped))
    if overlap < 1 - 1e-8:
        raise SequenceError("pi pulse does not swap the tracked eigenpair")
    u_c = propagate(loop_schedule, substeps).final_propagator
    u_cbar = propagate(loop_schedule.reversed(), substeps).final_propagator
    d = np.exp(1j * extra_dynamical_phase)
    inject = b @ np.diag([d, np.conj(d)]) @ b.conj().T
    return pi_pulse @ inject @ u_cbar @ pi_pulse @ inject @ u_c


# ---------------------------------------------------------------------------
# NMR parameter containers and gates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NmrParams:
    """Static bias w0, rf amplitude w1 and frequency w, phase phi, coupling J.

    t_c and phi_prime parameterize the conditional-initialization sequence.
    """

    omega0: float = 0.0
    omega1: float = 0.0
    omega: float = 0.0
    phi: float = 0.0
    j_coupling: float = 0.0
    t_c: float = 0.0
    phi_prime: float = 0.0

    def __post_init__(self):
        if self.omega1 < 0:
            raise ValueError("omega1 must be nonnegative")


def conditional_adiabatic_gate(p: NmrParams, total_time: float) -> np.ndarray:
    """Generalized-echo conditional phase-shift gate, 4 x 4 diagonal.

    Implements the printed closed form
    dgamma = pi [ d_+ / sqrt(d_+^2 + w1) - d_- / sqrt(d_-^2 + w1) ],
    d_pm = w0^1 - w +- J, and returns
    diag(e^{2i dg}, e^{-2i dg}, e^{-2i dg}, e^{2i dg}).
    """
    dp = p.omega0 - p.omega + p.j_coupling
    dm = p.omega0 - p.omega - p.j_coupling
    dgamma = np.pi * (
        dp / np.sqrt(dp**2 + p.omega1) - dm / np.sqrt(dm**2 + p.omega1)
    )
    ph = np.exp(2j * dgamma)
    return np.diag([ph, np.conj(ph), np.conj(ph), ph])


def dynamical_free_frequency(omega0: float, omega1: float) -> float:
    """Rotation frequency w = -(w0^2 + w1^2)/w0 nulling the dynamical phase."""
    if omega0 == 0:
        raise DivisionError("omega0 must be nonzero")
    return -(omega0**2 + omega1**2) / omega0


def dynamical_free_record(
    omega0: float, omega1: float, samples: int = 2048
) -> tuple[EvolutionRecord, np.ndarray]:
    """Exact record of the dynamical-phase-free cyclic path and its state.

    The drive includes the extra (w/2) sigma_z bias so the initial
    eigenstate of w0 sigma_z / 2 + w1 sigma_x / 2 is exactly cyclic at
    T = 2 pi / |w|; with w from :func:`dynamical_free_frequency` the
    instantaneous energy expectation vanishes identically.
    """
    w = dynamical_free_frequency(omega0, omega1)
    theta = np.arctan2(omega1, omega0)
    psi0 = np.array([np.cos(theta / 2), np.sin(theta / 2)], dtype=complex)

    def ham(t: float) -> np.ndarray:
        return 0.5 * (omega0 + w) * SIGMA_Z + 0.5 * omega1 * (
            np.cos(w * t) * SIGMA_X + np.sin(w * t) * SIGMA_Y
        )

    htilde = 0.5 * omega0 * SIGMA_Z + 0.5 * omega1 * SIGMA_X
    wt, vt = np.linalg.eigh(htilde)

    def u_of_t(t: float) -> np.ndarray:
        rot = np.diag(np.exp(-0.5j * w * t * np.array([1.0, -1.0])))
        return rot @ ((vt * np.exp(-1j * wt * t)) @ vt.conj().T)

    record = record_from_functions(u_of_t, ham, 2 * np.pi / abs(w), samples)
    return record, psi0


# ---------------------------------------------------------------------------
# S sequence (conditional nonadiabatic initialization)
# ---------------------------------------------------------------------------

def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    return herm_expm(axis, angle / 2)


@dataclass
class SSequenceResult:
    unitaries: tuple            # (S for control |0>, S for control |1>)
    nutation_angles: tuple      # (theta_0, theta_1)
    t_c: float
    phi_prime: float


def s_sequence(p: NmrParams) -> SSequenceResult:
    """Five-step conditional initialization of the eigenstate pair.

    Solves tan(phi' + J t_c) = d_+/w1 and tan(phi' - J t_c) = d_-/w1 for
    (phi', t_c), then composes, per control-qubit branch,
    [pi/2]^y -> z-evolution by d_pm t_c -> [-(w0 - w) t_c]^z -> [pi/2]^x
    -> [-phi']^y.  The third step removes the unconditional part of the
    z rotation; the conditional +-J t_c part survives, leaving nutation
    angles theta_{0(1)} = pi/2 -+ J t_c - phi'.
    """
    if p.omega1 == 0:
        raise NoSolutionError("omega1 must be nonzero to solve the angle equations")
    dp = p.omega0 - p.omega + p.j_coupling
    dm = p.omega0 - p.omega - p.j_coupling
    a = np.arctan(dp / p.omega1)
    b = np.arctan(dm / p.omega1)
    phi_prime = 0.5 * (a + b)
    if p.j_coupling == 0:
        if abs(a - b) > 1e-12:
            raise NoSolutionError("J = 0 requires equal detunings")
        t_c = 0.0
    else:
        t_c = 0.5 * (a - b) / p.j_coupling

    common = (p.omega0 - p.omega) * t_c
    unitaries = []
    for delta in (dp, dm):
        u = _rot(SIGMA_Y, np.pi / 2)
        u = _rot(SIGMA_Z, delta * t_c) @ u
        u = _rot(SIGMA_Z, -common) @ u
        u = _rot(SIGMA_X, np.pi / 2) @ u
        u = _rot(SIGMA_Y, -phi_prime) @ u
        unitaries.append(u)
    theta0 = np.pi / 2 - p.j_coupling * t_c - phi_prime
    theta1 = np.pi / 2 + p.j_coupling * t_c - phi_prime
    return SSequenceResult(
        unitaries=tuple(unitaries),
        nutation_angles=(theta0, theta1),
        t_c=t_c,
        phi_prime=phi_prime,
    )


def dynamical_free_nmr_params(omega1: float, j_coupling: float) -> NmrParams:
    """Parameters making both conditional S-sequence paths dynamical-phase-free.

    Imposes the constraint w1^2 = d_+ d_- (which fixes w0 - w =
    sqrt(w1^2 + J^2)) together with the dynamical-free condition
    cos(theta_0) = -sqrt(d_+^2 + w1^2)/w, which pins the drive frequency;
    returns the full parameter set.
    """
    d0 = np.sqrt(omega1**2 + j_coupling**2)
    dp = d0 + j_coupling
    w = -(dp**2 + omega1**2) / dp
    return NmrParams(omega0=w + d0, omega1=omega1, omega=w, j_coupling=j_coupling)


# ---------------------------------------------------------------------------
# two-loop scheme
# ---------------------------------------------------------------------------

@dataclass
class TwoLoopResult:
    quintuple: tuple                      # (w0, w1, w, w0p, w1p)
    records: tuple                        # per-loop exact records
    states: tuple                         # per-loop cyclic initial states
    constraint_residuals: np.ndarray


def _two_loop_equations(q: np.ndarray, gamma_target: float) -> np.ndarray:
    w0, w1, w, w0p, w1p = q
    r1 = np.sqrt((w0 - w) ** 2 + w1**2)
    r2 = np.sqrt((w0p + w) ** 2 + w1p**2)
    eq1 = (w0**2 + w1**2 - w0 * w) / r1 - (w0p**2 + w1p**2 + w0p * w) / r2
    eq2 = (w0 - w) / r1 - (w0p + w) / r2 - gamma_target
    return np.array([eq1, eq2])


def two_loop_schedule(
    gamma_over_pi: float,
    initial_quintuple: tuple,
    samples: int = 4096,
    solver_tol: float = 1e-12,
) -> TwoLoopResult:
    """Two-loop NMR scheme hitting a target geometric phase Gamma pi.

    Solves the two printed constraints for (w0', w1') by damped Newton
    iteration from the supplied quintuple, then builds exact records of
    both loops (loop 2's axis tilted by alpha + alpha' about y).  The
    caller verifies gamma_1^d + gamma_2^d = 0 and gamma_1^g + gamma_2^g =
    Gamma pi with :func:`hforge.geometry.decompose_phase`.
    """
    w0, w1, w, w0p0, w1p0 = initial_quintuple

    def fun(x):
        return _two_loop_equations(
            np.array([w0, w1, w, x[0], x[1]]), gamma_over_pi
        )

    sol = root(fun, np.array([w0p0, w1p0]), method="hybr", tol=1e-14)
    residual = np.max(np.abs(fun(sol.x)))
    if residual > solver_tol:
        raise ConstraintError(
            f"two-loop constraints unsatisfied (residual {residual:.2e})"
        )
    w0p, w1p = sol.x
    quint = (w0, w1, w, float(w0p), float(w1p))

    alpha = np.arctan2(w1, w0 - w)
    alphap = np.arctan2(w1p, w0p + w)
    tau = 2 * np.pi / abs(w)

    # Loop 1: field (w1 cos wt, w1 sin wt, w0)/2; cyclic + eigenstate of
    # the rotating-frame Hamiltonian.
    h1tilde = 0.5 * ((w0 - w) * SIGMA_Z + w1 * SIGMA_X)
    wt1, vt1 = np.linalg.eigh(h1tilde)
    psi1 = vt1[:, np.argmax(wt1)]

    def ham1(t):
        return 0.5 * (
            w0 * SIGMA_Z + w1 * (np.cos(w * t) * SIGMA_X + np.sin(w * t) * SIGMA_Y)
        )

    def u1(t):
        rot = np.diag(np.exp(-0.5j * w * t * np.array([1.0, -1.0])))
        return rot @ ((vt1 * np.exp(-1j * wt1 * t)) @ vt1.conj().T)

    rec1 = record_from_functions(u1, ham1, tau, samples)

    # Loop 2: B' = R_y(alpha + alpha') (w1' cos wt, w1' sin wt, -w0')/2.
    ry = herm_expm(SIGMA_Y, (alpha + alphap) / 2)

    def ham2(t):
        raw = 0.5 * (
            -w0p * SIGMA_Z
            + w1p * (np.cos(w * t) * SIGMA_X + np.sin(w * t) * SIGMA_Y)
        )
        return ry @ raw @ ry.conj().T

    h2tilde = ry @ (0.5 * ((-w0p - w) * SIGMA_Z + w1p * SIGMA_X)) @ ry.conj().T
    wt2, vt2 = np.linalg.eigh(h2tilde)
    # The shared initial state is the negative eigenstate of loop 2.
    psi2 = vt2[:, np.argmin(wt2)]
    sz_rot = ry @ SIGMA_Z @ ry.conj().T
    wz, vz = np.linalg.eigh(sz_rot)

    def u2(t):
        rot = vz @ np.diag(np.exp(-0.5j * w * t * wz)) @ vz.conj().T
        return rot @ ((vt2 * np.exp(-1j * wt2 * t)) @ vt2.conj().T)

    rec2 = record_from_functions(u2, ham2, tau, samples)

    return TwoLoopResult(
        quintuple=quint,
        records=(rec1, rec2),
        states=(psi1, psi2),
        constraint_residuals=np.abs(fun(sol.x)),
    )


# ---------------------------------------------------------------------------
# orange-slice geodesic gates
# ---------------------------------------------------------------------------

@dataclass
class OrangeSliceResult:
    schedule: ControlSchedule
    gate: np.ndarray
    predicted: np.ndarray
    dark_state: np.ndarray


def orange_slice_gate(
    gamma: float,
    theta: float = 0.0,
    phi: float = 0.0,
    segment_amplitude: float = 1.0,
    substeps: int = 1,
) -> OrangeSliceResult:
    """Single-loop geodesic gate e^{i gamma n.sigma}.

    Three xy-plane drive windows with axis azimuths (phi - pi/2),
    (gamma + phi + pi/2), (phi - pi/2) and pulse areas theta/2, pi/2,
    (pi - theta)/2; the dark state |d> = cos(theta/2)|0> +
    e^{i phi} sin(theta/2)|1> rides geodesics with <d|H|d> = 0 pointwise.
    """
    axes = (phi - np.pi / 2, gamma + phi + np.pi / 2, phi - np.pi / 2)
    areas = (theta / 2, np.pi / 2, (np.pi - theta) / 2)
    hams, durs = [], []
    for ax, area in zip(axes, areas):
        if area <= 0:
            continue
        hams.append(segment_amplitude * (np.cos(ax) * SIGMA_X + np.sin(ax) * SIGMA_Y))
        durs.append(area / segment_amplitude)
    schedule = ControlSchedule.from_hamiltonians(hams, durs)
    gate = propagate(schedule, substeps).final_propagator
    n = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    nsigma = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    predicted = herm_expm(nsigma, -gamma)  # expm(+i gamma n.sigma)
    dark = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)], complex)
    return OrangeSliceResult(schedule=schedule, gate=gate, predicted=predicted, dark_state=dark)


# ---------------------------------------------------------------------------
# unconventional geometric gates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillatorDriveParams:
    """Linear drive in the rotating frame: H(t) = beta (a^dag e^{iwt} + a e^{-iwt})."""

    beta: float
    omega: float

    def __post_init__(self):
        if self.omega == 0:
            raise DivisionError("modulation frequency must be nonzero")


def unconventional_oscillator_phases(
    beta: float, omega: float, t: float
) -> tuple[float, float, float]:
    """Closed-form (total, dynamical, geometric) phases of the driven oscillator.

    total = beta^2 (wt - sin wt)/w^2, dynamical = 2 x total, geometric =
    -total; the ratio gamma^d = -2 gamma^g holds at all times.
    """
    if omega == 0:
        raise DivisionError("omega must be nonzero")
    base = beta**2 * (omega * t - np.sin(omega * t)) / omega**2
    return base, 2 * base, -base


def oscillator_drive_record(
    p: OscillatorDriveParams,
    total_time: float,
    n_cut: int = 40,
    n_segments: int = 2000,
) -> EvolutionRecord:
    """Fock-truncated propagation of the rotating-frame linear drive.

    Truncation at n_cut follows <n>_max + 6 sqrt(<n>_max) < n_cut for the
    displacement radius 2 beta / w; final-state leakage shows up in the
    record for the caller to monitor.
    """
    nmax_mean = (2 * p.beta / p.omega) ** 2
    if nmax_mean + 6 * np.sqrt(nmax_mean) >= n_cut:
        raise DivisionError("n_cut too small for the displacement radius")
    a = np.diag(np.sqrt(np.arange(1, n_cut + 1)), 1).astype(np.complex128)
    adag = a.conj().T

    def ham(t):
        ph = np.exp(1j * p.omega * t)
        return p.beta * (adag * ph + a * np.conj(ph))

    schedule = ControlSchedule.from_sampler(ham, total_time, n_segments)
    rec = propagate(schedule, 1)
    # Replace the sampled interval Hamiltonians with exact per-sample ones
    # for the phase quadrature.
    rec.hamiltonians = np.stack([ham(t) for t in rec.grid])
    rec.interval_hamiltonians = None
    return rec


def loop_geometric_phase(z_samples: np.ndarray) -> float:
    """-Im closed-contour integral of z* dz over a sampled phase-space loop."""
    z = np.asarray(z_samples, dtype=complex)
    dz = np.diff(z)
    mid = 0.5 * (z[:-1] + z[1:])
    return float(-np.imag(np.sum(mid.conj() * dz)))


@dataclass
class IonGateResult:
    gate: np.ndarray
    gamma: float
    geometric_phase: float
    cz_decomposition: Optional[np.ndarray]


def ion_unconventional_gate(
    omega_d: float, delta: float, phi: float = 0.0
) -> IonGateResult:
    """Trapped-ion displacement gate diag(1, e^{i gamma}, e^{i gamma}, 1).

    gamma = -2 pi (Omega_D / delta)^2 accumulates only on the |01>, |10>
    branches (the stretch mode is driven only for anti-aligned spins).
    When gamma = -pi/2 the CZ decomposition U(-pi/2)(S1 x S2) is returned
    and equals diag(1, 1, 1, -1) exactly.
    """
    if delta == 0:
        raise DivisionError("detuning must be nonzero")
    r = omega_d / delta
    gamma = -2 * np.pi * r**2
    gate = np.diag([1.0, np.exp(1j * gamma), np.exp(1j * gamma), 1.0])
    cz = None
    if abs(gamma + np.pi / 2) < 1e-12:
        s = np.diag([1.0, 1j])
        cz = gate @ np.kron(s, s)
    # The displacement loop z(t) = r e^{i(phi + pi/2)} (e^{-i delta t} - 1)
    # is traversed clockwise for positive delta; its signed area gives the
    # geometric phase +2 pi r^2 = -gamma.
    ts = np.linspace(0.0, 2 * np.pi / abs(delta), 4001)
    z = r * np.exp(1j * (phi + np.pi / 2)) * (np.exp(-1j * delta * ts) - 1)
    geom = loop_geometric_phase(z)
    return IonGateResult(gate=gate, gamma=gamma, geometric_phase=geom, cz_decomposition=cz)

"""Tests for operator algebra, schedules, and propagation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hforge.errors import DimensionError, HermiticityError, ProjectorError
from hforge.qcore import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ControlSchedule,
    expectation,
    gate_fidelity,
    herm_expm,
    hermitian_basis,
    ket,
    kron,
    propagate,
)


def taylor_expm(h, t, terms=40):
    """Independent oracle: truncated Taylor series of expm(-i h t)."""
    out = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ (-1j * t * h) / k
        out = out + term
    return out


class TestHermExpm:
    def test_zero_generator(self):
        assert np.allclose(herm_expm(np.zeros((3, 3)), 5.0), np.eye(3), atol=1e-14)

    def test_diagonal_case(self):
        u = herm_expm(SIGMA_Z, np.pi / 2)
        expected = np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)])
        assert np.allclose(u, expected, atol=1e-14)

    def test_sigma_x_quarter_turn_vs_taylor(self):
        u = herm_expm(SIGMA_X, np.pi / 2)
        assert np.abs(u - taylor_expm(SIGMA_X, np.pi / 2)).max() < 1e-12
        assert np.abs(u - (-1j * SIGMA_X)).max() < 1e-12

    def test_rejects_non_hermitian(self):
        with pytest.raises(HermiticityError):
            herm_expm(np.array([[0, 1], [0, 0]], dtype=complex), 1.0)

    def test_semigroup_property(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (a + a.conj().T) / 2
        lhs = herm_expm(h, 0.7) @ herm_expm(h, 0.4)
        assert np.abs(lhs - herm_expm(h, 1.1)).max() < 1e-12


class TestSmallOps:
    def test_kron_eigenvalue(self):
        op = kron(SIGMA_Z, np.eye(2))
        ket10 = ket([0, 0, 1, 0])
        assert np.allclose(op @ ket10, -ket10)

    def test_expectation_z(self):
        assert expectation(ket([1, 0]), SIGMA_Z) == pytest.approx(1.0)

    def test_expectation_plus_x(self):
        assert expectation(ket([1, 1]), SIGMA_X) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            expectation(ket([1, 0]), np.eye(3))


class TestGateFidelity:
    def test_identity_case(self):
        u = herm_expm(SIGMA_Y, 0.3)
        assert gate_fidelity(u, u) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal_paulis(self):
        assert gate_fidelity(SIGMA_X, SIGMA_Z) == pytest.approx(0.0, abs=1e-14)

    def test_phase_gate_vs_identity(self):
        u = herm_expm(SIGMA_Z, np.pi / 8)
        # |Tr[U]|^2 / 4 = cos^2(pi/8) by direct trace evaluation.
        assert gate_fidelity(u, np.eye(2)) == pytest.approx(
            np.cos(np.pi / 8) ** 2, abs=1e-14
        )

    def test_rejects_non_projector(self):
        with pytest.raises(ProjectorError):
            gate_fidelity(SIGMA_X, SIGMA_X, p=0.5 * np.eye(2))

    def test_global_phase_invariance(self):
        u = herm_expm(SIGMA_X, 0.4)
        assert gate_fidelity(np.exp(1.3j) * u, u) == pytest.approx(1.0, abs=1e-13)


class TestSchedules:
    def test_full_period_returns_identity(self):
        sched = ControlSchedule.from_hamiltonians([SIGMA_Z], [2 * np.pi])
        rec = propagate(sched, 4)
        # e^{-i sigma_z 2 pi} = I exactly.
        assert np.abs(rec.final_propagator - np.eye(2)).max() < 1e-12

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(DimensionError):
            ControlSchedule.from_hamiltonians([SIGMA_Z], [0.0])

    def test_composition_matches_concat(self):
        rng = np.random.default_rng(3)

        def rand_h():
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            return (a + a.conj().T) / 2

        s1 = ControlSchedule.from_hamiltonians([rand_h(), rand_h()], [0.3, 0.5])
        s2 = ControlSchedule.from_hamiltonians([rand_h()], [0.7])
        u_joined = propagate(s1.concat(s2), 8).final_propagator
        u_seq = (
            propagate(s2, 8).final_propagator @ propagate(s1, 8).final_propagator
        )
        assert np.abs(u_joined - u_seq).max() < 1e-10

    def test_basis_contract_reconstructs(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = (a + a.conj().T) / 2
        sched = ControlSchedule.from_hamiltonians([h], [1.0])
        # Reassemble from the declared basis/coefficients and compare.
        _, coeffs = sched.segments[0]
        rebuilt = sum(c * b for c, b in zip(coeffs, sched.basis))
        assert np.abs(rebuilt - h).max() < 1e-12

    def test_hermitian_basis_orthonormal(self):
        basis = hermitian_basis(3)
        assert len(basis) == 9
        for i, a in enumerate(basis):
            for j, b in enumerate(basis):
                ip = np.trace(a.conj().T @ b).real
                assert ip == pytest.approx(1.0 if i == j else 0.0, abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n_seg=st.integers(1, 5),
    dim=st.sampled_from([2, 3, 4]),
)
def test_propagator_unitarity_random_schedules(seed, n_seg, dim):
    rng = np.random.default_rng(seed)
    hs = []
    for _ in range(n_seg):
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        hs.append((a + a.conj().T) / 2)
    durs = rng.uniform(0.05, 1.5, size=n_seg)
    rec = propagate(ControlSchedule.from_hamiltonians(hs, durs), 4)
    for u in rec.propagators[:: max(1, len(rec.propagators) // 5)]:
        assert np.linalg.norm(u.conj().T @ u - np.eye(dim)) < 1e-9


def test_substep_convergence_second_order():
    """Halving the sampling step of a smooth H cuts the error by >= 3x."""
    from hforge.gqc import SpinFieldParams, spin_field_hamiltonian

    p = SpinFieldParams(mu_b0=1.0, theta=1.1, omega=0.8)
    t_total = p.period

    def gate_at(n_seg):
        sched = ControlSchedule.from_sampler(
            lambda t: spin_field_hamiltonian(p, t), t_total, n_seg
        )
        return propagate(sched, 1).final_propagator

    reference = gate_at(20 * 512)
    err_coarse = np.abs(gate_at(256) - reference).max()
    err_fine = np.abs(gate_at(512) - reference).max()
    assert err_coarse / err_fine >= 3.0


def test_adiabatic_rotating_field_overlap():
    """Slow rotation keeps |phi_+> up to O(omega^2 / (mu B0)^2)."""
    from hforge.gqc import (
        SpinFieldParams,
        spin_eigenstate,
        spin_field_hamiltonian,
    )

    p = SpinFieldParams(mu_b0=1.0, theta=np.pi / 2, omega=0.02)
    sched = ControlSchedule.from_sampler(
        lambda t: spin_field_hamiltonian(p, t), p.period, 4096
    )
    rec = propagate(sched, 1)
    psi0 = spin_eigenstate(p, "+")
    final = rec.final_propagator @ psi0
    overlap = abs(np.vdot(psi0, final))
    ratio = (p.omega / p.mu_b0) ** 2
    assert overlap >= 1 - 5 * ratio


def test_lambda_pi_pulse_subspace_returns():
    """Resonant Lambda pulse with area pi restores the qubit projector."""
    from hforge.hqc import lambda_hamiltonian

    h = lambda_hamiltonian(np.sin(0.4) * np.exp(0.7j), -np.cos(0.4))
    sched = ControlSchedule.from_hamiltonians([np.pi * h], [1.0])
    rec = propagate(sched, 2)
    p0 = np.diag([1.0, 1.0, 0.0])
    pt = rec.final_propagator @ p0 @ rec.final_propagator.conj().T
    assert np.linalg.norm(pt - p0) < 1e-8

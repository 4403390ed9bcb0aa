"""Hot numeric kernels: propagator chains and the GRAPE value/gradient pass.

Each kernel has a pure-numpy implementation and, when numba is importable,
a ``@njit``-compiled twin.  Selection is made once at import time from the
``HFORGE_BACKEND`` environment variable:

* ``auto`` (default) - numba if available, else numpy
* ``numba``          - require numba, fail loudly if missing
* ``numpy``          - force the pure-numpy path

``benchmarks/bench_backends.py`` times the two paths against each other.
All kernels take pre-assembled complex128 arrays; shape/validity checks
belong to the callers.
"""

import os

import numpy as np

__all__ = [
    "BACKEND",
    "chain_propagate",
    "segment_expms",
    "grape_value_grad",
    "NUMPY_KERNELS",
    "NUMBA_KERNELS",
]


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def _chain_propagate_np(hs, dts):
    """Cumulative propagators U(t_j) for a piecewise-constant Hamiltonian.

    hs:  (n, d, d) Hermitian matrices, one per step
    dts: (n,) step durations
    returns (n + 1, d, d) with U[0] = I and U[j+1] = expm(-i hs[j] dts[j]) U[j].
    """
    n, d, _ = hs.shape
    us = np.empty((n + 1, d, d), dtype=np.complex128)
    us[0] = np.eye(d, dtype=np.complex128)
    for j in range(n):
        w, v = np.linalg.eigh(hs[j])
        phase = np.exp(-1j * w * dts[j])
        step = (v * phase) @ np.ascontiguousarray(v.conj().T)
        us[j + 1] = step @ us[j]
    return us


def _segment_expms_np(hs, dts):
    """Per-step propagators expm(-i hs[j] dts[j]); shape (n, d, d)."""
    n, d, _ = hs.shape
    out = np.empty((n, d, d), dtype=np.complex128)
    for j in range(n):
        w, v = np.linalg.eigh(hs[j])
        phase = np.exp(-1j * w * dts[j])
        out[j] = (v * phase) @ np.ascontiguousarray(v.conj().T)
    return out


def _grape_value_grad_np(h_static, ctrls, w, dt, u_target, p0, eta, amp_scale, ldim):
    """Penalized GRAPE objective and its exact gradient.

    The objective is the projected gate overlap |Tr[U_T^dag U(tau) P0]|^2 / L^2
    minus eta times the integrated squared dynamical matrix, the integral
    taken by per-segment midpoint quadrature.  The gradient uses the exact
    eigenbasis formula for the derivative of each segment exponential and
    adjoint-style backward accumulation, so the cost is linear in the number
    of segments.

    h_static: (d, d); ctrls: (K, d, d); w: (N, K) real controls; dt: segment
    duration; u_target, p0: (d, d); amp_scale multiplies all control terms
    (models a quasi-static amplitude error); ldim = Tr P0.
    Returns (value, grad) with grad shaped (N, K).
    """
    nseg, nctrl = w.shape
    d = h_static.shape[0]
    eye = np.eye(d, dtype=np.complex128)

    lams = np.empty((nseg, d))
    vecs = np.empty((nseg, d, d), dtype=np.complex128)
    steps = np.empty((nseg, d, d), dtype=np.complex128)
    halves = np.empty((nseg, d, d), dtype=np.complex128)
    fs = np.empty((nseg + 1, d, d), dtype=np.complex128)
    fs[0] = eye

    for j in range(nseg):
        h = h_static.copy()
        for k in range(nctrl):
            h = h + (amp_scale * w[j, k]) * ctrls[k]
        lam, v = np.linalg.eigh(h)
        lams[j] = lam
        vecs[j] = v
        vh = np.ascontiguousarray(v.conj().T)
        steps[j] = (v * np.exp(-1j * lam * dt)) @ vh
        halves[j] = (v * np.exp(-1j * lam * (0.5 * dt))) @ vh
        fs[j + 1] = steps[j] @ fs[j]

    # Backward products B[j] = U_N ... U_{j+1}  (B[nseg] = I).
    bs = np.empty((nseg + 1, d, d), dtype=np.complex128)
    bs[nseg] = eye
    for j in range(nseg - 1, -1, -1):
        bs[j] = bs[j + 1] @ steps[j]

    z = np.trace(u_target.conj().T @ fs[nseg] @ p0)
    fid = (z * z.conjugate()).real / (ldim * ldim)

    # Midpoint dynamical matrices and the penalty value.
    penalty = 0.0
    ktils = np.empty((nseg, d, d), dtype=np.complex128)
    umids = np.empty((nseg, d, d), dtype=np.complex128)
    hmids = np.empty((nseg, d, d), dtype=np.complex128)
    for j in range(nseg):
        h = h_static.copy()
        for k in range(nctrl):
            h = h + (amp_scale * w[j, k]) * ctrls[k]
        hmids[j] = h
        um = halves[j] @ fs[j]
        umids[j] = um
        kt = p0 @ um.conj().T @ h @ um @ p0
        ktils[j] = kt
        penalty += (np.trace(kt @ kt)).real
    penalty *= eta * dt

    value = fid - penalty

    grad = np.zeros((nseg, nctrl))

    # Adjoint accumulation for the penalty: T_j = sum_{m>j} X_m E_m U_{m-1}..U_{j+1}
    # with X_m = 4 eta dt K~_m U_m^dag H_m.
    xs = np.empty((nseg, d, d), dtype=np.complex128)
    for m in range(nseg):
        xs[m] = (4.0 * eta * dt) * (ktils[m] @ umids[m].conj().T @ hmids[m])
    ts = np.zeros((d, d), dtype=np.complex128)

    zc = z.conjugate()
    for j in range(nseg - 1, -1, -1):
        v = vecs[j]
        vh = np.ascontiguousarray(v.conj().T)
        lam = lams[j]
        # Divided-difference factors for the full step and the half step.
        gam_full = _dexp_factors_np(lam, dt)
        gam_half = _dexp_factors_np(lam, 0.5 * dt)
        # Fidelity prefactor matrix: Tr[U_T^dag B_j D F_{j-1} P0]
        # = Tr[(P0 U_T^dag B_j) D F_{j-1}].
        afid = p0 @ u_target.conj().T @ bs[j + 1]
        for k in range(nctrl):
            bt = vh @ (amp_scale * ctrls[k]) @ v
            dstep = v @ (bt * gam_full) @ vh
            dhalf = v @ (bt * gam_half) @ vh
            g = 2.0 / (ldim * ldim) * (zc * np.trace(afid @ dstep @ fs[j])).real
            # Penalty: segments m > j see dstep through the chain (ts),
            # segment m = j sees the half-step derivative and dH directly.
            gp = (np.trace(ts @ dstep @ fs[j])).real
            gp += (np.trace(xs[j] @ dhalf @ fs[j])).real
            gp += 2.0 * eta * dt * (np.trace(
                umids[j] @ ktils[j] @ umids[j].conj().T @ (amp_scale * ctrls[k])
            )).real
            grad[j, k] = g - gp
        if j > 0:
            ts = xs[j] @ halves[j] + ts @ steps[j]

    return value, grad


def _dexp_factors_np(lam, t):
    """Gamma matrix for d/de expm(-i(H+eB)t): dU = V (B~ * Gamma) V^dag."""
    d = lam.shape[0]
    e = np.exp(-1j * lam * t)
    gam = np.empty((d, d), dtype=np.complex128)
    for a in range(d):
        for b in range(d):
            dl = lam[a] - lam[b]
            if abs(dl) < 1e-12:
                gam[a, b] = -1j * t * e[a]
            else:
                gam[a, b] = (e[a] - e[b]) / dl
    return gam


NUMPY_KERNELS = {
    "chain_propagate": _chain_propagate_np,
    "segment_expms": _segment_expms_np,
    "grape_value_grad": _grape_value_grad_np,
}


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _resolve_backend():
    mode = os.environ.get("HFORGE_BACKEND", "auto").lower()
    if mode not in ("auto", "numba", "numpy"):
        raise ValueError(f"HFORGE_BACKEND must be auto|numba|numpy, got {mode!r}")
    if mode == "numpy":
        return "numpy", None
    try:
        import numba
    except ImportError:
        if mode == "numba":
            raise
        return "numpy", None
    return "numba", numba


def _build_numba_kernels(numba):
    njit = numba.njit

    chain = njit(cache=True)(_chain_propagate_np)
    segs = njit(cache=True)(_segment_expms_np)
    dexp = njit(cache=True)(_dexp_factors_np)

    # grape_value_grad calls _dexp_factors_np; rebind the jitted version
    # through a compiled closure.
    @njit(cache=True)
    def grape(h_static, ctrls, w, dt, u_target, p0, eta, amp_scale, ldim):
        nseg, nctrl = w.shape
        d = h_static.shape[0]
        eye = np.eye(d, dtype=np.complex128)

        lams = np.empty((nseg, d))
        vecs = np.empty((nseg, d, d), dtype=np.complex128)
        steps = np.empty((nseg, d, d), dtype=np.complex128)
        halves = np.empty((nseg, d, d), dtype=np.complex128)
        fs = np.empty((nseg + 1, d, d), dtype=np.complex128)
        fs[0] = eye

        for j in range(nseg):
            h = h_static.copy()
            for k in range(nctrl):
                h = h + (amp_scale * w[j, k]) * ctrls[k]
            lam, v = np.linalg.eigh(h)
            lams[j] = lam
            vecs[j] = v
            vh = np.ascontiguousarray(v.conj().T)
            steps[j] = (v * np.exp(-1j * lam * dt)) @ vh
            halves[j] = (v * np.exp(-1j * lam * (0.5 * dt))) @ vh
            fs[j + 1] = steps[j] @ fs[j]

        bs = np.empty((nseg + 1, d, d), dtype=np.complex128)
        bs[nseg] = eye
        for j in range(nseg - 1, -1, -1):
            bs[j] = bs[j + 1] @ steps[j]

        z = np.trace(np.ascontiguousarray(u_target.conj().T) @ fs[nseg] @ p0)
        fid = (z * np.conj(z)).real / (ldim * ldim)

        penalty = 0.0
        ktils = np.empty((nseg, d, d), dtype=np.complex128)
        umids = np.empty((nseg, d, d), dtype=np.complex128)
        hmids = np.empty((nseg, d, d), dtype=np.complex128)
        for j in range(nseg):
            h = h_static.copy()
            for k in range(nctrl):
                h = h + (amp_scale * w[j, k]) * ctrls[k]
            hmids[j] = h
            um = halves[j] @ fs[j]
            umids[j] = um
            kt = p0 @ np.ascontiguousarray(um.conj().T) @ h @ um @ p0
            ktils[j] = kt
            penalty += (np.trace(kt @ kt)).real
        penalty *= eta * dt

        value = fid - penalty

        grad = np.zeros((nseg, nctrl))
        xs = np.empty((nseg, d, d), dtype=np.complex128)
        for m in range(nseg):
            xs[m] = (4.0 * eta * dt) * (
                ktils[m] @ np.ascontiguousarray(umids[m].conj().T) @ hmids[m]
            )
        ts = np.zeros((d, d), dtype=np.complex128)

        zc = np.conj(z)
        ut_h = np.ascontiguousarray(u_target.conj().T)
        for j in range(nseg - 1, -1, -1):
            v = vecs[j]
            vh = np.ascontiguousarray(v.conj().T)
            lam = lams[j]
            gam_full = dexp(lam, dt)
            gam_half = dexp(lam, 0.5 * dt)
            afid = p0 @ ut_h @ bs[j + 1]
            for k in range(nctrl):
                bt = vh @ (amp_scale * ctrls[k]) @ v
                dstep = v @ (bt * gam_full) @ vh
                dhalf = v @ (bt * gam_half) @ vh
                g = 2.0 / (ldim * ldim) * (zc * np.trace(afid @ dstep @ fs[j])).real
                gp = (np.trace(ts @ dstep @ fs[j])).real
                gp += (np.trace(xs[j] @ dhalf @ fs[j])).real
                gp += 2.0 * eta * dt * (np.trace(
                    umids[j] @ ktils[j] @ np.ascontiguousarray(umids[j].conj().T)
                    @ (amp_scale * ctrls[k])
                )).real
                grad[j, k] = g - gp
            if j > 0:
                ts = xs[j] @ halves[j] + ts @ steps[j]

        return value, grad

    return {"chain_propagate": chain, "segment_expms": segs, "grape_value_grad": grape}


BACKEND, _numba = _resolve_backend()
NUMBA_KERNELS = _build_numba_kernels(_numba) if BACKEND == "numba" else None

_active = NUMBA_KERNELS if BACKEND == "numba" else NUMPY_KERNELS

chain_propagate = _active["chain_propagate"]
segment_expms = _active["segment_expms"]
grape_value_grad = _active["grape_value_grad"]

"""Simulated two-qubit process tomography.

Process matrices use the unnormalized Pauli basis ``E_m = P_a kron P_b``
(``m = 4a + b``, ``P = I, X, Y, Z``) with ``rho_out = sum chi_mn E_m rho E_n^dag``,
so a unitary channel has ``Tr chi = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import analytic, atoms, evolve, qmath

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_LABELS = tuple(a + b for a in "IXYZ" for b in "IXYZ")
BASIS = np.array([np.kron(a, b) for a in PAULI for b in PAULI])
CZ = np.diag([1, -1, -1, -1]).astype(complex)

_SINGLE_INPUTS = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([1, 1], dtype=complex) / math.sqrt(2),
    np.array([1, 1j], dtype=complex) / math.sqrt(2),
)


@dataclass(frozen=True)
class ChiMatrix:
    entries: np.ndarray
    physical: bool
    residual: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape != (16, 16):
            raise ValueError("chi must be 16x16")
        object.__setattr__(self, "entries", e)

    @property
    def trace(self):
        return float(np.trace(self.entries).real)


def input_states():
    """The 16 product inputs from ``{|0>, |1>, |+>, |+i>}`` on each qubit."""
    out = []
    for a in _SINGLE_INPUTS:
        for b in _SINGLE_INPUTS:
            psi = np.kron(a, b)
            out.append(np.outer(psi, psi.conj()))
    return np.array(out)


def apply_chi(chi, rho):
    """``sum_mn chi_mn E_m rho E_n^dag`` for one input or a batch."""
    chi = chi.entries if isinstance(chi, ChiMatrix) else np.asarray(chi)
    return np.einsum("mn,mij,...jk,nlk->...il", chi, BASIS, rho, BASIS.conj(), optimize=True)


def unitary_channel(u, inputs=None):
    inputs = input_states() if inputs is None else inputs
    return u @ inputs @ qmath.dagger(u)


def _design_matrix(inputs):
    # Column (m, n) holds the stacked outputs of chi = |m><n|.
    cols = np.einsum("mij,kjl,nql->kiqmn", BASIS, inputs, BASIS.conj(), optimize=True)
    k = inputs.shape[0]
    return cols.reshape(k * 16, 256)


def chi_linear_inversion(inputs, outputs):
    """Exact least-squares ``chi`` reproducing ``outputs`` (may be unphysical)."""
    a = _design_matrix(np.asarray(inputs, dtype=complex))
    y = np.asarray(outputs, dtype=complex).reshape(-1)
    sv = np.linalg.svd(a, compute_uv=False)
    if len(sv) < 256 or sv[-1] < 1e-12 * sv[0]:
        raise np.linalg.LinAlgError("input states are not informationally complete")
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    chi = x.reshape(16, 16)
    chi = 0.5 * (chi + chi.conj().T)
    return ChiMatrix(chi, _is_physical(chi), float(np.linalg.norm(a @ chi.reshape(-1) - y)))


def _is_physical(chi, tol=1e-10):
    w = np.linalg.eigvalsh(0.5 * (chi + chi.conj().T))
    return bool(w.min() >= -tol and w.sum() <= 1.0 + 1e-9)


def _psd_clamp(chi):
    w, v = np.linalg.eigh(0.5 * (chi + chi.conj().T))
    return (v * np.clip(w, 0.0, None)) @ v.conj().T


_TRIL = np.tril_indices(16)
_OFF = _TRIL[0] != _TRIL[1]


def _pack(lower):
    vals = lower[_TRIL]
    return np.concatenate([vals.real, vals[_OFF].imag])


def _unpack(p):
    n = len(_TRIL[0])
    vals = p[:n].astype(complex)
    vals[_OFF] += 1j * p[n:]
    lower = np.zeros((16, 16), dtype=complex)
    lower[_TRIL] = vals
    return lower


def chi_mle(inputs, outputs, seed=None, penalty=1e3, maxiter=100_000, gtol=1e-10):
    """Physical ``chi = L L^dag`` (``L`` lower triangular) closest to the data.

    Minimizes ``sum_k ||rho_pred - rho_out||_F^2 + penalty * max(0, Tr chi - 1)^2``
    from the Cholesky factor of the clamped linear-inversion estimate (or of
    ``seed``), then rescales to ``Tr chi <= 1``. When the linear estimate is
    already physical it is the exact minimizer and is returned directly.
    """
    inputs = np.asarray(inputs, dtype=complex)
    outputs = np.asarray(outputs, dtype=complex)
    a = _design_matrix(inputs)
    y = outputs.reshape(-1)
    if seed is None:
        lin = chi_linear_inversion(inputs, outputs)
        if lin.physical:
            chi = _psd_clamp(lin.entries)
            return ChiMatrix(chi, True, float(np.linalg.norm(a @ chi.reshape(-1) - y)))
        seed = lin.entries
    start = _psd_clamp(seed.entries if isinstance(seed, ChiMatrix) else np.asarray(seed))
    tr = np.trace(start).real
    if tr > 1.0:
        start /= tr
    lower0 = np.linalg.cholesky(start + 1e-12 * np.eye(16))
    aha = a.conj().T @ a
    ahy = a.conj().T @ y
    yy = float(np.vdot(y, y).real)

    def fun(p):
        lower = _unpack(p)
        chi = lower @ lower.conj().T
        x = chi.reshape(-1)
        ax = aha @ x
        f = float(np.vdot(x, ax).real - 2 * np.vdot(ahy, x).real + yy)
        g = (ax - ahy).reshape(16, 16)
        excess = max(0.0, np.trace(chi).real - 1.0)
        f += penalty * excess**2
        herm = g + g.conj().T
        k = 2.0 * lower.conj().T @ herm + 4.0 * penalty * excess * lower.conj().T
        kt = k.T
        grad_vals = kt[_TRIL]
        grad = np.concatenate([grad_vals.real, -grad_vals[_OFF].imag])
        return f, grad

    res = optimize.minimize(
        fun, _pack(lower0), jac=True, method="L-BFGS-B",
        options={"maxiter": maxiter, "gtol": gtol, "ftol": 0.0, "maxcor": 30},
    )
    lower = _unpack(res.x)
    chi = lower @ lower.conj().T
    tr = np.trace(chi).real
    if tr > 1.0:
        chi /= tr
    resid = float(np.linalg.norm(a @ chi.reshape(-1) - y))
    return ChiMatrix(chi, True, resid)


def chi_ideal(u):
    """Rank-one ``chi`` of a unitary: ``c_m = Tr[E_m^dag U] / 4``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4) or not np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10):
        raise ValueError("chi_ideal needs a 4x4 unitary")
    c = np.einsum("mji,ji->m", BASIS.conj(), u) / 4.0
    return ChiMatrix(np.outer(c, c.conj()), True)


def _entries(chi):
    return chi.entries if isinstance(chi, ChiMatrix) else np.asarray(chi, dtype=complex)


def _psd_factor(chi, rtol=1e-13):
    """``X`` with ``chi = X X^dag``, dropping eigenvalues below ``rtol * max``."""
    w, v = qmath.eigh_psd(chi)
    keep = w > rtol * max(float(w.max()), 0.0)
    return v[:, keep] * np.sqrt(w[keep])


def error_overlap(chiId, chiSim):
    """``1 - (Tr sqrt(sqrt(chi_sim) chi_id sqrt(chi_sim)))^2``.

    The trace equals the trace norm of ``X_sim^dag X_id`` for any factors
    ``chi = X X^dag``, which avoids square roots of round-off eigenvalues.
    """
    x = _psd_factor(_entries(chiSim))
    y = _psd_factor(_entries(chiId))
    if x.shape[1] == 0 or y.shape[1] == 0:
        return 1.0
    f = float(np.sum(qmath.singular_values(x.conj().T @ y)))
    return 1.0 - f * f


def error_distance(chiId, chiSim):
    """Half the trace norm of ``chi_id - chi_sim``."""
    return qmath.trace_norm_half(_entries(chiId) - _entries(chiSim))


def epsilon_bounds(eO, eD):
    for e in (eO, eD):
        if not 0.0 <= e <= 1.0:
            raise ValueError("errors must lie in [0, 1]")
    return eO / 2.0, eD


def state_system(params: analytic.RydbergStateParams, omega=None):
    """Intrinsic six-level two-atom model of a registry Rydberg state.

    ``|r1>`` is the ``n-1`` level at ``omega_{n,n-1}`` below ``|r>`` driven with
    ``Omega``. ``|r2>`` is the ``n-2`` level (p, d states) or the ``(n-2) d``
    level at ``omega'_{n,n-2}`` (s states, driven with ``c' Omega``); it is
    undriven for low-n p states. Pair shifts are ``B`` on ``(r, r)``,
    ``b' B`` on ``(r, r1)``, ``b'' B`` (``b''' B`` for s) on ``(r, r2)`` and
    ``B`` elsewhere.
    """
    om = params.rabi if omega is None else omega
    gap1 = params.gapN1
    if params.form == "s":
        gap2, om2, b2 = params.gapN2Prime, params.cPrime * om, params.bTriplePrime
    elif params.form == "p_high":
        gap2, om2, b2 = params.gapN2, om, params.bDoublePrime
    else:
        gap2, om2, b2 = 2.0 * params.gapN1, 0.0, 1.0
    branching = atoms.CS_RYDBERG_BRANCHING if params.species == "Cs" else atoms.RB_RYDBERG_BRANCHING
    scheme = atoms.AtomScheme6(
        omega10=params.omega10, rabi=(om, om, om2), levelGaps=(gap1, gap2),
        gammaR=1.0 / params.tau, groundBranching=branching,
    )
    b = params.Bnn
    m = np.full((3, 3), b)  # order (r2, r1, r)
    m[2, 1] = m[1, 2] = params.bPrime * b
    m[2, 0] = m[0, 2] = b2 * b
    return evolve.TwoAtomSystem(scheme, scheme, atoms.BlockadeSpec(m), om)


def simulate_channel(seq, system, inputs=None, method="expm"):
    """Run the 16 tomography inputs; returns projected outputs and trace losses."""
    inputs = input_states() if inputs is None else inputs
    d = system.dim
    idx = evolve.computational_indices(d)
    batch = np.array([evolve.embed_two_qubit(r, d) for r in inputs])
    out = evolve.run_sequence(batch, seq, system, method=method)
    proj = []
    loss = []
    for o in out:
        r4, lost = qmath.project_computational(o, idx)
        proj.append(r4)
        loss.append(lost)
    return np.array(proj), np.array(loss)


def analytic_phase(omega, blockade):
    """Blockade phase ``pi Omega / 2B`` picked up by ``|11>``."""
    return math.pi * omega / (2.0 * blockade)


@dataclass(frozen=True)
class QptResult:
    chi: ChiMatrix
    chiIdeal: ChiMatrix
    errorOverlap: float
    errorDistance: float
    traceLoss: float


def tomography(seq, system, ideal=CZ, method="expm"):
    inputs = input_states()
    outputs, loss = simulate_channel(seq, system, inputs, method)
    chi = chi_mle(inputs, outputs)
    chi_id = chi_ideal(ideal)
    return QptResult(chi, chi_id, error_overlap(chi_id, chi), error_distance(chi_id, chi), float(np.mean(loss)))


def calibrate_phase(system, t_gap=0.0, numeric=False, tol=1e-4):
    """Phase for the modified CZ: ``pi Omega / 2B`` or the ``E_D`` minimizer.

    The numeric search covers ``[0, 2 pi Omega / B]``; propagators are shared
    between trial phases, so each trial only re-applies cached exponentials.
    """
    b = float(system.blockade.shifts[2, 2])
    phi0 = analytic_phase(system.rabiNominal, b)
    if not numeric:
        return phi0
    res = optimize.minimize_scalar(
        lambda phi: tomography(evolve.modified_cz(phi, t_gap), system).errorDistance,
        bounds=(0.0, 4.0 * phi0), method="bounded", options={"xatol": tol},
    )
    return float(res.x)


def chi_to_json(chi):
    e = _entries(chi)
    return {"basis": list(PAULI_LABELS), "real": e.real.tolist(), "imag": e.imag.tolist()}


def chi_from_json(doc):
    return np.array(doc["real"]) + 1j * np.array(doc["imag"])


def write_chi_json(path, **named):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({k: chi_to_json(v) for k, v in named.items()}, fh, indent=1, sort_keys=True)

"""Pulse sequences and propagation of the two-atom density matrix.

Each Rydberg pulse or gap is piecewise constant and is propagated exactly with
the exponential of the Liouville-space generator
``G = -i (H kron I - I kron H^T) + L``; an interaction-picture RK4 integrator
serves as an independent check. Ideal single-qubit operations act on the
``{|0>, |1>}`` levels of one atom and are instantaneous.

States are returned in the qubit frame, i.e. with the free ``-omega10 |0><0|``
precession of each atom removed, so ideal gates are time independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse
from scipy import optimize

from . import atoms, qmath

ATOMS = ("control", "target")


class IntegrationError(RuntimeError):
    """Raised when propagation produces non-finite numbers."""


@dataclass(frozen=True)
class RydbergPulse:
    """Resonant ground-Rydberg rotation of ``area`` radians on one atom.

    ``phase`` multiplies the Rydberg-side coupling(s) of that atom by ``e^{i phase}``.
    """

    atom: str
    area: float
    phase: float = 0.0


@dataclass(frozen=True)
class Gap:
    duration: float


@dataclass(frozen=True)
class IdealRotation:
    """``exp(-i angle sigma_axis / 2)`` on the qubit levels of one atom."""

    atom: str
    axis: str
    angle: float


@dataclass(frozen=True)
class PhaseZ:
    """``|0><0| + e^{i angle} |1><1|`` on one atom."""

    atom: str
    angle: float


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple
    label: str = ""

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a pulse sequence needs at least one segment")
        for s in segs:
            if isinstance(s, (RydbergPulse, IdealRotation, PhaseZ)) and s.atom not in ATOMS:
                raise ValueError(f"unknown atom {s.atom!r}")
            if isinstance(s, RydbergPulse) and s.area < 0:
                raise ValueError("pulse area must be non-negative")
            if isinstance(s, Gap) and s.duration < 0:
                raise ValueError("gap duration must be non-negative")
            if isinstance(s, IdealRotation) and s.axis not in ("x", "y", "z"):
                raise ValueError(f"unknown rotation axis {s.axis!r}")
        object.__setattr__(self, "segments", segs)

    def __add__(self, other):
        return PulseSequence(self.segments + other.segments, f"{self.label}+{other.label}")


def standard_cz(t_gap=500e-9):
    """pi on control, 2 pi on target, pi on control."""
    return PulseSequence(
        (
            RydbergPulse("control", math.pi),
            Gap(t_gap),
            RydbergPulse("target", 2 * math.pi),
            Gap(t_gap),
            RydbergPulse("control", math.pi),
        ),
        "standard_cz",
    )


def modified_cz(phi, t_gap=500e-9):
    """Standard CZ with the blockade phase ``phi`` moved onto the target and removed.

    The target 2 pi pulse is split into two pi halves and the second half runs
    with laser phase ``-phi``; this gives ``|01> -> -e^{i phi}|01>``, matching the
    blockade phase on ``|11>``, and a final ``PhaseZ(target, -phi)`` cancels both.
    """
    return PulseSequence(
        (
            RydbergPulse("control", math.pi),
            Gap(t_gap),
            RydbergPulse("target", math.pi),
            RydbergPulse("target", math.pi, -phi),
            Gap(t_gap),
            RydbergPulse("control", math.pi),
            PhaseZ("target", -phi),
        ),
        "modified_cz",
    )


def _compensation_segments(compensation):
    if compensation is None:
        return ()
    ac, at = compensation
    return (PhaseZ("control", ac), PhaseZ("target", at))


def cnot(t_gap=500e-9, compensation=None, core=None):
    """CZ core between two ``R_x(-pi/2)`` target rotations.

    With the core ``diag(1, -1, -1, -1)`` this maps ``|0 t> -> |0> Z|t>`` and
    ``|1 t> -> -i |1> X|t>``: the CNOT truth table. ``compensation`` appends
    ``PhaseZ`` angles ``(control, target)`` after the core, which defaults to
    ``standard_cz(t_gap)``.
    """
    core = (standard_cz(t_gap) if core is None else core).segments + _compensation_segments(compensation)
    rot = IdealRotation("target", "x", -math.pi / 2)
    return PulseSequence((rot,) + core + (rot,), "cnot")


def bell_prep_cnot(t_gap=500e-9, compensation=None, core=None):
    """From ``|11>``: ``R_x(pi/2)`` on control, ``R_x(pi)`` on target, then CNOT.

    Ideal output is ``(|00> + |11>)/sqrt(2)``.
    """
    prep = (IdealRotation("control", "x", math.pi / 2), IdealRotation("target", "x", math.pi))
    return PulseSequence(prep + cnot(t_gap, compensation, core).segments, "bell_prep_cnot")


def _without_drive(s):
    if isinstance(s, atoms.AtomScheme5):
        return replace(s, omegaR=0.0, omegaB=0.0)
    return replace(s, rabi=(0.0, 0.0, 0.0))


def _with_phase(s, phi):
    ph = np.exp(1j * phi)
    if isinstance(s, atoms.AtomScheme5):
        return replace(s, omegaB=s.omegaB * ph)
    return replace(s, rabi=tuple(c * ph for c in s.rabi))


def _without_decay(s):
    if isinstance(s, atoms.AtomScheme5):
        return replace(s, gammaP=0.0, gammaR=0.0, gamma1r=0.0, gamma01=0.0)
    return replace(s, gammaR=0.0)


def single_qubit_unitary(dim, axis, angle):
    """``dim x dim`` unitary rotating the ``{|0>, |1>}`` levels, identity elsewhere."""
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if axis == "x":
        r = np.array([[c, -1j * s], [-1j * s, c]])
    elif axis == "y":
        r = np.array([[c, -s], [s, c]], dtype=complex)
    elif axis == "z":
        r = np.diag([np.exp(-1j * angle / 2), np.exp(1j * angle / 2)])
    else:
        raise ValueError(f"unknown rotation axis {axis!r}")
    u = np.eye(dim, dtype=complex)
    q = [0, 2]
    u[np.ix_(q, q)] = r
    return u


def phase_z_unitary(dim, angle):
    u = np.eye(dim, dtype=complex)
    u[2, 2] = np.exp(1j * angle)
    return u


def computational_indices(dim):
    """Two-atom indices of ``|00>, |01>, |10>, |11>`` (control first)."""
    return [0 * dim + 0, 0 * dim + 2, 2 * dim + 0, 2 * dim + 2]


@dataclass
class TwoAtomSystem:
    """Per-shot two-atom model: drive-on schemes for both atoms and the blockade.

    ``rabiNominal`` sets pulse durations (``area / rabiNominal``), so per-shot
    Rabi deviations appear as area errors.
    """

    control: object
    target: object
    blockade: atoms.BlockadeSpec
    rabiNominal: float
    expm_calls: int = 0
    _cache: dict = field(default_factory=dict, repr=False)
    _lct: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if type(self.control) is not type(self.target):
            raise ValueError("control and target must use the same level scheme")
        if not self.rabiNominal > 0:
            raise ValueError("rabiNominal must be positive")

    @property
    def dim(self):
        return self.control.dim

    @property
    def omega10(self):
        return self.control.omega10

    def without_decay(self):
        return TwoAtomSystem(_without_decay(self.control), _without_decay(self.target), self.blockade, self.rabiNominal)

    def duration(self, area):
        return area / self.rabiNominal

    def liouvillian(self):
        if self._lct is None:
            d = self.dim
            lc = atoms.lift_superop(atoms.build_l_superop(self.control), d, "control")
            lt = atoms.lift_superop(atoms.build_l_superop(self.target), d, "target")
            self._lct = lc + lt
        return self._lct

    def hamiltonian(self, pulsed=None, phase=0.0):
        """Two-atom H with only ``pulsed`` driven (``None`` for a gap)."""
        sc = self.control if pulsed == "control" else _without_drive(self.control)
        st = self.target if pulsed == "target" else _without_drive(self.target)
        if pulsed == "control":
            sc = _with_phase(sc, phase)
        elif pulsed == "target":
            st = _with_phase(st, phase)
        eye = np.eye(self.dim)
        h = np.kron(atoms.build_h(sc), eye) + np.kron(eye, atoms.build_h(st))
        return h + np.diag(atoms.blockade_diagonal(self.control, self.blockade))

    def generator(self, pulsed=None, phase=0.0):
        return qmath.commutator_superop(self.hamiltonian(pulsed, phase)) + self.liouvillian()

    def propagator(self, pulsed, duration):
        """Cached ``expm(G T)`` for a zero-phase pulse on ``pulsed`` (or a gap)."""
        key = (pulsed, float(duration))
        if key not in self._cache:
            self._cache[key] = self._build_propagator(pulsed, duration)
        return self._cache[key]

    def _build_propagator(self, pulsed, duration):
        lct = self.liouvillian()
        h = self.hamiltonian(pulsed)
        if _nnz(lct) == 0:
            # Closed system: vec(U rho U^dag) = kron(U, conj U) vec(rho). The
            # eigenbasis form stays unitary to round-off even for |H| T ~ 1e7.
            self.expm_calls += 1
            w, v = np.linalg.eigh((h + h.conj().T) / 2)
            u = (v * np.exp(-1j * w * duration)) @ v.conj().T
            return np.kron(u, np.conj(u))
        if pulsed is None and np.allclose(h, np.diag(np.diag(h)), rtol=0, atol=0):
            # Diagonal H: exp(-i ad_H T) is diagonal; split off exactly when L
            # commutes with it, which holds for phase-covariant dissipators.
            e = np.diag(h).real
            n = self.dim**2
            freq = (e[:, None] - e[None, :]).reshape(n * n)
            comm = (freq[:, None] - freq[None, :]) * lct
            if np.max(np.abs(comm)) <= 1e-12 * max(np.max(np.abs(lct)), 1.0) * max(np.max(np.abs(freq)), 1.0):
                self.expm_calls += 1
                return np.exp(-1j * freq * duration)[:, None] * qmath.expm(lct * duration)
        self.expm_calls += 1
        return qmath.expm((qmath.commutator_superop(h) + lct) * duration)

    def frame_unitary(self, which, phase):
        """Diagonal unitary on one atom whose conjugation adds ``phase`` to its drive."""
        v = np.ones(self.dim, dtype=complex)
        v[list(self.control.rydberg_levels)] = np.exp(1j * phase)
        return v


def _nnz(m):
    return m.count_nonzero() if hasattr(m, "count_nonzero") else int(np.count_nonzero(m))


def _as_batch(rho):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 2:
        return rho[None], True
    return rho, False


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise IntegrationError("integration diverged")


def _apply_superop(p, batch):
    k, n, _ = batch.shape
    out = (p @ batch.reshape(k, n * n).T).T.reshape(k, n, n)
    _check_finite(out)
    return out


def _two_atom_diag(v_single, which):
    ones = np.ones_like(v_single)
    return np.kron(v_single, ones) if which == "control" else np.kron(ones, v_single)


def _conjugate_diag(batch, v):
    return v[None, :, None] * batch * np.conj(v)[None, None, :]


def _conjugate(batch, u):
    return u @ batch @ qmath.dagger(u)


def rk4_step_count(h, lsp, duration, divisor=40.0):
    """Number of steps with ``h <= 1/(divisor f_max)``.

    ``f_max`` (Hz) is the largest of the dissipative rates and the Bohr
    frequencies of level pairs coupled by L. When H has off-diagonal couplings
    the largest ``|H|`` entry and the Bohr frequencies of coupled pairs also
    count; a diagonal H is integrated exactly by the interaction picture and
    does not limit the step.
    """
    e = np.diag(h).real
    v = h - np.diag(np.diag(h))
    n = h.shape[0]
    rates = [0.0]
    nz = np.abs(v) > 0
    if np.any(nz):
        rates.append(np.max(np.abs(h)))
        rates.append(np.max(np.abs(e[:, None] - e[None, :])[nz]))
    coo = lsp.tocoo()
    if coo.nnz:
        rates.append(np.max(np.abs(coo.data)))
        de = (e[:, None] - e[None, :]).reshape(n * n)
        rates.append(np.max(np.abs(de[coo.row] - de[coo.col])))
    f_max = max(rates) / (2 * math.pi)
    if not math.isfinite(f_max):
        raise IntegrationError("non-finite generator")
    return max(1, int(math.ceil(duration * divisor * f_max)))


def propagate_rk4(batch, h, lct, duration, divisor=40.0):
    """Fixed-step RK4 in the interaction picture of ``diag(H)``."""
    batch, single = _as_batch(batch)
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    lsp = scipy.sparse.csr_matrix(lct)
    steps = rk4_step_count(h, lsp, duration, divisor)
    dt = duration / steps
    e = np.diag(h).real
    v = h - np.diag(np.diag(h))
    de = e[:, None] - e[None, :]
    half = np.exp(1j * de * dt / 2)
    k = batch.shape[0]

    def deriv(x, ph):
        rho = x * np.conj(ph)
        d = -1j * (v @ rho - rho @ v)
        d += (lsp @ rho.reshape(k, n * n).T).T.reshape(k, n, n)
        return d * ph

    x = batch.copy()
    ph = np.ones((n, n), dtype=complex)
    for i in range(steps):
        ph_mid = ph * half
        ph_end = ph_mid * half
        k1 = deriv(x, ph)
        k2 = deriv(x + 0.5 * dt * k1, ph_mid)
        k3 = deriv(x + 0.5 * dt * k2, ph_mid)
        k4 = deriv(x + dt * k3, ph_end)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        x = 0.5 * (x + qmath.dagger(x))
        ph = np.exp(1j * de * (i + 1) * dt)
        if not np.all(np.isfinite(x)):
            raise IntegrationError("integration diverged")
    out = x * np.conj(ph)
    return out[0] if single else out


def propagate_segment(rho, h, lct, duration, method="expm", divisor=40.0):
    """Evolve ``rho`` (or a batch) for ``duration`` under fixed ``H`` and ``L``."""
    batch, single = _as_batch(rho)
    if duration == 0:
        out = batch.copy()
    elif method == "expm":
        g = qmath.commutator_superop(h) + lct
        out = _apply_superop(qmath.expm(g * duration), batch)
    elif method == "rk4":
        out = propagate_rk4(batch, h, lct, duration, divisor)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out[0] if single else out


def free_frame(dim, omega10, t):
    """Diagonal of ``exp(-i H_free t)`` for two atoms, ``H_free = -omega10 |0><0|`` each."""
    w = np.ones(dim, dtype=complex)
    w[0] = np.exp(1j * omega10 * t)
    return np.kron(w, w)


def run_sequence(rho0, seq: PulseSequence, system: TwoAtomSystem, method="expm", divisor=40.0, observer=None):
    """Apply ``seq`` to ``rho0`` (a matrix or a batch) and return the final state(s).

    Input and output are in the qubit frame. ``observer(index, batch)`` is
    called after every segment with the lab-frame batch.
    """
    batch, single = _as_batch(rho0)
    d = system.dim
    t = 0.0
    for idx, seg in enumerate(seq.segments):
        if isinstance(seg, RydbergPulse):
            dur = system.duration(seg.area)
            if method == "expm":
                p = system.propagator(seg.atom, dur)
                if seg.phase != 0.0:
                    v = _two_atom_diag(system.frame_unitary(seg.atom, seg.phase), seg.atom)
                    batch = _conjugate_diag(_apply_superop(p, _conjugate_diag(batch, np.conj(v))), v)
                else:
                    batch = _apply_superop(p, batch)
            else:
                h = system.hamiltonian(seg.atom, seg.phase)
                batch = propagate_segment(batch, h, system.liouvillian(), dur, method, divisor)
            t += dur
        elif isinstance(seg, Gap):
            if seg.duration > 0:
                if method == "expm":
                    batch = _apply_superop(system.propagator(None, seg.duration), batch)
                else:
                    h = system.hamiltonian(None)
                    batch = propagate_segment(batch, h, system.liouvillian(), seg.duration, method, divisor)
                t += seg.duration
        elif isinstance(seg, (IdealRotation, PhaseZ)):
            if isinstance(seg, IdealRotation):
                u1 = single_qubit_unitary(d, seg.axis, seg.angle)
                w = np.ones(d, dtype=complex)
                w[0] = np.exp(1j * system.omega10 * t)
                u1 = (w[:, None] * u1) * np.conj(w)[None, :]
            else:
                u1 = phase_z_unitary(d, seg.angle)
            eye = np.eye(d)
            u = np.kron(u1, eye) if seg.atom == "control" else np.kron(eye, u1)
            batch = _conjugate(batch, u)
        else:
            raise TypeError(f"unknown segment {seg!r}")
        if observer is not None:
            observer(idx, batch)
    w = free_frame(d, system.omega10, t)
    out = _conjugate_diag(batch, np.conj(w))
    return out[0] if single else out


def sequence_duration(seq, system):
    total = 0.0
    for seg in seq.segments:
        if isinstance(seg, RydbergPulse):
            total += system.duration(seg.area)
        elif isinstance(seg, Gap):
            total += seg.duration
    return total


def embed_two_qubit(rho4, dim):
    """Place a 4x4 two-qubit matrix into the two-atom level basis."""
    idx = computational_indices(dim)
    out = np.zeros((dim * dim, dim * dim), dtype=complex)
    out[np.ix_(idx, idx)] = rho4
    return out


def product_state(dim, pops_c, pops_t):
    """Diagonal product state from per-atom level populations."""
    pc = np.zeros(dim)
    pt = np.zeros(dim)
    for lvl, p in pops_c.items():
        pc[lvl] = p
    for lvl, p in pops_t.items():
        pt[lvl] = p
    return np.diag(np.kron(pc, pt)).astype(complex)


def core_phases(system: TwoAtomSystem, core: PulseSequence):
    """Phases ``theta_j - theta_00`` acquired by the computational states under ``core``.

    Runs the decay-free model on the uniform superposition and reads the
    coherences with ``|00>``.
    """
    d = system.dim
    psi4 = np.full(4, 0.5, dtype=complex)
    rho = embed_two_qubit(np.outer(psi4, psi4.conj()), d)
    out = run_sequence(rho, core, system.without_decay())
    idx = computational_indices(d)
    return np.array([np.angle(out[idx[j], idx[0]]) for j in range(4)])


def _wrap(x):
    return float(np.angle(np.exp(1j * x)))


def local_phase_compensation(system: TwoAtomSystem, core: PulseSequence, mode="last"):
    """``PhaseZ`` angles ``(control, target)`` applied after ``core``.

    ``"last"`` brings the core to ``diag(1, -1, -1, -e^{i delta})``, leaving the
    entangling phase error ``delta`` on ``|11>``. ``"symmetric"`` spreads it as
    ``(delta/4) (1, -1, -1, 1)`` up to a global phase, which minimizes the
    distance to ``diag(1, -1, -1, -1)`` over local phase corrections.
    """
    th = core_phases(system, core)
    err = th - np.array([0.0, math.pi, math.pi, math.pi])
    if mode == "last":
        return _wrap(-err[2]), _wrap(-err[1])
    if mode != "symmetric":
        raise ValueError(f"unknown compensation mode {mode!r}")
    delta = _wrap(err[3] - err[2] - err[1] + err[0])
    return _wrap(err[0] - err[2] - delta / 2), _wrap(err[0] - err[1] - delta / 2)


def entangling_phase(system: TwoAtomSystem, core: PulseSequence):
    """Phase error ``delta`` left on ``|11>`` after any local phase correction."""
    err = core_phases(system, core) - np.array([0.0, math.pi, math.pi, math.pi])
    return _wrap(err[3] - err[2] - err[1] + err[0])


def calibrate_blockade_phase(system: TwoAtomSystem, t_gap=500e-9, bracket=4.0):
    """Laser phase for ``modified_cz`` that zeroes the entangling phase error.

    Root of ``entangling_phase(modified_cz(phi))`` on ``[0, bracket * pi Omega / 2B]``.
    """
    b = float(np.min(np.abs(system.blockade.shifts)))
    hi = bracket * math.pi * system.rabiNominal / (2.0 * b)
    f = lambda phi: entangling_phase(system, modified_cz(phi, t_gap))
    lo_val, hi_val = f(0.0), f(hi)
    if lo_val == 0.0:
        return 0.0
    if np.sign(lo_val) == np.sign(hi_val):
        raise IntegrationError("blockade phase not bracketed")
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-12))


def compensated(core: PulseSequence, compensation):
    """``core`` followed by the ``PhaseZ`` corrections ``(control, target)``."""
    return PulseSequence(core.segments + _compensation_segments(compensation), core.label)


def ideal_system(omega, ratio=1e6):
    """Two-level limit: only ``|1> <-> |r>`` driven, ``B`` and ``omega10`` at ``ratio * omega``."""
    s = atoms.AtomScheme6(omega10=ratio * omega, rabi=(omega, 0.0, 0.0), levelGaps=(ratio * omega, 2 * ratio * omega))
    b = np.full((3, 3), ratio * omega)
    return TwoAtomSystem(s, s, atoms.BlockadeSpec(b), omega)

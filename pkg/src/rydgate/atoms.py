"""Single-atom Hamiltonians and Liouvillians and their two-atom composition.

Hamiltonians are returned in angular-frequency units (``H / hbar``, rad/s).
Liouvillians are dense superoperators acting on row-major ``vec(rho)`` and give
the dissipative contribution to ``d rho / dt``.

Five-level basis: ``|0>, |g>, |1>, |p>, |r>``.
Six-level basis: ``|0>, |g>, |1>, |r2>, |r1>, |r>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qmath

FIVE_LEVELS = ("0", "g", "1", "p", "r")
SIX_LEVELS = ("0", "g", "1", "r2", "r1", "r")

RB_P_BRANCHING = (0.12, 0.56, 0.32)
RB_RYDBERG_BRANCHING = (1 / 8, 3 / 4, 1 / 8)
CS_RYDBERG_BRANCHING = (1 / 16, 7 / 8, 1 / 16)


def _check_branching(b):
    if len(b) != 3 or min(b) < 0 or abs(sum(b) - 1.0) > 1e-12:
        raise ValueError(f"branching ratios must be 3 non-negative numbers summing to 1, got {b}")


DEPHASING_MODES = ("rydberg", "literal")


@dataclass(frozen=True)
class AtomScheme5:
    """One atom driven ``|1> -> |p> -> |r>`` (all frequencies in rad/s).

    ``gamma1r`` is the ``(1, r)`` coherence damping. With ``dephasing="rydberg"``
    its excess over ``gammaR`` dephases ``|r>`` against every level; with
    ``"literal"`` it acts on the ``(1, r)`` pair only, which is not completely
    positive when ``gamma1r > gammaR``.
    """

    omega10: float
    omegaR: complex
    omegaB: complex
    deltaP: float
    deltaR: float = 0.0
    gammaP: float = 0.0
    gammaR: float = 0.0
    gamma1r: float = 0.0
    gamma01: float = 0.0
    branching: tuple = RB_P_BRANCHING
    dephasing: str = "rydberg"

    def __post_init__(self):
        _check_branching(self.branching)
        for name in ("gammaP", "gammaR", "gamma1r", "gamma01"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.dephasing not in DEPHASING_MODES:
            raise ValueError(f"unknown dephasing mode {self.dephasing!r}")
        if self.dephasing == "rydberg" and self.gamma1r < self.gammaR:
            raise ValueError("rydberg dephasing needs gamma1r >= gammaR")

    @property
    def dim(self):
        return 5

    @property
    def rydberg_levels(self):
        return (4,)

    @property
    def qubit_levels(self):
        return (0, 2)

    def two_photon_rabi(self):
        """Effective ground-Rydberg Rabi frequency ``|Omega_R Omega_B / 2 Delta_p|``."""
        return abs(self.omegaR * self.omegaB / (2.0 * self.deltaP))


@dataclass(frozen=True)
class AtomScheme6:
    """One atom with three Rydberg levels and no intermediate state.

    ``rabi`` holds ``(Omega, Omega', Omega'')`` coupling the qubit states to
    ``|r>, |r1>, |r2>``; ``levelGaps`` is ``(omega_{r,r1}, omega_{r,r2})``.
    """

    omega10: float
    rabi: tuple
    levelGaps: tuple
    gammaR: float = 0.0
    groundBranching: tuple = RB_RYDBERG_BRANCHING

    def __post_init__(self):
        _check_branching(self.groundBranching)
        if len(self.rabi) != 3 or len(self.levelGaps) != 2:
            raise ValueError("rabi needs 3 entries and levelGaps 2")
        if not all(np.isfinite(g) for g in self.levelGaps):
            raise ValueError("levelGaps must be finite")
        if self.gammaR < 0:
            raise ValueError("gammaR must be non-negative")

    @property
    def dim(self):
        return 6

    @property
    def rydberg_levels(self):
        return (3, 4, 5)

    @property
    def qubit_levels(self):
        return (0, 2)

    def two_photon_rabi(self):
        return abs(self.rabi[0])


@dataclass(frozen=True)
class BlockadeSpec:
    """Pair shifts (rad/s) between control and target Rydberg levels.

    Rows index the control atom's Rydberg levels, columns the target's, in the
    order of the scheme's ``rydberg_levels`` (``r2, r1, r`` for six levels).
    """

    shifts: np.ndarray = field(default_factory=lambda: np.zeros((1, 1)))

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.shifts, dtype=float))
        if s.shape[0] != s.shape[1]:
            raise ValueError("blockade shift matrix must be square")
        object.__setattr__(self, "shifts", s)

    @classmethod
    def scalar(cls, b):
        return cls(np.array([[float(b)]]))

    def __hash__(self):
        return hash(self.shifts.tobytes())

    def __eq__(self, other):
        return isinstance(other, BlockadeSpec) and np.array_equal(self.shifts, other.shifts)


def build_h5(s: AtomScheme5):
    h = np.zeros((5, 5), dtype=complex)
    h[0, 0] = -s.omega10
    h[3, 3] = s.deltaP
    h[4, 4] = s.deltaR
    h[3, 0] = s.omegaR / 2
    h[3, 2] = s.omegaR / 2
    h[4, 3] = s.omegaB / 2
    h[0, 3] = np.conj(s.omegaR) / 2
    h[2, 3] = np.conj(s.omegaR) / 2
    h[3, 4] = np.conj(s.omegaB) / 2
    return h


def build_h6(s: AtomScheme6):
    om, om1, om2 = s.rabi
    w1, w2 = s.levelGaps
    h = np.zeros((6, 6), dtype=complex)
    h[0, 0] = -s.omega10
    h[3, 3] = -w2
    h[4, 4] = -w1
    for q in (0, 2):
        for lvl, c in ((3, om2), (4, om1), (5, om)):
            h[lvl, q] = c / 2
            h[q, lvl] = np.conj(c) / 2
    return h


def apply_l5(rho, s: AtomScheme5):
    """Dissipative part of ``d rho/dt`` for the five-level atom, entry by entry."""
    gp, gr, g1r, g01 = s.gammaP, s.gammaR, s.gamma1r, s.gamma01
    b0, bg, b1 = s.branching
    out = np.zeros((5, 5), dtype=complex)
    ppp, prr = rho[3, 3], rho[4, 4]
    out[0, 0] = b0 * gp * ppp
    out[1, 1] = bg * gp * ppp
    out[2, 2] = b1 * gp * ppp
    out[3, 3] = -gp * ppp + gr * prr
    out[4, 4] = -gr * prr
    damp = np.zeros((5, 5))
    damp[0, 2] = g01 / 2
    damp[0, 3] = damp[1, 3] = damp[2, 3] = gp / 2
    damp[0, 4] = damp[1, 4] = gr / 2
    damp[2, 4] = g1r / 2
    damp[3, 4] = (gp + gr) / 2
    if s.dephasing == "rydberg":
        # Extra Rydberg dephasing as the jump operator sqrt(g1r - gr)|r><r|,
        # which damps every coherence with |r> and keeps the map completely positive.
        extra = (g1r - gr) / 2
        damp[0, 4] += extra
        damp[1, 4] += extra
        damp[3, 4] += extra
    damp = damp + damp.T
    out -= damp * rho * (1 - np.eye(5))
    return out


def apply_l6(rho, s: AtomScheme6):
    """Dissipative part of ``d rho/dt`` for the six-level atom."""
    gr = s.gammaR
    b0, bg, b1 = s.groundBranching
    ryd = [3, 4, 5]
    out = np.zeros((6, 6), dtype=complex)
    total = rho[3, 3] + rho[4, 4] + rho[5, 5]
    out[0, 0] = b0 * gr * total
    out[1, 1] = bg * gr * total
    out[2, 2] = b1 * gr * total
    for i in range(6):
        for j in range(6):
            ri, rj = i in ryd, j in ryd
            if ri and rj:
                out[i, j] -= gr * rho[i, j]
            elif ri or rj:
                out[i, j] -= 0.5 * gr * rho[i, j]
    return out


def superop_from_map(fn, dim):
    """Materialize a linear map on ``dim x dim`` matrices as a superoperator."""
    cols = []
    for k in range(dim * dim):
        e = np.zeros(dim * dim, dtype=complex)
        e[k] = 1.0
        cols.append(qmath.vec(fn(e.reshape(dim, dim))))
    return np.array(cols).T


def build_l5_superop(s: AtomScheme5):
    return superop_from_map(lambda r: apply_l5(r, s), 5)


def build_l6_superop(s: AtomScheme6):
    return superop_from_map(lambda r: apply_l6(r, s), 6)


def build_h(s):
    return build_h5(s) if isinstance(s, AtomScheme5) else build_h6(s)


def build_l_superop(s):
    return build_l5_superop(s) if isinstance(s, AtomScheme5) else build_l6_superop(s)


def lift_superop(l_single, dim, which):
    """Embed a single-atom superoperator into the two-atom space.

    ``which`` is ``"control"`` (first tensor factor) or ``"target"``.
    """
    lt = l_single.reshape(dim, dim, dim, dim)  # [i, j, i', j']
    eye = np.eye(dim)
    if which == "control":
        # out[ic,it,jc,jt, ic',it',jc',jt'] = L[ic,jc,ic',jc'] d(it,it') d(jt,jt')
        big = np.einsum("abcd,ef,gh->aebgcfdh", lt, eye, eye, optimize=True)
    elif which == "target":
        big = np.einsum("egfh,ac,bd->aebgcfdh", lt, eye, eye, optimize=True)
    else:
        raise ValueError(f"unknown atom {which!r}")
    n = dim * dim
    return big.reshape(n * n, n * n)


def blockade_diagonal(scheme, b: BlockadeSpec):
    """Diagonal of the pair-shift operator on the two-atom basis."""
    dim = scheme.dim
    ryd = scheme.rydberg_levels
    if b.shifts.shape != (len(ryd), len(ryd)):
        raise ValueError(f"blockade matrix must be {len(ryd)}x{len(ryd)} for a {dim}-level scheme")
    diag = np.zeros(dim * dim)
    for i, lc in enumerate(ryd):
        for j, lt in enumerate(ryd):
            diag[lc * dim + lt] = b.shifts[i, j]
    return diag


def compose_two_atom(hc, ht, lc, lt, b: BlockadeSpec, scheme=None):
    """Two-atom Hamiltonian and Liouvillian superoperator.

    ``scheme`` supplies the Rydberg level indices; when omitted it is inferred
    from the dimension (5 or 6 levels).
    """
    hc, ht = np.asarray(hc), np.asarray(ht)
    dim = hc.shape[0]
    if ht.shape != hc.shape or lc.shape != (dim * dim, dim * dim) or lt.shape != lc.shape:
        raise ValueError("dimension mismatch between control and target operators")
    if scheme is None:
        scheme = _SchemeShape(dim)
    eye = np.eye(dim)
    hct = np.kron(hc, eye) + np.kron(eye, ht) + np.diag(blockade_diagonal(scheme, b))
    lct = lift_superop(lc, dim, "control") + lift_superop(lt, dim, "target")
    return hct, lct


@dataclass(frozen=True)
class _SchemeShape:
    dim: int

    @property
    def rydberg_levels(self):
        if self.dim == 5:
            return (4,)
        if self.dim == 6:
            return (3, 4, 5)
        raise ValueError(f"no level scheme with dimension {self.dim}")

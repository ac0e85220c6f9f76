"""Technical noise: thermal positions and velocities, beam geometry, magnetic
fields and laser power, sampled once per gate execution (quasi-static).

SI units throughout; frequencies are angular (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants as sc
from scipy import optimize

from .analytic import e1

KB = sc.k
HBAR = sc.hbar
MU_B = sc.physical_constants["Bohr magneton"][0]
MASS_RB87 = 86.909180527 * sc.atomic_mass
MASS_CS133 = 132.905451961 * sc.atomic_mass
FWHM_TO_SIGMA = 1.0 / 2.3548
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TrapParams:
    lambdaF: float = 1064e-9
    waistF: float = 3.4e-6
    depthOverKb: float = 4.5e-3
    separation: float = 8.7e-6
    tempA: float = 175e-6

    def __post_init__(self):
        for name in ("lambdaF", "waistF", "depthOverKb", "separation"):
            if not getattr(self, name) > 0:
                raise ValueError(f"trap parameter {name} must be positive")
        if self.tempA < 0:
            raise ValueError("tempA must be non-negative")


@dataclass(frozen=True)
class BeamParams:
    """Rydberg excitation beams; red drives ``|1> -> |p>``, blue ``|p> -> |r>``."""

    waistXR: float = 7.7e-6
    waistYR: float = 7.7e-6
    waistXB: float = 4.5e-6
    waistYB: float = 4.5e-6
    lambdaR: float = 780e-9
    lambdaB: float = 480e-9
    rabiR0: float = TWO_PI * 118e6
    rabiB0: float = TWO_PI * 39e6
    deltaP: float = -TWO_PI * 2e9
    deltaAC0: float = 0.0
    powerFluctR: float = 0.01
    powerFluctB: float = 0.02

    def __post_init__(self):
        for name in ("waistXR", "waistYR", "waistXB", "waistYB", "lambdaR", "lambdaB"):
            if not getattr(self, name) > 0:
                raise ValueError(f"beam parameter {name} must be positive")
        if self.deltaP == 0:
            raise ValueError("deltaP must be nonzero")

    def rayleigh(self, which):
        """Rayleigh lengths ``(L_x, L_y) = pi w^2 / lambda`` of one beam."""
        if which == "red":
            return (math.pi * self.waistXR**2 / self.lambdaR, math.pi * self.waistYR**2 / self.lambdaR)
        if which == "blue":
            return (math.pi * self.waistXB**2 / self.lambdaB, math.pi * self.waistYB**2 / self.lambdaB)
        raise ValueError(f"unknown beam {which!r}")

    def wavevectors(self):
        """Counter-propagating beams along z: red along +z, blue along -z."""
        k_r = np.array([0.0, 0.0, TWO_PI / self.lambdaR])
        k_b = np.array([0.0, 0.0, -TWO_PI / self.lambdaB])
        return k_r, k_b

    def two_photon_rabi(self):
        return abs(self.rabiR0 * self.rabiB0 / (2.0 * self.deltaP))

    def laser_tuning(self):
        """Two-photon laser detuning that cancels the on-axis light shift."""
        return self.deltaAC0 - (self.rabiR0**2 - self.rabiB0**2) / (4.0 * self.deltaP)


@dataclass(frozen=True)
class MagneticModel:
    biasBz: float = 0.37e-3
    sigmaB: float = 2.5e-6
    gRyd: float = 6.0 / 5.0
    mRyd: float = 5.0 / 2.0
    gGround: float = 0.5
    mGround: float = 0.0
    gS: float = 2.00231930436
    gI: float = -0.0009951414
    omega10: float = TWO_PI * 6.834682611e9

    def __post_init__(self):
        if self.sigmaB < 0:
            raise ValueError("sigmaB must be non-negative")

    @property
    def zeeman_factor(self):
        return self.gRyd * self.mRyd - self.gGround * self.mGround


@dataclass(frozen=True)
class BlockadeModel:
    """Blockade shift versus the axial offset ``dz = z_c - z_t`` between atoms.

    ``variant`` is ``"constant"`` (``b0``), ``"table"`` (linear interpolation in
    ``|dz|`` over ``table``, clamped at the ends) or ``"vdw"``
    (``b0 / (1 + dz^2/d^2)^3``, i.e. ``C6 / r^6`` with ``r^2 = d^2 + dz^2``).
    """

    variant: str = "vdw"
    b0: float = TWO_PI * 20e6
    separation: float = 8.7e-6
    table: tuple = ()

    def __post_init__(self):
        if self.variant not in ("constant", "table", "vdw"):
            raise ValueError(f"unknown blockade variant {self.variant!r}")
        if self.variant == "table":
            sep = np.array([p[0] for p in self.table], dtype=float)
            val = np.array([p[1] for p in self.table], dtype=float)
            if sep.size < 1:
                raise ValueError("blockade table is empty")
            if np.any(np.diff(sep) <= 0):
                raise ValueError("blockade table separations must be strictly increasing")
            if np.any(val <= 0):
                raise ValueError("blockade table values must be positive")
        elif not self.b0 > 0:
            raise ValueError("blockade b0 must be positive")

    def at(self, dz):
        dz = abs(float(dz))
        if self.variant == "constant":
            return self.b0
        if self.variant == "vdw":
            return self.b0 / (1.0 + (dz / self.separation) ** 2) ** 3
        sep = [p[0] for p in self.table]
        val = [p[1] for p in self.table]
        return float(np.interp(dz, sep, val))

    def scaled(self, factor):
        if self.variant == "table":
            return replace(self, table=tuple((s, v * factor) for s, v in self.table))
        return replace(self, b0=self.b0 * factor)


def load_blockade_table(path):
    """Read ``separation_um  B_MHz`` lines into a tabulated BlockadeModel.

    Blank lines and ``#`` comments are skipped. Errors name the offending line.
    """
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
            try:
                sep_um, b_mhz = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric entry {text!r}") from None
            if rows and sep_um * 1e-6 <= rows[-1][0]:
                raise ValueError(f"{path}:{lineno}: separations must be strictly increasing")
            if b_mhz <= 0:
                raise ValueError(f"{path}:{lineno}: blockade shift must be positive")
            rows.append((sep_um * 1e-6, TWO_PI * b_mhz * 1e6))
    if not rows:
        raise ValueError(f"{path}: no data lines")
    return BlockadeModel(variant="table", table=tuple(rows))


@dataclass(frozen=True)
class Shot:
    """One draw of the quasi-static technical noise and the derived parameters.

    Per-atom arrays are indexed ``[control, target]``.
    """

    posC: np.ndarray
    posT: np.ndarray
    velC: np.ndarray
    velT: np.ndarray
    dB: float
    powR: float
    powB: float
    omegaR: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omegaB: np.ndarray = field(default_factory=lambda: np.zeros(2))
    deltaR: np.ndarray = field(default_factory=lambda: np.zeros(2))
    gammaPh: np.ndarray = field(default_factory=lambda: np.zeros(2))
    blockade: float = 0.0


def position_variances(t: TrapParams):
    ratio = KB * t.tempA / (KB * t.depthOverKb)
    sxy = t.waistF**2 / 4.0 * ratio
    sz = math.pi**2 * t.waistF**4 / (2.0 * t.lambdaF**2) * ratio
    return sxy, sxy, sz


def velocity_variance(t: TrapParams, mass=MASS_RB87):
    if not mass > 0:
        raise ValueError("mass must be positive")
    return KB * t.tempA / mass


def rabi_at(beams: BeamParams, r, which, powerFactor=1.0):
    """Rabi frequency of the red or blue beam at position ``r``."""
    x, y, z = (float(c) for c in r)
    lx, ly = beams.rayleigh(which)
    if which == "red":
        om0, wx, wy = beams.rabiR0, beams.waistXR, beams.waistYR
    else:
        om0, wx, wy = beams.rabiB0, beams.waistXB, beams.waistYB
    fx = 1.0 + z**2 / lx**2
    fy = 1.0 + z**2 / ly**2
    env = math.exp(-(x**2 / (wx**2 * fx) + y**2 / (wy**2 * fy))) / (fx * fy) ** 0.25
    return om0 * env * math.sqrt(max(powerFactor, 0.0))


def stark_at(beams: BeamParams, rC, rT, powR=1.0, powB=1.0):
    """Light shift ``Delta_AC(r)`` of each atom, returned as ``(control, target)``."""
    out = []
    for r in (rC, rT):
        om_r = rabi_at(beams, r, "red", powR)
        om_b = rabi_at(beams, r, "blue", powB)
        out.append(beams.deltaAC0 + (om_r**2 - om_b**2) / (4.0 * abs(beams.deltaP)))
    return tuple(out)


def doppler_detuning(v, kR, kB):
    """Two-photon Doppler shift ``(k_R + k_B) . v`` of a ladder excitation.

    With counter-propagating beams along z this is ``(|k_R| - |k_B|) v_z``.
    """
    return float(np.dot(np.asarray(kR) + np.asarray(kB), np.asarray(v)))


def magnetic_detuning(mag: MagneticModel, dB):
    return mag.zeeman_factor * MU_B * dB / HBAR


def gamma_ph(mag: MagneticModel, dB, dopplerShift):
    """Ground-Rydberg dephasing ``sqrt(gamma_B^2 + gamma_D^2)``."""
    g_b = abs(magnetic_detuning(mag, dB))
    return math.hypot(g_b, abs(dopplerShift))


def clock_frequency(mag: MagneticModel, bz):
    """Hyperfine clock splitting including the second-order Zeeman shift."""
    x = (mag.gS - mag.gI) * MU_B * bz / (HBAR * mag.omega10)
    return mag.omega10 * math.sqrt(1.0 + x * x)


def gamma_01(mag: MagneticModel, trap: TrapParams):
    """Qubit dephasing from field noise and differential light shifts in the trap."""
    g_b01 = clock_frequency(mag, mag.biasBz + mag.sigmaB) - clock_frequency(mag, mag.biasBz)
    delta0 = TWO_PI * (trap.depthOverKb * 1e3) * 1.5e3
    g_t = 1.03 * delta0 * trap.tempA / (2.0 * trap.depthOverKb)
    return math.hypot(g_b01, g_t)


def blockade_at(model: BlockadeModel, shot: Shot):
    return model.at(shot.posC[2] - shot.posT[2])


SHIFT_CONVENTIONS = ("cyclic", "angular")


def motional_shifts(vel, dB, beams: BeamParams, mag: MagneticModel, convention="cyclic"):
    """Doppler and Zeeman two-photon shifts ``(Delta_D, Delta_B)`` used for one atom.

    ``"angular"`` is the physical ladder shift ``(k_R + k_B) . v`` with the blue
    beam counter-propagating, and ``Delta_B`` in rad/s. ``"cyclic"`` takes the
    wavenumbers as ``1/lambda`` added in magnitude and the Zeeman shift in Hz,
    both then used as rad/s; this is the scale of the reference error budget
    (Doppler about 3e-3, magnetic about 2e-4 of CNOT error at 175 uK).
    """
    if convention not in SHIFT_CONVENTIONS:
        raise ValueError(f"unknown shift convention {convention!r}")
    k_r, k_b = beams.wavevectors()
    d_mag = magnetic_detuning(mag, dB)
    if convention == "angular":
        return doppler_detuning(vel, k_r, k_b), d_mag
    return doppler_detuning(vel, k_r, -k_b) / TWO_PI, d_mag / TWO_PI


def derive_shot(shot: Shot, beams: BeamParams, mag: MagneticModel, model: BlockadeModel, convention="cyclic"):
    """Fill the derived per-atom fields of a shot from its sampled primitives."""
    tuning = beams.laser_tuning()
    om_r, om_b, d_r, g_ph = [], [], [], []
    for pos, vel in ((shot.posC, shot.velC), (shot.posT, shot.velT)):
        om_r.append(rabi_at(beams, pos, "red", shot.powR))
        om_b.append(rabi_at(beams, pos, "blue", shot.powB))
        d_dop, d_mag = motional_shifts(vel, shot.dB, beams, mag, convention)
        d_r.append(tuning + d_mag + d_dop)
        g_ph.append(math.hypot(d_mag, d_dop))
    return replace(
        shot,
        omegaR=np.array(om_r),
        omegaB=np.array(om_b),
        deltaR=np.array(d_r),
        gammaPh=np.array(g_ph),
        blockade=blockade_at(model, shot),
    )


def _power_factor(rng, fwhm):
    return max(0.0, 1.0 + fwhm * FWHM_TO_SIGMA * rng.standard_normal())


def sample_shot(trap, beams, mag, blockadeModel, rng, mass=MASS_RB87, convention="cyclic"):
    """Draw positions, velocities, field offset and power factors, then derive."""
    sx2, sy2, sz2 = position_variances(trap)
    sig_pos = np.sqrt([sx2, sy2, sz2])
    sig_v = math.sqrt(velocity_variance(trap, mass))
    pos_c = sig_pos * rng.standard_normal(3)
    pos_t = sig_pos * rng.standard_normal(3)
    vel_c = sig_v * rng.standard_normal(3)
    vel_t = sig_v * rng.standard_normal(3)
    d_b = mag.sigmaB * rng.standard_normal()
    pow_r = _power_factor(rng, beams.powerFluctR)
    pow_b = _power_factor(rng, beams.powerFluctB)
    shot = Shot(pos_c, pos_t, vel_c, vel_t, d_b, pow_r, pow_b)
    return derive_shot(shot, beams, mag, blockadeModel, convention)


def nominal_shot(beams, mag, blockadeModel):
    """Noise-free shot: atoms at rest at the trap centres, nominal powers."""
    z = np.zeros(3)
    shot = Shot(z, z.copy(), z.copy(), z.copy(), 0.0, 1.0, 1.0)
    return derive_shot(shot, beams, mag, blockadeModel)


def shot_rng(seed, index):
    """Independent generator for shot ``index`` of a run seeded with ``seed``."""
    return np.random.default_rng([int(seed), int(index)])


def thermal_average(fn, trap: TrapParams, order=80):
    """Average ``fn(dz)`` over ``dz = z_c - z_t`` with both atoms thermal."""
    _, _, sz2 = position_variances(trap)
    sigma = math.sqrt(2.0 * sz2)
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    weights = weights / weights.sum()
    return float(sum(w * fn(sigma * x) for x, w in zip(nodes, weights)))


def calibrate_vdw(trap: TrapParams, omega, tau, omega10, bBar):
    """vdW blockade model whose thermally averaged ``E1`` equals ``E1(bBar)``.

    Returns the calibrated :class:`BlockadeModel`; its ``b0`` is the shift at
    ``dz = 0``.
    """
    target = e1(omega, tau, bBar, omega10)

    def mismatch(log_b0):
        model = BlockadeModel("vdw", math.exp(log_b0), trap.separation)
        return thermal_average(lambda dz: e1(omega, tau, model.at(dz), omega10), trap) - target

    lo = math.log(bBar)
    hi = lo + 1.0
    while mismatch(hi) > 0:
        hi += 1.0
    root = optimize.brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-14)
    return BlockadeModel("vdw", math.exp(root), trap.separation)

"""Closed-form intrinsic error estimates for blockade gates.

Frequencies are angular (rad/s) and times in seconds unless a function takes
dimensionless ratios. Blockade-error formulas are written in ``x = Omega/omega10``
and the level-structure ratios ``a = omega_{n,n-1}/omega10``, ``b = B_nn/omega10``
and friends; ``E_B`` is always the average over the four computational inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

from scipy import optimize

TWO_PI = 2.0 * math.pi
_SEVEN_PI = 7.0 * math.pi


def e1(omega, tau, B, omega10):
    """Truth-table error: Rydberg decay plus imperfect blockade."""
    decay = _SEVEN_PI / (4.0 * omega * tau) * (1.0 + omega**2 / omega10**2 + omega**2 / (7.0 * B**2))
    blockade = omega**2 / (8.0 * B**2) * (1.0 + 6.0 * omega**2 / omega10**2)
    return decay + blockade


def e1_terms(omega, tau, B, omega10):
    """The decay term ``E_tau`` and the blockade term ``E_B`` of :func:`e1`."""
    decay = _SEVEN_PI / (4.0 * omega * tau) * (1.0 + omega**2 / omega10**2 + omega**2 / (7.0 * B**2))
    blockade = omega**2 / (8.0 * B**2) * (1.0 + 6.0 * omega**2 / omega10**2)
    return decay, blockade


def omega1_opt(B, tau):
    return _SEVEN_PI ** (1.0 / 3.0) * B ** (2.0 / 3.0) / tau ** (1.0 / 3.0)


def e1_min(B, tau):
    return 3.0 * _SEVEN_PI ** (2.0 / 3.0) / 8.0 / (B * tau) ** (2.0 / 3.0)


def e2(omega, tau, B, omega10):
    """:func:`e1` plus the averaged blockade phase error ``pi Omega / 8B``."""
    return e1(omega, tau, B, omega10) + math.pi * omega / (8.0 * B)


def omega2_opt(B, tau):
    return math.sqrt(14.0 * B / tau)


def e2_min(B, tau):
    return math.sqrt(7.0) * math.pi / (2.0 * math.sqrt(2.0)) / math.sqrt(B * tau)


def p_se(omegaR, omegaB, gammaP, deltaP):
    """Spontaneous emission from the intermediate level during a 2-photon pi pulse pair."""
    if deltaP == 0:
        raise ValueError("deltaP must be nonzero")
    if omegaR == 0 or omegaB == 0:
        raise ValueError("Rabi frequencies must be nonzero")
    ratio = abs(omegaR / omegaB)
    return math.pi * gammaP / (4.0 * abs(deltaP)) * (ratio + 1.0 / ratio)


def momentum_kick_bound(eta, omega, B):
    """Perturbative bound on motional excitation from the blockade force."""
    return 0.5 * (3.0 * math.pi * eta * omega / (4.0 * B)) ** 2


def blockade_error_p_low(a, b, bPrime, x):
    """``E_B`` for p states with ``omega_{n,n-1} > omega10``."""
    x2 = x * x
    e00 = 1.5 * (x2 + x2 / (a - 1.0) ** 2)
    e01 = 2.0 / 3.0 * e00
    e10 = 0.5 * (x2 / (a - bPrime * b - 1.0) ** 2 + x2 / (1.0 + b) ** 2)
    e11 = 0.5 * (x2 / b**2 + x2 / (a - bPrime * b) ** 2)
    return 0.25 * (e00 + e01 + e10 + e11)


def blockade_error_p_high(a, b, bPrime, bDoublePrime, aRatio2, x):
    """``E_B`` for p (and d) states with ``omega_{n,n-2} > omega10 > omega_{n,n-1}``.

    ``aRatio2`` is ``omega_{n,n-2}/omega10``.
    """
    x2 = x * x
    e00 = 1.5 * (x2 / (1.0 - a) ** 2 + x2 / (aRatio2 - 1.0) ** 2)
    e01 = 2.0 / 3.0 * e00
    e10 = 0.5 * (x2 / (1.0 - a + bPrime * b) ** 2 + x2 / (aRatio2 - 1.0 - bDoublePrime * b) ** 2)
    e11 = 0.5 * (x2 / b**2 + x2 / (a - bPrime * b) ** 2)
    return 0.25 * (e00 + e01 + e10 + e11)


def blockade_error_s_ratios(a, aDoublePrime, b, bPrime, bTriplePrime, cPrime, x):
    """``E_B`` for s states, including the off-resonant ``(n-2) d`` level.

    ``aDoublePrime`` is ``omega'_{n,n-2}/omega10`` (signed) and ``cPrime`` the
    ratio of the d-level Rabi frequency to ``Omega``.
    """
    x2 = x * x
    xp2 = (cPrime * x) ** 2
    app, bppp = aDoublePrime, bTriplePrime
    e00 = 1.5 * (x2 + xp2 / (1.0 - app) ** 2 + x2 / (a - 1.0) ** 2)
    e01 = 2.0 / 3.0 * e00 + xp2 / (2.0 * app**2)
    e10 = xp2 / app**2 + x2 / (2.0 * (a - bPrime * b - 1.0) ** 2) + xp2 / (2.0 * (1.0 - app + bppp * b) ** 2)
    e11 = xp2 / app**2 + x2 / (2.0 * b**2) + xp2 / (2.0 * (app - bppp * b) ** 2)
    return 0.25 * (e00 + e01 + e10 + e11)


def e_cb(eB0, tau):
    """Optimal Rabi frequency and minimum truth-table error for ``E_B = eB0 Omega^2``.

    Returns ``(omegaOpt, eCb)``.
    """
    omega_opt = (_SEVEN_PI / 8.0) ** (1.0 / 3.0) / (eB0 * tau) ** (1.0 / 3.0)
    ecb = 3.0 * _SEVEN_PI ** (2.0 / 3.0) / 4.0 * eB0 ** (1.0 / 3.0) / tau ** (2.0 / 3.0)
    return omega_opt, ecb


@dataclass(frozen=True)
class RydbergStateParams:
    """One registry entry; dimensional fields in SI / rad/s."""

    species: str
    label: str
    form: str
    omega10: float
    gapN1: float
    gapN2: float | None
    gapN1Prime: float | None
    gapN2Prime: float | None
    tau: float
    separation: float
    Bnn: float
    a: float
    aPrime: float | None
    aDoublePrime: float | None
    b: float
    bPrime: float
    bDoublePrime: float | None
    bTriplePrime: float | None
    cPrime: float
    rabi: float

    def __post_init__(self):
        if self.form not in ("p_low", "p_high", "s"):
            raise ValueError(f"unknown blockade-error form {self.form!r}")
        if self.form == "p_high" and self.gapN2 is None:
            raise ValueError(f"{self.label}: p_high form needs gapN2")
        if self.form == "s" and (self.aDoublePrime is None or self.bTriplePrime is None):
            raise ValueError(f"{self.label}: s form needs aDoublePrime and bTriplePrime")

    @property
    def aRatio2(self):
        return self.gapN2 / self.omega10 if self.gapN2 is not None else None

    def ratio_mismatch(self):
        """Relative mismatch of ``a`` and ``b`` against the dimensional values."""
        return {
            "a": abs(self.gapN1 / self.omega10 / self.a - 1.0),
            "b": abs(self.Bnn / self.omega10 / self.b - 1.0),
        }


def blockade_error_s(params: RydbergStateParams, x):
    return blockade_error_s_ratios(
        params.a, params.aDoublePrime, params.b, params.bPrime, params.bTriplePrime, params.cPrime, x
    )


def blockade_error(params: RydbergStateParams, x):
    """Dispatch to the formula matching the state's level structure."""
    if params.form == "p_low":
        return blockade_error_p_low(params.a, params.b, params.bPrime, x)
    if params.form == "p_high":
        return blockade_error_p_high(params.a, params.b, params.bPrime, params.bDoublePrime, params.aRatio2, x)
    return blockade_error_s(params, x)


def e_b0(params: RydbergStateParams):
    """Coefficient ``E_B0`` in ``E_B = E_B0 Omega^2`` (s^2)."""
    return blockade_error(params, 1.0) / params.omega10**2


def optimum_for_state(params: RydbergStateParams):
    """``(omegaOpt, eCb)`` of a registry state."""
    return e_cb(e_b0(params), params.tau)


def _ghz(v):
    return None if v is None else TWO_PI * v * 1e9


def _record_to_params(rec):
    return RydbergStateParams(
        species=rec["species"],
        label=rec["label"],
        form=rec["form"],
        omega10=_ghz(rec["omega10"]),
        gapN1=_ghz(rec["gapN1"]),
        gapN2=_ghz(rec["gapN2"]),
        gapN1Prime=_ghz(rec["gapN1Prime"]),
        gapN2Prime=_ghz(rec["gapN2Prime"]),
        tau=rec["tau"] * 1e-6,
        separation=rec["separation"] * 1e-6,
        Bnn=_ghz(rec["Bnn"]),
        a=rec["a"],
        aPrime=rec["aPrime"],
        aDoublePrime=rec["aDoublePrime"],
        b=rec["b"],
        bPrime=rec["bPrime"],
        bDoublePrime=rec["bDoublePrime"],
        bTriplePrime=rec["bTriplePrime"],
        cPrime=rec["cPrime"],
        rabi=TWO_PI * rec["rabi"] * 1e6,
    )


def load_registry(path=None):
    """Registry of Rydberg states keyed by label (``"76p3/2"``, ...)."""
    if path is None:
        text = resources.files("rydgate").joinpath("data/rydberg_states.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    return {rec["label"]: _record_to_params(rec) for rec in doc["states"]}


def get_state(label, registry=None):
    reg = load_registry() if registry is None else registry
    if label not in reg:
        raise KeyError(f"unknown state {label!r}; known states: {', '.join(reg)}")
    return reg[label]


def minimize_over_omega(fn, lo, hi):
    """Minimize ``fn(Omega)`` on ``[lo, hi]`` by bounded Brent search in ``log Omega``."""
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    res = optimize.minimize_scalar(
        lambda u: fn(math.exp(u)),
        bounds=(math.log(lo), math.log(hi)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return math.exp(res.x)

"""Monte Carlo CNOT truth table, Bell-state generation and intrinsic-error sweeps."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import analytic, atoms, evolve, noise

TWO_PI = 2.0 * math.pi
RB_GAMMA_P = TWO_PI * 6.07e6
RB_GAMMA_R = TWO_PI * 0.53e3

CNOT_TABLE = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)
BELL_B1 = np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)
INPUT_LABELS = ("00", "01", "10", "11")

# Reference operating point used to calibrate the vdW blockade curve.
CALIBRATION_OMEGA = TWO_PI * 1.15e6
CALIBRATION_TAU = 300e-6
CALIBRATION_BBAR = TWO_PI * 5.3e6


@dataclass(frozen=True)
class ExperimentConfig:
    """One gate experiment.

    ``blockadeModel=None`` calibrates a vdW curve whose thermally averaged
    truth-table error matches a uniform ``2 pi x 5.3 MHz`` blockade.
    ``prepPopulations`` is ``(qubit level, reservoir |g>)`` per atom.
    """

    trap: noise.TrapParams = field(default_factory=noise.TrapParams)
    beams: noise.BeamParams = field(default_factory=noise.BeamParams)
    mag: noise.MagneticModel = field(default_factory=noise.MagneticModel)
    blockadeModel: noise.BlockadeModel | None = None
    model: str = "fiveLevel"
    nShots: int = 100
    seed: int = 0
    prepPopulations: tuple = (0.98, 0.02)
    backgroundLossTwoAtom: float = 0.19
    tGap: float = 500e-9
    gammaP: float = RB_GAMMA_P
    gammaR: float = RB_GAMMA_R
    shiftConvention: str = "cyclic"
    ideal: bool = False
    method: str = "expm"
    threads: int = 1
    bellNormalize: bool = True

    def __post_init__(self):
        if self.model not in ("fiveLevel", "sixLevel"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.nShots < 1:
            raise ValueError("nShots must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        p = tuple(float(x) for x in self.prepPopulations)
        if len(p) != 2 or any(not 0.0 <= x <= 1.0 for x in p) or sum(p) > 1.0 + 1e-12:
            raise ValueError("prepPopulations must be two probabilities summing to at most 1")
        object.__setattr__(self, "prepPopulations", p)
        if not 0.0 <= self.backgroundLossTwoAtom <= 1.0:
            raise ValueError("backgroundLossTwoAtom must lie in [0, 1]")
        if self.tGap < 0:
            raise ValueError("tGap must be non-negative")
        if self.method not in ("expm", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.shiftConvention not in noise.SHIFT_CONVENTIONS:
            raise ValueError(f"unknown shift convention {self.shiftConvention!r}")


@dataclass(frozen=True)
class TruthTableResult:
    table: np.ndarray
    tableStderr: np.ndarray
    fidelityRaw: float
    fidelityLossCorrected: float
    fidelityTraceCorrected: float
    stderr: float
    meanTraceLoss: float
    perShot: np.ndarray


@dataclass(frozen=True)
class BellResult:
    fidelityRaw: float
    fidelityCorrected: float
    fidelityUnnormalized: float
    stderr: float
    meanTrace: float
    perShot: np.ndarray


def monte_carlo_stats(values):
    """Sample mean and standard error ``std / sqrt(N)``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise ValueError("need at least 2 values")
    return float(v.mean()), float(v.std() / math.sqrt(v.size))


def blockade_model(cfg: ExperimentConfig):
    if cfg.blockadeModel is not None:
        return cfg.blockadeModel
    return noise.calibrate_vdw(cfg.trap, CALIBRATION_OMEGA, CALIBRATION_TAU, cfg.mag.omega10, CALIBRATION_BBAR)


def build_system(cfg: ExperimentConfig, shot: noise.Shot):
    """Per-shot two-atom model for the configured level scheme."""
    if cfg.ideal:
        return evolve.ideal_system(cfg.beams.two_photon_rabi())
    if cfg.model == "sixLevel":
        # Effective ground-Rydberg model: per-shot area errors and blockade;
        # detunings and the intermediate level are not represented.
        schemes = []
        for i in range(2):
            om = shot.omegaR[i] * shot.omegaB[i] / (2.0 * abs(cfg.beams.deltaP))
            # The two auxiliary Rydberg levels are undriven; their gaps only need to be finite.
            schemes.append(atoms.AtomScheme6(
                omega10=cfg.mag.omega10, rabi=(om, 0.0, 0.0),
                levelGaps=(cfg.mag.omega10, 2.0 * cfg.mag.omega10), gammaR=cfg.gammaR,
            ))
        b = np.full((3, 3), shot.blockade)
        return evolve.TwoAtomSystem(schemes[0], schemes[1], atoms.BlockadeSpec(b), cfg.beams.two_photon_rabi())
    g01 = noise.gamma_01(cfg.mag, cfg.trap)
    schemes = [
        atoms.AtomScheme5(
            omega10=cfg.mag.omega10, omegaR=shot.omegaR[i], omegaB=shot.omegaB[i],
            deltaP=cfg.beams.deltaP, deltaR=shot.deltaR[i], gammaP=cfg.gammaP, gammaR=cfg.gammaR,
            gamma1r=cfg.gammaR + shot.gammaPh[i], gamma01=g01,
        )
        for i in range(2)
    ]
    return evolve.TwoAtomSystem(schemes[0], schemes[1], atoms.BlockadeSpec.scalar(shot.blockade),
                                cfg.beams.two_photon_rabi())


def draw_shot(cfg: ExperimentConfig, model, index):
    if cfg.ideal:
        return noise.nominal_shot(cfg.beams, cfg.mag, model)
    rng = noise.shot_rng(cfg.seed, index)
    return noise.sample_shot(cfg.trap, cfg.beams, cfg.mag, model, rng, convention=cfg.shiftConvention)


def nominal_compensation(cfg: ExperimentConfig, model):
    """Single-qubit phase corrections calibrated once on the noise-free shot."""
    shot = noise.nominal_shot(cfg.beams, cfg.mag, model)
    return evolve.local_phase_compensation(build_system(cfg, shot), evolve.standard_cz(cfg.tGap))


def prepared_state(cfg: ExperimentConfig, dim, c_bit, t_bit):
    """Diagonal prep with ``prepPopulations`` in the qubit level and ``|g>``."""
    q, g = cfg.prepPopulations
    lvl = {0: 0, 1: 2}
    return evolve.product_state(dim, {lvl[c_bit]: q, 1: g}, {lvl[t_bit]: q, 1: g})


def _truth_table_shot(args):
    cfg, model, comp, index = args
    system = build_system(cfg, draw_shot(cfg, model, index))
    d = system.dim
    rhos = np.array([prepared_state(cfg, d, c, t) for c in (0, 1) for t in (0, 1)])
    out = evolve.run_sequence(rhos, evolve.cnot(cfg.tGap, comp), system, method=cfg.method)
    idx = evolve.computational_indices(d)
    return np.array([np.real(np.diag(o)[idx]) for o in out])


def _bell_shot(args):
    cfg, model, comp, index = args
    system = build_system(cfg, draw_shot(cfg, model, index))
    d = system.dim
    rho = prepared_state(cfg, d, 1, 1)
    out = evolve.run_sequence(rho, evolve.bell_prep_cnot(cfg.tGap, comp), system, method=cfg.method)
    idx = evolve.computational_indices(d)
    rho4 = out[np.ix_(idx, idx)]
    return np.array([np.real(BELL_B1.conj() @ rho4 @ BELL_B1), np.real(np.trace(rho4))])


def _map_shots(fn, cfg, model, comp):
    jobs = [(cfg, model, comp, i) for i in range(cfg.nShots)]
    if cfg.threads == 1 or cfg.nShots == 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
        # map preserves submission order, so the reduction is in shot order.
        return list(pool.map(fn, jobs))


def _stats(values):
    if len(values) < 2:
        return float(np.mean(values)), 0.0
    return monte_carlo_stats(values)


def truth_table(cfg: ExperimentConfig) -> TruthTableResult:
    """Shot-averaged CNOT probability table and fidelities."""
    model = blockade_model(cfg)
    comp = nominal_compensation(cfg, model)
    tables = np.array(_map_shots(_truth_table_shot, cfg, model, comp))
    table = tables.mean(axis=0)
    if tables.shape[0] >= 2:
        table_err = tables.std(axis=0) / math.sqrt(tables.shape[0])
    else:
        table_err = np.zeros_like(table)
    per_shot = np.einsum("ij,sij->s", CNOT_TABLE, tables) / 4.0
    f_loss, stderr = _stats(per_shot)
    rows = table.sum(axis=1, keepdims=True)
    f_trace = float(np.sum(CNOT_TABLE * table / np.where(rows > 0, rows, 1.0)) / 4.0)
    return TruthTableResult(
        table=table,
        tableStderr=table_err,
        fidelityRaw=f_loss * (1.0 - cfg.backgroundLossTwoAtom),
        fidelityLossCorrected=f_loss,
        fidelityTraceCorrected=f_trace,
        stderr=stderr,
        meanTraceLoss=float(np.mean(1.0 - tables.sum(axis=2))),
        perShot=per_shot,
    )


def bell_experiment(cfg: ExperimentConfig) -> BellResult:
    """Fidelity with ``(|00> + |11>)/sqrt 2`` after the Bell-preparation sequence."""
    model = blockade_model(cfg)
    comp = nominal_compensation(cfg, model)
    vals = np.array(_map_shots(_bell_shot, cfg, model, comp))
    f_un, tr = vals[:, 0], vals[:, 1]
    per_shot = f_un / tr if cfg.bellNormalize else f_un
    f_corr, stderr = _stats(per_shot)
    return BellResult(
        fidelityRaw=f_corr * (1.0 - cfg.backgroundLossTwoAtom),
        fidelityCorrected=f_corr,
        fidelityUnnormalized=float(f_un.mean()),
        stderr=stderr,
        meanTrace=float(tr.mean()),
        perShot=per_shot,
    )


@dataclass(frozen=True)
class IntrinsicConfig:
    """Noise-free five-level gate with far-detuned, balanced two-photon excitation."""

    blockade: float = TWO_PI * 10e6
    omega: float = TWO_PI * 1.15e6
    tau: float = 300e-6
    omega10: float = TWO_PI * 6.834682611e9
    deltaP: float = TWO_PI * 100e9


def intrinsic_system(c: IntrinsicConfig):
    om1 = math.sqrt(2.0 * abs(c.deltaP) * c.omega)
    s = atoms.AtomScheme5(omega10=c.omega10, omegaR=om1, omegaB=om1, deltaP=c.deltaP, gammaP=0.0,
                          gammaR=1.0 / c.tau, gamma1r=1.0 / c.tau)
    return evolve.TwoAtomSystem(s, s, atoms.BlockadeSpec.scalar(c.blockade), c.omega)


def intrinsic_error(c: IntrinsicConfig):
    """``1 - <Tr[rho_ideal rho_ct]>`` over the four computational inputs of the CZ core.

    The controlled-phase gate maps ``|ab>`` to ``+-|ab>``, so this probability
    truth table is blind to the blockade phase and isolates decay and
    imperfect-blockade rotation errors.
    """
    system = intrinsic_system(c)
    d = system.dim
    rhos = np.array([evolve.product_state(d, {a: 1.0}, {b: 1.0}) for a in (0, 2) for b in (0, 2)])
    out = evolve.run_sequence(rhos, evolve.standard_cz(0.0), system)
    idx = evolve.computational_indices(d)
    pops = np.array([np.real(np.diag(o)[idx]) for o in out])
    return 1.0 - float(np.trace(pops)) / 4.0


SWEEP_PARAMS = {"B": "blockade", "Omega": "omega", "tau": "tau"}


def intrinsic_sweep(param, grid, base: IntrinsicConfig = IntrinsicConfig()):
    """Rows ``(value, E_numeric, E_tau, E_B)`` along one parameter."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"unknown sweep parameter {param!r}; use one of {', '.join(SWEEP_PARAMS)}")
    rows = []
    for v in grid:
        c = replace(base, **{SWEEP_PARAMS[param]: float(v)})
        e_tau, e_b = analytic.e1_terms(c.omega, c.tau, c.blockade, c.omega10)
        rows.append((float(v), intrinsic_error(c), e_tau, e_b))
    return rows


def write_truth_table_csv(path, res: TruthTableResult):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["input", "output", "probability", "stderr"])
        for i, a in enumerate(INPUT_LABELS):
            for j, b in enumerate(INPUT_LABELS):
                w.writerow([a, b, repr(float(res.table[i, j])), repr(float(res.tableStderr[i, j]))])
        for name in ("fidelityLossCorrected", "fidelityTraceCorrected", "fidelityRaw", "meanTraceLoss"):
            err = res.stderr if name.startswith("fidelity") else ""
            w.writerow([name, "", repr(float(getattr(res, name))), repr(err) if err != "" else ""])


def write_sweep_csv(path, param, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([param, "E_num", "E_tau", "E_B"])
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def truth_table_record(res: TruthTableResult):
    return {
        "table": res.table.tolist(),
        "tableStderr": res.tableStderr.tolist(),
        "fidelityRaw": res.fidelityRaw,
        "fidelityLossCorrected": res.fidelityLossCorrected,
        "fidelityTraceCorrected": res.fidelityTraceCorrected,
        "stderr": res.stderr,
        "meanTraceLoss": res.meanTraceLoss,
    }


def bell_record(res: BellResult):
    return {
        "fidelityRaw": res.fidelityRaw,
        "fidelityCorrected": res.fidelityCorrected,
        "fidelityUnnormalized": res.fidelityUnnormalized,
        "stderr": res.stderr,
        "meanTrace": res.meanTrace,
    }

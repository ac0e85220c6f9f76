"""Command-line entry point.

Configuration is one JSON document with optional sections ``trap``, ``beams``,
``magnetic``, ``blockade``, ``gate`` and ``run``. Frequencies are in MHz
(cyclic; multiplied by 2 pi internally), lengths in um, temperatures in uK,
times in ns and magnetic fields in uT. Every key is optional; unknown keys are
rejected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, analytic, evolve, experiments, noise, qpt

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6
UM = 1e-6
UK = 1e-6
NS = 1e-9
UT = 1e-6

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid or unreadable configuration."""


# key -> (field, scale); scale None keeps the value as given.
TRAP_KEYS = {
    "wavelength_um": ("lambdaF", UM),
    "waist_um": ("waistF", UM),
    "depth_uK": ("depthOverKb", UK),
    "separation_um": ("separation", UM),
    "temperature_uK": ("tempA", UK),
}
BEAM_KEYS = {
    "waistXR_um": ("waistXR", UM),
    "waistYR_um": ("waistYR", UM),
    "waistXB_um": ("waistXB", UM),
    "waistYB_um": ("waistYB", UM),
    "wavelengthR_um": ("lambdaR", UM),
    "wavelengthB_um": ("lambdaB", UM),
    "rabiR_MHz": ("rabiR0", MHZ),
    "rabiB_MHz": ("rabiB0", MHZ),
    "deltaP_MHz": ("deltaP", MHZ),
    "deltaAC_MHz": ("deltaAC0", MHZ),
    "powerFluctR": ("powerFluctR", None),
    "powerFluctB": ("powerFluctB", None),
}
MAGNETIC_KEYS = {
    "biasBz_uT": ("biasBz", UT),
    "sigmaB_uT": ("sigmaB", UT),
    "gRyd": ("gRyd", None),
    "mRyd": ("mRyd", None),
    "gGround": ("gGround", None),
    "mGround": ("mGround", None),
    "omega10_MHz": ("omega10", MHZ),
}
BLOCKADE_KEYS = ("variant", "Bbar_MHz", "B0_MHz", "separation_um", "table")
GATE_KEYS = {
    "model": ("model", None),
    "tGap_ns": ("tGap", NS),
    "prepPopulations": ("prepPopulations", None),
    "backgroundLossTwoAtom": ("backgroundLossTwoAtom", None),
    "gammaP_MHz": ("gammaP", MHZ),
    "gammaR_MHz": ("gammaR", MHZ),
    "shiftConvention": ("shiftConvention", None),
    "bellNormalize": ("bellNormalize", None),
}
RUN_KEYS = ("shots", "seed", "threads", "method", "ideal", "sweepParam", "sweepGrid")
SECTIONS = ("trap", "beams", "magnetic", "blockade", "gate", "run")
SWEEP_UNITS = {"B": MHZ, "Omega": MHZ, "tau": NS}


def load_config(path):
    """Read and structurally validate a config document (``None`` gives ``{}``)."""
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for key, section in doc.items():
        if key not in SECTIONS:
            raise ConfigError(f"unknown config section {key!r}")
        if not isinstance(section, dict):
            raise ConfigError(f"config section {key!r} must be an object")
    return doc


def config_digest(doc):
    """SHA-256 of the canonical JSON form; independent of key order."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _number(section, key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number")
    return float(value)


def _mapped(doc, section, keys):
    out = {}
    for key, value in doc.get(section, {}).items():
        if key not in keys:
            raise ConfigError(f"unknown key {section}.{key}")
        name, scale = keys[key]
        out[name] = value if scale is None else _number(section, key, value) * scale
    return out


def _build(cls, section, kwargs):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section} section: {exc}") from None


def build_blockade(doc, trap, mag):
    sec = doc.get("blockade", {})
    for key in sec:
        if key not in BLOCKADE_KEYS:
            raise ConfigError(f"unknown key blockade.{key}")
    variant = sec.get("variant", "calibrated")
    if variant == "calibrated":
        bbar = _number("blockade", "Bbar_MHz", sec.get("Bbar_MHz", 5.3)) * MHZ
        if not bbar > 0:
            raise ConfigError("blockade.Bbar_MHz must be positive")
        return noise.calibrate_vdw(trap, experiments.CALIBRATION_OMEGA, experiments.CALIBRATION_TAU, mag.omega10, bbar)
    if variant in ("constant", "vdw"):
        if "B0_MHz" not in sec:
            raise ConfigError(f"blockade.B0_MHz is required for variant {variant!r}")
        kw = {"variant": variant, "b0": _number("blockade", "B0_MHz", sec["B0_MHz"]) * MHZ}
        if "separation_um" in sec:
            kw["separation"] = _number("blockade", "separation_um", sec["separation_um"]) * UM
        return _build(noise.BlockadeModel, "blockade", kw)
    if variant == "table":
        if "table" not in sec:
            raise ConfigError("blockade.table is required for variant 'table'")
        try:
            return noise.load_blockade_table(sec["table"])
        except OSError as exc:
            raise ConfigError(f"cannot read blockade.table: {exc.strerror}") from None
        except ValueError as exc:
            raise ConfigError(f"invalid blockade.table: {exc}") from None
    raise ConfigError(f"unknown blockade.variant {variant!r}")


def run_settings(doc, args):
    """Run options from the config, overridden by command-line flags."""
    sec = doc.get("run", {})
    for key in sec:
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown key run.{key}")
    out = {
        "shots": sec.get("shots"),
        "seed": sec.get("seed", 0),
        "threads": sec.get("threads", os.cpu_count() or 1),
        "method": sec.get("method", "expm"),
        "ideal": sec.get("ideal", False),
        "sweepParam": sec.get("sweepParam", "B"),
        "sweepGrid": sec.get("sweepGrid"),
    }
    for flag in ("shots", "seed", "threads", "method"):
        value = getattr(args, flag, None)
        if value is not None:
            out[flag] = value
    if getattr(args, "ideal", False):
        out["ideal"] = True
    for key in ("shots", "seed", "threads"):
        v = out[key]
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise ConfigError(f"run.{key} must be an integer")
    if out["method"] not in ("expm", "rk4"):
        raise ConfigError(f"run.method must be 'expm' or 'rk4', got {out['method']!r}")
    if not isinstance(out["ideal"], bool):
        raise ConfigError("run.ideal must be true or false")
    return out


def experiment_config(doc, run, default_shots):
    trap = _build(noise.TrapParams, "trap", _mapped(doc, "trap", TRAP_KEYS))
    beams = _build(noise.BeamParams, "beams", _mapped(doc, "beams", BEAM_KEYS))
    mag = _build(noise.MagneticModel, "magnetic", _mapped(doc, "magnetic", MAGNETIC_KEYS))
    gate = _mapped(doc, "gate", GATE_KEYS)
    if "prepPopulations" in gate:
        p = gate["prepPopulations"]
        if not isinstance(p, list) or len(p) != 2:
            raise ConfigError("gate.prepPopulations must be a list of two numbers")
        gate["prepPopulations"] = tuple(_number("gate", "prepPopulations", x) for x in p)
    model = build_blockade(doc, trap, mag)
    shots = default_shots if run["shots"] is None else run["shots"]
    return _build(experiments.ExperimentConfig, "gate/run", dict(
        trap=trap, beams=beams, mag=mag, blockadeModel=model, nShots=shots, seed=run["seed"],
        threads=run["threads"], method=run["method"], ideal=run["ideal"], **gate,
    ))


class Outputs:
    """Collects output files in a staging directory and moves them in at the end."""

    def __init__(self, out_dir):
        self.outDir = out_dir
        self.files = {}

    def path(self, name):
        if not self.files:
            os.makedirs(self.outDir, exist_ok=True)
            self._stage = tempfile.mkdtemp(prefix=".staging-", dir=self.outDir)
        self.files[name] = os.path.join(self._stage, name)
        return self.files[name]

    def write_json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def commit(self):
        final = []
        for name, tmp in self.files.items():
            dest = os.path.join(self.outDir, name)
            os.replace(tmp, dest)
            final.append(dest)
        if self.files:
            os.rmdir(self._stage)
        return final

    def discard(self):
        for tmp in self.files.values():
            if os.path.exists(tmp):
                os.remove(tmp)
        if self.files:
            os.rmdir(self._stage)


def write_manifest(out_dir, command, doc, seed, started, paths, flags):
    manifest = {
        "command": command,
        "configDigest": config_digest(doc),
        "seed": seed,
        "version": __version__,
        "wallTime": time.time() - started,
        "outputs": sorted(os.path.basename(p) for p in paths),
        "flags": flags,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_truth_table(doc, args, out):
    run = run_settings(doc, args)
    cfg = experiment_config(doc, run, 100)
    res = experiments.truth_table(cfg)
    experiments.write_truth_table_csv(out.path("truth_table.csv"), res)
    print(f"loss-corrected fidelity {res.fidelityLossCorrected:.4f} +- {res.stderr:.4f}")
    print(f"trace-corrected fidelity {res.fidelityTraceCorrected:.4f}, raw {res.fidelityRaw:.4f}")
    return run["seed"]


def cmd_bell(doc, args, out):
    run = run_settings(doc, args)
    cfg = experiment_config(doc, run, 50)
    res = experiments.bell_experiment(cfg)
    out.write_json("bell.json", experiments.bell_record(res))
    print(f"Bell fidelity corrected {res.fidelityCorrected:.4f} +- {res.stderr:.4f}, raw {res.fidelityRaw:.4f}")
    return run["seed"]


def _state(label):
    try:
        return analytic.get_state(label)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None


def cmd_qpt(doc, args, out):
    run = run_settings(doc, args)
    params = _state(args.state)
    system = qpt.state_system(params)
    t_gap = _number("gate", "tGap_ns", doc.get("gate", {}).get("tGap_ns", 0.0)) * NS
    if t_gap < 0:
        raise ConfigError("gate.tGap_ns must be non-negative")
    record = {"state": params.label, "rabi_MHz": params.rabi / MHZ}
    chis = {"chiIdeal": qpt.chi_ideal(qpt.CZ)}
    if args.sequence in ("standard", "both"):
        res = qpt.tomography(evolve.standard_cz(t_gap), system, method=run["method"])
        record.update(errorOverlap=res.errorOverlap, errorDistance=res.errorDistance, traceLoss=res.traceLoss)
        chis["chiStandard"] = res.chi
        print(f"standard: E_O {res.errorOverlap:.3g}  E_D {res.errorDistance:.3g}  trace loss {res.traceLoss:.3g}")
    if args.sequence in ("modified", "both"):
        phi = qpt.calibrate_phase(system, t_gap, numeric=not args.analytic_phase)
        res = qpt.tomography(evolve.modified_cz(phi, t_gap), system, method=run["method"])
        record.update(phase=phi, errorOverlapModified=res.errorOverlap, errorDistanceModified=res.errorDistance,
                      traceLossModified=res.traceLoss)
        chis["chiModified"] = res.chi
        print(f"modified (phi {phi:.5f}): E_O {res.errorOverlap:.3g}  E_D' {res.errorDistance:.3g}")
    out.write_json("qpt.json", record)
    qpt.write_chi_json(out.path("chi.json"), **chis)
    return run["seed"]


def cmd_sweep(doc, args, out):
    run = run_settings(doc, args)
    param = args.param or run["sweepParam"]
    if param not in SWEEP_UNITS:
        raise ConfigError(f"sweep parameter must be one of {', '.join(SWEEP_UNITS)}, got {param!r}")
    grid = args.grid if args.grid else run["sweepGrid"]
    if grid is None:
        grid = {"B": [5, 10, 20, 40, 80], "Omega": [0.1, 0.2, 0.4, 0.8, 1.15, 1.6],
                "tau": [3e4, 1e5, 3e5, 1e6, 3e6]}[param]
    if not isinstance(grid, list) or not grid:
        raise ConfigError("run.sweepGrid must be a non-empty list")
    values = [_number("run", "sweepGrid", v) * SWEEP_UNITS[param] for v in grid]
    if any(v <= 0 for v in values):
        raise ConfigError("sweep values must be positive")
    rows = experiments.intrinsic_sweep(param, values)
    unit = SWEEP_UNITS[param]
    rows = [(r[0] / unit,) + tuple(r[1:]) for r in rows]
    experiments.write_sweep_csv(out.path(f"sweep_{param}.csv"), param, rows)
    for r in rows:
        print(f"{param}={r[0]:g}  E_num {r[1]:.4g}  E_tau {r[2]:.4g}  E_B {r[3]:.4g}")
    return run["seed"]


def analytic_rows(params):
    eb0 = analytic.e_b0(params)
    om_opt, ecb = analytic.e_cb(eb0, params.tau)
    x = 0.005
    return [
        ("state", params.label),
        ("species", params.species),
        ("tau_us", params.tau / 1e-6),
        ("B_MHz", params.Bnn / MHZ),
        ("E_B(x=0.005)", analytic.blockade_error(params, x)),
        ("E_B0_s2", eb0),
        ("Omega_opt_MHz", om_opt / MHZ),
        ("E_cb", ecb),
        ("Omega1_opt_MHz", analytic.omega1_opt(params.Bnn, params.tau) / MHZ),
        ("E1_min", analytic.e1_min(params.Bnn, params.tau)),
        ("Omega2_opt_MHz", analytic.omega2_opt(params.Bnn, params.tau) / MHZ),
        ("E2_min", analytic.e2_min(params.Bnn, params.tau)),
        ("phase_rad", qpt.analytic_phase(params.rabi, params.Bnn)),
    ]


def cmd_analytic(doc, args, out):
    params = _state(args.state)
    rows = analytic_rows(params)
    for name, value in rows:
        text = value if isinstance(value, str) else f"{value:.6g}"
        print(f"{name:16s} {text}")
    out.write_json("analytic.json", {k: v for k, v in rows})
    return None


COMMANDS = {
    "truth-table": cmd_truth_table,
    "bell": cmd_bell,
    "qpt": cmd_qpt,
    "sweep": cmd_sweep,
    "analytic": cmd_analytic,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--shots", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--method", choices=("expm", "rk4"))
    common.add_argument("--ideal", action="store_true", help="noise-free strong-blockade surrogate")
    p = argparse.ArgumentParser(prog="rydgate", description="Rydberg blockade gate simulations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("truth-table", parents=[common], help="Monte Carlo CNOT truth table")
    sub.add_parser("bell", parents=[common], help="Monte Carlo Bell-state fidelity")
    q = sub.add_parser("qpt", parents=[common], help="intrinsic process tomography of a registry state")
    q.add_argument("--state", required=True)
    q.add_argument("--sequence", choices=("standard", "modified", "both"), default="both")
    q.add_argument("--analytic-phase", action="store_true", help="use pi Omega / 2B instead of numeric calibration")
    s = sub.add_parser("sweep", parents=[common], help="intrinsic error versus B, Omega or tau")
    s.add_argument("--param", choices=tuple(SWEEP_UNITS))
    s.add_argument("--grid", type=float, nargs="+", help="values in MHz (B, Omega) or ns (tau)")
    a = sub.add_parser("analytic", parents=[common], help="closed-form estimates for a registry state")
    a.add_argument("state")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    out = Outputs(args.out)
    try:
        doc = load_config(args.config)
        seed = COMMANDS[args.command](doc, args, out)
    except ConfigError as exc:
        out.discard()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (evolve.IntegrationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        out.discard()
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BaseException:
        out.discard()
        raise
    paths = out.commit()
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out")}
    write_manifest(args.out, args.command, doc, seed, started, paths, flags)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from rydgate import analytic, experiments, noise

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def blockade():
    return experiments.blockade_model(experiments.ExperimentConfig())


def test_monte_carlo_stats_closed_forms():
    assert experiments.monte_carlo_stats([0.3, 0.3, 0.3]) == (pytest.approx(0.3), 0.0)
    mean, err = experiments.monte_carlo_stats([0.0, 1.0])
    assert mean == 0.5
    assert err == pytest.approx(0.354, abs=5e-4)
    x = np.random.default_rng(5).normal(size=10_000)
    mean, err = experiments.monte_carlo_stats(x)
    assert abs(mean) < 3 * err
    with pytest.raises(ValueError):
        experiments.monte_carlo_stats([1.0])


@pytest.mark.parametrize("kw", [
    dict(model="sevenLevel"),
    dict(nShots=0),
    dict(threads=0),
    dict(prepPopulations=(0.9, 0.2)),
    dict(prepPopulations=(1.2, 0.0)),
    dict(backgroundLossTwoAtom=1.5),
    dict(tGap=-1e-9),
    dict(method="euler"),
    dict(shiftConvention="hertz"),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        experiments.ExperimentConfig(**kw)


def test_ideal_truth_table_is_prep_limited():
    cfg = experiments.ExperimentConfig(ideal=True, nShots=2)
    res = experiments.truth_table(cfg)
    q = cfg.prepPopulations[0]
    assert res.fidelityLossCorrected == pytest.approx(q * q, abs=1e-6)
    assert res.fidelityTraceCorrected >= 1 - 2 * 0.02
    assert res.fidelityRaw == pytest.approx(res.fidelityLossCorrected * 0.81)
    assert np.allclose(res.table, q * q * experiments.CNOT_TABLE, atol=1e-6)
    assert res.meanTraceLoss == pytest.approx(1 - q * q, abs=1e-6)
    assert res.stderr == pytest.approx(0.0, abs=1e-9)


def test_ideal_bell_fidelity():
    cfg = experiments.ExperimentConfig(ideal=True, nShots=2)
    res = experiments.bell_experiment(cfg)
    assert res.fidelityCorrected == pytest.approx(1.0, abs=1e-6)
    assert res.fidelityUnnormalized == pytest.approx(0.98**2, abs=1e-6)
    assert res.fidelityRaw == pytest.approx(0.81, abs=1e-6)
    unnorm = experiments.bell_experiment(replace(cfg, bellNormalize=False))
    assert unnorm.fidelityCorrected == pytest.approx(0.98**2, abs=1e-6)


def test_truth_table_bounds_and_reproducibility(blockade):
    cfg = experiments.ExperimentConfig(nShots=2, seed=11, blockadeModel=blockade)
    a = experiments.truth_table(cfg)
    assert np.all(a.table >= -1e-9) and np.all(a.table <= 1 + 1e-9)
    assert np.all(a.table.sum(axis=1) <= 1 + 1e-9)
    assert 0.5 < a.fidelityLossCorrected < 1.0
    b = experiments.truth_table(replace(cfg, threads=2))
    assert np.array_equal(a.table, b.table)
    assert np.array_equal(a.perShot, b.perShot)
    assert a.fidelityRaw == b.fidelityRaw


def test_bell_fidelity_drops_with_temperature(blockade):
    cold = experiments.ExperimentConfig(trap=noise.TrapParams(tempA=0.0), nShots=6, seed=2, blockadeModel=blockade)
    hot = replace(cold, trap=noise.TrapParams(tempA=175e-6))
    fc = experiments.bell_experiment(cold)
    fh = experiments.bell_experiment(hot)
    assert fc.fidelityCorrected - fh.fidelityCorrected > 2 * math.hypot(fc.stderr, fh.stderr)


def test_intrinsic_sweep_decay_limit():
    base = experiments.IntrinsicConfig()
    rows = experiments.intrinsic_sweep("Omega", [TWO_PI * 0.1e6], base)
    _, num, e_tau, e_b = rows[0]
    assert e_b < 1e-3 * e_tau
    assert num == pytest.approx(e_tau, rel=0.2)


def test_intrinsic_sweep_tau_scaling_and_errors():
    base = experiments.IntrinsicConfig()
    e1, _ = analytic.e1_terms(base.omega, base.tau, base.blockade, base.omega10)
    e2, _ = analytic.e1_terms(base.omega, 2 * base.tau, base.blockade, base.omega10)
    assert e2 == pytest.approx(e1 / 2)
    with pytest.raises(ValueError):
        experiments.intrinsic_sweep("T", [1.0])


def test_csv_writers(tmp_path):
    res = experiments.truth_table(experiments.ExperimentConfig(ideal=True, nShots=2))
    path = tmp_path / "tt.csv"
    experiments.write_truth_table_csv(path, res)
    rows = list(csv.reader(path.open(encoding="utf-8")))
    assert rows[0] == ["input", "output", "probability", "stderr"]
    assert rows[1][:2] == ["00", "00"]
    assert len(rows) == 1 + 16 + 4
    path = tmp_path / "sweep.csv"
    experiments.write_sweep_csv(path, "B", [(1.0, 2.0, 3.0, 4.0)])
    assert path.read_text(encoding="utf-8").splitlines() == ["B,E_num,E_tau,E_B", "1.0,2.0,3.0,4.0"]

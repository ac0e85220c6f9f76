import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from rydgate import analytic, evolve, qpt

TWO_PI = 2 * math.pi


def phase_gate(phi):
    return np.diag([1, -1, -1, -np.exp(1j * phi)])


def random_kraus(rng, n_ops=3):
    # Random CPTP channel via a random isometry.
    v = unitary_group.rvs(4 * n_ops, random_state=rng)[:, :4]
    return [v[4 * k:4 * (k + 1)] for k in range(n_ops)]


def kraus_channel(ops, inputs):
    return np.array([sum(k @ r @ k.conj().T for k in ops) for r in inputs])


def test_input_states_are_pure_and_complete():
    ins = qpt.input_states()
    assert ins.shape == (16, 4, 4)
    e00 = np.zeros((4, 4))
    e00[0, 0] = 1
    assert np.allclose(ins[0], e00)
    assert np.allclose([np.trace(r @ r).real for r in ins], 1.0)
    vecs = ins.reshape(16, 16)
    gram = vecs.conj() @ vecs.T
    # Kronecker square of the single-qubit Gram matrix (condition number 10.404),
    # frozen from an independent SVD.
    assert np.linalg.cond(gram) == pytest.approx(108.2408, rel=1e-5)
    single = np.array([np.outer(a, a.conj()).ravel() for a in
                       (np.array([1, 0]), np.array([0, 1]), np.array([1, 1]) / math.sqrt(2), np.array([1, 1j]) / math.sqrt(2))])
    assert np.linalg.cond(single.conj() @ single.T) ** 2 == pytest.approx(108.2408, rel=1e-5)


def test_chi_ideal_identity_and_cz_decomposition():
    chi = qpt.chi_ideal(np.eye(4)).entries
    expect = np.zeros((16, 16))
    expect[0, 0] = 1
    assert np.allclose(chi, expect)
    chi = qpt.chi_ideal(qpt.CZ).entries
    lab = qpt.PAULI_LABELS
    c = np.zeros(16)
    for name, val in (("II", -0.5), ("IZ", 0.5), ("ZI", 0.5), ("ZZ", 0.5)):
        c[lab.index(name)] = val
    assert np.allclose(chi, np.outer(c, c))


def test_chi_ideal_rejects_non_unitary():
    with pytest.raises(ValueError):
        qpt.chi_ideal(np.diag([1, 1, 1, 0.5]))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_chi_ideal_trace_one_and_reproduces_channel(seed):
    u = unitary_group.rvs(4, random_state=np.random.default_rng(seed))
    chi = qpt.chi_ideal(u)
    assert chi.trace == pytest.approx(1.0, abs=1e-12)
    ins = qpt.input_states()
    assert np.allclose(qpt.apply_chi(chi, ins), qpt.unitary_channel(u, ins), atol=1e-12)


def test_linear_inversion_identity_and_unitary():
    ins = qpt.input_states()
    chi = qpt.chi_linear_inversion(ins, ins)
    assert abs(chi.entries[0, 0] - 1) < 1e-10
    assert np.sum(np.abs(chi.entries)) == pytest.approx(1.0, abs=1e-9)
    chi = qpt.chi_linear_inversion(ins, qpt.unitary_channel(qpt.CZ, ins))
    assert np.allclose(chi.entries, qpt.chi_ideal(qpt.CZ).entries, atol=1e-10)


def test_linear_inversion_depolarizing_mixture():
    ins = qpt.input_states()
    p = 0.2
    out = (1 - p) * qpt.unitary_channel(qpt.CZ, ins) + p * np.eye(4)[None] / 4
    chi = qpt.chi_linear_inversion(ins, out)
    # Fully depolarizing channel: uniform Pauli twirl, chi = I/16.
    expect = (1 - p) * qpt.chi_ideal(qpt.CZ).entries + p * np.eye(16) / 16
    assert np.allclose(chi.entries, expect, atol=1e-10)
    assert chi.physical


def test_linear_inversion_random_channel():
    rng = np.random.default_rng(3)
    ops = random_kraus(rng)
    ins = qpt.input_states()
    chi = qpt.chi_linear_inversion(ins, kraus_channel(ops, ins))
    assert np.allclose(qpt.apply_chi(chi, ins), kraus_channel(ops, ins), atol=1e-10)
    assert chi.trace == pytest.approx(1.0, abs=1e-10)
    assert chi.physical


def test_linear_inversion_rejects_incomplete_inputs():
    ins = qpt.input_states()[:4]
    with pytest.raises(np.linalg.LinAlgError):
        qpt.chi_linear_inversion(ins, ins)


def test_mle_reproduces_physical_unitary():
    ins = qpt.input_states()
    u = unitary_group.rvs(4, random_state=np.random.default_rng(4))
    chi = qpt.chi_mle(ins, qpt.unitary_channel(u, ins))
    assert np.linalg.norm(chi.entries - qpt.chi_ideal(u).entries) < 1e-6
    assert chi.physical
    ideal = qpt.chi_ideal(u)
    assert qpt.error_overlap(ideal, chi) < 1e-6
    assert qpt.error_distance(ideal, chi) < 1e-5


def test_mle_physicalizes_perturbed_data():
    ins = qpt.input_states()
    ideal = qpt.chi_ideal(qpt.CZ).entries
    w, v = np.linalg.eigh(ideal)
    bad = ideal - 1e-3 * np.outer(v[:, 0], v[:, 0].conj())  # eigenvalue -1e-3
    out = qpt.apply_chi(bad, ins)
    raw = qpt.chi_linear_inversion(ins, out)
    assert not raw.physical
    chi = qpt.chi_mle(ins, out)
    assert chi.physical
    assert np.linalg.eigvalsh(chi.entries).min() >= -1e-10
    assert chi.trace <= 1 + 1e-9
    assert np.linalg.norm(chi.entries - bad) <= 2e-3


def test_mle_keeps_trace_loss():
    ins = qpt.input_states()
    out = 0.9 * qpt.unitary_channel(qpt.CZ, ins)
    chi = qpt.chi_mle(ins, out)
    assert chi.trace == pytest.approx(0.9, abs=1e-6)
    assert qpt.error_distance(qpt.chi_ideal(qpt.CZ), chi) == pytest.approx(0.05, abs=1e-6)


@pytest.mark.parametrize("phi", [0.1, 0.3])
def test_phase_error_laws(phi):
    ideal = qpt.chi_ideal(qpt.CZ)
    sim = qpt.chi_ideal(phase_gate(phi))
    assert qpt.error_overlap(ideal, sim) == pytest.approx(3 / 8 * (1 - math.cos(phi)), abs=1e-10)
    assert qpt.error_distance(ideal, sim) == pytest.approx(math.sqrt(3) / 2 * math.sin(phi / 2), abs=1e-10)


def test_phase_error_values_at_point_one():
    ideal = qpt.chi_ideal(qpt.CZ)
    sim = qpt.chi_ideal(phase_gate(0.1))
    assert qpt.error_overlap(ideal, sim) == pytest.approx(1.873e-3, rel=1e-3)
    assert qpt.error_distance(ideal, sim) == pytest.approx(4.329e-2, rel=1e-3)


def test_small_phase_asymptotics():
    phi = 0.02
    ideal = qpt.chi_ideal(qpt.CZ)
    sim = qpt.chi_ideal(phase_gate(phi))
    assert qpt.error_overlap(ideal, sim) / phi**2 == pytest.approx(3 / 16, rel=0.02)
    assert qpt.error_distance(ideal, sim) / phi == pytest.approx(math.sqrt(3) / 4, rel=0.02)


def test_orthogonal_and_identical():
    a = qpt.chi_ideal(np.eye(4))
    b = qpt.chi_ideal(np.kron(np.eye(2), np.array([[0, 1], [1, 0]])))
    assert qpt.error_overlap(a, b) == pytest.approx(1.0, abs=1e-12)
    assert qpt.error_overlap(a, a) == pytest.approx(0.0, abs=1e-12)
    assert qpt.error_distance(a, a) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-math.pi, math.pi))
def test_errors_global_phase_invariant_and_bounded(seed, alpha):
    rng = np.random.default_rng(seed)
    u = unitary_group.rvs(4, random_state=rng)
    ins = qpt.input_states()
    sim = qpt.chi_linear_inversion(ins, kraus_channel(random_kraus(rng), ins))
    e1 = qpt.error_overlap(qpt.chi_ideal(u), sim), qpt.error_distance(qpt.chi_ideal(u), sim)
    e2 = qpt.error_overlap(qpt.chi_ideal(np.exp(1j * alpha) * u), sim), qpt.error_distance(
        qpt.chi_ideal(np.exp(1j * alpha) * u), sim)
    assert np.allclose(e1, e2, atol=1e-9)
    assert -1e-12 <= e1[0] <= 1 + 1e-12
    assert e1[1] >= 0


def test_epsilon_bounds():
    assert qpt.epsilon_bounds(0.0, 0.0) == (0.0, 0.0)
    assert qpt.epsilon_bounds(0.0012, 0.0058) == pytest.approx((0.0006, 0.0058))
    with pytest.raises(ValueError):
        qpt.epsilon_bounds(-0.1, 0.0)
    with pytest.raises(ValueError):
        qpt.epsilon_bounds(0.1, 1.5)


def test_chi_json_round_trip(tmp_path):
    chi = qpt.chi_ideal(phase_gate(0.2))
    back = qpt.chi_from_json(json.loads(json.dumps(qpt.chi_to_json(chi))))
    assert np.array_equal(back, chi.entries)
    path = tmp_path / "chi.json"
    qpt.write_chi_json(path, ideal=chi)
    doc = json.loads(path.read_text())
    assert doc["ideal"]["basis"][0] == "II"


def test_chi_matrix_shape_check():
    with pytest.raises(ValueError):
        qpt.ChiMatrix(np.eye(4), True)


def test_simulate_channel_identity_and_ideal_cz():
    s = evolve.ideal_system(TWO_PI * 1e6)
    ins = qpt.input_states()
    seq = evolve.PulseSequence((evolve.Gap(0.0),))
    out, loss = qpt.simulate_channel(seq, s, ins)
    assert np.allclose(out, ins, atol=1e-12)
    assert np.allclose(loss, 0.0, atol=1e-12)
    res = qpt.tomography(evolve.standard_cz(0.0), s)
    assert res.errorOverlap < 1e-6
    assert res.errorDistance < 1e-3
    assert res.traceLoss < 1e-6


def test_analytic_phase_values():
    assert qpt.analytic_phase(TWO_PI * 38.5e6, TWO_PI * 3.45e9) == pytest.approx(0.01753, rel=1e-3)
    assert qpt.analytic_phase(1.0, 1e12) < 1e-11


def test_state_system_structure():
    p = analytic.get_state("76p3/2")
    s = qpt.state_system(p)
    b = s.blockade.shifts
    assert b[2, 2] == pytest.approx(p.Bnn)
    assert b[1, 2] == pytest.approx(p.bPrime * p.Bnn)
    assert s.rabiNominal == pytest.approx(p.rabi)
    assert s.control.gammaR == pytest.approx(1 / p.tau)
    phi = qpt.calibrate_phase(s)
    assert phi == pytest.approx(math.pi * p.rabi / (2 * p.Bnn))

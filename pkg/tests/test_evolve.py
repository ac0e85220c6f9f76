import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydgate import atoms, evolve, qmath

TWO_PI = 2 * math.pi
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=float)


def small_system5(gamma=True, blockade=TWO_PI * 3e6):
    # Modest frequencies so that RK4 stays cheap.
    kw = dict(gammaP=TWO_PI * 0.5e6, gammaR=TWO_PI * 2e3, gamma1r=TWO_PI * 50e3, gamma01=TWO_PI * 1e3) if gamma else {}
    s = atoms.AtomScheme5(omega10=TWO_PI * 20e6, omegaR=TWO_PI * 8e6, omegaB=TWO_PI * 8e6, deltaP=TWO_PI * 40e6,
                          deltaR=TWO_PI * 0.3e6, **kw)
    return evolve.TwoAtomSystem(s, s, atoms.BlockadeSpec.scalar(blockade), s.two_photon_rabi())


def finite_blockade_system(omega, blockade, ratio=1e4):
    s = atoms.AtomScheme6(omega10=ratio * omega, rabi=(omega, 0.0, 0.0), levelGaps=(ratio * omega, 2 * ratio * omega))
    return evolve.TwoAtomSystem(s, s, atoms.BlockadeSpec(np.full((3, 3), blockade)), omega)


def pops4(out, dim):
    idx = evolve.computational_indices(dim)
    return np.array([np.real(np.diag(o)[idx]) for o in out])


def basis_inputs(dim):
    return np.array([evolve.product_state(dim, {a: 1.0}, {b: 1.0}) for a in (0, 2) for b in (0, 2)])


def test_gap_only_without_decay_leaves_state_unchanged():
    s = small_system5(gamma=False)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(25, 25)) + 1j * rng.normal(size=(25, 25))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    seq = evolve.PulseSequence((evolve.Gap(0.0), evolve.Gap(0.0)))
    assert np.allclose(evolve.run_sequence(rho, seq, s), rho, atol=1e-14)


def test_ideal_cz_on_11_is_minus_11():
    s = evolve.ideal_system(TWO_PI * 1e6)
    d = s.dim
    idx = evolve.computational_indices(d)
    psi = np.zeros(4, dtype=complex)
    psi[[0, 3]] = 1 / math.sqrt(2)
    rho = evolve.embed_two_qubit(np.outer(psi, psi.conj()), d)
    out = evolve.run_sequence(rho, evolve.standard_cz(0.0), s)[np.ix_(idx, idx)]
    assert out[3, 3].real == pytest.approx(0.5, abs=1e-4)
    # relative phase between |00> and |11> is pi
    assert out[3, 0] / abs(out[3, 0]) == pytest.approx(-1.0, abs=1e-4)


def test_ideal_core_phases_are_cz():
    s = evolve.ideal_system(TWO_PI * 1e6)
    th = evolve.core_phases(s, evolve.standard_cz(0.0))
    assert np.allclose(np.exp(1j * th), [1, -1, -1, -1], atol=1e-4)


def test_ideal_cnot_truth_table_is_permutation():
    s = evolve.ideal_system(TWO_PI * 1e6)
    out = evolve.run_sequence(basis_inputs(s.dim), evolve.cnot(500e-9), s)
    assert np.allclose(pops4(out, s.dim), CNOT, atol=1e-6)


def test_ideal_bell_prep_gives_b1():
    s = evolve.ideal_system(TWO_PI * 1e6)
    rho = evolve.product_state(s.dim, {2: 1.0}, {2: 1.0})
    out = evolve.run_sequence(rho, evolve.bell_prep_cnot(500e-9), s)
    idx = evolve.computational_indices(s.dim)
    b1 = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert np.real(b1 @ out[np.ix_(idx, idx)] @ b1) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("ratio", [0.05, 0.02])
def test_blockade_phase_error_in_strong_blockade_limit(ratio):
    omega = TWO_PI * 1e6
    s = finite_blockade_system(omega, omega / ratio)
    delta = evolve.entangling_phase(s, evolve.standard_cz(0.0))
    assert abs(delta) == pytest.approx(math.pi * ratio / 2, rel=0.05)


def test_modified_cz_cancels_phase_to_first_order():
    omega = TWO_PI * 1e6
    blockade = omega / 0.05
    s = finite_blockade_system(omega, blockade)
    std = evolve.entangling_phase(s, evolve.standard_cz(0.0))
    mod = evolve.entangling_phase(s, evolve.modified_cz(math.pi * omega / (2 * blockade), 0.0))
    assert abs(mod) < 0.1 * abs(std)
    phi = evolve.calibrate_blockade_phase(s, 0.0)
    assert abs(evolve.entangling_phase(s, evolve.modified_cz(phi, 0.0))) < 1e-9


def test_local_compensation_last_mode():
    omega = TWO_PI * 1e6
    s = finite_blockade_system(omega, omega / 0.1)
    core = evolve.standard_cz(0.0)
    delta = evolve.entangling_phase(s, core)
    th = evolve.core_phases(s, evolve.compensated(core, evolve.local_phase_compensation(s, core)))
    assert np.allclose(np.exp(1j * th), np.exp(1j * np.array([0, math.pi, math.pi, math.pi + delta])), atol=1e-9)


def test_local_compensation_symmetric_mode():
    omega = TWO_PI * 1e6
    s = finite_blockade_system(omega, omega / 0.1)
    core = evolve.standard_cz(0.0)
    delta = evolve.entangling_phase(s, core)
    th = evolve.core_phases(s, evolve.compensated(core, evolve.local_phase_compensation(s, core, "symmetric")))
    err = np.exp(1j * (th - np.array([0, math.pi, math.pi, math.pi])))
    expect = np.exp(1j * delta / 4 * np.array([1, -1, -1, 1]))
    ratio = err / expect
    assert np.allclose(ratio, ratio[0], atol=1e-9)
    with pytest.raises(ValueError):
        evolve.local_phase_compensation(s, core, "other")


def test_trace_and_positivity_through_sequence():
    s = small_system5()
    rho = evolve.product_state(5, {0: 0.49, 2: 0.49, 1: 0.02}, {0: 0.5, 2: 0.5})
    psi = np.array([1, 0, 1j, 0, 0]) / math.sqrt(2)
    rho = 0.5 * rho + 0.5 * np.kron(np.outer(psi, psi.conj()), np.diag([0.5, 0, 0.5, 0, 0]))
    traces, mins = [], []

    def observer(i, batch):
        traces.append(abs(np.trace(batch[0]) - 1))
        mins.append(np.linalg.eigvalsh(batch[0]).min())

    evolve.run_sequence(rho, evolve.bell_prep_cnot(200e-9, (0.3, -0.2)), s, observer=observer)
    assert max(traces) < 1e-9
    assert min(mins) > -1e-7


def test_expm_matches_rk4():
    s = small_system5()
    rho = basis_inputs(5)
    seq = evolve.cnot(100e-9, (0.1, 0.2)) + evolve.modified_cz(0.3, 50e-9)
    a = evolve.run_sequence(rho, seq, s, method="expm")
    b = evolve.run_sequence(rho, seq, s, method="rk4")
    assert np.max(np.abs(a - b)) < 1e-6


def test_phase_frame_matches_direct_generator():
    s = small_system5()
    rho = basis_inputs(5)[3]
    dur = s.duration(math.pi)
    for phase in (0.7, -2.1):
        seq = evolve.PulseSequence((evolve.RydbergPulse("target", math.pi, phase),))
        out = evolve.run_sequence(rho, seq, s)
        h = s.hamiltonian("target", phase)
        direct = evolve.propagate_segment(rho, h, s.liouvillian(), dur)
        frame = evolve.free_frame(5, s.omega10, dur)
        direct = frame.conj()[:, None] * direct * frame[None, :]
        assert np.allclose(out, direct, atol=1e-10)


def test_propagator_cache_reuses_exponentials():
    s = small_system5()
    seq = evolve.PulseSequence((
        evolve.RydbergPulse("target", math.pi),
        evolve.RydbergPulse("target", math.pi, 0.4),
        evolve.RydbergPulse("target", math.pi),
        evolve.Gap(1e-7),
        evolve.Gap(1e-7),
    ))
    evolve.run_sequence(basis_inputs(5), seq, s)
    assert s.expm_calls == 2
    evolve.run_sequence(basis_inputs(5), seq, s)
    assert s.expm_calls == 2


def test_closed_system_shortcut_matches_superoperator():
    s = small_system5(gamma=False)
    p = s.propagator("control", 1.3e-7)
    g = qmath.commutator_superop(s.hamiltonian("control")) + s.liouvillian()
    assert np.allclose(p, qmath.expm(g * 1.3e-7), atol=1e-10)


def test_without_decay_and_duration():
    s = small_system5()
    assert np.count_nonzero(s.without_decay().liouvillian()) == 0
    assert s.duration(math.pi) == pytest.approx(math.pi / s.rabiNominal)
    seq = evolve.cnot(500e-9)
    assert evolve.sequence_duration(seq, s) == pytest.approx(4 * math.pi / s.rabiNominal + 1e-6)


def test_sequence_validation():
    with pytest.raises(ValueError):
        evolve.PulseSequence(())
    with pytest.raises(ValueError):
        evolve.PulseSequence((evolve.Gap(-1.0),))
    with pytest.raises(ValueError):
        evolve.PulseSequence((evolve.RydbergPulse("third", 1.0),))
    with pytest.raises(ValueError):
        evolve.PulseSequence((evolve.IdealRotation("control", "w", 1.0),))
    with pytest.raises(ValueError):
        evolve.propagate_segment(np.eye(2), np.zeros((2, 2)), np.zeros((4, 4)), 1.0, method="euler")


def test_divergence_raises():
    h = np.array([[0, np.inf], [np.inf, 0]], dtype=complex)
    with pytest.raises(evolve.IntegrationError):
        evolve.propagate_segment(np.eye(2) / 2, h, np.zeros((4, 4)), 1.0, method="rk4")


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["x", "y", "z"]), st.floats(-7, 7), st.floats(-7, 7))
def test_single_qubit_rotations_unitary_and_compose(axis, a, b):
    u = evolve.single_qubit_unitary(5, axis, a)
    assert np.allclose(u @ u.conj().T, np.eye(5), atol=1e-12)
    ab = evolve.single_qubit_unitary(5, axis, a + b)
    assert np.allclose(evolve.single_qubit_unitary(5, axis, a) @ evolve.single_qubit_unitary(5, axis, b), ab, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=3), st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_product_state_trace(pc, pt):
    rho = evolve.product_state(5, dict(zip((0, 1, 2), pc)), dict(zip((0, 1, 2), pt)))
    assert np.trace(rho).real == pytest.approx(sum(pc) * sum(pt))

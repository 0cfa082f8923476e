import numpy as np
import pytest
import scipy.linalg
import scipy.stats
from hypothesis import given, strategies as st

from hdtzeno.hamiltonian import CouplingSpec, HamiltonianSet, build
from hdtzeno.propagator import hermitian_eig
from hdtzeno.protocol import (
    EnsembleKind,
    ProtocolConfig,
    ResourceLimitError,
    average_state,
    enumerate_ensemble,
    first_revival,
    kraus_operators,
    revival_curve,
    sample_ensemble,
    sample_trajectory,
    step,
    trajectory_rng,
    unmonitored_state,
)
from hdtzeno.spin_hilbert import QubitPartition, attach_reset_bath, basis_state, random_state, zero_state

from conftest import brute_force_tree, random_hermitian, random_unitary

X = np.array([[0, 1], [1, 0]], dtype=complex)


def bare(part, H):
    """HamiltonianSet carrying only the full Hamiltonian, for hand-built dynamics."""
    zero = np.zeros_like(H)
    return HamiltonianSet(part, H, zero, zero, zero)


def decoupled(part, rng):
    """System-only Hamiltonian: the bath never leaves its reset state."""
    return bare(part, np.kron(random_hermitian(part.dim_s, rng), np.eye(part.dim_b)))


def test_config_validation():
    part = QubitPartition(1, 1)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 0, part)
    with pytest.raises(ValueError):
        ProtocolConfig(-1.0, 2, part)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 2, part, prune_threshold=-1)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 2, part, reset_state=np.array([1.0, 1.0]))
    assert ProtocolConfig(3.0, 4, part).dt == 0.75


def test_step_identity(rng):
    part = QubitPartition(2, 1)
    cfg = ProtocolConfig(1.0, 1, part)
    joint = attach_reset_bath(random_state(4, rng), part, cfg.phi0)
    out = step(joint, np.eye(8), cfg)
    assert list(out) == [0]
    assert out[0][0] == pytest.approx(1.0)
    assert np.allclose(out[0][1], joint)


def test_step_swap_flips_and_resets():
    part = QubitPartition(1, 1)
    swap = np.eye(4)[[0, 2, 1, 3]]
    out = step(basis_state(2, "10"), swap, ProtocolConfig(1.0, 1, part))
    assert list(out) == [1]
    assert out[1][0] == pytest.approx(1.0)
    assert np.allclose(out[1][1], basis_state(2, "00"))


def test_step_probabilities_match_amplitudes(rng):
    part = QubitPartition(1, 1)
    U = random_unitary(4, rng)
    joint = basis_state(2, "00")
    amps = U @ joint
    out = step(joint, U, ProtocolConfig(1.0, 1, part))
    assert out[0][0] == pytest.approx(abs(amps[0]) ** 2 + abs(amps[2]) ** 2, abs=1e-14)
    assert out[1][0] == pytest.approx(abs(amps[1]) ** 2 + abs(amps[3]) ** 2, abs=1e-14)


def test_kraus_maps_reproduce_step(rng):
    part = QubitPartition(2, 2)
    cfg = ProtocolConfig(1.0, 1, part)
    U = random_unitary(part.dim, rng)
    psi = random_state(part.dim_s, rng)
    kraus = kraus_operators(U, part, cfg.phi0)
    for m, (p, joint) in step(attach_reset_bath(psi, part, cfg.phi0), U, cfg).items():
        v = kraus[m] @ psi
        assert np.vdot(v, v).real == pytest.approx(p, abs=1e-14)
        assert np.allclose(attach_reset_bath(v / np.sqrt(p), part, cfg.phi0), joint)
    completeness = np.einsum("mts,mtu->su", kraus.conj(), kraus)
    assert np.allclose(completeness, np.eye(part.dim_s), atol=1e-12)


def test_enumerate_decoupled_single_branch(rng):
    part = QubitPartition(2, 1)
    hs = decoupled(part, rng)
    T = 1.3
    e = enumerate_ensemble(hs, ProtocolConfig(T, 1, part))
    assert len(e) == 1 and e.kind is EnsembleKind.EXACT
    assert e.records.tolist() == [[0]]
    assert e.probabilities[0] == pytest.approx(1.0)
    H_s = hs.H.reshape(4, 2, 4, 2)[:, 0, :, 0]
    assert np.allclose(e.states[0], scipy.linalg.expm(-1j * H_s * T) @ zero_state(2))


def test_enumerate_two_steps_complete():
    hs = build(CouplingSpec(2, 1))
    e = enumerate_ensemble(hs, ProtocolConfig(2.0, 2, hs.partition, prune_threshold=0))
    assert sorted(map(tuple, e.records.tolist())) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert abs(e.probabilities.sum() - 1) < 1e-9


def assert_matches_oracle(e, oracle, tol=1e-9):
    assert len(e) == len(oracle)
    for member in e.members:
        p, psi = oracle[member.outcomes]
        assert abs(member.probability - p) < tol
        assert abs(np.vdot(psi, member.final_state)) > 1 - tol


def test_enumerate_matches_brute_force_tree(small_ising):
    oracle = brute_force_tree(small_ising.H, 2, 1, 3.0, 3)
    e = enumerate_ensemble(small_ising, ProtocolConfig(3.0, 3, small_ising.partition, prune_threshold=0))
    assert_matches_oracle(e, oracle)


def test_enumerate_two_bath_qubits_matches_brute_force():
    hs = build(CouplingSpec(1, 2, variant="YY"))
    oracle = brute_force_tree(hs.H, 1, 2, 2.0, 3)
    e = enumerate_ensemble(hs, ProtocolConfig(2.0, 3, hs.partition, prune_threshold=0))
    # YY never reaches some records; those are below the Born zero threshold
    reachable = {r: v for r, v in oracle.items() if v[0] >= 1e-14}
    assert_matches_oracle(e, reachable)


def test_records_lexicographic(small_ising):
    e = enumerate_ensemble(small_ising, ProtocolConfig(3.0, 4, small_ising.partition, prune_threshold=0))
    recs = [tuple(r) for r in e.records.tolist()]
    assert recs == sorted(recs)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_probability_plus_truncated_mass_is_one(small_ising, n):
    for thr in (0.0, 1e-6, 1e-3, 0.05):
        e = enumerate_ensemble(small_ising, ProtocolConfig(3.0, n, small_ising.partition, prune_threshold=thr))
        assert abs(e.probabilities.sum() + e.truncated_mass - 1) < 1e-9


def test_pruning_monotone(small_ising):
    masses = [
        enumerate_ensemble(small_ising, ProtocolConfig(3.0, 6, small_ising.partition, prune_threshold=t)).truncated_mass
        for t in (0.05, 1e-2, 1e-3, 1e-5, 0.0)
    ]
    assert all(a >= b for a, b in zip(masses, masses[1:]))
    assert masses[-1] < 1e-12
    assert masses[0] > 0


def test_branch_cap(small_ising):
    cfg = ProtocolConfig(3.0, 8, small_ising.partition, prune_threshold=0, max_branches=100)
    with pytest.raises(ResourceLimitError):
        enumerate_ensemble(small_ising, cfg)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_unmonitored_cycles_compose_to_full_evolution(small_ising, n):
    cfg = ProtocolConfig(2.5, n, small_ising.partition)
    expected = scipy.linalg.expm(-2.5j * small_ising.H) @ zero_state(3)
    assert np.allclose(unmonitored_state(small_ising, cfg), expected, atol=1e-10)


def test_average_state_matches_enumerated_mixture(small_ising):
    cfg = ProtocolConfig(3.0, 5, small_ising.partition, prune_threshold=0)
    e = enumerate_ensemble(small_ising, cfg)
    mix = np.einsum("i,is,it->st", e.probabilities, e.states, e.states.conj())
    assert np.max(np.abs(average_state(small_ising, cfg) - mix)) < 1e-12


def test_sample_decoupled_all_zero(rng):
    part = QubitPartition(2, 1)
    hs = decoupled(part, rng)
    cfg = ProtocolConfig(1.0, 4, part)
    traj = sample_trajectory(hs, cfg, trajectory_rng(5, 0))
    assert traj.outcomes == (0, 0, 0, 0)
    assert traj.probability == pytest.approx(1.0)
    e = sample_ensemble(hs, cfg, 50, seed=3)
    assert not e.records.any()


def test_sample_fair_coin():
    part = QubitPartition(1, 1)
    # exp(-i (pi/4) X) on the bath leaves it in |0> or |1> with equal odds
    hs = bare(part, np.pi / 4 * np.kron(np.eye(2), X))
    cfg = ProtocolConfig(1.0, 1, part)
    spectral = hermitian_eig(hs.H)
    draws = 10_000
    ones = sum(sample_trajectory(hs, cfg, trajectory_rng(99, i), spectral).outcomes[0] for i in range(draws))
    sigma = np.sqrt(draws * 0.25)
    assert abs(ones - draws / 2) < 5 * sigma


def test_sample_records_chi_square(small_ising):
    cfg = ProtocolConfig(3.0, 3, small_ising.partition, prune_threshold=0)
    exact = enumerate_ensemble(small_ising, cfg)
    sampled = sample_ensemble(small_ising, cfg, 20_000, seed=7)
    index = {tuple(r): i for i, r in enumerate(exact.records.tolist())}
    counts = np.zeros(len(exact))
    for r in sampled.records.tolist():
        counts[index[tuple(r)]] += 1
    expected = exact.probabilities / exact.probabilities.sum() * counts.sum()
    assert scipy.stats.chisquare(counts, expected).pvalue > 0.01


def test_sample_ensemble_deterministic(small_ising):
    cfg = ProtocolConfig(3.0, 3, small_ising.partition)
    a = sample_ensemble(small_ising, cfg, 2, seed=2**63 + 11)
    b = sample_ensemble(small_ising, cfg, 2, seed=2**63 + 11)
    assert a.states.tobytes() == b.states.tobytes()
    assert a.records.tobytes() == b.records.tobytes()


def test_substreams_independent_of_ensemble_size(small_ising):
    cfg = ProtocolConfig(3.0, 4, small_ising.partition)
    big = sample_ensemble(small_ising, cfg, 40, seed=1)
    small = sample_ensemble(small_ising, cfg, 10, seed=1)
    assert np.array_equal(big.records[:10], small.records)
    traj = sample_trajectory(small_ising, cfg, trajectory_rng(1, 25))
    assert traj.outcomes == tuple(big.records[25])
    assert np.allclose(traj.final_state, big.states[25])


def test_sample_ensemble_needs_two(small_ising):
    with pytest.raises(ValueError):
        sample_ensemble(small_ising, ProtocolConfig(1.0, 1, small_ising.partition), 1, seed=0)


@given(st.integers(0, 2**32 - 1))
def test_sampled_probabilities_match_enumeration(seed):
    hs = build(CouplingSpec(1, 1))
    cfg = ProtocolConfig(2.0, 3, hs.partition, prune_threshold=0)
    exact = {tuple(m.outcomes): m.probability for m in enumerate_ensemble(hs, cfg).members}
    for m in sample_ensemble(hs, cfg, 5, seed).members:
        assert m.probability == pytest.approx(exact[m.outcomes], rel=1e-9)
        assert abs(np.linalg.norm(m.final_state) - 1) < 1e-10


def test_revival_two_level():
    part = QubitPartition(1, 1)
    hs = bare(part, np.kron(np.diag([1.0, -1.0]), np.eye(2)).astype(complex))
    psi0 = attach_reset_bath(np.array([1, 1]) / np.sqrt(2), part, zero_state(1))
    times = np.linspace(0, 5, 5001)
    rc = revival_curve(hs, psi0, times)
    assert rc.fidelity[0] == 1.0
    assert np.allclose(rc.fidelity, np.cos(times) ** 2, atol=1e-12)
    assert rc.first_revival_time == pytest.approx(np.pi, abs=1e-3)
    assert rc.rows()[0] == (0.0, 1.0)


def test_revival_errors(small_ising):
    psi0 = zero_state(3)
    with pytest.raises(ValueError):
        revival_curve(small_ising, psi0, [0.0, 1.0])
    with pytest.raises(ValueError):
        revival_curve(small_ising, 2 * psi0, [0.0, 1.0, 2.0])


def test_first_revival_needs_a_dip():
    t = np.arange(6.0)
    assert first_revival(t, np.array([1, 0.5, 0.2, 0.1, 0.05, 0.0])) is None
    assert first_revival(t, np.array([1, 0.5, 0.6, 0.4, 0.8, 0.7])) == 2.0

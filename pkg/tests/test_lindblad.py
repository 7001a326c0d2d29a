import numpy as np
import pytest

from chanmix.channels import (
    amplitude_damping_channel,
    apply_channel,
    convex_combination,
    PAULI_Z,
)
from chanmix.circuit import run_on_system
from chanmix.lindblad import (
    LindbladSpec,
    RabiParams,
    amplitude_damping_subcircuit,
    ccc_evolve,
    ccc_series,
    exact_evolve,
    liouvillian_superop,
    rabi_channel_set,
    rabi_lindblad_spec,
    sampled_evolve,
    trace_distance,
    SIGMA_MINUS,
)
from chanmix.qops import DensityMatrix, channel_to_superoperator, vec
from util import random_density

RNG = np.random.default_rng(17)

EXCITED = DensityMatrix((2,), np.diag([0.0, 1.0]).astype(complex))
GROUND = DensityMatrix((2,), np.diag([1.0, 0.0]).astype(complex))
PARAMS = RabiParams(1.0, 0.5, 0.1, 0.05, 200)


def test_liouvillian_zero_generator():
    spec = LindbladSpec(np.zeros((2, 2), dtype=complex))
    gen = liouvillian_superop(spec).matrix
    assert np.max(np.abs(gen)) == 0.0


def test_liouvillian_pure_commutator_spectrum():
    spec = LindbladSpec(PAULI_Z)
    gen = liouvillian_superop(spec).matrix
    eigs = np.sort_complex(np.linalg.eigvals(gen))
    assert np.allclose(sorted(eigs.imag), [-2, 0, 0, 2], atol=1e-12)
    assert np.max(np.abs(eigs.real)) <= 1e-12


def test_liouvillian_trace_annihilating_and_cp_flow():
    from scipy.linalg import expm

    from chanmix.qops import Superoperator, superoperator_to_choi

    spec = rabi_lindblad_spec(PARAMS)
    gen = liouvillian_superop(spec).matrix
    left_trace = vec(np.eye(2, dtype=complex)).conj() @ gen
    assert np.max(np.abs(left_trace)) <= 1e-10
    # exp(tL) must be completely positive: Choi minimum eigenvalue >= 0
    for t in (0.3, 2.0, 10.0):
        choi = superoperator_to_choi(Superoperator(expm(t * gen)))
        min_eig = np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0]
        assert min_eig >= -1e-9


def test_liouvillian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        LindbladSpec(np.array([[0, 1], [0, 0]], dtype=complex))


def test_exact_evolve_t0_is_identity():
    spec = rabi_lindblad_spec(PARAMS)
    rho = random_density((2,), RNG)
    out = exact_evolve(spec, rho, 0.0)
    assert np.max(np.abs(out.matrix - rho.matrix)) <= 1e-12


def test_exact_evolve_pure_decay():
    spec = LindbladSpec(np.zeros((2, 2), dtype=complex), (SIGMA_MINUS,), (0.1,))
    for t in (0.5, 3.0, 10.0):
        out = exact_evolve(spec, EXCITED, t)
        assert out.matrix[1, 1].real == pytest.approx(np.exp(-0.1 * t), abs=1e-12)


def test_exact_evolve_closed_system_preserves_purity():
    params = RabiParams(1.0, 0.5, 0.0, 0.05, 1)
    spec = rabi_lindblad_spec(params)
    rho = DensityMatrix.from_statevector([1, 1j], (2,))
    for t in (0.7, 4.1):
        out = exact_evolve(spec, rho, t)
        purity = float(np.real(np.trace(out.matrix @ out.matrix)))
        assert abs(purity - 1.0) <= 1e-10


def test_exact_evolve_invariants_along_trajectory():
    spec = rabi_lindblad_spec(PARAMS)
    for t in np.linspace(0.0, 10.0, 9):
        out = exact_evolve(spec, EXCITED, float(t))
        assert abs(np.trace(out.matrix) - 1.0) <= 1e-10
        assert np.max(np.abs(out.matrix - out.matrix.conj().T)) <= 1e-10
        assert np.linalg.eigvalsh(out.matrix)[0] >= -1e-9


def test_rabi_channel_set_probs_and_tau():
    rs = rabi_channel_set(PARAMS)
    assert rs.probs == pytest.approx((0.625, 0.3125, 0.0625), abs=1e-15)
    assert PARAMS.tau == pytest.approx(0.08, abs=1e-15)


def test_rabi_channel_set_gamma_zero():
    rs = rabi_channel_set(RabiParams(1.0, 0.5, 0.0, 0.05, 1))
    assert rs.probs[2] == 0.0
    assert rs.channels[0].is_unitary() and rs.channels[1].is_unitary()


def test_rabi_step_first_order_matches_liouvillian():
    dt = 1e-3
    params = RabiParams(1.0, 0.5, 0.1, dt, 1)
    rs = rabi_channel_set(params)
    step = sum(
        p * channel_to_superoperator(ch).matrix
        for p, ch in zip(rs.probs, rs.channels)
    )
    gen = liouvillian_superop(rabi_lindblad_spec(params)).matrix
    residual = np.max(np.abs((step - np.eye(4)) / dt - gen))
    assert residual <= 10 * dt  # second-order remainder


def test_one_ccc_step_equals_channel_mixture_superop():
    rs = rabi_channel_set(PARAMS)
    mix = convex_combination(rs.combination)
    weighted_sum = sum(
        p * channel_to_superoperator(ch).matrix
        for p, ch in zip(rs.probs, rs.channels)
    )
    assert np.max(np.abs(channel_to_superoperator(mix).matrix - weighted_sum)) <= 1e-10
    one_step = RabiParams(1.0, 0.5, 0.1, 0.05, 1)
    for _ in range(3):
        rho = random_density((2,), RNG)
        via_circuit = ccc_evolve(one_step, rho)
        via_mixture = apply_channel(mix, rho)
        assert np.max(np.abs(via_circuit.matrix - via_mixture.matrix)) <= 1e-10


def test_sampled_evolve_deterministic_and_unitary_limit():
    params = RabiParams(1.0, 0.0, 0.0, 0.1, 30)
    a = sampled_evolve(params, GROUND, seed=4)
    b = sampled_evolve(params, GROUND, seed=4)
    assert np.array_equal(a.matrix, b.matrix)
    # single-channel set: deterministic Z rotations leave |0><0| fixed
    assert np.max(np.abs(a.matrix - GROUND.matrix)) <= 1e-12


def test_sampled_average_converges_to_mixture():
    params = RabiParams(1.0, 0.5, 0.1, 0.05, 20)
    n_traj = 10 ** 4
    acc = np.zeros((2, 2), dtype=complex)
    for t in range(n_traj):
        seq = np.random.SeedSequence(entropy=11, spawn_key=(t,))
        acc += sampled_evolve(params, EXCITED, seed=seq).matrix
    avg = DensityMatrix.unchecked((2,), acc / n_traj)
    reference = ccc_evolve(params, EXCITED)
    assert trace_distance(avg, reference) <= 0.02


def test_ccc_evolve_zero_steps():
    params = RabiParams(1.0, 0.5, 0.1, 0.05, 0)
    rho = random_density((2,), RNG)
    out = ccc_evolve(params, rho)
    assert np.array_equal(out.matrix, rho.matrix)


def test_ccc_evolve_convergence_order_on_lam_grid():
    lam = PARAMS.lam
    total_t = 10.0
    spec = rabi_lindblad_spec(PARAMS)
    exact = exact_evolve(spec, EXCITED, total_t)
    dists = []
    for dt_rel in (0.1, 0.05, 0.025):
        steps = int(round(total_t * lam / dt_rel))
        pr = RabiParams(1.0, 0.5, 0.1, total_t / steps, steps)
        dists.append(trace_distance(ccc_evolve(pr, EXCITED), exact))
    for a, b in zip(dists, dists[1:]):
        assert 1.5 <= a / b <= 2.5


def test_ccc_evolve_purity_loss_bound_without_damping():
    dt = 0.05
    params = RabiParams(1.0, 0.5, 0.0, dt, 40)
    states = ccc_series(params, EXCITED)
    purities = [float(np.real(np.trace(s.matrix @ s.matrix))) for s in states]
    for before, after in zip(purities, purities[1:]):
        assert before - after <= 5 * dt ** 2


def test_amplitude_damping_subcircuit_matches_channel():
    for beta in (0.0, 0.5, 1.0):
        sub = amplitude_damping_subcircuit(beta)
        for rho in (EXCITED, GROUND, random_density((2,), RNG)):
            via_circuit = run_on_system(sub, rho)
            via_channel = apply_channel(amplitude_damping_channel(beta), rho)
            assert np.max(np.abs(via_circuit.matrix - via_channel.matrix)) <= 1e-10


def test_trace_distance_values():
    assert trace_distance(EXCITED, EXCITED) == 0.0
    assert trace_distance(GROUND, EXCITED) == pytest.approx(1.0, abs=1e-12)
    mixed = DensityMatrix((2,), np.eye(2, dtype=complex) / 2)
    assert trace_distance(GROUND, mixed) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        trace_distance(GROUND, DensityMatrix.ground((2, 2)))

import json

import numpy as np
import pytest

from chanmix.channels import (
    ConvexCombination,
    KrausChannel,
    amplitude_damping_channel,
    apply_channel,
    channel_from_json,
    channel_to_json,
    compose_channels,
    controlled_extension,
    convex_combination,
    depolarizing_channel,
    identity_channel,
    multiplexed_channel,
    stinespring_dilation,
    unitary_channel,
    PAULI_X,
    PAULI_Z,
)
from chanmix.qops import (
    DensityMatrix,
    channel_to_superoperator,
    cptp_check,
    partial_trace,
    tensor_product,
)
from util import random_cptp, random_density

RNG = np.random.default_rng(99)

KET0 = DensityMatrix((2,), np.diag([1.0, 0.0]).astype(complex))
KET1 = DensityMatrix((2,), np.diag([0.0, 1.0]).astype(complex))
PLUS = DensityMatrix((2,), np.full((2, 2), 0.5, dtype=complex))


def test_apply_identity():
    rho = random_density((2,), RNG)
    out = apply_channel(identity_channel(2), rho)
    assert np.array_equal(out.matrix, rho.matrix)


def test_apply_amplitude_damping_on_excited():
    out = apply_channel(amplitude_damping_channel(0.36), KET1)
    assert np.allclose(np.diag(out.matrix), [0.36, 0.64])


def test_apply_depolarizing_fixed_point():
    mixed = DensityMatrix((2,), np.eye(2, dtype=complex) / 2)
    out = apply_channel(depolarizing_channel(0.7), mixed)
    assert np.max(np.abs(out.matrix - mixed.matrix)) <= 1e-12


def test_apply_rejects_dim_mismatch():
    with pytest.raises(ValueError):
        apply_channel(identity_channel(4), KET0)


def test_compose_with_identity():
    chan = random_cptp(2, 2, RNG)
    comp = compose_channels(identity_channel(2), chan)
    rho = random_density((2,), RNG)
    assert np.max(np.abs(apply_channel(comp, rho).matrix
                         - apply_channel(chan, rho).matrix)) <= 1e-12


def test_compose_x_with_x_is_identity_action():
    x = unitary_channel(PAULI_X)
    comp = compose_channels(x, x)
    rho = random_density((2,), RNG)
    assert np.max(np.abs(apply_channel(comp, rho).matrix - rho.matrix)) <= 1e-11


def test_compose_depolarizing_is_superoperator_product():
    d1, d2 = depolarizing_channel(0.1), depolarizing_channel(0.25)
    comp = compose_channels(d2, d1)
    expected = channel_to_superoperator(d2).matrix @ channel_to_superoperator(d1).matrix
    assert np.max(np.abs(channel_to_superoperator(comp).matrix - expected)) <= 1e-11


def test_convex_combination_single_channel():
    chan = random_cptp(2, 2, RNG)
    mix = convex_combination(ConvexCombination((chan,), (1.0,)))
    rho = random_density((2,), RNG)
    assert np.max(np.abs(apply_channel(mix, rho).matrix
                         - apply_channel(chan, rho).matrix)) <= 1e-12


def test_convex_combination_identity_and_x():
    cc = ConvexCombination(
        (identity_channel(2), unitary_channel(PAULI_X)), (0.5, 0.5)
    )
    out = apply_channel(convex_combination(cc), KET0)
    assert np.allclose(out.matrix, np.eye(2) / 2)


def test_convex_combination_matches_superoperator_sum():
    chans = tuple(random_cptp(2, m, RNG) for m in (1, 2, 3))
    probs = (0.625, 0.3125, 0.0625)
    mix = convex_combination(ConvexCombination(chans, probs))
    expected = sum(
        p * channel_to_superoperator(c).matrix for p, c in zip(probs, chans)
    )
    assert np.max(np.abs(channel_to_superoperator(mix).matrix - expected)) <= 1e-11


def test_convex_combination_validation():
    chan = identity_channel(2)
    with pytest.raises(ValueError):
        ConvexCombination((chan, chan), (0.6, 0.6))
    with pytest.raises(ValueError):
        ConvexCombination((chan, chan), (1.2, -0.2))


def test_convex_closure_is_cptp():
    for _ in range(5):
        chans = tuple(random_cptp(2, int(RNG.integers(1, 4)), RNG) for _ in range(3))
        w = RNG.uniform(0.1, 1.0, size=3)
        probs = tuple(w / w.sum())
        mix = convex_combination(ConvexCombination(chans, probs))
        report = cptp_check(mix)
        assert report.is_tp and report.is_cp


def test_stinespring_identity_channel():
    dil = stinespring_dilation(identity_channel(2))
    assert dil.env_dim == 1
    assert np.array_equal(dil.unitary, np.eye(2))


def test_stinespring_amplitude_damping_entries():
    dil = stinespring_dilation(amplitude_damping_channel(0.36))
    assert dil.env_dim == 2 and dil.unitary.shape == (4, 4)
    chan = amplitude_damping_channel(0.36)
    # U[i*d + a, b] == K_i[a, b]; in particular <1,0|U|1,0> = sqrt(1-beta)
    for i, k in enumerate(chan.kraus):
        assert np.max(np.abs(dil.unitary[2 * i : 2 * i + 2, :2] - k)) <= 1e-12
    assert dil.unitary[1, 1] == pytest.approx(0.8, abs=1e-12)


def test_stinespring_environment_trace_reproduces_channel():
    # 50 random CPTP channels over d in {2, 4}, Kraus counts 1..4
    rng = np.random.default_rng(4242)
    for trial in range(50):
        dim = int(rng.choice([2, 4]))
        m = int(rng.integers(1, 5))
        chan = random_cptp(dim, m, rng)
        dil = stinespring_dilation(chan)
        sys_dims = (2,) * int(np.log2(dim))
        env_dims = (dil.env_dim,)
        rho = random_density(sys_dims, rng)
        env = DensityMatrix.ground(env_dims)
        joint = tensor_product(env, DensityMatrix(sys_dims, rho.matrix))
        evolved = dil.unitary @ joint.matrix @ dil.unitary.conj().T
        out = partial_trace(
            DensityMatrix.unchecked(env_dims + sys_dims, evolved),
            range(1, 1 + len(sys_dims)),
        )
        expected = apply_channel(chan, rho)
        assert np.max(np.abs(out.matrix - expected.matrix)) <= 1e-10


def test_stinespring_rejects_non_cptp():
    bad = KrausChannel((np.eye(2, dtype=complex) * 0.5,), label="subnormalized")
    with pytest.raises(ValueError):
        stinespring_dilation(bad)


def test_depolarizing_endpoints():
    rho = random_density((2,), RNG)
    out0 = apply_channel(depolarizing_channel(0.0), rho)
    assert np.max(np.abs(out0.matrix - rho.matrix)) <= 1e-12
    # direct Kraus-sum oracle at p=1
    p = 1.0
    chan = depolarizing_channel(p)
    expected = np.zeros((2, 2), dtype=complex)
    for w, k in zip(chan.weights, chan.kraus):
        expected += w * k @ rho.matrix @ k.conj().T
    assert np.max(np.abs(apply_channel(chan, rho).matrix - expected)) <= 1e-12
    report = cptp_check(chan, tol=1e-12)
    assert report.is_tp


def test_depolarizing_rejects_bad_probability():
    with pytest.raises(ValueError):
        depolarizing_channel(1.5)


def test_amplitude_damping_limits():
    rho = random_density((2,), RNG)
    out0 = apply_channel(amplitude_damping_channel(0.0), rho)
    assert np.max(np.abs(out0.matrix - rho.matrix)) <= 1e-12
    out1 = apply_channel(amplitude_damping_channel(1.0), KET1)
    assert np.allclose(out1.matrix, KET0.matrix)
    with pytest.raises(ValueError):
        amplitude_damping_channel(-0.1)


def test_amplitude_damping_coherence_scaling():
    out = apply_channel(amplitude_damping_channel(0.5), PLUS)
    assert abs(out.matrix[0, 1] - 0.5 * np.sqrt(0.5)) <= 1e-12


def test_controlled_extension_noiseless_is_controlled_unitary():
    u = PAULI_X
    ext = controlled_extension(unitary_channel(u), 2, 1, u)
    assert len(ext.kraus) == 1
    expected = np.kron(np.diag([0.0, 1.0]), u) + np.kron(np.diag([1.0, 0.0]), np.eye(2))
    assert np.max(np.abs(ext.kraus[0] - expected)) <= 1e-12
    k = ext.kraus[0]
    assert np.max(np.abs(k.conj().T @ k - np.eye(4))) <= 1e-12


def test_controlled_extension_idle_branch_still_noisy():
    noisy_x = compose_channels(depolarizing_channel(0.2), unitary_channel(PAULI_X))
    ext = controlled_extension(noisy_x, 2, 1, PAULI_X)
    rho_in = tensor_product(KET0, random_density((2,), RNG))
    out = apply_channel(ext, DensityMatrix(rho_in.dims, rho_in.matrix))
    # control |0>: the trailing noise acts alone on the system
    sys_out = partial_trace(out, [1])
    noise_only = apply_channel(
        depolarizing_channel(0.2), partial_trace(rho_in, [1])
    )
    assert np.max(np.abs(sys_out.matrix - noise_only.matrix)) <= 1e-11


def test_controlled_extension_matches_superoperator_oracle():
    chan = compose_channels(amplitude_damping_channel(0.3), identity_channel(2))
    ext = controlled_extension(chan, 4, 2, np.eye(2, dtype=complex))
    # oracle: controlled-ideal (here identity) then control-independent noise
    proj = np.zeros((4, 4), dtype=complex)
    proj[2, 2] = 1.0
    expected = np.zeros((64, 64), dtype=complex)
    for k in chan.kraus:
        big = np.kron(proj, k) + np.kron(np.eye(4) - proj, k)
        expected += np.kron(big.conj(), big)
    assert np.max(np.abs(channel_to_superoperator(ext).matrix - expected)) <= 1e-11


def test_controlled_extension_rejects_bad_value():
    with pytest.raises(ValueError):
        controlled_extension(identity_channel(2), 2, 2, np.eye(2, dtype=complex))


def test_multiplexed_channel_marginal_is_mixture():
    branches = [random_cptp(2, 2, RNG), None, random_cptp(2, 1, RNG), None]
    mux = multiplexed_channel(branches, 2)
    report = cptp_check(mux)
    assert report.is_tp and report.is_cp
    amps = np.sqrt([0.4, 0.1, 0.3, 0.2])
    control = DensityMatrix.from_statevector(amps, (4,))
    rho = random_density((2,), RNG)
    joint = tensor_product(control, rho)
    out = apply_channel(mux, joint)
    marg = partial_trace(out, [1])
    expected = np.zeros((2, 2), dtype=complex)
    for q, br in zip([0.4, 0.1, 0.3, 0.2], branches):
        term = rho if br is None else apply_channel(br, rho)
        expected += q * term.matrix
    assert np.max(np.abs(marg.matrix - expected)) <= 1e-11


def test_channel_json_roundtrip():
    chan = random_cptp(2, 3, RNG, label="roundtrip")
    payload = json.loads(json.dumps(channel_to_json(chan)))
    back = channel_from_json(payload)
    assert back.label == chan.label
    for a, b in zip(back.kraus, chan.kraus):
        assert np.max(np.abs(a - b)) <= 1e-15


def test_signed_channel_json_roundtrip():
    signed = KrausChannel(
        (np.eye(2, dtype=complex), PAULI_Z), label="signed", weights=(1.0, -0.5)
    )
    back = channel_from_json(channel_to_json(signed))
    assert back.weights == (1.0, -0.5)

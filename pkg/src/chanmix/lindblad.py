"""Open-system evolution of the damped Rabi problem three ways: exact
Liouvillian propagation, per-step channel sampling, and repeated
deterministic mixture circuits.

The per-step splitting draws one of three channels — a Z conjugation, an X
conjugation (both through angle ``tau = lam * dt``), or amplitude damping —
with probabilities proportional to the generator weights ``(omega0, Omega,
gamma)``, ``lam = omega0 + Omega + gamma``. Each channel is the exact
exponential of its (weight-normalized) generator over the amplified time
``tau``, so one step reproduces ``exp(dt * L)`` to first order in ``dt``;
in particular the damping parameter is ``beta = 1 - exp(-tau)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import expm

from .channels import (
    ConvexCombination,
    amplitude_damping_channel,
    apply_channel,
    unitary_channel,
    PAULI_X,
    PAULI_Z,
)
from .circuit import (
    CNOT_MATRIX,
    Circuit,
    GateItem,
    RegisterLayout,
    build_ccc_circuit,
    run_on_system,
)
from .qops import DensityMatrix, Superoperator, as_operator, is_hermitian, unvec, vec

__all__ = [
    "LindbladSpec",
    "RabiParams",
    "RabiChannelSet",
    "liouvillian_superop",
    "exact_evolve",
    "exact_series",
    "rabi_lindblad_spec",
    "rabi_channel_set",
    "sampled_evolve",
    "sampled_series",
    "ccc_evolve",
    "ccc_series",
    "amplitude_damping_subcircuit",
    "trace_distance",
]

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|, e = |1>


@dataclass(frozen=True)
class LindbladSpec:
    """Standard-form generator data: Hermitian Hamiltonian, jump operators,
    and nonnegative rates (hbar = 1)."""

    hamiltonian: np.ndarray = field(repr=False)
    jump_ops: tuple = ()
    rates: tuple = ()

    def __post_init__(self):
        h = as_operator(self.hamiltonian)
        if not is_hermitian(h, 1e-10):
            raise ValueError("Hamiltonian must be Hermitian within 1e-10")
        jumps = tuple(as_operator(op) for op in self.jump_ops)
        rates = tuple(float(r) for r in self.rates)
        if len(jumps) != len(rates):
            raise ValueError("jump_ops and rates must have equal length")
        if any(r < 0 for r in rates):
            raise ValueError("rates must be nonnegative")
        for op in jumps:
            if op.shape != h.shape:
                raise ValueError("jump operators must match the Hamiltonian dim")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", jumps)
        object.__setattr__(self, "rates", rates)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class RabiParams:
    """Damped-Rabi parameter set: rates (omega0, Omega, gamma), time step,
    and step count."""

    omega0: float
    Omega: float
    gamma: float
    dt: float
    steps: int

    def __post_init__(self):
        if min(self.omega0, self.Omega, self.gamma) < 0:
            raise ValueError("rates must be nonnegative")
        if self.lam <= 0:
            raise ValueError("omega0 + Omega + gamma must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")

    @property
    def lam(self) -> float:
        return self.omega0 + self.Omega + self.gamma

    @property
    def tau(self) -> float:
        return self.lam * self.dt


@dataclass(frozen=True)
class RabiChannelSet:
    """The three per-step channels and their sampling probabilities."""

    channels: tuple
    probs: tuple

    @property
    def combination(self) -> ConvexCombination:
        return ConvexCombination(self.channels, self.probs)


def liouvillian_superop(spec: LindbladSpec) -> Superoperator:
    """Column-stacked generator matrix
    ``-i[H, .] + sum_k r_k (L rho L^dag - {L^dag L, rho}/2)``."""
    d = spec.dim
    ident = np.eye(d, dtype=complex)
    h = spec.hamiltonian
    gen = -1j * (np.kron(ident, h) - np.kron(h.T, ident))
    for rate, op in zip(spec.rates, spec.jump_ops):
        anticomm = op.conj().T @ op
        gen += rate * (
            np.kron(op.conj(), op)
            - 0.5 * np.kron(ident, anticomm)
            - 0.5 * np.kron(anticomm.T, ident)
        )
    return Superoperator(gen)


def exact_evolve(spec: LindbladSpec, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Propagate by the exact exponential ``exp(t L)`` of the generator."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    gen = liouvillian_superop(spec).matrix
    out = unvec(expm(t * gen) @ vec(rho0.matrix))
    out = (out + out.conj().T) / 2  # scrub float asymmetry before validation
    return DensityMatrix(rho0.dims, out)


def exact_series(
    spec: LindbladSpec, rho0: DensityMatrix, dt: float, steps: int
) -> List[DensityMatrix]:
    """States at t = 0, dt, ..., steps*dt under the exact propagator."""
    gen = liouvillian_superop(spec).matrix
    step = expm(dt * gen)
    out = [rho0]
    v = vec(rho0.matrix)
    for _ in range(steps):
        v = step @ v
        mat = unvec(v)
        mat = (mat + mat.conj().T) / 2
        out.append(DensityMatrix(rho0.dims, mat))
    return out


def rabi_lindblad_spec(params: RabiParams) -> LindbladSpec:
    """The damped two-level atom: ``H = omega0 Z + Omega X`` with decay
    ``gamma`` through the lowering operator."""
    h = params.omega0 * PAULI_Z + params.Omega * PAULI_X
    return LindbladSpec(hamiltonian=h, jump_ops=(SIGMA_MINUS,), rates=(params.gamma,))


def rabi_channel_set(params: RabiParams) -> RabiChannelSet:
    """Split one evolution step into three exactly-exponentiated channels.

    Zero-weight channels are retained with probability zero so the circuit
    register shapes do not depend on which rates vanish.
    """
    tau = params.tau
    o1 = unitary_channel(expm(-1j * PAULI_Z * tau), label="expZ")
    o2 = unitary_channel(expm(-1j * PAULI_X * tau), label="expX")
    o3 = amplitude_damping_channel(1.0 - math.exp(-tau))
    probs = (
        params.omega0 / params.lam,
        params.Omega / params.lam,
        params.gamma / params.lam,
    )
    return RabiChannelSet(channels=(o1, o2, o3), probs=probs)


def sampled_evolve(
    params: RabiParams, rho0: DensityMatrix, seed: int = 0
) -> DensityMatrix:
    """One stochastic trajectory: per step, draw a channel from the set's
    probabilities and apply it. Averaging trajectories over seeds converges
    to the deterministic mixture evolution."""
    return sampled_series(params, rho0, seed)[-1]


def sampled_series(
    params: RabiParams, rho0: DensityMatrix, seed: int = 0
) -> List[DensityMatrix]:
    chans = rabi_channel_set(params)
    probs = np.asarray(chans.probs)
    rng = np.random.default_rng(seed)
    out = [rho0]
    rho = rho0
    for _ in range(params.steps):
        idx = int(rng.choice(len(probs), p=probs))
        rho = apply_channel(chans.channels[idx], rho)
        out.append(rho)
    return out


def ccc_evolve(params: RabiParams, rho0: DensityMatrix) -> DensityMatrix:
    """Deterministic evolution: per step, run the convex-combination circuit
    on fresh coefficient/environment registers and trace them out."""
    return ccc_series(params, rho0)[-1]


def ccc_series(params: RabiParams, rho0: DensityMatrix) -> List[DensityMatrix]:
    chans = rabi_channel_set(params)
    circuit = build_ccc_circuit(chans.combination, n_sys=1)
    out = [rho0]
    rho = rho0
    for _ in range(params.steps):
        rho = run_on_system(circuit, rho)
        out.append(rho)
    return out


def amplitude_damping_subcircuit(beta: float) -> Circuit:
    """Two-qubit unitary circuit whose ancilla trace is amplitude damping.

    Qubit 0 is the ancilla (environment register), qubit 1 the system. The
    system-controlled Y rotation uses the half-angle convention, so the
    angle realizing damping ``beta`` is ``2*arcsin(sqrt(beta))``.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"damping parameter {beta} outside [0, 1]")
    theta = 2.0 * math.asin(math.sqrt(beta))
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    ry = np.array([[c, -s], [s, c]], dtype=complex)
    layout = RegisterLayout(env_qubits=1, sys_qubits=1)
    items = (
        GateItem(
            "unitary", (0,), name="Ry", matrix=ry, controls=(1,), control_value=1
        ),
        GateItem("unitary", (0, 1), name="CNOT", matrix=CNOT_MATRIX),
    )
    return Circuit(layout, items)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the trace norm of the difference, in [0, 1]."""
    if a.dims != b.dims:
        raise ValueError(f"dims {a.dims} and {b.dims} differ")
    sv = np.linalg.svd(a.matrix - b.matrix, compute_uv=False)
    return float(0.5 * np.sum(sv))

"""Error-cancellation engine.

An ideal operation is expanded over a basis of noisy implementable operations
with real coefficients; the absolute-coefficient sum ``gamma`` (and its
product ``Gamma`` across layers) measures the sampling overhead of the
resulting quasiprobability estimator. This module provides the decomposition
solver, the exact full-enumeration value, the Monte Carlo estimator, the
two-mixture sign split, and the hybrid protocol that absorbs a contiguous
block of layers into two deterministic mixture circuits steered by a
noiseless (logical) coefficient register.

Sampling uses counter-style per-sample substreams derived from the seed, so
results are independent of evaluation order or worker count.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .channels import (
    ConvexCombination,
    KrausChannel,
    apply_channel,
    compose_channels,
    depolarizing_channel,
    unitary_channel,
    PAULIS,
)
from .circuit import Circuit, GateItem, RegisterLayout, prep_unitary, run_on_system
from .qops import DensityMatrix, channel_to_superoperator, expectation

__all__ = [
    "BasisIncompleteError",
    "NoisyBasis",
    "QuasiProbRep",
    "LayeredDecomposition",
    "TwoShotSplit",
    "HybridResult",
    "PecEstimate",
    "depolarized_pauli_basis",
    "quasiprob_decompose",
    "layered_decomposition",
    "exact_cancellation_value",
    "pec_estimate",
    "sample_budget",
    "two_shot_split",
    "hybrid_protocol",
]

ENUMERATION_GUARD = 10 ** 6
ABSORBED_GUARD = 10 ** 4
COEFF_CUTOFF = 1e-12


class BasisIncompleteError(ValueError):
    """The target is not in the real span of the basis superoperators."""

    def __init__(self, residual: float, tol: float):
        super().__init__(
            f"decomposition residual {residual:.3e} exceeds tolerance {tol:.3e}; "
            "the noisy basis does not span the target"
        )
        self.residual = residual
        self.tol = tol


@dataclass(frozen=True)
class NoisyBasis:
    """The implementable operations available for one circuit layer."""

    ops: tuple
    labels: tuple = ()

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise ValueError("basis must contain at least one operation")
        d = ops[0].dim
        for op in ops:
            if op.dim != d:
                raise ValueError("basis operations must share one dimension")
        labels = tuple(self.labels) or tuple(
            op.label or f"op{i}" for i, op in enumerate(ops)
        )
        if len(labels) != len(ops):
            raise ValueError("labels length must match ops length")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.ops[0].dim

    @property
    def size(self) -> int:
        return len(self.ops)


@dataclass(frozen=True)
class QuasiProbRep:
    """Real expansion of a target over a noisy basis with derived sampling
    data: ``signs[i] = sgn(coeffs[i])``, ``probs[i] = |coeffs[i]| / gamma``,
    ``gamma = sum_i |coeffs[i]|``.

    Coefficients below 1e-12 in magnitude are dropped from the sampling
    support (probability exactly zero, sign +1).
    """

    coeffs: tuple
    gamma: float
    signs: tuple
    probs: tuple
    basis: NoisyBasis
    target: KrausChannel
    residual: float

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("sampling probabilities must sum to 1")


@dataclass(frozen=True)
class LayeredDecomposition:
    """Per-layer representations of a layered circuit, applied in order
    (``layers[0]`` acts first), with the overall negativity ``Gamma``,
    the initial state, and the measured observable."""

    layers: tuple
    Gamma: float
    rho0: DensityMatrix
    observable: np.ndarray = field(repr=False)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def tuple_count(self) -> int:
        return math.prod(rep.basis.size for rep in self.layers)


@dataclass(frozen=True)
class TwoShotSplit:
    """The tuple sum regrouped by global sign into two convex mixtures."""

    pos_mixture: Optional[ConvexCombination]
    neg_mixture: Optional[ConvexCombination]
    q_plus: float
    q_minus: float
    Gamma: float
    reconstruction_residual: float


@dataclass(frozen=True)
class PecEstimate:
    estimate: float
    stderr: float
    n_samples: int
    seed: int


@dataclass(frozen=True)
class HybridResult:
    estimate: float
    stderr: float
    residual_negativity: float
    logical_qubits_used: int
    circuits: tuple
    n_samples: int
    seed: int


def depolarized_pauli_basis(p: float, n_qubits: int = 1) -> NoisyBasis:
    """Pauli gates followed by depolarizing noise of strength ``p``."""
    noise = depolarizing_channel(p, n_qubits)
    names = ["I", "X", "Y", "Z"]
    ops = []
    labels = []
    for combo in itertools.product(names, repeat=n_qubits):
        mat = np.eye(1, dtype=complex)
        for name in combo:
            mat = np.kron(mat, PAULIS[name])
        label = "".join(combo)
        ops.append(compose_channels(noise, unitary_channel(mat, label=label)))
        labels.append(label)
    return NoisyBasis(tuple(ops), tuple(labels))


def quasiprob_decompose(
    target: KrausChannel, basis: NoisyBasis, tol: float = 1e-8
) -> QuasiProbRep:
    """Solve ``target = sum_a c_a O_a`` over the reals by least squares on
    the vectorized superoperators.

    :raises BasisIncompleteError: if the least-squares residual exceeds
        ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if target.dim != basis.dim:
        raise ValueError("target and basis dimensions differ")
    cols = [channel_to_superoperator(op).matrix.reshape(-1) for op in basis.ops]
    bmat = np.column_stack(cols)
    rhs = channel_to_superoperator(target).matrix.reshape(-1)
    a_real = np.vstack([bmat.real, bmat.imag])
    b_real = np.concatenate([rhs.real, rhs.imag])
    coeffs, _, _, _ = np.linalg.lstsq(a_real, b_real, rcond=None)
    residual = float(np.linalg.norm(bmat @ coeffs - rhs))
    if residual > tol:
        raise BasisIncompleteError(residual, tol)
    coeffs = np.where(np.abs(coeffs) < COEFF_CUTOFF, 0.0, coeffs)
    gamma = float(np.sum(np.abs(coeffs)))
    signs = tuple(1 if c >= 0 else -1 for c in coeffs)
    probs = np.abs(coeffs) / gamma
    probs = probs / probs.sum()
    return QuasiProbRep(
        coeffs=tuple(float(c) for c in coeffs),
        gamma=gamma,
        signs=signs,
        probs=tuple(float(p) for p in probs),
        basis=basis,
        target=target,
        residual=residual,
    )


def layered_decomposition(
    layers: Sequence[Tuple[KrausChannel, NoisyBasis]],
    rho0: DensityMatrix,
    observable: np.ndarray,
    tol: float = 1e-8,
) -> LayeredDecomposition:
    """Decompose every layer and record the overall negativity
    ``Gamma = prod_l gamma_l``."""
    if not layers:
        raise ValueError("need at least one layer")
    reps = tuple(quasiprob_decompose(t, b, tol=tol) for t, b in layers)
    gamma_total = math.prod(rep.gamma for rep in reps)
    return LayeredDecomposition(
        layers=reps, Gamma=gamma_total, rho0=rho0, observable=observable
    )


def _tuple_raw_value(
    decomp: LayeredDecomposition,
    index_tuple: tuple,
    cache: Dict[tuple, float],
) -> float:
    """Tr[(O_aL o ... o O_a1)(rho0) A], memoized per index tuple."""
    if index_tuple in cache:
        return cache[index_tuple]
    rho = decomp.rho0
    for rep, idx in zip(decomp.layers, index_tuple):
        rho = apply_channel(rep.basis.ops[idx], rho)
    val = expectation(rho, decomp.observable)
    cache[index_tuple] = val
    return val


def _tuple_sign_prob(decomp: LayeredDecomposition, index_tuple: tuple):
    sign = 1
    prob = 1.0
    for rep, idx in zip(decomp.layers, index_tuple):
        sign *= rep.signs[idx]
        prob *= rep.probs[idx]
    return sign, prob


def _check_enumeration_guard(decomp: LayeredDecomposition, guard: int) -> None:
    count = decomp.tuple_count()
    if count > guard:
        raise ValueError(
            f"enumeration over {count} tuples exceeds the guard of {guard}"
        )


def exact_cancellation_value(decomp: LayeredDecomposition) -> float:
    """The exact tuple sum ``Gamma * sum_a sigma_a p_a Tr[O_a(rho) A]``,
    by full enumeration."""
    _check_enumeration_guard(decomp, ENUMERATION_GUARD)
    cache: Dict[tuple, float] = {}
    total = 0.0
    ranges = [range(rep.basis.size) for rep in decomp.layers]
    for idx in itertools.product(*ranges):
        sign, prob = _tuple_sign_prob(decomp, idx)
        if prob == 0.0:
            continue
        total += sign * prob * _tuple_raw_value(decomp, idx, cache)
    return decomp.Gamma * total


def _sample_rng(seed: int, i: int) -> np.random.Generator:
    """Substream for sample ``i``: independent of evaluation order, so the
    estimate is identical no matter how samples are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))


def _draw_index(rng: np.random.Generator, cum: np.ndarray) -> int:
    return int(np.searchsorted(cum, rng.random(), side="right"))


def pec_estimate(
    decomp: LayeredDecomposition, n_samples: int, seed: int = 0
) -> PecEstimate:
    """Monte Carlo estimator: sample one basis index per layer from the
    layer's probabilities and average ``Gamma * sigma * Tr[O(rho) A]``.
    Per-tuple expectations are evaluated exactly by density-matrix
    simulation, so the estimator is unbiased for the exact tuple sum."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cums = [np.cumsum(rep.probs) for rep in decomp.layers]
    cache: Dict[tuple, float] = {}
    values = np.empty(n_samples)
    for i in range(n_samples):
        rng = _sample_rng(seed, i)
        idx = tuple(_draw_index(rng, c) for c in cums)
        sign, _ = _tuple_sign_prob(decomp, idx)
        values[i] = decomp.Gamma * sign * _tuple_raw_value(decomp, idx, cache)
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return PecEstimate(estimate=estimate, stderr=stderr, n_samples=n_samples, seed=seed)


def sample_budget(gamma_total: float, delta: float) -> int:
    """Circuit budget ``ceil(Gamma^2 / delta^2)`` for target accuracy
    ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if gamma_total < 1:
        raise ValueError("overall negativity must be >= 1")
    return int(math.ceil(gamma_total ** 2 / delta ** 2))


def _compose_tuple_channel(decomp: LayeredDecomposition, idx: tuple) -> KrausChannel:
    chan = decomp.layers[0].basis.ops[idx[0]]
    for rep, i in zip(decomp.layers[1:], idx[1:]):
        chan = compose_channels(rep.basis.ops[i], chan)
    return chan


def two_shot_split(decomp: LayeredDecomposition) -> TwoShotSplit:
    """Group the tuple sum by global sign into two convex mixtures.

    The identity ``Gamma * (q_plus * S_plus - q_minus * S_minus) = S_target``
    is verified on the superoperators before returning.
    """
    _check_enumeration_guard(decomp, ENUMERATION_GUARD)
    ranges = [range(rep.basis.size) for rep in decomp.layers]
    classes = {1: ([], []), -1: ([], [])}
    for idx in itertools.product(*ranges):
        sign, prob = _tuple_sign_prob(decomp, idx)
        if prob == 0.0:
            continue
        chans, probs = classes[sign]
        chans.append(_compose_tuple_channel(decomp, idx))
        probs.append(prob)
    q = {s: float(sum(classes[s][1])) for s in (1, -1)}

    def mixture(s):
        chans, probs = classes[s]
        if not chans:
            return None
        return ConvexCombination(tuple(chans), tuple(p / q[s] for p in probs))

    pos, neg = mixture(1), mixture(-1)
    d = decomp.rho0.dim
    recon = np.zeros((d * d, d * d), dtype=complex)
    for s, mix in ((1, pos), (-1, neg)):
        if mix is None:
            continue
        acc = np.zeros_like(recon)
        for p, ch in zip(mix.probs, mix.channels):
            acc += p * channel_to_superoperator(ch).matrix
        recon += s * q[s] * acc
    recon *= decomp.Gamma
    target_super = np.eye(d * d, dtype=complex)
    for rep in decomp.layers:
        target_super = channel_to_superoperator(rep.target).matrix @ target_super
    residual = float(np.max(np.abs(recon - target_super)))
    if residual > 1e-8:
        raise ValueError(
            f"sign-split reconstruction residual {residual:.3e}; "
            "decomposition inputs are inconsistent"
        )
    return TwoShotSplit(
        pos_mixture=pos,
        neg_mixture=neg,
        q_plus=q[1],
        q_minus=q[-1],
        Gamma=decomp.Gamma,
        reconstruction_residual=residual,
    )


def _block_sign_circuits(
    decomp: LayeredDecomposition, absorbed: Sequence[int], n_sys: int
):
    """Per sign class: tuple lists, masses, and the steering circuit that
    realizes the class mixture with value-controlled channel items."""
    ranges = [range(decomp.layers[l].basis.size) for l in absorbed]
    members = {1: ([], []), -1: ([], [])}
    for idx in itertools.product(*ranges):
        sign = 1
        prob = 1.0
        for l, i in zip(absorbed, idx):
            sign *= decomp.layers[l].signs[i]
            prob *= decomp.layers[l].probs[i]
        if prob == 0.0:
            continue
        members[sign][0].append(idx)
        members[sign][1].append(prob)
    out = {}
    for s in (1, -1):
        tuples, probs = members[s]
        mass = float(sum(probs))
        if not tuples:
            out[s] = (0.0, None, 0)
            continue
        count = len(tuples)
        width = int(np.ceil(np.log2(count))) if count > 1 else 0
        layout = RegisterLayout(coeff_qubits=width, sys_qubits=n_sys)
        items = []
        if width:
            padded = [p / mass for p in probs] + [0.0] * (2 ** width - count)
            items.append(
                GateItem(
                    "unitary", layout.coeff, name="V", matrix=prep_unitary(padded)
                )
            )
        for value, idx in enumerate(tuples):
            for l, i in zip(absorbed, idx):
                op = decomp.layers[l].basis.ops[i]
                items.append(
                    GateItem(
                        "channel",
                        layout.system,
                        name=f"{decomp.layers[l].basis.labels[i]}@{l}",
                        channel=op,
                        controls=layout.coeff if width else (),
                        control_value=value if width else None,
                    )
                )
        out[s] = (mass, Circuit(layout, tuple(items)), width)
    return out


def hybrid_protocol(
    decomp: LayeredDecomposition,
    absorbed: Sequence[int],
    n_samples: int = 1,
    seed: int = 0,
    value_cache: Optional[Dict[tuple, float]] = None,
) -> HybridResult:
    """Absorb a contiguous block of layers into two deterministic mixture
    circuits and sample the remaining layers.

    The absorbed block's signed tuple sum is split by sign; each class
    becomes a convex mixture realized as a circuit whose noiseless
    coefficient register steers value-controlled channel applications. Per
    sample, the estimator value is::

        (prod_{l unabsorbed} gamma_l) * sigma_sampled
            * Gamma_block * (q_plus * <A>_plus - q_minus * <A>_minus)

    with the two expectations evaluated by density-matrix simulation of the
    class circuits sandwiched between the sampled unabsorbed operations.
    ``absorbed`` empty reduces exactly to :func:`pec_estimate`; absorbing
    every layer needs no sampling at all and returns the two-circuit value
    with zero variance.

    ``value_cache`` optionally shares sandwiched-circuit evaluations across
    repeated calls with the same ``decomp`` and ``absorbed`` block (e.g.
    multi-seed variance studies); callers own its consistency.
    """
    absorbed = tuple(sorted(int(a) for a in absorbed))
    n_layers = decomp.n_layers
    for a in absorbed:
        if not 0 <= a < n_layers:
            raise ValueError(f"absorbed layer {a} out of range")
    if absorbed and list(absorbed) != list(range(absorbed[0], absorbed[-1] + 1)):
        raise ValueError("absorbed block must be contiguous")
    unabsorbed = [l for l in range(n_layers) if l not in absorbed]
    residual_negativity = math.prod(decomp.layers[l].gamma for l in unabsorbed)

    if not absorbed:
        est = pec_estimate(decomp, n_samples, seed)
        return HybridResult(
            estimate=est.estimate,
            stderr=est.stderr,
            residual_negativity=residual_negativity,
            logical_qubits_used=0,
            circuits=(),
            n_samples=n_samples,
            seed=seed,
        )

    block_tuples = math.prod(decomp.layers[l].basis.size for l in absorbed)
    if block_tuples > ABSORBED_GUARD:
        raise ValueError(
            f"absorbed block enumerates {block_tuples} tuples, over the guard "
            f"{ABSORBED_GUARD}"
        )
    n_sys = len(decomp.rho0.dims)
    if decomp.rho0.dim != 2 ** n_sys:
        raise ValueError("hybrid protocol requires a qubit-register state")
    gamma_block = math.prod(decomp.layers[l].gamma for l in absorbed)
    classes = _block_sign_circuits(decomp, absorbed, n_sys)
    q_plus, circ_plus, w_plus = classes[1]
    q_minus, circ_minus, w_minus = classes[-1]
    logical_qubits = max(w_plus, w_minus)
    circuits = tuple(c for c in (circ_plus, circ_minus) if c is not None)

    pre_layers = [l for l in unabsorbed if l < absorbed[0]]
    post_layers = [l for l in unabsorbed if l > absorbed[-1]]

    def block_value(draw: tuple) -> float:
        rho = decomp.rho0
        draws = dict(zip(unabsorbed, draw))
        for l in pre_layers:
            rho = apply_channel(decomp.layers[l].basis.ops[draws[l]], rho)
        vals = {}
        for s, circ, mass in ((1, circ_plus, q_plus), (-1, circ_minus, q_minus)):
            if circ is None or mass == 0.0:
                vals[s] = 0.0
                continue
            out = run_on_system(circ, rho)
            for l in post_layers:
                out = apply_channel(decomp.layers[l].basis.ops[draws[l]], out)
            vals[s] = expectation(out, decomp.observable)
        return gamma_block * (q_plus * vals[1] - q_minus * vals[-1])

    if not unabsorbed:
        estimate = block_value(())
        return HybridResult(
            estimate=estimate,
            stderr=0.0,
            residual_negativity=residual_negativity,
            logical_qubits_used=logical_qubits,
            circuits=circuits,
            n_samples=0,
            seed=seed,
        )

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cums = {l: np.cumsum(decomp.layers[l].probs) for l in unabsorbed}
    cache = value_cache if value_cache is not None else {}
    values = np.empty(n_samples)
    for i in range(n_samples):
        rng = _sample_rng(seed, i)
        draw = tuple(_draw_index(rng, cums[l]) for l in unabsorbed)
        sign = 1
        for l, idx in zip(unabsorbed, draw):
            sign *= decomp.layers[l].signs[idx]
        if draw not in cache:
            cache[draw] = block_value(draw)
        values[i] = residual_negativity * sign * cache[draw]
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return HybridResult(
        estimate=estimate,
        stderr=stderr,
        residual_negativity=residual_negativity,
        logical_qubits_used=logical_qubits,
        circuits=circuits,
        n_samples=n_samples,
        seed=seed,
    )

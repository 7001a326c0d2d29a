"""Channel constructors and transformations: Kraus maps, convex combinations,
unitary (Stinespring) dilations, standard noise channels, and controlled
extensions under a noiseless-control noise model.

A :class:`KrausChannel` may carry signed weights so that non-CP differences of
channels (e.g. a +1/-1 combination of projector maps) are representable; CPTP
validity is checked on demand via :func:`chanmix.qops.cptp_check`, never at
construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .qops import DensityMatrix, as_operator, cptp_check

__all__ = [
    "KrausChannel",
    "ConvexCombination",
    "DilatedUnitary",
    "identity_channel",
    "unitary_channel",
    "apply_channel",
    "compose_channels",
    "convex_combination",
    "stinespring_dilation",
    "depolarizing_channel",
    "amplitude_damping_channel",
    "controlled_extension",
    "multiplexed_channel",
    "channel_to_json",
    "channel_from_json",
    "PAULIS",
]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


@dataclass(frozen=True)
class KrausChannel:
    """A linear map ``rho -> sum_i w_i K_i rho K_i^dag``.

    ``weights`` default to all ones (the physical case). All Kraus operators
    must share one square dimension.
    """

    kraus: tuple = field(repr=False)
    label: str = ""
    weights: tuple = ()

    def __post_init__(self):
        ops = tuple(as_operator(k) for k in self.kraus)
        if not ops:
            raise ValueError("Kraus list must be nonempty")
        d = ops[0].shape[0]
        for k in ops:
            if k.shape[0] != d:
                raise ValueError("all Kraus operators must have equal dimension")
        weights = self.weights or tuple(1.0 for _ in ops)
        weights = tuple(float(w) for w in weights)
        if len(weights) != len(ops):
            raise ValueError("weights length must match Kraus list length")
        object.__setattr__(self, "kraus", ops)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    @property
    def n_kraus(self) -> int:
        return len(self.kraus)

    def is_unitary(self, tol: float = 1e-10) -> bool:
        """True when the map is a single unitary conjugation."""
        if len(self.kraus) != 1 or self.weights[0] != 1.0:
            return False
        k = self.kraus[0]
        return bool(np.max(np.abs(k.conj().T @ k - np.eye(self.dim))) <= tol)


@dataclass(frozen=True)
class ConvexCombination:
    """Channels with nonnegative probabilities summing to one.

    Zero-probability components are retained, not pruned, so register layouts
    derived from the component count stay stable.
    """

    channels: tuple
    probs: tuple

    def __post_init__(self):
        channels = tuple(self.channels)
        probs = tuple(float(p) for p in self.probs)
        if len(channels) != len(probs):
            raise ValueError("channels and probs must have equal length")
        if not channels:
            raise ValueError("combination must have at least one channel")
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {sum(probs)}, not 1")
        d = channels[0].dim
        for ch in channels:
            if ch.dim != d:
                raise ValueError("all channels must share one dimension")
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "probs", probs)

    @property
    def dim(self) -> int:
        return self.channels[0].dim

    @property
    def n_channels(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class DilatedUnitary:
    """Unitary on environment x system reproducing a channel after tracing
    out the environment.

    Basis ordering puts the environment first (most significant), so the
    first ``sys_dim`` columns are the Kraus operators stacked vertically:
    ``U[i * sys_dim + a, b] == K_i[a, b]``.
    """

    unitary: np.ndarray = field(repr=False)
    env_dim: int
    sys_dim: int

    def __post_init__(self):
        u = as_operator(self.unitary)
        if u.shape[0] != self.env_dim * self.sys_dim:
            raise ValueError("unitary dimension must equal env_dim * sys_dim")
        if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-10:
            raise ValueError("dilation is not unitary within 1e-10")
        object.__setattr__(self, "unitary", u)


def identity_channel(dim: int, label: str = "I") -> KrausChannel:
    return KrausChannel((np.eye(dim, dtype=complex),), label=label)


def unitary_channel(u: np.ndarray, label: str = "U") -> KrausChannel:
    return KrausChannel((as_operator(u),), label=label)


def apply_channel(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    """``sum_i w_i K_i rho K_i^dag`` with the input's register structure."""
    if channel.dim != rho.dim:
        raise ValueError(f"channel dim {channel.dim} != state dim {rho.dim}")
    out = np.zeros_like(rho.matrix)
    for w, k in zip(channel.weights, channel.kraus):
        out += w * (k @ rho.matrix @ k.conj().T)
    return DensityMatrix.unchecked(rho.dims, out)


def compose_channels(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """The map ``rho -> outer(inner(rho))``; Kraus set is all products."""
    if outer.dim != inner.dim:
        raise ValueError("composed channels must share one dimension")
    kraus = []
    weights = []
    for wo, ko in zip(outer.weights, outer.kraus):
        for wi, ki in zip(inner.weights, inner.kraus):
            kraus.append(ko @ ki)
            weights.append(wo * wi)
    label = f"{outer.label}*{inner.label}" if outer.label or inner.label else ""
    return KrausChannel(tuple(kraus), label=label, weights=tuple(weights))


def convex_combination(cc: ConvexCombination) -> KrausChannel:
    """Analytic mixture channel with Kraus set ``{sqrt(p_a) K_{j,a}}``.

    All components must be CPTP; the mixture is then CPTP by closure.
    """
    for ch in cc.channels:
        report = cptp_check(ch, tol=1e-9)
        if not (report.is_tp and report.is_cp):
            raise ValueError(
                f"component '{ch.label}' is not CPTP "
                f"(tp_residual={report.tp_residual:.2e}, "
                f"choi_min_eig={report.choi_min_eig:.2e})"
            )
    kraus = []
    for p, ch in zip(cc.probs, cc.channels):
        root = np.sqrt(p)
        for k in ch.kraus:
            kraus.append(root * k)
    return KrausChannel(tuple(kraus), label="mixture")


def _padded_kraus(channel: KrausChannel, count: Optional[int] = None):
    """Kraus list zero-padded to the next power of two (or to ``count``)."""
    m = len(channel.kraus)
    if count is None:
        count = 1 << max(0, (m - 1).bit_length())
    if count < m:
        raise ValueError("pad count smaller than Kraus count")
    d = channel.dim
    pad = [np.zeros((d, d), dtype=complex)] * (count - m)
    return list(channel.kraus) + pad


def stinespring_dilation(
    channel: KrausChannel, env_dim: Optional[int] = None
) -> DilatedUnitary:
    """Unitary dilation of a CPTP channel.

    The Kraus list is zero-padded to ``env_dim`` (default: the next power of
    two, so the environment is a whole number of qubits). The first ``d``
    columns of the returned unitary are the stacked Kraus isometry; the
    remaining columns are a deterministic Householder-QR orthonormal
    completion of that isometry.

    :raises ValueError: for non-CPTP input, where the completion is undefined.
    """
    report = cptp_check(channel, tol=1e-9)
    if not (report.is_tp and report.is_cp):
        raise ValueError(
            "stinespring_dilation requires a CPTP channel "
            f"(tp_residual={report.tp_residual:.2e}, "
            f"choi_min_eig={report.choi_min_eig:.2e})"
        )
    kraus = _padded_kraus(channel, env_dim)
    mprime = len(kraus)
    d = channel.dim
    isometry = np.vstack(kraus)  # (d * mprime, d), rows indexed (i, a)
    if mprime == 1:
        return DilatedUnitary(isometry, env_dim=1, sys_dim=d)
    # Columns of Q beyond the first d span the orthogonal complement of the
    # isometry's range, so [isometry | Q[:, d:]] is unitary.
    q, _ = np.linalg.qr(isometry, mode="complete")
    unitary = np.concatenate([isometry, q[:, d:]], axis=1)
    return DilatedUnitary(unitary, env_dim=mprime, sys_dim=d)


def depolarizing_channel(p: float, n_qubits: int = 1) -> KrausChannel:
    """``rho -> (1-p) rho + p/(4^n - 1) sum_{P != I} P rho P``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability {p} outside [0, 1]")
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    labels = ["I", "X", "Y", "Z"]
    kraus = []
    n_paulis = 4 ** n_qubits
    for combo in itertools.product(labels, repeat=n_qubits):
        mat = np.eye(1, dtype=complex)
        for name in combo:
            mat = np.kron(mat, PAULIS[name])
        if all(c == "I" for c in combo):
            kraus.insert(0, np.sqrt(1.0 - p) * mat)
        else:
            kraus.append(np.sqrt(p / (n_paulis - 1)) * mat)
    return KrausChannel(tuple(kraus), label=f"depolarizing({p})")


def amplitude_damping_channel(beta: float) -> KrausChannel:
    """Single-qubit amplitude damping with decay probability ``beta``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"damping parameter {beta} outside [0, 1]")
    k0 = np.array([[1, 0], [0, np.sqrt(1.0 - beta)]], dtype=complex)
    k1 = np.array([[0, np.sqrt(beta)], [0, 0]], dtype=complex)
    return KrausChannel((k0, k1), label=f"amp_damp({beta})")


def controlled_extension(
    channel: KrausChannel,
    control_dim: int,
    control_value: int,
    ideal_unitary: np.ndarray,
) -> KrausChannel:
    """Controlled version of a noisy operation under a noiseless control.

    ``channel`` is the noisy implementation of ``ideal_unitary`` on the
    system S. Only the ideal gate can be conditioned on the control register
    C; the trailing system noise ``channel o ideal^dag`` acts on S in every
    branch. The resulting Kraus operators are::

        K'_j = P_v (x) K_j  +  (I - P_v) (x) (K_j U^dag)

    so the selected branch sees the full noisy operation and every other
    branch sees only its noise.
    """
    if not 0 <= control_value < control_dim:
        raise ValueError(
            f"control value {control_value} outside register of dim {control_dim}"
        )
    u = as_operator(ideal_unitary)
    if u.shape[0] != channel.dim:
        raise ValueError("ideal unitary and channel dims differ")
    proj = np.zeros((control_dim, control_dim), dtype=complex)
    proj[control_value, control_value] = 1.0
    rest = np.eye(control_dim, dtype=complex) - proj
    udag = u.conj().T
    kraus = tuple(
        np.kron(proj, k) + np.kron(rest, k @ udag) for k in channel.kraus
    )
    return KrausChannel(
        kraus, label=f"ctrl[{control_value}]({channel.label})", weights=channel.weights
    )


def multiplexed_channel(
    branches: Sequence[Optional[KrausChannel]],
    sys_dim: int,
    label: str = "select",
) -> KrausChannel:
    """Branch-selective channel on control (x) system.

    Branch ``v`` of the control register experiences ``branches[v]``
    (``None`` means identity). Kraus operators are block-diagonal,
    ``K_j = sum_v P_v (x) K_{j, v}``, with every branch's Kraus list
    zero-padded to a common length; tracing out a control prepared in
    ``sum_v sqrt(q_v) |v>`` leaves ``sum_v q_v E_v(rho)`` on the system.
    """
    control_dim = len(branches)
    resolved = []
    for ch in branches:
        if ch is None:
            ch = identity_channel(sys_dim)
        if ch.dim != sys_dim:
            raise ValueError("branch channel dim differs from sys_dim")
        if any(w != 1.0 for w in ch.weights):
            raise ValueError("multiplexed branches must be unweighted Kraus maps")
        resolved.append(ch)
    width = max(len(ch.kraus) for ch in resolved)
    kraus = []
    for j in range(width):
        block = np.zeros((control_dim * sys_dim, control_dim * sys_dim), dtype=complex)
        for v, ch in enumerate(resolved):
            if j < len(ch.kraus):
                lo = v * sys_dim
                block[lo : lo + sys_dim, lo : lo + sys_dim] = ch.kraus[j]
        kraus.append(block)
    return KrausChannel(tuple(kraus), label=label)


def channel_to_json(channel: KrausChannel) -> dict:
    """Serialize to ``{label, dim, kraus: [[[re, im], ...], ...]}``.

    Weighted (signed) maps additionally carry a ``weights`` list.
    """
    payload = {
        "label": channel.label,
        "dim": channel.dim,
        "kraus": [
            [[[float(z.real), float(z.imag)] for z in row] for row in k]
            for k in channel.kraus
        ],
    }
    if any(w != 1.0 for w in channel.weights):
        payload["weights"] = list(channel.weights)
    return payload


def channel_from_json(payload: dict) -> KrausChannel:
    kraus = []
    for mat in payload["kraus"]:
        kraus.append(
            np.array([[complex(re, im) for re, im in row] for row in mat])
        )
    dim = int(payload["dim"])
    for k in kraus:
        if k.shape != (dim, dim):
            raise ValueError(f"kraus operator shape {k.shape} != declared dim {dim}")
    weights = tuple(payload.get("weights", ()))
    return KrausChannel(tuple(kraus), label=payload.get("label", ""), weights=weights)

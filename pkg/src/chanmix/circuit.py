"""Circuit IR, density-matrix simulator, builders for deterministic
convex-combination circuits and the quantum-forking comparator, a compiler to
{CNOT + arbitrary single-qubit gates}, and resource counting.

Register order inside a circuit is always ``[coefficient | environment |
work | system]`` with qubit 0 the most significant tensor factor. All
registers are qubits.

Simulator semantics per item kind:

- ``unitary``: conjugation by the (optionally value-controlled) unitary.
  A value-controlled unitary acts as ``U`` on the control subspace
  ``|v><v|`` and as the identity elsewhere, preserving control coherences.
- ``channel``: Kraus sum. A value-controlled channel transforms the
  ``|v><v|`` control block and leaves other diagonal blocks untouched;
  coherences with the selected block are dropped (the control is read out
  classically by the environment of the noisy operation).
- ``reset``: trace out the marked qubit and reinitialize it to ``|0>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cossin, schur

from .channels import (
    ConvexCombination,
    KrausChannel,
    channel_from_json,
    channel_to_json,
    stinespring_dilation,
)
from .qops import DensityMatrix, as_operator, cptp_check, partial_trace, tensor_product

__all__ = [
    "RegisterLayout",
    "GateItem",
    "Circuit",
    "ResourceCount",
    "CNOT_MATRIX",
    "SWAP_MATRIX",
    "prep_unitary",
    "build_ccc_circuit",
    "build_forking_circuit",
    "simulate_circuit",
    "run_on_system",
    "compile_to_basis",
    "composite_unitary",
    "count_resources",
    "circuit_to_json",
    "circuit_from_json",
]

MAX_QUBITS = 12

CNOT_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


@dataclass(frozen=True)
class RegisterLayout:
    """Widths of the circuit registers, in tensor order."""

    coeff_qubits: int = 0
    env_qubits: int = 0
    sys_qubits: int = 0
    work_qubits: int = 0

    def __post_init__(self):
        for name in ("coeff_qubits", "env_qubits", "sys_qubits", "work_qubits"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.total > MAX_QUBITS:
            raise ValueError(
                f"layout needs {self.total} qubits, exceeding the cap {MAX_QUBITS}"
            )

    @property
    def total(self) -> int:
        return self.coeff_qubits + self.env_qubits + self.work_qubits + self.sys_qubits

    @property
    def coeff(self) -> tuple:
        return tuple(range(self.coeff_qubits))

    @property
    def env(self) -> tuple:
        start = self.coeff_qubits
        return tuple(range(start, start + self.env_qubits))

    @property
    def work(self) -> tuple:
        start = self.coeff_qubits + self.env_qubits
        return tuple(range(start, start + self.work_qubits))

    @property
    def system(self) -> tuple:
        return tuple(range(self.total - self.sys_qubits, self.total))


@dataclass(frozen=True)
class GateItem:
    """One circuit instruction.

    ``matrix`` (for unitary items) acts on ``targets`` in the listed order;
    ``channel`` (for channel items) likewise. ``controls``/``control_value``
    condition the item on a computational state of the control qubits,
    ``controls[0]`` most significant.
    """

    kind: str
    targets: tuple
    name: str = ""
    matrix: Optional[np.ndarray] = field(default=None, repr=False)
    channel: Optional[KrausChannel] = None
    controls: tuple = ()
    control_value: Optional[int] = None

    def __post_init__(self):
        targets = tuple(int(q) for q in self.targets)
        controls = tuple(int(q) for q in self.controls)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "controls", controls)
        if self.kind not in ("unitary", "channel", "reset"):
            raise ValueError(f"unknown item kind {self.kind!r}")
        if len(set(targets)) != len(targets):
            raise ValueError("duplicate target qubits")
        if set(targets) & set(controls):
            raise ValueError("targets and controls must be disjoint")
        if controls and self.control_value is None:
            raise ValueError("controlled item needs a control value")
        if self.control_value is not None:
            if not controls:
                raise ValueError("control value given without control qubits")
            if not 0 <= self.control_value < 2 ** len(controls):
                raise ValueError("control value out of range for control register")
        dim = 2 ** len(targets)
        if self.kind == "unitary":
            mat = as_operator(self.matrix)
            if mat.shape[0] != dim:
                raise ValueError(
                    f"matrix dim {mat.shape[0]} != 2^{len(targets)} targets"
                )
            if np.max(np.abs(mat.conj().T @ mat - np.eye(dim))) > 1e-10:
                raise ValueError(f"item {self.name!r} matrix is not unitary")
            object.__setattr__(self, "matrix", mat)
        elif self.kind == "channel":
            if self.channel is None:
                raise ValueError("channel item needs a channel")
            if self.channel.dim != dim:
                raise ValueError("channel dim does not match targets")
        else:  # reset
            if len(targets) != 1:
                raise ValueError("reset acts on exactly one qubit")


@dataclass(frozen=True)
class Circuit:
    layout: RegisterLayout
    items: tuple

    def __post_init__(self):
        items = tuple(self.items)
        n = self.layout.total
        for item in items:
            for q in item.targets + item.controls:
                if not 0 <= q < n:
                    raise ValueError(f"qubit {q} outside layout of {n} qubits")
        object.__setattr__(self, "items", items)

    @property
    def n_qubits(self) -> int:
        return self.layout.total


@dataclass(frozen=True)
class ResourceCount:
    qubits: int
    two_qubit_gates: int
    depth: int


# ---------------------------------------------------------------------------
# state preparation unitaries
# ---------------------------------------------------------------------------


def _column_unitary(first_col: np.ndarray) -> np.ndarray:
    """Real-orthogonal (Householder) completion of a unit vector to a matrix
    whose first column is that vector. Deterministic."""
    v = np.asarray(first_col, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("first column must be a unit vector")
    dim = v.size
    e0 = np.zeros(dim)
    e0[0] = 1.0
    w = e0 - v
    norm2 = float(w @ w)
    if norm2 < 1e-28:
        return np.eye(dim, dtype=complex)
    h = np.eye(dim) - 2.0 * np.outer(w, w) / norm2
    return h.astype(complex)


def prep_unitary(probs: Sequence[float]) -> np.ndarray:
    """Unitary whose first column is ``(sqrt(p_0), ..., sqrt(p_{N-1}), 0...)``
    on ``2**ceil(log2(N))`` dimensions, Householder-completed."""
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a nonempty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("probs must be nonnegative and sum to 1")
    n_qubits = max(1, int(np.ceil(np.log2(p.size)))) if p.size > 1 else 0
    dim = 2 ** n_qubits if p.size > 1 else 1
    col = np.zeros(dim)
    col[: p.size] = np.sqrt(p)
    return _column_unitary(col)


# ---------------------------------------------------------------------------
# circuit builders
# ---------------------------------------------------------------------------


def _padded_pow2(m: int) -> int:
    return 1 << max(0, (m - 1).bit_length())


def _check_components(cc: ConvexCombination, n_sys: int) -> None:
    if cc.dim != 2 ** n_sys:
        raise ValueError(
            f"channels act on dim {cc.dim}, expected 2^{n_sys} system qubits"
        )
    for ch in cc.channels:
        report = cptp_check(ch, tol=1e-9)
        if not (report.is_tp and report.is_cp):
            raise ValueError(f"component '{ch.label}' is not CPTP")


def build_ccc_circuit(cc: ConvexCombination, n_sys: int) -> Circuit:
    """Deterministic circuit implementing ``rho -> sum_a p_a E_a(rho)``.

    A coefficient register of ``ceil(log2 N)`` qubits is prepared in
    ``sum_a sqrt(p_a)|a>``; each channel's unitary dilation is applied to the
    shared environment+system registers, value-controlled on the coefficient
    register. Tracing out coefficient and environment leaves the mixture on
    the system with probability one (no measurement or post-selection items
    exist in this IR).
    """
    _check_components(cc, n_sys)
    n = cc.n_channels
    coeff_q = int(np.ceil(np.log2(n))) if n > 1 else 0
    mprime = max(_padded_pow2(ch.n_kraus) for ch in cc.channels)
    env_q = int(np.log2(mprime))
    layout = RegisterLayout(coeff_qubits=coeff_q, env_qubits=env_q, sys_qubits=n_sys)
    items = []
    if coeff_q:
        padded = list(cc.probs) + [0.0] * (2 ** coeff_q - n)
        items.append(
            GateItem("unitary", layout.coeff, name="V", matrix=prep_unitary(padded))
        )
    dil_targets = layout.env + layout.system
    for alpha, ch in enumerate(cc.channels):
        dil = stinespring_dilation(ch, env_dim=mprime)
        items.append(
            GateItem(
                "unitary",
                dil_targets,
                name=f"U[{ch.label or alpha}]",
                matrix=dil.unitary,
                controls=layout.coeff if coeff_q else (),
                control_value=alpha if coeff_q else None,
            )
        )
    return Circuit(layout, tuple(items))


def _swap_matrix(n_sys: int) -> np.ndarray:
    """SWAP between two n-qubit registers (targets: first register then
    second register)."""
    dim = 4 ** n_sys
    mat = np.zeros((dim, dim), dtype=complex)
    half = 2 ** n_sys
    for a in range(half):
        for b in range(half):
            mat[b * half + a, a * half + b] = 1.0
    return mat


def build_forking_circuit(
    cc: ConvexCombination, n_sys: int, coeff_encoding: str = "binary"
) -> Circuit:
    """Comparator circuit realizing the same mixture by quantum forking.

    One work register per channel (each the size of the system); a network of
    coefficient-controlled SWAPs moves the system into work register ``a``
    on branch ``a``, each channel's dilation is applied unconditionally to
    its own work register, and the SWAP network is uncomputed.

    ``coeff_encoding``:

    - ``"binary"``: ``ceil(log2 N)`` coefficient qubits, one shared dilation
      environment (minimal layout; 7 qubits for the three-channel Rabi set).
    - ``"one_hot"``: one coefficient qubit per channel, so every controlled
      SWAP is a plain Fredkin gate (8 qubits for the Rabi set).

    With more than one dilating channel the shared environment register is
    reset between dilations; such circuits simulate fine but are rejected by
    the unitary-only compiler.
    """
    if coeff_encoding not in ("binary", "one_hot"):
        raise ValueError(f"unknown coeff_encoding {coeff_encoding!r}")
    _check_components(cc, n_sys)
    n = cc.n_channels
    if n == 1:
        return build_ccc_circuit(cc, n_sys)
    env_q = max(int(np.log2(_padded_pow2(ch.n_kraus))) for ch in cc.channels)
    coeff_q = n if coeff_encoding == "one_hot" else int(np.ceil(np.log2(n)))
    layout = RegisterLayout(
        coeff_qubits=coeff_q,
        env_qubits=env_q,
        work_qubits=n * n_sys,
        sys_qubits=n_sys,
    )
    items = []
    if coeff_encoding == "binary":
        padded = list(cc.probs) + [0.0] * (2 ** coeff_q - n)
        vmat = prep_unitary(padded)
    else:
        col = np.zeros(2 ** coeff_q)
        for alpha, p in enumerate(cc.probs):
            col[1 << (coeff_q - 1 - alpha)] = np.sqrt(p)
        vmat = _column_unitary(col)
    items.append(GateItem("unitary", layout.coeff, name="V", matrix=vmat))

    def work_reg(alpha):
        start = layout.work[0] + alpha * n_sys
        return tuple(range(start, start + n_sys))

    def cswap(alpha):
        if coeff_encoding == "binary":
            controls, value = layout.coeff, alpha
        else:
            controls, value = (layout.coeff[alpha],), 1
        return GateItem(
            "unitary",
            work_reg(alpha) + layout.system,
            name=f"SWAP[{alpha}]",
            matrix=_swap_matrix(n_sys),
            controls=controls,
            control_value=value,
        )

    for alpha in range(n):
        items.append(cswap(alpha))
    env_used = False
    for alpha, ch in enumerate(cc.channels):
        mprime = _padded_pow2(ch.n_kraus)
        if mprime == 1:
            items.append(
                GateItem(
                    "unitary",
                    work_reg(alpha),
                    name=f"U[{ch.label or alpha}]",
                    matrix=ch.kraus[0],
                )
            )
            continue
        if env_used:
            for q in layout.env:
                items.append(GateItem("reset", (q,), name="reset"))
        ch_env = int(np.log2(mprime))
        dil = stinespring_dilation(ch, env_dim=mprime)
        env_slice = layout.env[env_q - ch_env :]
        items.append(
            GateItem(
                "unitary",
                env_slice + work_reg(alpha),
                name=f"U[{ch.label or alpha}]",
                matrix=dil.unitary,
            )
        )
        env_used = True
    for alpha in reversed(range(n)):
        items.append(cswap(alpha))
    return Circuit(layout, tuple(items))


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


def _embed(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Expand ``op`` acting on ``qubits`` (in listed order) to the full
    ``n``-qubit space."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(op, np.eye(2 ** (n - k), dtype=complex))
    # full acts on qubit order (qubits..., rest...); permute to 0..n-1
    perm = list(qubits) + rest
    inv = np.argsort(perm)
    tensor = full.reshape((2,) * (2 * n))
    tensor = tensor.transpose(tuple(inv) + tuple(inv + n))
    return tensor.reshape(2 ** n, 2 ** n)


def _controlled_matrix(item: GateItem) -> Tuple[np.ndarray, tuple]:
    """Full matrix of an optionally controlled unitary, on its support
    qubits (controls first), together with that support."""
    if not item.controls:
        return item.matrix, item.targets
    cdim = 2 ** len(item.controls)
    proj = np.zeros((cdim, cdim), dtype=complex)
    proj[item.control_value, item.control_value] = 1.0
    rest = np.eye(cdim, dtype=complex) - proj
    tdim = item.matrix.shape[0]
    mat = np.kron(proj, item.matrix) + np.kron(rest, np.eye(tdim, dtype=complex))
    return mat, item.controls + item.targets


def _apply_kraus(rho: np.ndarray, kraus_full: List[np.ndarray], weights) -> np.ndarray:
    out = np.zeros_like(rho)
    for w, k in zip(weights, kraus_full):
        out += w * (k @ rho @ k.conj().T)
    return out


def _permute_qubits(mat: np.ndarray, perm: Sequence[int], n: int) -> np.ndarray:
    tensor = mat.reshape((2,) * (2 * n))
    axes = tuple(perm) + tuple(p + n for p in perm)
    return tensor.transpose(axes).reshape(2 ** n, 2 ** n)


def _apply_controlled_channel(rho: np.ndarray, item: GateItem, n: int) -> np.ndarray:
    """Fast block path: transform the |v><v| control block, drop its
    coherences with other blocks, leave everything else untouched."""
    controls = list(item.controls)
    others = [q for q in range(n) if q not in controls]
    perm = controls + others
    inv = list(np.argsort(perm))
    work = _permute_qubits(rho, perm, n)
    cdim = 2 ** len(controls)
    rdim = 2 ** len(others)
    blocks = work.reshape(cdim, rdim, cdim, rdim)
    v = item.control_value
    # channel acting on the target qubits inside the `others` register
    pos = [others.index(t) for t in item.targets]
    kraus_sub = [_embed(k, pos, len(others)) for k in item.channel.kraus]
    out = blocks.copy()
    out[v, :, :, :] = 0.0
    out[:, :, v, :] = 0.0
    out[v, :, v, :] = _apply_kraus(
        blocks[v, :, v, :], kraus_sub, item.channel.weights
    )
    out = out.reshape(2 ** n, 2 ** n)
    return _permute_qubits(out, inv, n)


_RESET_KRAUS = (
    np.array([[1, 0], [0, 0]], dtype=complex),
    np.array([[0, 1], [0, 0]], dtype=complex),
)


def simulate_circuit(circuit: Circuit, rho_in: DensityMatrix) -> DensityMatrix:
    """Sequentially apply the circuit items to a full-register state."""
    n = circuit.n_qubits
    if rho_in.dims != (2,) * n:
        raise ValueError(
            f"input dims {rho_in.dims} do not match the {n}-qubit layout"
        )
    rho = rho_in.matrix
    for item in circuit.items:
        if item.kind == "unitary":
            mat, support = _controlled_matrix(item)
            full = _embed(mat, support, n)
            rho = full @ rho @ full.conj().T
        elif item.kind == "channel":
            if item.controls:
                rho = _apply_controlled_channel(rho, item, n)
            else:
                kraus_full = [_embed(k, item.targets, n) for k in item.channel.kraus]
                rho = _apply_kraus(rho, kraus_full, item.channel.weights)
        else:  # reset
            kraus_full = [_embed(k, item.targets, n) for k in _RESET_KRAUS]
            rho = _apply_kraus(rho, kraus_full, (1.0, 1.0))
    return DensityMatrix.unchecked((2,) * n, rho)


def run_on_system(circuit: Circuit, rho_sys: DensityMatrix) -> DensityMatrix:
    """Run with all non-system registers initialized to |0> and trace them
    out afterwards, returning the system marginal."""
    layout = circuit.layout
    n_anc = layout.total - layout.sys_qubits
    if rho_sys.dims != (2,) * layout.sys_qubits:
        raise ValueError("system state does not match the layout's system register")
    if n_anc:
        anc = DensityMatrix.ground((2,) * n_anc)
        full_in = tensor_product(anc, rho_sys)
    else:
        full_in = rho_sys
    full_out = simulate_circuit(circuit, full_in)
    return partial_trace(full_out, layout.system)


# ---------------------------------------------------------------------------
# compiler: {CNOT + arbitrary single-qubit gates}
# ---------------------------------------------------------------------------


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _rot(axis: str, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    if axis == "y":
        return np.array([[c, -s], [s, c]], dtype=complex)
    return np.array(
        [[np.exp(-1j * theta / 2.0), 0], [0, np.exp(1j * theta / 2.0)]], dtype=complex
    )


def _mux_rotation_items(
    axis: str, target: int, controls: Sequence[int], thetas: Sequence[float]
) -> List[GateItem]:
    """Uniformly controlled rotation via the Gray-code construction:
    ``2**k`` rotations interleaved with ``2**k`` CNOTs."""
    k = len(controls)
    if k == 0:
        return [
            GateItem(
                "unitary", (target,), name=f"R{axis}", matrix=_rot(axis, thetas[0])
            )
        ]
    size = 2 ** k
    mt = np.empty((size, size))
    for i in range(size):
        gi = _gray(i)
        for m in range(size):
            mt[i, m] = (-1) ** bin(gi & m).count("1")
    phis = (mt @ np.asarray(thetas, dtype=float)) / size
    items = []
    for i in range(size):
        items.append(
            GateItem("unitary", (target,), name=f"R{axis}", matrix=_rot(axis, phis[i]))
        )
        diff = _gray(i) ^ _gray((i + 1) % size)
        bit = diff.bit_length() - 1
        ctrl = controls[k - 1 - bit]
        items.append(
            GateItem("unitary", (ctrl, target), name="CNOT", matrix=CNOT_MATRIX)
        )
    return items


def _compile_unitary(u: np.ndarray, qubits: Sequence[int], out: List[GateItem]) -> None:
    """Recursive cosine-sine (Shannon-style) decomposition."""
    k = len(qubits)
    if k == 1:
        out.append(GateItem("unitary", (qubits[0],), name="U1", matrix=u))
        return
    dim = u.shape[0]
    if np.allclose(u, np.eye(dim), atol=1e-14):
        return
    half = dim // 2
    left, cs, right = cossin(u, p=half, q=half)
    _compile_mux(
        np.array([right[:half, :half], right[half:, half:]]), qubits[:1], qubits[1:], out
    )
    thetas = [
        2.0 * np.arctan2(float(cs[half + i, i].real), float(cs[i, i].real))
        for i in range(half)
    ]
    out.extend(_mux_rotation_items("y", qubits[0], qubits[1:], thetas))
    _compile_mux(
        np.array([left[:half, :half], left[half:, half:]]), qubits[:1], qubits[1:], out
    )


def _compile_mux(
    branches: np.ndarray,
    selects: Sequence[int],
    targets: Sequence[int],
    out: List[GateItem],
) -> None:
    """Lower a select-register multiplexor ``sum_v |v><v| (x) U_v``.

    Each level demultiplexes the leading select qubit into two half-size
    multiplexors and one multiplexed Rz, recursing until only target qubits
    remain.
    """
    if len(selects) == 0:
        _compile_unitary(branches[0], list(targets), out)
        return
    half = len(branches) // 2
    upper, lower = branches[:half], branches[half:]
    if all(np.allclose(a, b, atol=1e-13) for a, b in zip(upper, lower)):
        _compile_mux(upper, selects[1:], targets, out)
        return
    vs, ws, angles = [], [], []
    for a, b in zip(upper, lower):
        # a = V D W and b = V D^dag W with D from the spectrum of a b^dag
        t, z = schur(a @ b.conj().T, output="complex")
        d = np.exp(1j * np.angle(np.diag(t)) / 2.0)
        vs.append(z)
        ws.append(np.diag(d) @ z.conj().T @ b)
        angles.extend(-2.0 * np.angle(d))
    _compile_mux(np.array(ws), selects[1:], targets, out)
    out.extend(
        _mux_rotation_items(
            "z", selects[0], list(selects[1:]) + list(targets), angles
        )
    )
    _compile_mux(np.array(vs), selects[1:], targets, out)


def _as_cnot(mat: np.ndarray, support: tuple) -> Optional[GateItem]:
    if len(support) != 2:
        return None
    if np.allclose(mat, CNOT_MATRIX, atol=1e-12):
        return GateItem("unitary", support, name="CNOT", matrix=CNOT_MATRIX)
    flipped = _embed(CNOT_MATRIX, [1, 0], 2)
    if np.allclose(mat, flipped, atol=1e-12):
        return GateItem(
            "unitary", (support[1], support[0]), name="CNOT", matrix=CNOT_MATRIX
        )
    return None


def compile_to_basis(circuit: Circuit) -> Circuit:
    """Compile every item to CNOTs and arbitrary single-qubit gates.

    Consecutive value-controlled unitaries sharing the same control and
    target registers are lowered together as one multiplexor (this is the
    natural reading of a select register steering a sequence of controlled
    operations). The composite unitary of the output equals the input's
    within 1e-8 up to global phase.

    :raises ValueError: on channel or reset items; dilate channels first.
    """
    for item in circuit.items:
        if item.kind != "unitary":
            raise ValueError(
                f"cannot compile {item.kind!r} item {item.name!r}; "
                "only unitary circuits are compilable"
            )
    out: List[GateItem] = []
    idx = 0
    items = circuit.items
    while idx < len(items):
        item = items[idx]
        if not item.controls:
            mat, support = item.matrix, item.targets
            cnot = _as_cnot(mat, support)
            if cnot is not None:
                out.append(cnot)
            else:
                _compile_unitary(mat, list(support), out)
            idx += 1
            continue
        # gather a run of controlled items on identical registers
        run = [item]
        while (
            idx + len(run) < len(items)
            and items[idx + len(run)].kind == "unitary"
            and items[idx + len(run)].controls == item.controls
            and items[idx + len(run)].targets == item.targets
        ):
            run.append(items[idx + len(run)])
        idx += len(run)
        tdim = 2 ** len(item.targets)
        n_branches = 2 ** len(item.controls)
        branches = np.array([np.eye(tdim, dtype=complex)] * n_branches)
        for gate in run:
            branches[gate.control_value] = gate.matrix @ branches[gate.control_value]
        if len(run) == 1:
            mat, support = _controlled_matrix(item)
            cnot = _as_cnot(mat, support)
            if cnot is not None:
                out.append(cnot)
                continue
        _compile_mux(branches, list(item.controls), list(item.targets), out)
    return Circuit(circuit.layout, tuple(out))


def composite_unitary(circuit: Circuit) -> np.ndarray:
    """Full-space product of all (unitary) items, for verification."""
    n = circuit.n_qubits
    total = np.eye(2 ** n, dtype=complex)
    for item in circuit.items:
        if item.kind != "unitary":
            raise ValueError("composite_unitary needs a unitary-only circuit")
        mat, support = _controlled_matrix(item)
        total = _embed(mat, support, n) @ total
    return total


def count_resources(circuit: Circuit) -> ResourceCount:
    """Qubit, CNOT, and layered-depth counts of a compiled circuit.

    Depth layers greedily left to right; items on disjoint qubits share a
    layer. Rejects circuits containing anything besides single-qubit gates
    and CNOTs.
    """
    two_qubit = 0
    busy: Dict[int, int] = {}
    depth = 0
    for item in circuit.items:
        if item.kind != "unitary" or item.controls:
            raise ValueError("count_resources requires a compiled circuit")
        if len(item.targets) == 2 and item.name == "CNOT":
            two_qubit += 1
        elif len(item.targets) != 1:
            raise ValueError(
                f"item {item.name!r} on {len(item.targets)} qubits is not in "
                "the compiled basis"
            )
        layer = 1 + max((busy.get(q, 0) for q in item.targets), default=0)
        for q in item.targets:
            busy[q] = layer
        depth = max(depth, layer)
    return ResourceCount(
        qubits=circuit.layout.total, two_qubit_gates=two_qubit, depth=depth
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def circuit_to_json(circuit: Circuit) -> dict:
    items = []
    for item in circuit.items:
        entry = {
            "kind": item.kind,
            "name": item.name,
            "targets": list(item.targets),
            "controls": list(item.controls),
            "control_value": item.control_value,
        }
        if item.matrix is not None:
            entry["matrix"] = _matrix_to_json(item.matrix)
        if item.channel is not None:
            entry["channel"] = channel_to_json(item.channel)
        items.append(entry)
    layout = circuit.layout
    return {
        "layout": {
            "coeff_qubits": layout.coeff_qubits,
            "env_qubits": layout.env_qubits,
            "work_qubits": layout.work_qubits,
            "sys_qubits": layout.sys_qubits,
        },
        "items": items,
    }


def circuit_from_json(payload: dict) -> Circuit:
    layout = RegisterLayout(**payload["layout"])
    items = []
    for entry in payload["items"]:
        items.append(
            GateItem(
                kind=entry["kind"],
                targets=tuple(entry["targets"]),
                name=entry.get("name", ""),
                matrix=_matrix_from_json(entry["matrix"]) if "matrix" in entry else None,
                channel=channel_from_json(entry["channel"])
                if "channel" in entry
                else None,
                controls=tuple(entry.get("controls", ())),
                control_value=entry.get("control_value"),
            )
        )
    return Circuit(layout, tuple(items))

"""Operator and state algebra kernel: dense complex matrices, tensor products,
partial traces, expectation values, superoperator/Choi conversions, and CPTP
verification.

Conventions used throughout the package:

- Vectorization is COLUMN-STACKING: ``vec(A)`` stacks the columns of ``A``,
  so ``vec(A X B) = (B.T kron A) vec(X)``.
- Subsystem 0 is the most significant tensor factor: for dims ``(d0, d1)``
  the basis index is ``i0 * d1 + i1``.
- Everything is dense ``complex128``. The total Hilbert dimension is capped
  at 2**12; this library targets desk-scale verification, not production
  simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MAX_DIM",
    "HERM_TOL",
    "TRACE_TOL",
    "EIG_FLOOR",
    "DensityMatrix",
    "Superoperator",
    "CPTPReport",
    "as_operator",
    "is_hermitian",
    "vec",
    "unvec",
    "tensor_product",
    "partial_trace",
    "expectation",
    "channel_to_superoperator",
    "channel_to_choi",
    "superoperator_to_choi",
    "apply_superoperator",
    "cptp_check",
]

# Dense storage only; eigensolver noise at these sizes motivates the floors.
MAX_DIM = 2 ** 12
HERM_TOL = 1e-10
TRACE_TOL = 1e-10
EIG_FLOOR = -1e-9


def as_operator(entries) -> np.ndarray:
    """Coerce input to a square complex matrix.

    :param entries: anything ``np.asarray`` accepts.
    :return: the operator as a ``complex128`` ndarray.
    :raises ValueError: if the matrix is not square or exceeds the size cap.
    """
    op = np.asarray(entries, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"operator must be a square matrix, got shape {op.shape}")
    if op.shape[0] > MAX_DIM:
        raise ValueError(
            f"dimension {op.shape[0]} exceeds the dense-storage cap {MAX_DIM}"
        )
    return op


def is_hermitian(op: np.ndarray, tol: float = HERM_TOL) -> bool:
    return bool(np.max(np.abs(op - op.conj().T)) <= tol)


@dataclass(frozen=True)
class DensityMatrix:
    """A positive, unit-trace operator on a multi-register Hilbert space.

    ``dims`` lists the subsystem dimensions in tensor order (subsystem 0 most
    significant). Construction validates Hermiticity, unit trace, and the
    eigenvalue floor; use ``DensityMatrix.unchecked`` only for values already
    known valid.
    """

    dims: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        mat = as_operator(self.matrix)
        object.__setattr__(self, "matrix", mat)
        total = int(np.prod(dims)) if dims else 1
        if total != mat.shape[0]:
            raise ValueError(
                f"dims {dims} imply dimension {total}, matrix has {mat.shape[0]}"
            )
        if total > MAX_DIM:
            raise ValueError(f"total dimension {total} exceeds cap {MAX_DIM}")
        if not is_hermitian(mat, HERM_TOL):
            raise ValueError("density matrix is not Hermitian within 1e-10")
        tr = np.trace(mat)
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr} is not 1 within 1e-10")
        min_eig = float(np.linalg.eigvalsh(mat)[0])
        if min_eig < EIG_FLOOR:
            raise ValueError(
                f"density matrix minimum eigenvalue {min_eig} below {EIG_FLOOR}"
            )

    @classmethod
    def unchecked(cls, dims, matrix) -> "DensityMatrix":
        obj = object.__new__(cls)
        object.__setattr__(obj, "dims", tuple(int(d) for d in dims))
        object.__setattr__(obj, "matrix", np.asarray(matrix, dtype=complex))
        return obj

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_statevector(cls, psi, dims) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        psi = psi / np.linalg.norm(psi)
        return cls(tuple(dims), np.outer(psi, psi.conj()))

    @classmethod
    def ground(cls, dims) -> "DensityMatrix":
        """All-|0> state on the given register dims."""
        total = int(np.prod(dims))
        if total > MAX_DIM:
            raise ValueError(f"total dimension {total} exceeds cap {MAX_DIM}")
        mat = np.zeros((total, total), dtype=complex)
        mat[0, 0] = 1.0
        return cls.unchecked(dims, mat)


@dataclass(frozen=True)
class Superoperator:
    """A d**2 x d**2 matrix acting on column-stacked operators."""

    matrix: np.ndarray = field(repr=False)
    basis_convention: str = "column-stacking"

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        d2 = mat.shape[0]
        d = int(round(np.sqrt(d2)))
        if mat.ndim != 2 or mat.shape != (d2, d2) or d * d != d2:
            raise ValueError(f"superoperator must be d^2 x d^2, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension d the map acts on."""
        return int(round(np.sqrt(self.matrix.shape[0])))


@dataclass(frozen=True)
class CPTPReport:
    is_tp: bool
    is_cp: bool
    tp_residual: float
    choi_min_eig: float


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix, dtype=complex).T.reshape(-1)


def unvec(vector: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d).T


def tensor_product(a, b):
    """Kronecker product of two operators or two density matrices.

    Density matrices keep their subsystem structure (dims concatenate);
    plain operators return a plain ndarray. Mixing the two kinds is
    rejected: the product of a state with a non-state is not a state.
    """
    a_is_dm = isinstance(a, DensityMatrix)
    b_is_dm = isinstance(b, DensityMatrix)
    if a_is_dm != b_is_dm:
        raise TypeError("tensor_product requires two operators or two density matrices")
    if a_is_dm:
        if a.dim * b.dim > MAX_DIM:
            raise ValueError(
                f"product dimension {a.dim * b.dim} exceeds cap {MAX_DIM}"
            )
        return DensityMatrix(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    a, b = as_operator(a), as_operator(b)
    if a.shape[0] * b.shape[0] > MAX_DIM:
        raise ValueError(
            f"product dimension {a.shape[0] * b.shape[0]} exceeds cap {MAX_DIM}"
        )
    return np.kron(a, b)


def _keep_to_trace_axes(dims: Sequence[int], keep: Iterable[int]):
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep:
        raise ValueError("partial_trace requires a nonempty keep set")
    for k in keep:
        if k < 0 or k >= n:
            raise ValueError(f"keep index {k} out of range for {n} subsystems")
    return keep, [i for i in range(n) if i not in keep]


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the kept subsystems.

    :param rho: state on subsystems ``rho.dims``.
    :param keep: indices of subsystems to keep (order-insensitive; output
        subsystems stay in their original relative order).
    """
    dims = list(rho.dims)
    keep, trace_out = _keep_to_trace_axes(dims, keep)
    tensor = rho.matrix.reshape(dims + dims)
    n = len(dims)
    cur_dims = list(dims)
    for idx in sorted(trace_out, reverse=True):
        tensor = np.trace(tensor, axis1=idx, axis2=idx + len(cur_dims))
        cur_dims.pop(idx)
    kept_dims = [dims[k] for k in keep]
    d = int(np.prod(kept_dims))
    return DensityMatrix.unchecked(tuple(kept_dims), tensor.reshape(d, d))


def expectation(rho: DensityMatrix, observable: np.ndarray) -> float:
    """Tr[rho A] for a Hermitian observable A.

    :raises ValueError: if A is not Hermitian within 1e-10 or dims mismatch.
    """
    a = as_operator(observable)
    if a.shape[0] != rho.dim:
        raise ValueError(f"observable dim {a.shape[0]} != state dim {rho.dim}")
    if not is_hermitian(a, HERM_TOL):
        raise ValueError("observable is not Hermitian within 1e-10")
    val = complex(np.trace(rho.matrix @ a))
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag}")
    return float(val.real)


def channel_to_superoperator(channel) -> Superoperator:
    """Superoperator of a Kraus map under column-stacking:
    ``S = sum_i w_i conj(K_i) kron K_i``.
    """
    kraus = channel.kraus
    if not kraus:
        raise ValueError("channel has no Kraus operators")
    d = kraus[0].shape[0]
    mat = np.zeros((d * d, d * d), dtype=complex)
    for w, k in zip(channel.weights, kraus):
        mat += w * np.kron(k.conj(), k)
    return Superoperator(mat)


def channel_to_choi(channel) -> np.ndarray:
    """Choi matrix ``sum_i w_i vec(K_i) vec(K_i)^dag`` (column-stacking)."""
    kraus = channel.kraus
    d = kraus[0].shape[0]
    choi = np.zeros((d * d, d * d), dtype=complex)
    for w, k in zip(channel.weights, kraus):
        v = vec(k)
        choi += w * np.outer(v, v.conj())
    return choi


def superoperator_to_choi(superop: Superoperator) -> np.ndarray:
    """Reshuffle a superoperator into its Choi matrix (same convention as
    :func:`channel_to_choi`); positive semidefinite iff the map is CP."""
    d = superop.dim
    s4 = superop.matrix.reshape(d, d, d, d)
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


def apply_superoperator(superop: Superoperator, rho_matrix: np.ndarray) -> np.ndarray:
    return unvec(superop.matrix @ vec(rho_matrix))


def cptp_check(channel, tol: float = 1e-9) -> CPTPReport:
    """Check trace preservation and complete positivity of a Kraus map.

    ``is_tp`` holds iff ``||sum_i w_i K_i^dag K_i - I|| <= tol`` (max-abs
    norm); ``is_cp`` holds iff the Choi minimum eigenvalue is >= -tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kraus = channel.kraus
    d = kraus[0].shape[0]
    acc = np.zeros((d, d), dtype=complex)
    for w, k in zip(channel.weights, kraus):
        acc += w * (k.conj().T @ k)
    tp_residual = float(np.max(np.abs(acc - np.eye(d))))
    choi = channel_to_choi(channel)
    choi_min_eig = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0])
    return CPTPReport(
        is_tp=tp_residual <= tol,
        is_cp=choi_min_eig >= -tol,
        tp_residual=tp_residual,
        choi_min_eig=choi_min_eig,
    )

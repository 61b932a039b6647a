"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Dimensions in this
package never exceed 16, so nothing here tries to be clever about structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
COMPLETION_CUTOFF = 1e-8


@dataclass(frozen=True)
class Bipartition:
    """Split of a composite space into factors ``A`` (first) and ``B`` (second)."""

    dimA: int
    dimB: int

    def __post_init__(self):
        if self.dimA < 1 or self.dimB < 1:
            raise ValueError(f"factor dimensions must be >= 1, got {self.dimA}, {self.dimB}")

    @property
    def total(self) -> int:
        return self.dimA * self.dimB


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def allclose(a, b, atol: float) -> bool:
    """Entrywise equality with an explicit absolute tolerance."""
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= atol))


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return bool(np.linalg.norm(dagger(m) @ m - np.eye(m.shape[0]), 2) <= tol)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(m, part: Bipartition, side: str) -> np.ndarray:
    """Trace out factor ``side`` ("A" or "B") of ``m`` on ``A (x) B``."""
    m = as_matrix(m)
    if m.shape != (part.total, part.total):
        raise ValueError(f"matrix of shape {m.shape} does not fit bipartition {part.dimA}x{part.dimB}")
    t = m.reshape(part.dimA, part.dimB, part.dimA, part.dimB)
    if side == "A":
        return np.einsum("ijik->jk", t)
    if side == "B":
        return np.einsum("ijkj->ik", t)
    raise ValueError(f"side must be 'A' or 'B', got {side!r}")


def eig_hermitian(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a Hermitian matrix."""
    m = as_matrix(m)
    if not is_hermitian(m):
        raise ValueError("matrix is not Hermitian within tolerance")
    # symmetrize so LAPACK sees exactly Hermitian input
    return np.linalg.eigh(0.5 * (m + dagger(m)))


def matrix_exp_hermitian_generator(h, tau: float) -> np.ndarray:
    """U(tau) = exp(-i h tau) for Hermitian ``h``."""
    vals, vecs = eig_hermitian(h)
    return (vecs * np.exp(-1j * vals * tau)) @ dagger(vecs)


def trace_norm(m) -> float:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def complete_to_unitary(columns, total_dim: int, positions=None, tol: float = 1e-10) -> np.ndarray:
    """Extend orthonormal ``columns`` to a ``total_dim`` x ``total_dim`` unitary.

    The given columns are placed at ``positions`` (default: the first k slots).
    Remaining slots are filled, in index order, by canonical basis vectors run
    through modified Gram-Schmidt; a candidate whose residual norm drops below
    1e-8 is skipped.
    """
    cols = as_matrix(columns)
    if cols.shape[0] != total_dim:
        raise ValueError(f"columns have length {cols.shape[0]}, expected {total_dim}")
    k = cols.shape[1]
    if k > total_dim:
        raise ValueError("more columns than the space dimension")
    if np.linalg.norm(dagger(cols) @ cols - np.eye(k), 2) > tol:
        raise ValueError("input columns are not orthonormal")
    if positions is None:
        positions = list(range(k))
    positions = list(positions)
    if len(positions) != k or len(set(positions)) != k or any(not 0 <= p < total_dim for p in positions):
        raise ValueError("positions must be k distinct slots inside the matrix")

    basis = [cols[:, i] for i in range(k)]
    extra = []
    for e in range(total_dim):
        if len(basis) + len(extra) == total_dim:
            break
        v = np.zeros(total_dim, dtype=np.complex128)
        v[e] = 1.0
        for q in basis + extra:
            v = v - (np.vdot(q, v)) * q
        nrm = np.linalg.norm(v)
        if nrm < COMPLETION_CUTOFF:
            continue
        extra.append(v / nrm)
    if len(basis) + len(extra) != total_dim:
        raise ArithmeticError("failed to complete the basis")

    out = np.empty((total_dim, total_dim), dtype=np.complex128)
    free = [p for p in range(total_dim) if p not in set(positions)]
    for p, c in zip(positions, basis):
        out[:, p] = c
    for p, c in zip(free, extra):
        out[:, p] = c
    return out
